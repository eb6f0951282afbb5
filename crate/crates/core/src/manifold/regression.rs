use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Ordinary least squares `y ≈ slope * x + intercept`.
///
/// A constant `y` fits perfectly with zero slope (`r2 = 1`).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidConfig(
            "linear fit needs at least two points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateAbscissa);
    }
    if syy == 0.0 {
        return Ok(LinearFit {
            slope: 0.0,
            intercept: my,
            r2: 1.0,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - (slope * xi + intercept);
            r * r
        })
        .sum();
    Ok(LinearFit {
        slope,
        intercept,
        r2: 1.0 - ss_res / syy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CoefficientStatus {
    Free,
    Dependent {
        on: usize,
        slope: f64,
        intercept: f64,
        r2: f64,
    },
}

/// Which POD coefficients are affine functions of others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyModel {
    pub statuses: Vec<CoefficientStatus>,
}

impl DependencyModel {
    pub fn all_free(n: usize) -> Self {
        Self {
            statuses: vec![CoefficientStatus::Free; n],
        }
    }

    pub fn free_indices(&self) -> Vec<usize> {
        self.statuses
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, CoefficientStatus::Free))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn first_dependent(&self) -> Option<usize> {
        self.statuses
            .iter()
            .position(|s| matches!(s, CoefficientStatus::Dependent { .. }))
    }

    /// Full coefficient vector from the free ones (given in `free_indices` order).
    pub fn expand(&self, free_values: &[f64]) -> Result<Vec<f64>> {
        let free = self.free_indices();
        if free_values.len() != free.len() {
            return Err(Error::DimensionMismatch {
                expected: free.len(),
                found: free_values.len(),
            });
        }
        let mut alpha = vec![0.0; self.statuses.len()];
        for (&i, &v) in free.iter().zip(free_values) {
            alpha[i] = v;
        }
        for (j, s) in self.statuses.iter().enumerate() {
            if let CoefficientStatus::Dependent {
                on,
                slope,
                intercept,
                ..
            } = *s
            {
                alpha[j] = slope * alpha[on] + intercept;
            }
        }
        Ok(alpha)
    }

    pub fn validate(&self) -> Result<()> {
        for (j, s) in self.statuses.iter().enumerate() {
            if let CoefficientStatus::Dependent { on, .. } = *s {
                if on >= self.statuses.len()
                    || on == j
                    || !matches!(self.statuses[on], CoefficientStatus::Free)
                {
                    return Err(Error::InvalidConfig(format!(
                        "coefficient {j} depends on {on}, which is not a free coefficient"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Greedy detection of affine relations between coefficient columns of `alpha`.
///
/// Columns are visited in mode order. Column `j` becomes dependent on the
/// earlier free column with the highest `r2` (smallest index on ties) if that
/// `r2` reaches `r2_threshold`, otherwise it is free.
pub fn detect_dependencies(alpha: &DMatrix<f64>, r2_threshold: f64) -> Result<DependencyModel> {
    if alpha.nrows() < 3 {
        return Err(Error::InvalidConfig(format!(
            "dependency detection needs at least 3 samples, got {}",
            alpha.nrows()
        )));
    }
    if !(r2_threshold > 0.0 && r2_threshold <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "r2 threshold {r2_threshold} must lie in (0, 1]"
        )));
    }
    let columns: Vec<Vec<f64>> = alpha
        .column_iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    let mut statuses = Vec::with_capacity(columns.len());
    for j in 0..columns.len() {
        let mut best: Option<(usize, LinearFit)> = None;
        for i in 0..j {
            if !matches!(statuses[i], CoefficientStatus::Free) {
                continue;
            }
            let Ok(fit) = linear_fit(&columns[i], &columns[j]) else {
                continue;
            };
            if best.is_none_or(|(_, b)| fit.r2 > b.r2) {
                best = Some((i, fit));
            }
        }
        statuses.push(match best {
            Some((on, fit)) if fit.r2 >= r2_threshold => CoefficientStatus::Dependent {
                on,
                slope: fit.slope,
                intercept: fit.intercept,
                r2: fit.r2,
            },
            _ => CoefficientStatus::Free,
        });
    }
    Ok(DependencyModel { statuses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Normal equations solved by Cramer's rule, independent of the centered formulas.
    fn normal_equations(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let det = n * sxx - sx * sx;
        let slope = (n * sxy - sx * sy) / det;
        let intercept = (sxx * sy - sx * sxy) / det;
        let mean = sy / n;
        let tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let res: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - slope * a - intercept).powi(2))
            .sum();
        (slope, intercept, 1.0 - res / tot)
    }

    #[test]
    fn exact_line() {
        let f = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert_eq!((f.slope, f.intercept, f.r2), (2.0, 1.0, 1.0));
    }

    #[test]
    fn four_point_least_squares() {
        let (x, y) = ([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 2.0, 10.0]);
        let (slope, intercept, r2) = normal_equations(&x, &y);
        // frozen oracle values: slope 31/10, intercept -7/5, r2 = 1 - 14.7/62.75
        assert_abs_diff_eq!(slope, 3.1, epsilon = 1e-12);
        assert_abs_diff_eq!(intercept, -1.4, epsilon = 1e-12);
        assert_abs_diff_eq!(r2, 1.0 - 14.7 / 62.75, epsilon = 1e-12);
        let f = linear_fit(&x, &y).unwrap();
        assert_abs_diff_eq!(f.slope, 3.1, epsilon = 1e-12);
        assert_abs_diff_eq!(f.intercept, -1.4, epsilon = 1e-12);
        assert_abs_diff_eq!(f.r2, 0.765_737_051_792_828_7, epsilon = 1e-12);
    }

    #[test]
    fn constant_y_and_constant_x() {
        let f = linear_fit(&[0.0, 1.0, 5.0], &[2.5, 2.5, 2.5]).unwrap();
        assert_eq!((f.slope, f.intercept, f.r2), (0.0, 2.5, 1.0));
        assert!(matches!(
            linear_fit(&[1.0, 1.0], &[0.0, 2.0]),
            Err(Error::DegenerateAbscissa)
        ));
    }

    fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn detects_exact_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a1 = noise(&mut rng, 200);
        let a2: Vec<f64> = a1.iter().map(|v| 2.0 * v).collect();
        let a3 = noise(&mut rng, 200);
        let alpha = DMatrix::from_fn(200, 3, |i, j| [&a1, &a2, &a3][j][i]);
        let model = detect_dependencies(&alpha, 0.99).unwrap();
        assert_eq!(model.statuses[0], CoefficientStatus::Free);
        match model.statuses[1] {
            CoefficientStatus::Dependent {
                on,
                slope,
                intercept,
                r2,
            } => {
                assert_eq!(on, 0);
                assert_abs_diff_eq!(slope, 2.0, epsilon = 1e-9);
                assert_abs_diff_eq!(intercept, 0.0, epsilon = 1e-9);
                assert!(r2 >= 1.0 - 1e-12);
            }
            other => panic!("expected dependent, got {other:?}"),
        }
        assert_eq!(model.statuses[2], CoefficientStatus::Free);
        assert_eq!(model.free_indices(), vec![0, 2]);
        let full = model.expand(&[0.5, -0.25]).unwrap();
        assert_abs_diff_eq!(full[1], 1.0, epsilon = 1e-9);
        assert_eq!(full[2], -0.25);
    }

    #[test]
    fn independent_noise_stays_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let alpha = DMatrix::from_fn(300, 4, |_, _| rng.random_range(-1.0..1.0));
        // oracle: every pairwise r2 stays far below the threshold
        for i in 0..4 {
            for j in 0..i {
                let (_, _, r2) =
                    normal_equations(alpha.column(j).as_slice(), alpha.column(i).as_slice());
                assert!(r2 < 0.2);
            }
        }
        let model = detect_dependencies(&alpha, 0.99).unwrap();
        assert_eq!(model.free_indices(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn single_coefficient_is_free() {
        let alpha = DMatrix::from_column_slice(4, 1, &[0.1, 0.2, -0.3, 0.0]);
        assert_eq!(
            detect_dependencies(&alpha, 0.99).unwrap(),
            DependencyModel::all_free(1)
        );
    }

    #[test]
    fn too_few_samples_or_bad_threshold() {
        assert!(detect_dependencies(&DMatrix::zeros(2, 2), 0.9).is_err());
        assert!(detect_dependencies(&DMatrix::zeros(5, 2), 0.0).is_err());
    }

    #[test]
    fn validate_rejects_chains() {
        let m = DependencyModel {
            statuses: vec![
                CoefficientStatus::Free,
                CoefficientStatus::Dependent {
                    on: 0,
                    slope: 1.0,
                    intercept: 0.0,
                    r2: 1.0,
                },
                CoefficientStatus::Dependent {
                    on: 1,
                    slope: 1.0,
                    intercept: 0.0,
                    r2: 1.0,
                },
            ],
        };
        assert!(m.validate().is_err());
    }
}
