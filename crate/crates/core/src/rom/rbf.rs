use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest condition estimate accepted for the interpolation system.
pub const MAX_CONDITION: f64 = 1e14;
const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(-(ε r)²)`
    Gaussian,
    /// `r² ln r` with an affine tail
    ThinPlate,
    /// `r`
    Linear,
}

impl Kernel {
    fn eval(self, r: f64, eps: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-(eps * r) * (eps * r)).exp(),
            Kernel::ThinPlate => {
                if r > 0.0 {
                    r * r * r.ln()
                } else {
                    0.0
                }
            }
            Kernel::Linear => r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub kernel: Kernel,
    /// Gaussian shape parameter; `None` uses one over the mean nearest-neighbour distance.
    pub shape: Option<f64>,
    /// Rescale every parameter to `[-1, 1]` over the node bounding box before measuring distances.
    pub normalize: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Gaussian,
            shape: None,
            normalize: true,
        }
    }
}

/// Radial basis function interpolant from `d` inputs to `q` outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpolator {
    pub kernel: Kernel,
    pub epsilon: f64,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
    /// Nodes in scaled coordinates, one row per node.
    pub nodes: Vec<Vec<f64>>,
    /// One row of `q` weights per node.
    pub weights: Vec<Vec<f64>>,
    /// Affine tail rows `[constant, x₁, .., x_d]`, each of length `q`; empty unless thin-plate.
    pub tail: Vec<Vec<f64>>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// First pair of rows closer than `1e-12` (Chebyshev, relative to the coordinate scale).
pub(crate) fn find_duplicate(rows: &[Vec<f64>]) -> Option<(usize, usize)> {
    let scale = rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * (1.0 + scale);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            if rows[i]
                .iter()
                .zip(&rows[j])
                .all(|(a, b)| (a - b).abs() <= tol)
            {
                return Some((i, j));
            }
        }
    }
    None
}

/// Fits an interpolant through `values` (one row per node) at `nodes`.
pub fn fit_interpolator(
    nodes: &DMatrix<f64>,
    values: &DMatrix<f64>,
    cfg: &KernelConfig,
) -> Result<Interpolator> {
    let (m, d) = nodes.shape();
    if m == 0 {
        return Err(Error::EmptyDatabase);
    }
    if values.nrows() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: values.nrows(),
        });
    }
    if !nodes.iter().chain(values.iter()).all(|v| v.is_finite()) {
        return Err(Error::InvalidConfig(
            "interpolation data must be finite".into(),
        ));
    }
    let raw: Vec<Vec<f64>> = nodes
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    if let Some((first, second)) = find_duplicate(&raw) {
        return Err(Error::DuplicateParams { first, second });
    }

    let (offset, scale): (Vec<f64>, Vec<f64>) = (0..d)
        .map(|j| {
            if !cfg.normalize {
                return (0.0, 1.0);
            }
            let col = nodes.column(j);
            let (lo, hi) = (col.min(), col.max());
            let half = 0.5 * (hi - lo);
            (0.5 * (hi + lo), if half > 0.0 { half } else { 1.0 })
        })
        .unzip();
    let scaled: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(j, v)| (v - offset[j]) / scale[j])
                .collect()
        })
        .collect();

    let epsilon = match (cfg.kernel, cfg.shape) {
        (_, Some(e)) if !(e > 0.0 && e.is_finite()) => {
            return Err(Error::InvalidConfig(format!(
                "shape parameter must be positive, got {e}"
            )));
        }
        (_, Some(e)) => e,
        (Kernel::Gaussian, None) if m > 1 => {
            let mean_nn = (0..m)
                .map(|i| {
                    (0..m)
                        .filter(|&j| j != i)
                        .map(|j| distance(&scaled[i], &scaled[j]))
                        .fold(f64::INFINITY, f64::min)
                })
                .sum::<f64>()
                / m as f64;
            1.0 / mean_nn
        }
        _ => 1.0,
    };

    let tail_len = if cfg.kernel == Kernel::ThinPlate {
        d + 1
    } else {
        0
    };
    let size = m + tail_len;
    let mut system = DMatrix::zeros(size, size);
    for i in 0..m {
        for j in 0..m {
            system[(i, j)] = cfg.kernel.eval(distance(&scaled[i], &scaled[j]), epsilon);
        }
        if tail_len > 0 {
            system[(i, m)] = 1.0;
            system[(m, i)] = 1.0;
            for k in 0..d {
                system[(i, m + 1 + k)] = scaled[i][k];
                system[(m + 1 + k, i)] = scaled[i][k];
            }
        }
    }
    let q = values.ncols();
    let mut rhs = DMatrix::zeros(size, q);
    rhs.rows_mut(0, m).copy_from(values);

    let eig = system.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let solution = system
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem { condition })?;
    let residual = (&system * &solution - &rhs).norm();
    if residual > RESIDUAL_TOL * rhs.norm() {
        return Err(Error::SingularSystem { condition });
    }

    let rows = |r: std::ops::Range<usize>| {
        r.map(|i| solution.row(i).iter().copied().collect())
            .collect()
    };
    Ok(Interpolator {
        kernel: cfg.kernel,
        epsilon,
        offset,
        scale,
        nodes: scaled,
        weights: rows(0..m),
        tail: rows(m..size),
    })
}

impl Interpolator {
    pub fn input_dim(&self) -> usize {
        self.offset.len()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes in the caller's original coordinates.
    pub fn raw_nodes(&self) -> Vec<Vec<f64>> {
        self.nodes
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(j, v)| v * self.scale[j] + self.offset[j])
                    .collect()
            })
            .collect()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let xs: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.offset[j]) / self.scale[j])
            .collect();
        let mut out = DVector::zeros(self.output_dim());
        for (node, w) in self.nodes.iter().zip(&self.weights) {
            let phi = self.kernel.eval(distance(&xs, node), self.epsilon);
            for (o, wi) in out.iter_mut().zip(w) {
                *o += phi * wi;
            }
        }
        for (k, t) in self.tail.iter().enumerate() {
            let basis = if k == 0 { 1.0 } else { xs[k - 1] };
            for (o, ti) in out.iter_mut().zip(t) {
                *o += basis * ti;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn raw(kernel: Kernel, shape: Option<f64>) -> KernelConfig {
        KernelConfig {
            kernel,
            shape,
            normalize: false,
        }
    }

    #[test]
    fn single_node_is_constant() {
        let it = fit_interpolator(
            &DMatrix::from_row_slice(1, 2, &[0.3, -0.2]),
            &DMatrix::from_row_slice(1, 1, &[4.0]),
            &raw(Kernel::Gaussian, None),
        )
        .unwrap();
        assert_eq!(it.weights[0][0], 4.0);
        assert_eq!(it.evaluate(&[0.3, -0.2]).unwrap()[0], 4.0);
    }

    #[test]
    fn two_node_gaussian_system() {
        let it = fit_interpolator(
            &DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            &DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            &raw(Kernel::Gaussian, Some(1.0)),
        )
        .unwrap();
        // [[1, c], [c, 1]] w = [0, 1] with c = e⁻¹: w = [-c, 1] / (1 - c²)
        let c = (-1.0f64).exp();
        assert_abs_diff_eq!(it.weights[0][0], -c / (1.0 - c * c), epsilon = 1e-14);
        assert_abs_diff_eq!(it.weights[1][0], 1.0 / (1.0 - c * c), epsilon = 1e-14);
    }

    #[test]
    fn linear_kernel_midpoint_is_mean() {
        let it = fit_interpolator(
            &DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            &DMatrix::from_row_slice(2, 3, &[1.0, 2.0, -4.0, 3.0, 0.0, 8.0]),
            &raw(Kernel::Linear, None),
        )
        .unwrap();
        let mid = it.evaluate(&[0.5]).unwrap();
        assert_abs_diff_eq!(mid[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mid[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mid[2], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn every_kernel_reproduces_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let nodes = DMatrix::from_fn(40, 2, |_, _| rng.random_range(-1.0..1.0));
        let values = DMatrix::from_fn(40, 3, |i, j| {
            (nodes[(i, 0)] * (j + 1) as f64).sin() + nodes[(i, 1)].powi(2) * 10.0
        });
        for kernel in [Kernel::Gaussian, Kernel::ThinPlate, Kernel::Linear] {
            for normalize in [true, false] {
                let cfg = KernelConfig {
                    kernel,
                    shape: None,
                    normalize,
                };
                let it = fit_interpolator(&nodes, &values, &cfg).unwrap();
                for i in 0..40 {
                    let got = it.evaluate(nodes.row(i).transpose().as_slice()).unwrap();
                    for j in 0..3 {
                        let v = values[(i, j)];
                        assert!(
                            (got[j] - v).abs() <= 1e-8 * (1.0 + v.abs()),
                            "{kernel:?} node {i}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn thin_plate_reproduces_affine_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nodes = DMatrix::from_fn(25, 2, |_, _| rng.random_range(0.0..2.0));
        let values = DMatrix::from_fn(25, 1, |i, _| {
            1.5 - 2.0 * nodes[(i, 0)] + 0.5 * nodes[(i, 1)]
        });
        let it = fit_interpolator(
            &nodes,
            &values,
            &KernelConfig {
                kernel: Kernel::ThinPlate,
                ..Default::default()
            },
        )
        .unwrap();
        let got = it.evaluate(&[0.7, 1.9]).unwrap()[0];
        assert_abs_diff_eq!(got, 1.5 - 1.4 + 0.95, epsilon = 1e-9);
    }

    #[test]
    fn flat_gaussian_limit_is_rejected() {
        let nodes = DMatrix::from_fn(12, 1, |i, _| i as f64);
        let values = DMatrix::from_fn(12, 1, |i, _| (i as f64).sqrt());
        let r = fit_interpolator(&nodes, &values, &raw(Kernel::Gaussian, Some(1e-4)));
        assert!(matches!(r, Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn duplicate_nodes_are_rejected() {
        let nodes = DMatrix::from_row_slice(3, 1, &[0.0, 0.5, 0.5]);
        let r = fit_interpolator(&nodes, &DMatrix::zeros(3, 1), &KernelConfig::default());
        assert!(matches!(
            r,
            Err(Error::DuplicateParams {
                first: 1,
                second: 2
            })
        ));
    }

    #[test]
    fn default_shape_uses_mean_nearest_neighbour() {
        let nodes = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        let it =
            fit_interpolator(&nodes, &DMatrix::zeros(3, 1), &raw(Kernel::Gaussian, None)).unwrap();
        // nearest neighbours 1, 1, 2
        assert_abs_diff_eq!(it.epsilon, 3.0 / 4.0, epsilon = 1e-15);
        assert_eq!(it.raw_nodes(), vec![vec![0.0], vec![1.0], vec![3.0]]);
    }
}
