//! Deterministic synthetic stand-in for a high-fidelity flow solver.
//!
//! Two modes are provided. `FieldSynthetic` produces a smooth oscillating
//! per-vertex field whose area-weighted mean plays the role of an integral
//! output such as drag. `QuadraticCentroid` has a known minimizer: the
//! objective is the squared distance between the centroid of the vertices in
//! a region box and a target point.

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Point3, TriMesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StubConfig {
    FieldSynthetic {
        frequencies: [f64; 3],
        amplitude: f64,
    },
    QuadraticCentroid {
        target: [f64; 3],
        region_min: [f64; 3],
        region_max: [f64; 3],
    },
}

impl Default for StubConfig {
    fn default() -> Self {
        Self::FieldSynthetic {
            frequencies: [3.0, 2.0, 0.5],
            amplitude: 1.0,
        }
    }
}

impl StubConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::FieldSynthetic {
                frequencies,
                amplitude,
            } => {
                if !frequencies
                    .iter()
                    .chain(std::iter::once(amplitude))
                    .all(|v| v.is_finite())
                {
                    return Err(Error::InvalidConfig(
                        "stub frequencies and amplitude must be finite".into(),
                    ));
                }
            }
            Self::QuadraticCentroid {
                target,
                region_min,
                region_max,
            } => {
                if !target
                    .iter()
                    .chain(region_min)
                    .chain(region_max)
                    .all(|v| v.is_finite())
                    || (0..3).any(|a| region_min[a] > region_max[a])
                {
                    return Err(Error::InvalidConfig("stub region box is invalid".into()));
                }
            }
        }
        Ok(())
    }
}

/// One solver output: per-vertex field, scalar objective and the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSnapshot {
    pub field: DVector<f64>,
    pub objective: f64,
    pub params: Vec<f64>,
}

impl SolutionSnapshot {
    pub fn tagged(mut self, params: &[f64]) -> Self {
        self.params = params.to_vec();
        self
    }
}

pub fn evaluate(mesh: &TriMesh, cfg: &StubConfig) -> Result<SolutionSnapshot> {
    cfg.validate()?;
    let v = mesh.vertices();
    let (field, objective) = match *cfg {
        StubConfig::FieldSynthetic {
            frequencies: [kx, ky, kz],
            amplitude,
        } => {
            let field = DVector::from_iterator(
                v.len(),
                v.iter()
                    .map(|p| amplitude * (kx * p.x).sin() * (ky * p.y).cos() + kz * p.z * p.z),
            );
            let areas = mesh.facet_areas();
            let total: f64 = areas.iter().sum();
            let objective = if total > 0.0 {
                mesh.facets()
                    .iter()
                    .zip(&areas)
                    .map(|(f, a)| a * (field[f[0]] + field[f[1]] + field[f[2]]) / 3.0)
                    .sum::<f64>()
                    / total
            } else {
                field.mean()
            };
            (field, objective)
        }
        StubConfig::QuadraticCentroid {
            target,
            region_min,
            region_max,
        } => {
            let target = Point3::from(target);
            let field =
                DVector::from_iterator(v.len(), v.iter().map(|p| (p - target).norm_squared()));
            let inside =
                |p: &&Point3| (0..3).all(|a| p[a] >= region_min[a] && p[a] <= region_max[a]);
            let (sum, count) = v
                .iter()
                .filter(inside)
                .fold((Vector3::zeros(), 0usize), |(s, c), p| {
                    (s + p.coords, c + 1)
                });
            if count == 0 {
                return Err(Error::EmptyRegion);
            }
            let centroid = sum / count as f64;
            (field, (centroid - target.coords).norm_squared())
        }
    };
    Ok(SolutionSnapshot {
        field,
        objective,
        params: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffd::{morph, FfdConfig};
    use crate::mesh::{uv_sphere, TriMesh};

    fn mesh() -> TriMesh {
        uv_sphere(Point3::new(0.2, -0.1, 0.4), [1.0, 0.6, 0.5], 8, 12).unwrap()
    }

    fn translate(m: &TriMesh, t: Vector3<f64>) -> TriMesh {
        m.with_vertices(m.vertices().iter().map(|p| p + t).collect())
    }

    fn centroid_cfg(target: Point3) -> StubConfig {
        StubConfig::QuadraticCentroid {
            target: target.into(),
            region_min: [-10.0; 3],
            region_max: [10.0; 3],
        }
    }

    fn vertex_mean(m: &TriMesh) -> Point3 {
        let s: Vector3<f64> = m.vertices().iter().map(|p| p.coords).sum();
        Point3::from(s / m.vertex_count() as f64)
    }

    #[test]
    fn centroid_at_target_is_zero() {
        let m = mesh();
        let out = evaluate(&m, &centroid_cfg(vertex_mean(&m))).unwrap();
        assert!(out.objective < 1e-28);
        assert_eq!(out.field.len(), m.vertex_count());
    }

    #[test]
    fn translation_shifts_objective() {
        let m = mesh();
        let target = Point3::new(0.5, 0.5, 0.5);
        let t = Vector3::new(0.3, -0.2, 0.7);
        let moved = translate(&m, t);
        let c0 = vertex_mean(&m);
        let expect = (c0 + t - target).norm_squared();
        let got = evaluate(&moved, &centroid_cfg(target)).unwrap().objective;
        assert!((got - expect).abs() < 1e-13);
    }

    #[test]
    fn empty_region_errors() {
        let cfg = StubConfig::QuadraticCentroid {
            target: [0.0; 3],
            region_min: [50.0; 3],
            region_max: [60.0; 3],
        };
        assert!(matches!(evaluate(&mesh(), &cfg), Err(Error::EmptyRegion)));
    }

    #[test]
    fn zero_amplitude_gives_zero_output() {
        let cfg = StubConfig::FieldSynthetic {
            frequencies: [3.0, 1.0, 0.0],
            amplitude: 0.0,
        };
        let out = evaluate(&mesh(), &cfg).unwrap();
        assert!(out.field.iter().all(|&v| v == 0.0));
        assert_eq!(out.objective, 0.0);
    }

    #[test]
    fn area_weighting_ignores_tessellation_density() {
        let cfg = StubConfig::FieldSynthetic {
            frequencies: [0.0, 0.0, 1.0],
            amplitude: 0.0,
        };
        // field = z², its surface mean over a unit sphere is 1/3
        let coarse = evaluate(
            &uv_sphere(Point3::origin(), [1.0; 3], 40, 80).unwrap(),
            &cfg,
        )
        .unwrap();
        let fine = evaluate(
            &uv_sphere(Point3::origin(), [1.0; 3], 80, 160).unwrap(),
            &cfg,
        )
        .unwrap();
        assert!((coarse.objective - 1.0 / 3.0).abs() < 5e-3);
        assert!((fine.objective - 1.0 / 3.0).abs() < (coarse.objective - 1.0 / 3.0).abs());
    }

    #[test]
    fn deterministic() {
        let m = mesh();
        let cfg = StubConfig::default();
        assert_eq!(evaluate(&m, &cfg).unwrap(), evaluate(&m, &cfg).unwrap());
    }

    #[test]
    fn finite_difference_is_second_order() {
        let m = uv_sphere(Point3::new(0.5, 0.5, 0.5), [0.45; 3], 12, 16).unwrap();
        let ffd = FfdConfig::default_bulb(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        let cfg = StubConfig::default();
        let f = |t: f64| {
            let mut mu = [0.05, -0.1, 0.1, 0.0, 0.02];
            mu[0] += t;
            evaluate(&morph(&m, &ffd, &mu).unwrap(), &cfg)
                .unwrap()
                .objective
        };
        let central = |h: f64| (f(h) - f(-h)) / (2.0 * h);
        // Richardson reference from the two smallest steps
        let (h1, h2) = (5e-2, 5e-3);
        let reference = (4.0 * central(h2 / 2.0) - central(h2)) / 3.0;
        let e1 = (central(h1) - reference).abs();
        let e2 = (central(h2) - reference).abs();
        let ratio = e1 / e2;
        assert!(ratio > 50.0 && ratio < 200.0, "error ratio {ratio}");
    }
}
