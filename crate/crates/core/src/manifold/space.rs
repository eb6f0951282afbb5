use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::polygon::{fit_feasible_polygon, FeasiblePolygon, Point2};
use super::regression::{detect_dependencies, CoefficientStatus, DependencyModel};
use crate::error::{Error, Result};
use crate::mesh::{unflatten, SnapshotVector, TriMesh};
use crate::pod::PodBasis;

/// Tolerance (relative to the box width) applied to the free-coordinate box.
const BOX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReductionConfig {
    pub r2_threshold: f64,
    /// Outward simplification target for the feasible polygon; `None` keeps the hull.
    pub max_vertices: Option<usize>,
    /// Coefficient pair (0-based) bounded by the polygon; `None` picks the default pair.
    pub pair: Option<[usize; 2]>,
    /// Bound the regressed value of dependent coefficients rather than the raw training value.
    pub use_regressed: bool,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self {
            r2_threshold: 0.99,
            max_vertices: Some(4),
            pair: None,
            use_regressed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConstraint {
    pub pair: [usize; 2],
    pub polygon: FeasiblePolygon,
}

/// Everything about a reduced space except the geometry basis itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSpaceDoc {
    pub mode_count: usize,
    pub dependencies: DependencyModel,
    pub free: Vec<usize>,
    pub constraint: Option<PairConstraint>,
    pub use_regressed: bool,
    pub bounds: Vec<[f64; 2]>,
}

/// Free POD coefficients as design parameters, with their feasible region.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSpace {
    basis: PodBasis,
    doc: ReducedSpaceDoc,
}

fn default_pair(deps: &DependencyModel) -> Option<[usize; 2]> {
    let n = deps.statuses.len();
    let free = deps.free_indices();
    match deps.first_dependent() {
        Some(j) => free.iter().find(|&&k| k > j).map(|&k| [j, k]),
        None if n >= 3 => Some([1, 2]),
        None if n == 2 => Some([0, 1]),
        None => None,
    }
}

/// Detects dependencies, fits the feasible polygon and the free-coordinate box.
pub fn build_reduced_space(
    basis: PodBasis,
    alpha: &DMatrix<f64>,
    cfg: &ReductionConfig,
) -> Result<ReducedSpace> {
    let n = basis.rank();
    if n == 0 {
        return Err(Error::EmptyBasis);
    }
    if alpha.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: alpha.ncols(),
        });
    }
    let m = alpha.nrows();
    let dependencies = if m >= 3 {
        detect_dependencies(alpha, cfg.r2_threshold)?
    } else {
        log::warn!("only {m} training samples; skipping dependency detection");
        DependencyModel::all_free(n)
    };
    let free = dependencies.free_indices();
    let pair = match cfg.pair {
        Some(p) => {
            if p[0] >= n || p[1] >= n || p[0] == p[1] {
                return Err(Error::InvalidConfig(format!(
                    "constrained pair {p:?} invalid for {n} coefficients"
                )));
            }
            Some(p)
        }
        None if m < 3 => {
            log::warn!(
                "only {m} training samples; no feasible polygon, the box bounds alone apply"
            );
            None
        }
        None => default_pair(&dependencies),
    };
    let free_rows: Vec<Vec<f64>> = (0..m)
        .map(|i| free.iter().map(|&j| alpha[(i, j)]).collect())
        .collect();
    let mut bounds = vec![[f64::INFINITY, f64::NEG_INFINITY]; free.len()];
    for row in &free_rows {
        for (b, &v) in bounds.iter_mut().zip(row) {
            b[0] = b[0].min(v);
            b[1] = b[1].max(v);
        }
    }
    let constraint = match pair {
        Some(pair) => {
            let points = (0..m)
                .map(|i| {
                    let full = if cfg.use_regressed {
                        dependencies.expand(&free_rows[i])?
                    } else {
                        alpha.row(i).iter().copied().collect()
                    };
                    Ok([full[pair[0]], full[pair[1]]])
                })
                .collect::<Result<Vec<Point2>>>()?;
            Some(PairConstraint {
                pair,
                polygon: fit_feasible_polygon(&points, cfg.max_vertices)?,
            })
        }
        None => None,
    };
    Ok(ReducedSpace {
        basis,
        doc: ReducedSpaceDoc {
            mode_count: n,
            dependencies,
            free,
            constraint,
            use_regressed: cfg.use_regressed,
            bounds,
        },
    })
}

impl ReducedSpace {
    pub fn from_parts(basis: PodBasis, doc: ReducedSpaceDoc) -> Result<Self> {
        if doc.mode_count != basis.rank() || doc.dependencies.statuses.len() != basis.rank() {
            return Err(Error::DimensionMismatch {
                expected: basis.rank(),
                found: doc.mode_count,
            });
        }
        doc.dependencies.validate()?;
        if doc.free != doc.dependencies.free_indices() || doc.bounds.len() != doc.free.len() {
            return Err(Error::InvalidConfig(
                "free indices or bounds disagree with the dependency model".into(),
            ));
        }
        Ok(Self { basis, doc })
    }

    pub fn basis(&self) -> &PodBasis {
        &self.basis
    }

    pub fn doc(&self) -> &ReducedSpaceDoc {
        &self.doc
    }

    /// Number of free reduced coordinates `d`.
    pub fn dim(&self) -> usize {
        self.doc.free.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.doc.bounds
    }

    pub fn polygon(&self) -> Option<&FeasiblePolygon> {
        self.doc.constraint.as_ref().map(|c| &c.polygon)
    }

    /// Full coefficient vector with dependent entries regressed.
    pub fn expand(&self, mu_red: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.doc.dependencies.expand(mu_red)?))
    }

    /// Point tested against the polygon, if any.
    pub fn pair_point(&self, mu_red: &[f64]) -> Result<Option<Point2>> {
        let Some(c) = &self.doc.constraint else {
            return Ok(None);
        };
        let full = self.expand(mu_red)?;
        Ok(Some([full[c.pair[0]], full[c.pair[1]]]))
    }

    fn box_excess(&self, mu_red: &[f64]) -> f64 {
        self.doc
            .bounds
            .iter()
            .zip(mu_red)
            .map(|(b, &v)| {
                let tol = BOX_TOL * (b[1] - b[0]).abs().max(f64::MIN_POSITIVE);
                let out = (b[0] - tol - v).max(v - b[1] - tol).max(0.0);
                out * out
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Boundary-inclusive membership test for reduced coordinates.
    pub fn contains(&self, mu_red: &[f64]) -> bool {
        if mu_red.len() != self.dim() || !mu_red.iter().all(|v| v.is_finite()) {
            return false;
        }
        if self.box_excess(mu_red) > 0.0 {
            return false;
        }
        match (self.pair_point(mu_red), &self.doc.constraint) {
            (Ok(Some(p)), Some(c)) => c.polygon.contains(p),
            (Ok(None), None) => true,
            _ => false,
        }
    }

    /// Distance outside the free-coordinate box plus distance of the pair point to the polygon.
    pub fn violation(&self, mu_red: &[f64]) -> f64 {
        let poly = match (self.pair_point(mu_red), &self.doc.constraint) {
            (Ok(Some(p)), Some(c)) => c.polygon.distance(p),
            _ => 0.0,
        };
        self.box_excess(mu_red).hypot(poly)
    }

    /// Reduced coordinates of a full coefficient vector (free entries only).
    pub fn encode(&self, alpha: &DVector<f64>) -> Result<Vec<f64>> {
        if alpha.len() != self.basis.rank() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.rank(),
                found: alpha.len(),
            });
        }
        Ok(self.doc.free.iter().map(|&i| alpha[i]).collect())
    }

    /// Projects a mesh sharing the reference topology into reduced coordinates.
    pub fn encode_mesh(&self, mesh: &TriMesh) -> Result<Vec<f64>> {
        self.encode(&self.basis.project(&crate::mesh::flatten(mesh))?)
    }

    /// Coordinates of the geometry at `mu_red`.
    pub fn decode_snapshot(&self, mu_red: &[f64]) -> Result<SnapshotVector> {
        if mu_red.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: mu_red.len(),
            });
        }
        if !self.contains(mu_red) {
            return Err(Error::OutOfRegion);
        }
        self.basis.reconstruct(&self.expand(mu_red)?)
    }

    pub fn decode(&self, mu_red: &[f64], reference: &TriMesh) -> Result<TriMesh> {
        unflatten(&self.decode_snapshot(mu_red)?, reference)
    }

    /// Uniform rejection sampling of the feasible region.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut rng = super::rng(seed);
        let mut out = DMatrix::zeros(n, d);
        let (mut accepted, mut draws) = (0usize, 0usize);
        let mut mu = vec![0.0; d];
        while accepted < n {
            for (v, b) in mu.iter_mut().zip(&self.doc.bounds) {
                let u: f64 = rng.random();
                *v = b[0] + (b[1] - b[0]) * u;
            }
            draws += 1;
            if self.contains(&mu) {
                out.row_mut(accepted).copy_from_slice(&mu);
                accepted += 1;
            }
            if draws == 10 * n && (accepted as f64) < 0.01 * draws as f64 {
                return Err(Error::InfeasibleRegion { accepted, draws });
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.doc)?)
    }

    pub fn from_json(json: &str, basis: PodBasis) -> Result<Self> {
        Self::from_parts(basis, serde_json::from_str(json)?)
    }

    /// Dependent coefficient statuses, for reporting.
    pub fn statuses(&self) -> &[CoefficientStatus] {
        &self.doc.dependencies.statuses
    }
}
