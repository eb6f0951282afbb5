//! Reduced geometric parameter space.
//!
//! Sampled FFD parameters are turned into a database of deformed meshes,
//! reduced with POD, and the POD coefficients are inspected for affine
//! dependencies and bounded by a convex polygon. The surviving free
//! coefficients become the new design parameters.

mod polygon;
mod regression;
mod space;

pub use polygon::{
    convex_hull, distance_to_polygon, fit_feasible_polygon, FeasiblePolygon, Point2,
};
pub use regression::{
    detect_dependencies, linear_fit, CoefficientStatus, DependencyModel, LinearFit,
};
pub use space::{
    build_reduced_space, PairConstraint, ReducedSpace, ReducedSpaceDoc, ReductionConfig,
};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ffd::FfdConfig;
use crate::mesh::{flatten, TriMesh};
use crate::pod::{compute_pod, PodBasis, SnapshotMatrix, TruncationRule};

/// Seeded PRNG shared by every sampler in the crate.
pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` uniform draws from the box, one row per sample.
pub fn sample_ffd_params(n: usize, bounds: &[[f64; 2]], seed: u64) -> DMatrix<f64> {
    let mut rng = rng(seed);
    let mut out = DMatrix::zeros(n, bounds.len());
    for i in 0..n {
        for (j, b) in bounds.iter().enumerate() {
            let u: f64 = rng.random();
            out[(i, j)] = b[0] + (b[1] - b[0]) * u;
        }
    }
    out
}

/// Geometry POD of an FFD family, centered on the reference mesh.
#[derive(Debug, Clone)]
pub struct GeometryPod {
    /// Truncated basis.
    pub basis: PodBasis,
    /// Retained coefficients, one row per sample.
    pub alpha: DMatrix<f64>,
    /// Every singular value above the rank cutoff, before truncation.
    pub singular_values: DVector<f64>,
}

/// Morphs the reference for every row of `params` and decomposes the displacement snapshots.
pub fn build_geometry_pod(
    reference: &TriMesh,
    config: &FfdConfig,
    params: &DMatrix<f64>,
    rule: TruncationRule,
) -> Result<GeometryPod> {
    rule.validate()?;
    let m = params.nrows();
    if m < 2 {
        return Err(Error::InvalidConfig(format!(
            "geometry POD needs at least 2 samples, got {m}"
        )));
    }
    if params.ncols() != config.param_dim {
        return Err(Error::DimensionMismatch {
            expected: config.param_dim,
            found: params.ncols(),
        });
    }
    let lattices = (0..m)
        .map(|i| config.apply_params(params.row(i).transpose().as_slice()))
        .collect::<Result<Vec<_>>>()?;
    let center = flatten(reference);
    let n = center.len();
    let mut theta = DMatrix::zeros(n, m);
    theta
        .as_mut_slice()
        .par_chunks_mut(n)
        .zip(lattices.par_iter())
        .for_each(|(col, lattice)| {
            for (k, v) in reference.vertices().iter().enumerate() {
                let moved = lattice.deform_point(v);
                for a in 0..3 {
                    col[3 * k + a] = moved[a] - v[a];
                }
            }
        });
    let theta = SnapshotMatrix::from_matrix(theta)?;
    let full = compute_pod(&theta);
    if full.rank() == 0 {
        return Err(Error::DegenerateTrainingSet);
    }
    let singular_values = full.singular_values().clone();
    let basis = full.truncate(rule).with_center(center)?;
    let alpha = (basis.modes().transpose() * theta.matrix()).transpose();
    Ok(GeometryPod {
        basis,
        alpha,
        singular_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffd::{LatticeFrame, ParamEntry};
    use crate::mesh::{uv_sphere, Point3};

    #[test]
    fn sampling_box_and_determinism() {
        let bounds = vec![[-0.3, 0.3]; 5];
        let a = sample_ffd_params(1500, &bounds, 42);
        assert_eq!(a.shape(), (1500, 5));
        assert!(a.iter().all(|v| (-0.3..=0.3).contains(v)));
        assert_eq!(a, sample_ffd_params(1500, &bounds, 42));
        assert_ne!(a, sample_ffd_params(1500, &bounds, 43));
        assert!(sample_ffd_params(10, &[[0.0, 0.0]; 5], 1)
            .iter()
            .all(|&v| v == 0.0));
    }

    fn sphere() -> TriMesh {
        uv_sphere(Point3::new(0.5, 0.5, 0.5), [0.45; 3], 12, 18).unwrap()
    }

    #[test]
    fn zero_params_are_degenerate() {
        let cfg = FfdConfig::default_bulb(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        let r = build_geometry_pod(
            &sphere(),
            &cfg,
            &DMatrix::zeros(6, 5),
            TruncationRule::default(),
        );
        assert!(matches!(r, Err(Error::DegenerateTrainingSet)));
    }

    #[test]
    fn single_direction_gives_rank_one() {
        let cfg = FfdConfig::new(
            LatticeFrame::aligned(Point3::origin(), Point3::new(1.0, 1.0, 1.0), [2, 2, 2]),
            2,
            vec![ParamEntry {
                param: 0,
                point: [1, 1, 1],
                axis: 1,
                weight: 1.0,
            }],
            vec![],
        )
        .unwrap();
        let mut params = sample_ffd_params(20, &cfg.bounds, 3);
        params.column_mut(1).fill(0.0);
        let mesh = sphere();
        let g = build_geometry_pod(&mesh, &cfg, &params, TruncationRule::Energy(1.0)).unwrap();
        assert_eq!(g.basis.rank(), 1);
        assert_eq!(g.singular_values.len(), 1);

        // oracle: Θ = w μᵀ with w the displacement field of μ0 = 1
        let unit = crate::ffd::morph(&mesh, &cfg, &[1.0, 0.0]).unwrap();
        let w = flatten(&unit) - flatten(&mesh);
        let mu = params.column(0);
        let expect_sigma = w.norm() * mu.norm();
        assert!((g.singular_values[0] - expect_sigma).abs() <= 1e-12 * expect_sigma);
        let dir = &w / w.norm();
        assert!((g.basis.modes().column(0).dot(&dir).abs() - 1.0).abs() < 1e-12);
        // α = ±‖w‖ μ
        for i in 0..20 {
            assert!((g.alpha[(i, 0)].abs() - w.norm() * mu[i].abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn default_bulb_family_has_three_modes() {
        let cfg = FfdConfig::default_bulb(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0));
        let params = sample_ffd_params(60, &cfg.bounds, 9);
        let g = build_geometry_pod(&sphere(), &cfg, &params, TruncationRule::Energy(1.0 - 1e-9))
            .unwrap();
        assert_eq!(g.basis.rank(), 3);
        assert_eq!(g.alpha.shape(), (60, 3));
        assert!(
            g.singular_values.len() == 3 || g.singular_values[3] < 1e-10 * g.singular_values[0]
        );
    }
}
