//! Shared fixtures for the criterion benchmarks under `benches/`.

use nalgebra::DMatrix;
use shapemanifold::mesh::uv_sphere;
use shapemanifold::{sample_ffd_params, FfdConfig, Point3, TriMesh};

/// Ellipsoidal hull with roughly `rings * segments` vertices inside the unit cube.
pub fn hull(rings: usize, segments: usize) -> TriMesh {
    uv_sphere(
        Point3::new(0.5, 0.5, 0.5),
        [0.45, 0.3, 0.25],
        rings,
        segments,
    )
    .expect("valid sphere")
}

pub fn bulb() -> FfdConfig {
    FfdConfig::default_bulb(Point3::origin(), Point3::new(1.0, 1.0, 1.0))
}

/// Uniform entries in `[-1, 1]`, reproducible from `seed`.
pub fn uniform(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    sample_ffd_params(rows, &vec![[-1.0, 1.0]; cols], seed)
}
