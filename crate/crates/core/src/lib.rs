//! Shape-parametrization reduction and reduced-order modelling for
//! triangulated hull geometries.
//!
//! The pipeline runs free-form deformation over a reference mesh, reduces the
//! resulting geometries with proper orthogonal decomposition to a small set of
//! independent shape coordinates, evaluates a solver on samples of that space
//! and interpolates the solutions into a surrogate that an optimizer can query.

// NaN-rejecting checks are written as `!(x > y)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod error;
pub mod ffd;
pub mod manifold;
pub mod mesh;
pub mod optimize;
pub mod pod;
pub mod rom;
pub mod solver;

pub use error::{Error, Result};
pub use ffd::{morph, FfdConfig, FfdLattice, LatticeFrame, ParamEntry};
pub use manifold::{
    build_geometry_pod, build_reduced_space, sample_ffd_params, FeasiblePolygon, GeometryPod,
    ReducedSpace, ReductionConfig,
};
pub use mesh::{
    flatten, load_stl, read_stl, unflatten, write_stl, Point3, SnapshotVector, StlFormat, TriMesh,
};
pub use optimize::{minimize, BoxRegion, OptConfig, OptProblem, OptResult, PolygonRegion, Region};
pub use pod::{compute_pod, PodBasis, SnapshotMatrix, TruncationRule};
pub use rom::{
    build_rom, fit_interpolator, loo_error, Interpolator, KernelConfig, RomModel, SolutionDatabase,
};
pub use solver::{evaluate, SolutionSnapshot, StubConfig};
