use thiserror::Error;

/// Errors produced across the shape-manifold pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed STL: {0}")]
    MalformedStl(String),
    #[error("mesh has no facets or vertices")]
    EmptyMesh,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of range for degree {degree}")]
    IndexOutOfRange { index: usize, degree: usize },
    #[error("lattice axes are not invertible")]
    SingularLattice,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("snapshot database is empty")]
    EmptyDatabase,
    #[error("POD basis has no modes")]
    EmptyBasis,
    #[error("training set is degenerate: all snapshots coincide with the centering vector")]
    DegenerateTrainingSet,
    #[error("abscissa has zero variance")]
    DegenerateAbscissa,
    #[error("points are collinear; no polygon can enclose them with non-zero area")]
    CollinearPoints,
    #[error("feasible region is empty or too small to sample (acceptance {accepted}/{draws})")]
    InfeasibleRegion { accepted: usize, draws: usize },
    #[error("reduced parameters lie outside the feasible region")]
    OutOfRegion,
    #[error("no vertices inside the region box")]
    EmptyRegion,
    #[error("duplicate parameter rows {first} and {second}")]
    DuplicateParams { first: usize, second: usize },
    #[error("interpolation system is singular or ill-conditioned (condition estimate {condition:e}); try a different shape parameter or kernel")]
    SingularSystem { condition: f64 },
    #[error("artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
