use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use shapemanifold::ffd::FfdConfig;
use shapemanifold::mesh::{load_stl, uv_sphere, Point3, TriMesh};
use shapemanifold::optimize::OptConfig;
use shapemanifold::rom::KernelConfig;
use shapemanifold::{ReductionConfig, StubConfig, TruncationRule};

/// Parameter counts and the base seed of every sampling stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// FFD samples used to build the geometry POD.
    pub n_train: usize,
    /// Solver samples drawn from the full FFD box.
    pub n_full: usize,
    /// Solver samples drawn from the reduced feasible region.
    pub n_reduced: usize,
    /// Base seed; each stage offsets it by a fixed amount.
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            n_train: 1500,
            n_full: 100,
            n_reduced: 80,
            seed: 0,
        }
    }
}

pub const TRAIN_SEED_OFFSET: u64 = 0;
pub const FULL_SEED_OFFSET: u64 = 1;
pub const REDUCED_SEED_OFFSET: u64 = 2;
pub const OPTIMIZE_SEED_OFFSET: u64 = 3;

/// Everything the pipeline commands read.
///
/// Every field has a default, so `{}` is a valid configuration: a built-in
/// ellipsoidal hull with a five-parameter bow lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Reference STL; the built-in ellipsoid when absent. Relative paths resolve against the config file.
    pub reference: Option<PathBuf>,
    /// Output directory for every artifact.
    pub out: PathBuf,
    /// Morphing setup; when absent a bow lattice enclosing the reference mesh.
    pub ffd: Option<FfdConfig>,
    pub sampling: SamplingConfig,
    pub geometry_rule: TruncationRule,
    pub solution_rule: TruncationRule,
    pub reduction: ReductionConfig,
    pub stub: StubConfig,
    pub kernel: KernelConfig,
    pub optimizer: OptConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            reference: None,
            out: PathBuf::from("out"),
            ffd: None,
            sampling: SamplingConfig::default(),
            geometry_rule: TruncationRule::Energy(1.0 - 1e-9),
            solution_rule: TruncationRule::default(),
            reduction: ReductionConfig::default(),
            stub: StubConfig::default(),
            kernel: KernelConfig::default(),
            optimizer: OptConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(r) = &cfg.reference {
            if r.is_relative() {
                cfg.reference = Some(base.join(r));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let s = &self.sampling;
        if s.n_train < 1 || s.n_full < 1 || s.n_reduced < 1 {
            bail!("sampling counts must be >= 1");
        }
        self.geometry_rule.validate()?;
        self.solution_rule.validate()?;
        self.stub.validate()?;
        if self.optimizer.starts < 1 {
            bail!("optimizer needs at least one start");
        }
        Ok(())
    }

    /// Reads (or builds) the reference mesh.
    pub fn reference_mesh(&self) -> anyhow::Result<TriMesh> {
        match &self.reference {
            Some(path) => {
                let bytes = std::fs::read(path)
                    .with_context(|| format!("reading reference mesh {}", path.display()))?;
                load_stl(&bytes)
                    .with_context(|| format!("parsing reference mesh {}", path.display()))
            }
            None => Ok(default_hull()?),
        }
    }

    /// The configured FFD, or the bow lattice over the mesh bounding box enlarged by 5 %.
    pub fn ffd_config(&self, reference: &TriMesh) -> anyhow::Result<FfdConfig> {
        match &self.ffd {
            Some(cfg) => {
                let mut cfg = cfg.clone();
                cfg.normalize()?;
                Ok(cfg)
            }
            None => {
                let (lo, hi) = reference.bounding_box();
                let pad = (hi - lo) * 0.025;
                Ok(FfdConfig::default_bulb(lo - pad, hi + pad))
            }
        }
    }
}

/// Slender ellipsoid standing in for a hull when no STL is configured.
pub fn default_hull() -> shapemanifold::Result<TriMesh> {
    uv_sphere(Point3::new(0.0, 0.0, 0.0), [1.0, 0.25, 0.2], 24, 48)
}
