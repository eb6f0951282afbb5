//! One function per pipeline stage. Each reads its inputs from the output
//! directory (or explicit paths) and writes its artifacts back there.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use shapemanifold::manifold::{
    build_geometry_pod, build_reduced_space, sample_ffd_params, CoefficientStatus, Point2,
};
use shapemanifold::mesh::{StlFormat, TriMesh};
use shapemanifold::optimize::{minimize, trace_csv, BoxRegion, OptProblem, Region};
use shapemanifold::pod::{
    assemble, compute_pod, decay_csv, decay_rows, Centering, PodBasis, TruncationRule,
};
use shapemanifold::rom::{build_rom as fit_rom, loo_error, LooReport, SolutionDatabase};
use shapemanifold::{ffd, solver};

use crate::config::{
    PipelineConfig, FULL_SEED_OFFSET, OPTIMIZE_SEED_OFFSET, REDUCED_SEED_OFFSET, TRAIN_SEED_OFFSET,
};
use crate::io;

pub const MANIFOLD_DIR: &str = "manifold";
pub const ROM_DIR: &str = "rom";
pub const DB_META: &str = "meta.json";

/// Where solver samples were drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// The full FFD parameter box.
    Full,
    /// The reduced feasible region of the shape manifold.
    Reduced,
}

impl Sampling {
    pub fn dir_name(self) -> &'static str {
        match self {
            Sampling::Full => "db_full",
            Sampling::Reduced => "db_reduced",
        }
    }
}

pub struct Context {
    pub config: PipelineConfig,
}

impl Context {
    pub fn new(config: PipelineConfig) -> anyhow::Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn out(&self) -> &Path {
        &self.config.out
    }

    fn seed(&self, offset: u64) -> u64 {
        self.config.sampling.seed.wrapping_add(offset)
    }

    fn reference(&self) -> anyhow::Result<(TriMesh, ffd::FfdConfig)> {
        let mesh = self.config.reference_mesh()?;
        let ffd = self.config.ffd_config(&mesh)?;
        Ok((mesh, ffd))
    }
}

fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

pub fn morph(
    ctx: &Context,
    mu: &[f64],
    output: Option<&Path>,
    format: StlFormat,
) -> anyhow::Result<PathBuf> {
    let (mesh, ffd) = ctx.reference()?;
    let morphed = ffd::morph(&mesh, &ffd, mu)?;
    let path = io::resolve(ctx.out(), output, "morph/morphed.stl");
    io::write_mesh(&path, &morphed, format)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSummary {
    pub n_train: usize,
    pub vertex_count: usize,
    /// Every geometry singular value above the rank cutoff.
    pub singular_values: Vec<f64>,
    pub mode_count: usize,
    pub statuses: Vec<CoefficientStatus>,
    pub free: Vec<usize>,
    pub polygon: Option<Vec<Point2>>,
}

/// Samples the FFD box, decomposes the geometries and fits the reduced space.
pub fn build_manifold(ctx: &Context) -> anyhow::Result<ManifoldSummary> {
    let cfg = &ctx.config;
    let (mesh, ffd) = ctx.reference()?;
    let n = cfg.sampling.n_train;
    if n < 10 {
        log::warn!(
            "only {n} training geometries; dependency and polygon statistics will be unreliable"
        );
    }
    let params = sample_ffd_params(n, &ffd.bounds, ctx.seed(TRAIN_SEED_OFFSET));
    log::info!(
        "geometry POD over {n} morphs of {} vertices",
        mesh.vertex_count()
    );
    let g = build_geometry_pod(&mesh, &ffd, &params, cfg.geometry_rule)?;
    let space = build_reduced_space(g.basis.clone(), &g.alpha, &cfg.reduction)?;

    let dir = ctx.out().join(MANIFOLD_DIR);
    io::save_space(&dir, &space)?;
    io::write(
        &dir.join("decay.csv"),
        decay_csv(&decay_rows(g.singular_values.as_slice())?),
    )?;
    io::matrix_csv(&dir.join("alpha.csv"), "alpha", &g.alpha)?;
    io::matrix_csv(&dir.join("params.csv"), "mu", &params)?;
    let summary = ManifoldSummary {
        n_train: n,
        vertex_count: mesh.vertex_count(),
        singular_values: g.singular_values.iter().copied().collect(),
        mode_count: g.basis.rank(),
        statuses: space.statuses().to_vec(),
        free: space.doc().free.clone(),
        polygon: space.polygon().map(|p| p.vertices().to_vec()),
    };
    io::write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseMeta {
    pub sampling: Sampling,
    pub samples: usize,
    pub param_dim: usize,
    pub seed: u64,
}

/// Draws `n` parameters, builds their geometries and runs the solver stub on each.
pub fn evaluate(
    ctx: &Context,
    sampling: Sampling,
    n: Option<usize>,
) -> anyhow::Result<(PathBuf, DatabaseMeta)> {
    let cfg = &ctx.config;
    let (mesh, ffd) = ctx.reference()?;
    let (params, geometries): (DMatrix<f64>, Vec<TriMesh>) = match sampling {
        Sampling::Full => {
            let n = n.unwrap_or(cfg.sampling.n_full);
            let params = sample_ffd_params(n, &ffd.bounds, ctx.seed(FULL_SEED_OFFSET));
            let meshes = (0..n)
                .into_par_iter()
                .map(|i| ffd::morph(&mesh, &ffd, &row(&params, i)))
                .collect::<shapemanifold::Result<_>>()?;
            (params, meshes)
        }
        Sampling::Reduced => {
            let n = n.unwrap_or(cfg.sampling.n_reduced);
            let space = io::load_space(&ctx.out().join(MANIFOLD_DIR))
                .context("run build-manifold first")?;
            let params = space.sample(n, ctx.seed(REDUCED_SEED_OFFSET))?;
            let meshes = (0..n)
                .into_par_iter()
                .map(|i| space.decode(&row(&params, i), &mesh))
                .collect::<shapemanifold::Result<_>>()?;
            (params, meshes)
        }
    };
    if params.nrows() == 0 {
        bail!("at least one sample is required");
    }
    log::info!(
        "evaluating the solver on {} {:?} samples",
        params.nrows(),
        sampling
    );
    let solutions = geometries
        .par_iter()
        .map(|m| solver::evaluate(m, &cfg.stub))
        .collect::<shapemanifold::Result<Vec<_>>>()?;
    let (fields, objectives) = solutions
        .into_iter()
        .map(|s| (s.field, s.objective))
        .unzip();
    let db = SolutionDatabase::new(params, fields, objectives)?;
    let dir = ctx.out().join(sampling.dir_name());
    io::save_database(&dir, &db)?;
    let meta = DatabaseMeta {
        sampling,
        samples: db.len(),
        param_dim: db.param_dim(),
        seed: ctx.seed(match sampling {
            Sampling::Full => FULL_SEED_OFFSET,
            Sampling::Reduced => REDUCED_SEED_OFFSET,
        }),
    };
    io::write_json(&dir.join(DB_META), &meta)?;
    Ok((dir, meta))
}

pub const DECAY_THRESHOLDS: [f64; 3] = [0.99, 0.999, 0.9999];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub threshold: f64,
    pub full_modes: usize,
    pub reduced_modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayComparison {
    pub full_sigma: Vec<f64>,
    pub reduced_sigma: Vec<f64>,
    pub thresholds: Vec<ThresholdRow>,
}

fn solution_pod(db: &SolutionDatabase) -> anyhow::Result<PodBasis> {
    let (snapshots, _) = assemble(db.fields(), &Centering::Mean)?;
    Ok(compute_pod(&snapshots))
}

/// Solution POD decay of a full-box and a reduced-region database, side by side.
pub fn compare_decay(
    ctx: &Context,
    full: Option<&Path>,
    reduced: Option<&Path>,
) -> anyhow::Result<DecayComparison> {
    let full = io::load_database(&io::resolve(ctx.out(), full, Sampling::Full.dir_name()))?;
    let reduced = io::load_database(&io::resolve(
        ctx.out(),
        reduced,
        Sampling::Reduced.dir_name(),
    ))?;
    let (full, reduced) = (solution_pod(&full)?, solution_pod(&reduced)?);
    let thresholds: Vec<ThresholdRow> = DECAY_THRESHOLDS
        .iter()
        .map(|&t| ThresholdRow {
            threshold: t,
            full_modes: full.truncation_count(TruncationRule::Energy(t)),
            reduced_modes: reduced.truncation_count(TruncationRule::Energy(t)),
        })
        .collect();
    let full_sigma: Vec<f64> = full.singular_values().iter().copied().collect();
    let reduced_sigma: Vec<f64> = reduced.singular_values().iter().copied().collect();

    let dir = ctx.out().join("compare");
    let cell = |s: &[f64], i: usize, ratio: bool| {
        s.get(i).map_or_else(String::new, |v| {
            if ratio {
                (v / s[0]).to_string()
            } else {
                v.to_string()
            }
        })
    };
    let header = [
        "index",
        "full_sigma",
        "full_ratio",
        "reduced_sigma",
        "reduced_ratio",
    ]
    .map(String::from);
    let rows = (0..full_sigma.len().max(reduced_sigma.len())).map(|i| {
        vec![
            (i + 1).to_string(),
            cell(&full_sigma, i, false),
            cell(&full_sigma, i, true),
            cell(&reduced_sigma, i, false),
            cell(&reduced_sigma, i, true),
        ]
    });
    io::write_csv(&dir.join("decay_comparison.csv"), &header, rows)?;
    for (name, sigma) in [
        ("decay_full.csv", &full_sigma),
        ("decay_reduced.csv", &reduced_sigma),
    ] {
        if !sigma.is_empty() {
            io::write(&dir.join(name), decay_csv(&decay_rows(sigma)?))?;
        }
    }
    let header = ["threshold", "full_modes", "reduced_modes"].map(String::from);
    let rows = thresholds.iter().map(|t| {
        vec![
            t.threshold.to_string(),
            t.full_modes.to_string(),
            t.reduced_modes.to_string(),
        ]
    });
    io::write_csv(&dir.join("thresholds.csv"), &header, rows)?;
    Ok(DecayComparison {
        full_sigma,
        reduced_sigma,
        thresholds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomSummary {
    pub sampling: Sampling,
    pub samples: usize,
    pub mode_count: usize,
    pub loo: Option<LooReport>,
}

fn database_sampling(dir: &Path) -> anyhow::Result<Sampling> {
    let path = dir.join(DB_META);
    let meta: DatabaseMeta = serde_json::from_str(&io::read_string(&path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(meta.sampling)
}

/// Fits the surrogate to a database (the reduced one unless `db` is given).
pub fn build_rom(ctx: &Context, db: Option<&Path>, with_loo: bool) -> anyhow::Result<RomSummary> {
    let cfg = &ctx.config;
    let db_dir = io::resolve(ctx.out(), db, Sampling::Reduced.dir_name());
    let sampling = database_sampling(&db_dir)?;
    let db = io::load_database(&db_dir)?;
    let mut model = fit_rom(&db, cfg.solution_rule, &cfg.kernel)?;
    model.meta_mut().seed = Some(cfg.sampling.seed);
    let loo = if with_loo {
        Some(loo_error(&db, cfg.solution_rule, &cfg.kernel)?)
    } else {
        None
    };
    let dir = ctx.out().join(ROM_DIR);
    io::save_rom(&dir, &model)?;
    let summary = RomSummary {
        sampling,
        samples: db.len(),
        mode_count: model.basis().rank(),
        loo,
    };
    io::write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn rom_sampling(dir: &Path) -> anyhow::Result<Sampling> {
    let path = dir.join("summary.json");
    let s: RomSummary = serde_json::from_str(&io::read_string(&path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(s.sampling)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mu: Vec<f64>,
    pub objective: f64,
}

/// Surrogate field and objective at `mu`.
pub fn predict(ctx: &Context, mu: &[f64], rom: Option<&Path>) -> anyhow::Result<Prediction> {
    let model = io::load_rom(&io::resolve(ctx.out(), rom, ROM_DIR))?;
    let (field, objective) = model.predict(mu)?;
    let dir = ctx.out().join("prediction");
    io::write(
        &dir.join("field.bin"),
        shapemanifold::artifact::encode_vectors(&[field])?,
    )?;
    let p = Prediction {
        mu: mu.to_vec(),
        objective,
    };
    io::write_json(&dir.join("prediction.json"), &p)?;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSummary {
    pub sampling: Sampling,
    pub best_mu: Vec<f64>,
    pub best_value: f64,
    pub best_start: usize,
    pub evaluations: usize,
}

/// Minimizes the surrogate objective over the region its database was sampled from.
pub fn optimize(ctx: &Context, rom: Option<&Path>) -> anyhow::Result<OptimizeSummary> {
    let rom_dir = io::resolve(ctx.out(), rom, ROM_DIR);
    let model = io::load_rom(&rom_dir)?;
    let sampling = rom_sampling(&rom_dir)?;
    let (mesh, ffd) = ctx.reference()?;
    let space = match sampling {
        Sampling::Reduced => Some(io::load_space(&ctx.out().join(MANIFOLD_DIR))?),
        Sampling::Full => None,
    };
    let boxed = BoxRegion(ffd.bounds.clone());
    let region: &dyn Region = match &space {
        Some(s) => s,
        None => &boxed,
    };
    if region.dim() != model.meta().param_dim {
        bail!(
            "model has {} parameters but the {:?} region has {}",
            model.meta().param_dim,
            sampling,
            region.dim()
        );
    }
    let objective = |mu: &[f64]| model.predict_objective(mu);
    let mut config = ctx.config.optimizer;
    config.seed = ctx.seed(OPTIMIZE_SEED_OFFSET);
    let result = minimize(&OptProblem {
        objective: &objective,
        region,
        config,
    })?;

    if model.extrapolates(&result.best_mu) {
        log::warn!(
            "optimum {:?} lies outside the surrogate's training box",
            result.best_mu
        );
    }
    let dir = ctx.out().join("optimize");
    io::write(&dir.join("trace.csv"), trace_csv(&result))?;
    let optimal = match &space {
        Some(s) => s.decode(&result.best_mu, &mesh)?,
        None => ffd::morph(&mesh, &ffd, &result.best_mu)?,
    };
    io::write_mesh(&dir.join("optimal.stl"), &optimal, StlFormat::Binary)?;
    let summary = OptimizeSummary {
        sampling,
        best_mu: result.best_mu,
        best_value: result.best_value,
        best_start: result.best_start,
        evaluations: result.evaluations,
    };
    io::write_json(&dir.join("result.json"), &summary)?;
    Ok(summary)
}

/// Every stage in order with the configured counts.
pub fn run_all(ctx: &Context) -> anyhow::Result<OptimizeSummary> {
    build_manifold(ctx)?;
    evaluate(ctx, Sampling::Full, None)?;
    evaluate(ctx, Sampling::Reduced, None)?;
    compare_decay(ctx, None, None)?;
    build_rom(ctx, None, false)?;
    optimize(ctx, None)
}
