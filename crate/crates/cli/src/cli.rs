use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use shapemanifold::mesh::StlFormat;

use crate::commands::{self, Context, Sampling};
use crate::config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(
    name = "shapemanifold",
    version,
    about = "Shape-parameter reduction and reduced-order modelling pipeline"
)]
pub struct Cli {
    /// Pipeline configuration (JSON); defaults are used for anything omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed for every sampling stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Binary,
    Ascii,
}

impl From<Format> for StlFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Binary => StlFormat::Binary,
            Format::Ascii => StlFormat::Ascii,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deform the reference mesh with the given FFD parameters.
    Morph {
        /// Comma-separated parameter values.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        mu: Vec<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "binary")]
        format: Format,
    },
    /// Sample the FFD box, reduce the geometries and fit the feasible region.
    BuildManifold,
    /// Run the solver stub on samples of the full box or the reduced region.
    Evaluate {
        #[arg(long, value_enum)]
        sampling: Sampling,
        /// Sample count (default from the configuration).
        #[arg(short = 'n', long)]
        n: Option<usize>,
    },
    /// Compare solution POD decay of the full and reduced databases.
    CompareDecay {
        #[arg(long)]
        full: Option<PathBuf>,
        #[arg(long)]
        reduced: Option<PathBuf>,
    },
    /// Fit the surrogate to a solution database.
    BuildRom {
        /// Database directory (default: the reduced one).
        #[arg(long)]
        db: Option<PathBuf>,
        /// Also compute leave-one-out errors.
        #[arg(long)]
        loo: bool,
    },
    /// Query the surrogate at a parameter point.
    Predict {
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        mu: Vec<f64>,
        #[arg(long)]
        rom: Option<PathBuf>,
    },
    /// Minimize the surrogate objective over the feasible region.
    Optimize {
        #[arg(long)]
        rom: Option<PathBuf>,
    },
    /// Every stage in order.
    Run,
}

/// Executes one parsed command line, printing a short summary on stdout.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.sampling.seed = seed;
    }
    if let Some(out) = cli.out {
        config.out = out;
    }
    let ctx = Context::new(config)?;
    match cli.command {
        Command::Morph { mu, output, format } => {
            let path = commands::morph(&ctx, &mu, output.as_deref(), format.into())?;
            println!("wrote {}", path.display());
        }
        Command::BuildManifold => {
            let s = commands::build_manifold(&ctx)?;
            println!(
                "geometry modes: {} of {} nonzero",
                s.mode_count,
                s.singular_values.len()
            );
            println!(
                "reduced dimension: {} (free coefficients {:?})",
                s.free.len(),
                s.free
            );
            if let Some(p) = &s.polygon {
                println!("feasible polygon: {} vertices", p.len());
            }
        }
        Command::Evaluate { sampling, n } => {
            let (dir, meta) = commands::evaluate(&ctx, sampling, n)?;
            println!("wrote {} samples to {}", meta.samples, dir.display());
        }
        Command::CompareDecay { full, reduced } => {
            let c = commands::compare_decay(&ctx, full.as_deref(), reduced.as_deref())?;
            println!("threshold,full_modes,reduced_modes");
            for t in &c.thresholds {
                println!("{},{},{}", t.threshold, t.full_modes, t.reduced_modes);
            }
        }
        Command::BuildRom { db, loo } => {
            let s = commands::build_rom(&ctx, db.as_deref(), loo)?;
            println!(
                "surrogate over {} {:?} samples with {} modes",
                s.samples, s.sampling, s.mode_count
            );
            if let Some(l) = &s.loo {
                println!("leave-one-out error: mean {:e}, max {:e}", l.mean, l.max);
            }
        }
        Command::Predict { mu, rom } => {
            let p = commands::predict(&ctx, &mu, rom.as_deref())?;
            println!("{}", p.objective);
        }
        Command::Optimize { rom } => {
            let s = commands::optimize(&ctx, rom.as_deref())?;
            println!(
                "best value {} at {:?} after {} evaluations",
                s.best_value, s.best_mu, s.evaluations
            );
        }
        Command::Run => {
            let s = commands::run_all(&ctx)?;
            println!("best value {} at {:?}", s.best_value, s.best_mu);
        }
    }
    Ok(())
}
