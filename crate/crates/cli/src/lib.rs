//! Command-line pipeline around the `shapemanifold` library.
//!
//! Stages hand off through files in one output directory:
//!
//! | stage            | writes                                                            |
//! |------------------|-------------------------------------------------------------------|
//! | `morph`          | `morph/morphed.stl`                                               |
//! | `build-manifold` | `manifold/{geometry_pod.bin, reduced_space.json, decay.csv, alpha.csv}` |
//! | `evaluate`       | `db_full/` or `db_reduced/` with `fields.bin`, `index.csv`         |
//! | `compare-decay`  | `compare/{decay_comparison.csv, thresholds.csv}`                  |
//! | `build-rom`      | `rom/{basis.bin, rom.json}`                                       |
//! | `predict`        | `prediction/{field.bin, prediction.json}`                         |
//! | `optimize`       | `optimize/{trace.csv, result.json, optimal.stl}`                  |

pub mod cli;
pub mod commands;
pub mod config;
pub mod io;

pub use cli::{run, Cli, Command};
pub use commands::{Context, Sampling};
pub use config::PipelineConfig;
