//! Batch driver for nodal-set experiments: TOML configs in, CSV/JSON/SVG
//! outputs and a hashed manifest out.

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod run;

pub use config::{Command, Experiment, ExperimentConfig};
pub use error::{ConfigError, PlotError, RunError};
pub use output::RunManifest;
pub use plot::{emit_plot, render_svg, Figure, PlotFormat, Plottable};
pub use run::{load_config, run, run_config, RunOptions};
