//! Figure presets, config-driven runs and verification for `edgespin`.

pub mod checks;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

pub use config::{load_config, Experiment, ExperimentConfig, Format};
pub use error::{CliError, Result};
pub use output::{write_outputs, Table};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "EDGESPIN_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "edgespin-out";

/// Resolve, compute and write one experiment. Output goes to `out` when
/// given, else the config's `out_dir`, else `$EDGESPIN_OUT_DIR/<name>`,
/// else `edgespin-out/<name>`.
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let resolved = config.resolve()?;
    let tables = experiments::run(&resolved)?;
    let dir = match (out, &resolved.out_dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => d.clone(),
        (None, None) => {
            let base = std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| DEFAULT_OUT_DIR.into());
            base.join(resolved.experiment()?.name())
        }
    };
    write_outputs(&dir, &resolved, &tables)
}
