//! Batch driver: loads a run configuration, executes one study pipeline
//! and writes its tables, summaries and manifest.

pub mod config;
pub mod emit;
pub mod error;
pub mod pipeline;

use std::path::{Path, PathBuf};

pub use config::{Config, Violation};
pub use emit::{RunManifest, MANIFEST_NAME};
pub use error::CliError;
pub use pipeline::Stage;

use emit::Format;

/// Diagnostics for a config file without running any numerics.
pub fn validate_file(path: &Path) -> Result<Vec<Violation>, CliError> {
    match Config::load(path) {
        Ok((cfg, _)) => Ok(cfg.violations()),
        Err(CliError::Validation(v)) => Ok(v),
        Err(e) => Err(e),
    }
}

/// Runs `stage` and writes its artifacts to `out`, or to `output.dir` when
/// `out` is absent.
pub fn run(
    stage: Stage,
    config_path: &Path,
    out: Option<&Path>,
    threads: Option<usize>,
) -> Result<(PathBuf, RunManifest), CliError> {
    let started = emit::unix_now();
    let (cfg, raw) = Config::load(config_path)?;
    let cfg = cfg.validated()?;
    if threads == Some(0) {
        return Err(CliError::Validation(vec![Violation {
            field: "--threads".into(),
            message: "must be at least 1".into(),
        }]));
    }
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Serialize(format!("thread pool: {e}")))?;
    let artifacts = pool.install(|| pipeline::run_stage(stage, &cfg))?;
    let kept: Vec<_> = artifacts
        .into_iter()
        .filter(|a| match a.format {
            Format::Csv => cfg.output.csv(),
            Format::Json => cfg.output.json(),
        })
        .collect();
    let manifest = emit::write_all(&dir, &kept, stage.name(), &raw, started)?;
    Ok((dir, manifest))
}
