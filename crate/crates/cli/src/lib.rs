//! Experiment runner: loads a TOML config and a per-chunk dataset, then
//! drives the VOD, live, training and metrics pipelines and writes CSV/JSON
//! reports.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod error;
pub mod live;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod train;
pub mod vod;

pub use config::{ExperimentConfig, Mode, Overrides};
pub use error::CliError;

/// Worker pool sized by `cfg.workers` (0 means one per core).
pub fn pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))
}

/// Writes a synthetic dataset and its traces under `dir`.
pub fn write_synthetic(
    cfg: &ExperimentConfig,
    dir: &std::path::Path,
) -> Result<report::Outputs, CliError> {
    std::fs::create_dir_all(dir.join("traces"))?;
    let mut out = report::Outputs::default();
    let videos = dataset::synthetic_dataset(cfg);
    dataset::write_dataset(&out.push(dir.join("dataset.csv")), &videos, true)?;
    let mut c = cfg.clone();
    c.data.traces.clear();
    for (name, t) in dataset::traces(&c)? {
        let p = out.push(dir.join("traces").join(format!("{name}.txt")));
        std::fs::write(&p, t.to_text())?;
    }
    Ok(out)
}
