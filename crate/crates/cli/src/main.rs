//! ```bash
//! salstream synth --config exp.toml --out data/
//! salstream train --config exp.toml
//! salstream vod --config exp.toml --m 8
//! salstream live --config exp.toml --seed 3
//! salstream metrics --config exp.toml --weights out/vod_weights.csv --column smoothed
//! ```

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use salstream_cli::{
    live::run_live, metrics::run_metrics, train::run_train, vod::run_vod, write_synthetic,
    CliError, ExperimentConfig, Mode, Overrides,
};

#[derive(Parser, Debug)]
#[command(
    name = "salstream",
    version,
    about = "Content-aware bitrate adaptation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rate, rank and smooth every video; stream it with and without weights.
    Vod(Common),
    /// Replay videos as live streams with forecast weights.
    Live(Common),
    /// Train one forecaster per output length.
    Train(Common),
    /// Score a weight file against the dataset's ground truth.
    Metrics {
        #[command(flatten)]
        common: Common,
        /// CSV with video_id, chunk_index and a weight column.
        #[arg(long)]
        weights: PathBuf,
        /// Name of the weight column.
        #[arg(long, default_value = "weight")]
        column: String,
    },
    /// Write a synthetic dataset and traces.
    Synth(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: PathBuf,
    /// Window length.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel workers (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn load(&self, mode: Option<Mode>) -> Result<ExperimentConfig, CliError> {
        let ov = Overrides {
            m: self.m,
            seed: self.seed,
            out: self.out.clone(),
            workers: self.workers,
        };
        ExperimentConfig::load(&self.config, mode, &ov)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let wrote = match cli.command {
        Command::Vod(c) => {
            let cfg = c.load(Some(Mode::Vod))?;
            let s = run_vod(&cfg)?;
            let mean = s.metrics.last().expect("mean row");
            println!(
                "seed={} videos={} failed={} mean smoothed plcc={} srcc={}",
                cfg.seed,
                s.videos,
                s.failed,
                fmt(mean.smoothed_plcc),
                fmt(mean.smoothed_srcc)
            );
            s.outputs
        }
        Command::Live(c) => {
            let cfg = c.load(Some(Mode::Live))?;
            let s = run_live(&cfg)?;
            println!(
                "seed={} m={} videos={} utility={:.4} coverage={:.4} pooled plcc={}",
                cfg.seed,
                s.overall.m,
                s.overall.videos,
                s.overall.mean_utility,
                s.overall.mean_chunk_coverage,
                fmt(s.overall.pooled_plcc)
            );
            s.outputs
        }
        Command::Train(c) => {
            let cfg = c.load(Some(Mode::Train))?;
            let s = run_train(&cfg)?;
            println!(
                "seed={} models={} gradient check max rel err={:.3e}",
                cfg.seed,
                s.models.len(),
                s.grad_max_rel_err
            );
            s.outputs
        }
        Command::Metrics {
            common,
            weights,
            column,
        } => {
            let cfg = common.load(Some(Mode::Metrics))?;
            let s = run_metrics(&cfg, &weights, &column)?;
            let mean = s.rows.last().expect("mean row");
            println!(
                "seed={} plcc={} srcc={}",
                cfg.seed,
                fmt(mean.plcc),
                fmt(mean.srcc)
            );
            s.outputs
        }
        Command::Synth(c) => {
            let cfg = c.load(None)?;
            write_synthetic(&cfg, &cfg.out_dir)?
        }
    };
    for p in wrote.0 {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn fmt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
