//! Live pipeline: one event-loop session per video, then every trace is
//! streamed with the weights the session served.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use salstream_core::forecast::{ForecastError, ForecastInput};
use salstream_core::live::{
    check_causality, chunk_coverage, decision_weights, replay_utility, run_live_session,
    table_latency, utility, utility_after_warmup, Event, Forecaster, LastValueForecaster,
    ModelBank, QueryLog,
};
use salstream_core::model::{plcc, VideoRecord};

use crate::config::{ExperimentConfig, ForecasterChoice, LiveVideos};
use crate::dataset::{self, Split};
use crate::error::CliError;
use crate::report::{header_line, write_csv, write_json, Outputs};
use crate::vod::{qoe_rows, QoeRow};
use crate::{oracle, pool};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRow {
    pub video_id: String,
    pub chunks: usize,
    pub m: usize,
    pub utility: f64,
    pub utility_after_warmup: f64,
    pub chunk_coverage: f64,
    pub forecasts: usize,
    pub short_forecasts: usize,
    pub rater_failures: usize,
    /// Correlation of forecast weights with ground truth over the chunks
    /// that had one.
    pub plcc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiveOverall {
    pub seed: u64,
    pub m: usize,
    pub videos: usize,
    pub mean_utility: f64,
    pub mean_chunk_coverage: f64,
    /// Forecast weights pooled over all videos against ground truth.
    pub pooled_plcc: Option<f64>,
    pub mean_weighted_qoe: f64,
    pub mean_unweighted_controller_qoe: f64,
}

#[derive(Debug, Clone)]
pub struct LiveSummary {
    pub sessions: Vec<SessionRow>,
    pub qoe: Vec<QoeRow>,
    pub overall: LiveOverall,
    pub outputs: Outputs,
}

/// Declines every request; the pool stays empty.
struct NoForecasts;

impl Forecaster for NoForecasts {
    fn forecast(&mut self, _: usize, _: &ForecastInput) -> Result<Vec<f64>, ForecastError> {
        Err(ForecastError::Shape("forecasting disabled".into()))
    }
}

struct VideoRun {
    row: SessionRow,
    pairs: Vec<(f64, f64)>,
    qoe: Vec<QoeRow>,
    timeline: String,
}

fn one_video(
    cfg: &ExperimentConfig,
    video: &VideoRecord,
    position: usize,
    bank: Option<&ModelBank>,
    traces: &[(String, salstream_core::abr::NetworkTrace)],
) -> Result<VideoRun, CliError> {
    let m = cfg.perception.m;
    let latency = if cfg.live.table_latency {
        table_latency(m)
    } else {
        None
    };
    let mut oracle = oracle::for_video(cfg, video, position, latency)?;
    let mut lc = cfg.live_config();
    lc.video_info = video.title_info.clone();
    let seed = salstream_core::rng::derive_seed(
        cfg.seed,
        salstream_core::rng::tags::FORECAST_LATENCY,
        position as u64,
    );
    let session = match (cfg.live.forecaster, bank) {
        (ForecasterChoice::Model, Some(b)) => {
            let mut b = b.clone();
            run_live_session(video, &lc, &mut oracle, &mut b, seed)?
        }
        (ForecasterChoice::LastValue, _) => {
            run_live_session(video, &lc, &mut oracle, &mut LastValueForecaster, seed)?
        }
        _ => run_live_session(video, &lc, &mut oracle, &mut NoForecasts, seed)?,
    };
    let t = &session.timeline;
    check_causality(t)?;
    let u = utility(t);
    let replayed = replay_utility(t, session.chunk_count)?;
    if replayed != u {
        return Err(CliError::Simulation(format!(
            "video {}: replayed utility {replayed} differs from {u}",
            video.video_id
        )));
    }
    let gt = video.gt();
    let served = decision_weights(t, session.chunk_count);
    let pairs: Vec<(f64, f64)> = served
        .iter()
        .zip(&gt)
        .filter_map(|(w, g)| w.map(|w| (w, *g)))
        .collect();
    let (pw, pg): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let count = |f: fn(&Event) -> bool| t.iter().filter(|e| f(&e.event)).count();
    let row = SessionRow {
        video_id: video.video_id.clone(),
        chunks: session.chunk_count,
        m,
        utility: u,
        utility_after_warmup: utility_after_warmup(t),
        chunk_coverage: chunk_coverage(t, session.chunk_count),
        forecasts: count(|e| matches!(e, Event::ForecastCompleted { .. })),
        short_forecasts: count(
            |e| matches!(e, Event::ForecastSubmitted { shortfall, .. } if *shortfall > 0),
        ),
        rater_failures: count(|e| matches!(e, Event::RaterResponded { ok: false, .. })),
        plcc: plcc(&pw, &pg).ok(),
    };
    let mut qoe = Vec::new();
    for (name, trace) in traces {
        let mut log = QueryLog::from_timeline(t, session.chunk_count);
        qoe.extend(qoe_rows(cfg, video, name, trace, &mut log)?);
    }
    Ok(VideoRun {
        row,
        pairs,
        qoe,
        timeline: session.to_jsonl(),
    })
}

fn load_bank(cfg: &ExperimentConfig) -> Result<Option<ModelBank>, CliError> {
    if cfg.live.forecaster != ForecasterChoice::Model {
        return Ok(None);
    }
    let bank = ModelBank::load_dir(
        cfg.model_dir(),
        &cfg.forecast.prefix,
        &cfg.pretrained_outputs(),
    )?;
    let m = cfg.perception.m;
    let emb = cfg.embedding_dim();
    for l in bank.outputs() {
        let h = bank.get(l).expect("listed").hyper;
        if h.l_in != m || h.emb_dim != emb {
            return Err(CliError::Config(format!(
                "model for l_out {l} expects l_in {} and embedding dim {}; run uses m = {m}, dim {emb}",
                h.l_in, h.emb_dim
            )));
        }
    }
    Ok(Some(bank))
}

fn write_timeline_file(path: &Path, seed: u64, body: &str) -> Result<(), CliError> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d)?;
    }
    std::fs::write(path, format!("{}\n{body}", header_line(seed, "live")))?;
    Ok(())
}

pub fn run_live(cfg: &ExperimentConfig) -> Result<LiveSummary, CliError> {
    let bank = load_bank(cfg)?;
    let all = dataset::videos(cfg)?;
    let videos: Vec<VideoRecord> = match cfg.live.videos {
        LiveVideos::All => all,
        LiveVideos::Test => {
            let split = dataset::split(all.len(), cfg.data.split, cfg.seed);
            let test: Vec<VideoRecord> = all
                .iter()
                .zip(&split)
                .filter(|(_, s)| **s == Split::Test)
                .map(|(v, _)| v.clone())
                .collect();
            if test.is_empty() {
                log::warn!("test split is empty; running live on every video");
                all
            } else {
                test
            }
        }
    };
    let traces = dataset::traces(cfg)?;
    let runs: Vec<VideoRun> = pool(cfg)?
        .install(|| {
            videos
                .par_iter()
                .enumerate()
                .map(|(i, v)| one_video(cfg, v, i, bank.as_ref(), &traces))
                .collect::<Vec<_>>()
        })
        .into_iter()
        .collect::<Result<_, _>>()?;

    let dir = &cfg.out_dir;
    let (seed, mode) = (cfg.seed, "live");
    let mut out = Outputs::default();
    for (v, r) in videos.iter().zip(&runs) {
        let p = out.push(dir.join("timelines").join(format!("{}.jsonl", v.video_id)));
        write_timeline_file(&p, seed, &r.timeline)?;
    }
    let sessions: Vec<SessionRow> = runs.iter().map(|r| r.row.clone()).collect();
    let qoe: Vec<QoeRow> = runs.iter().flat_map(|r| r.qoe.clone()).collect();
    write_csv(
        &out.push(dir.join("live_sessions.csv")),
        seed,
        mode,
        &sessions,
    )?;
    write_csv(&out.push(dir.join("live_qoe.csv")), seed, mode, &qoe)?;

    let (pw, pg): (Vec<f64>, Vec<f64>) = runs.iter().flat_map(|r| r.pairs.iter().copied()).unzip();
    let n = sessions.len().max(1) as f64;
    let mean_qoe = |weighted: bool| {
        let sel: Vec<f64> = qoe
            .iter()
            .filter(|q| (q.controller == "robust_mpc") == weighted)
            .map(|q| q.weighted_qoe)
            .collect();
        sel.iter().sum::<f64>() / sel.len().max(1) as f64
    };
    let overall = LiveOverall {
        seed,
        m: cfg.perception.m,
        videos: sessions.len(),
        mean_utility: sessions.iter().map(|s| s.utility).sum::<f64>() / n,
        mean_chunk_coverage: sessions.iter().map(|s| s.chunk_coverage).sum::<f64>() / n,
        pooled_plcc: plcc(&pw, &pg).ok(),
        mean_weighted_qoe: mean_qoe(true),
        mean_unweighted_controller_qoe: mean_qoe(false),
    };
    write_json(&out.push(dir.join("live_summary.json")), &overall)?;
    Ok(LiveSummary {
        sessions,
        qoe,
        overall,
        outputs: out,
    })
}
