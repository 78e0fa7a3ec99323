//! Whole-video pipeline: rate windows, rank globally, smooth, evaluate,
//! and stream every video over every trace with and without weights.

use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use salstream_core::abr::{simulate_session, NetworkTrace, RobustMpc, StaticWeights};
use salstream_core::model::{mean_reports, MetricReport, VideoRecord};
use salstream_core::perception::{raw_weights, run_perception_cached, ResponseCache};
use salstream_core::ranking::{rank_video, recurrence_t, sigma_sweep};

use crate::config::ExperimentConfig;
use crate::dataset;
use crate::error::CliError;
use crate::report::{write_csv, Outputs};
use crate::{oracle, pool};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub video_id: String,
    pub chunks: usize,
    pub raw_plcc: Option<f64>,
    pub raw_srcc: Option<f64>,
    pub raw_map50: f64,
    pub raw_map15: f64,
    pub ranked_plcc: Option<f64>,
    pub ranked_srcc: Option<f64>,
    pub ranked_map50: f64,
    pub ranked_map15: f64,
    pub smoothed_plcc: Option<f64>,
    pub smoothed_srcc: Option<f64>,
    pub smoothed_map50: f64,
    pub smoothed_map15: f64,
    /// Smoothed ranking correlates better with ground truth than the raw
    /// window ratings.
    pub ranked_beats_raw: Option<bool>,
}

impl MetricsRow {
    fn new(
        video_id: String,
        chunks: usize,
        raw: &MetricReport,
        ranked: &MetricReport,
        smoothed: &MetricReport,
    ) -> Self {
        Self {
            video_id,
            chunks,
            raw_plcc: raw.plcc,
            raw_srcc: raw.srcc,
            raw_map50: raw.map50,
            raw_map15: raw.map15,
            ranked_plcc: ranked.plcc,
            ranked_srcc: ranked.srcc,
            ranked_map50: ranked.map50,
            ranked_map15: ranked.map15,
            smoothed_plcc: smoothed.plcc,
            smoothed_srcc: smoothed.srcc,
            smoothed_map50: smoothed.map50,
            smoothed_map15: smoothed.map15,
            ranked_beats_raw: match (smoothed.plcc, raw.plcc) {
                (Some(s), Some(r)) => Some(s > r),
                (Some(_), None) => Some(true),
                _ => None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallsRow {
    pub video_id: String,
    pub chunks: usize,
    pub m: usize,
    pub windows: usize,
    pub perception_calls: u64,
    pub ranking_calls: u64,
    pub ranking_bound: u64,
    pub within_bound: bool,
    pub tokens_estimate: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub video_id: String,
    pub chunk_index: usize,
    pub raw: f64,
    pub ranked: f64,
    pub smoothed: f64,
    pub gt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRow {
    pub video_id: String,
    pub sigma: f64,
    pub plcc: Option<f64>,
    pub srcc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoeRow {
    pub video_id: String,
    pub trace: String,
    pub controller: String,
    /// Scored with ground-truth weights.
    pub weighted_qoe: f64,
    pub unweighted_qoe: f64,
    pub rebuffer_s: f64,
    pub startup_s: f64,
    pub mean_bitrate_kbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub video_id: String,
    pub error: String,
}

struct VideoOutcome {
    metrics: (MetricReport, MetricReport, MetricReport),
    row: MetricsRow,
    calls: CallsRow,
    curve: Vec<CurveRow>,
    sigma: Vec<SigmaRow>,
    qoe: Vec<QoeRow>,
}

#[derive(Debug, Clone)]
pub struct VodSummary {
    pub videos: usize,
    pub failed: usize,
    pub metrics: Vec<MetricsRow>,
    pub calls: Vec<CallsRow>,
    pub outputs: Outputs,
}

/// Streams `video` over `trace` with weighted and unweighted MPC. Both
/// runs are scored with ground-truth weights.
pub fn qoe_rows(
    cfg: &ExperimentConfig,
    video: &VideoRecord,
    trace_name: &str,
    trace: &NetworkTrace,
    weights: &mut dyn salstream_core::abr::WeightSource,
) -> Result<Vec<QoeRow>, CliError> {
    let gt = video.gt();
    let mut rows = Vec::with_capacity(2);
    for weighted in [true, false] {
        let mut ctl = RobustMpc { weighted };
        let mut uniform = salstream_core::abr::UniformWeights { len: gt.len() };
        let source: &mut dyn salstream_core::abr::WeightSource = if weighted {
            &mut *weights
        } else {
            &mut uniform
        };
        let r = simulate_session(
            &cfg.abr.ladder,
            trace,
            &cfg.abr.qoe,
            &cfg.abr.session,
            &mut ctl,
            source,
            &gt,
        )?;
        rows.push(QoeRow {
            video_id: video.video_id.clone(),
            trace: trace_name.to_string(),
            controller: r.controller.clone(),
            weighted_qoe: r.weighted_qoe,
            unweighted_qoe: r.unweighted_qoe,
            rebuffer_s: r.total_rebuffer_s,
            startup_s: r.startup_s,
            mean_bitrate_kbps: r.rows.iter().map(|c| c.bitrate_kbps).sum::<f64>()
                / r.rows.len().max(1) as f64,
        });
    }
    Ok(rows)
}

fn one_video(
    cfg: &ExperimentConfig,
    video: &VideoRecord,
    position: usize,
    traces: &[(String, NetworkTrace)],
    cache: Option<&Mutex<ResponseCache>>,
) -> Result<VideoOutcome, CliError> {
    let m = cfg.perception.m;
    let mut oracle = oracle::for_video(cfg, video, position, None)?;
    let perception = match cache {
        Some(c) => {
            let mut guard = c.lock().unwrap_or_else(|e| e.into_inner());
            run_perception_cached(
                video,
                m,
                cfg.perception.anchor,
                &mut oracle,
                Some(&mut guard),
            )?
        }
        None => run_perception_cached(video, m, cfg.perception.anchor, &mut oracle, None)?,
    };
    let ranking = rank_video(&perception, &cfg.ranking.core, &mut oracle)?;
    let gt = video.gt();
    let raw = raw_weights(&perception);
    let eval =
        |w: &[f64]| MetricReport::evaluate(w, &gt).map_err(|e| CliError::Simulation(e.to_string()));
    let m_raw = eval(raw.values())?;
    let m_ranked = eval(ranking.normalized_weights.values())?;
    let m_smooth = eval(ranking.smoothed_weights.values())?;

    let windows = video.len().div_ceil(m);
    let bound = recurrence_t(windows as u64);
    let ledger = oracle.ledger();
    let calls = CallsRow {
        video_id: video.video_id.clone(),
        chunks: video.len(),
        m,
        windows,
        perception_calls: ledger.rate_calls,
        ranking_calls: ranking.sort_calls_used,
        ranking_bound: bound,
        within_bound: ranking.sort_calls_used <= bound,
        tokens_estimate: ledger.total_tokens_estimate,
    };
    let curve = (0..video.len())
        .map(|i| CurveRow {
            video_id: video.video_id.clone(),
            chunk_index: i,
            raw: raw.values()[i],
            ranked: ranking.normalized_weights.values()[i],
            smoothed: ranking.smoothed_weights.values()[i],
            gt: gt[i],
        })
        .collect();
    let kernel = cfg.ranking.core.kernel_size.unwrap_or(video.len());
    let sigma = sigma_sweep(
        ranking.normalized_weights.values(),
        &gt,
        &cfg.ranking.sigma_sweep,
        kernel,
    )?
    .into_iter()
    .map(|(s, r)| SigmaRow {
        video_id: video.video_id.clone(),
        sigma: s,
        plcc: r.plcc,
        srcc: r.srcc,
    })
    .collect();
    let mut qoe = Vec::new();
    for (name, trace) in traces {
        let mut w = StaticWeights(ranking.smoothed_weights.values().to_vec());
        qoe.extend(qoe_rows(cfg, video, name, trace, &mut w)?);
    }
    Ok(VideoOutcome {
        row: MetricsRow::new(
            video.video_id.clone(),
            video.len(),
            &m_raw,
            &m_ranked,
            &m_smooth,
        ),
        metrics: (m_raw, m_ranked, m_smooth),
        calls,
        curve,
        sigma,
        qoe,
    })
}

/// Runs every video; a failing video is reported and skipped. Fails only
/// when no video succeeds.
pub fn run_vod(cfg: &ExperimentConfig) -> Result<VodSummary, CliError> {
    let videos = dataset::videos(cfg)?;
    let traces = dataset::traces(cfg)?;
    let cache = match &cfg.oracle.cache {
        Some(p) => Some(Mutex::new(
            ResponseCache::open(p).map_err(|e| CliError::Config(e.to_string()))?,
        )),
        None => None,
    };
    let results: Vec<Result<VideoOutcome, CliError>> = pool(cfg)?.install(|| {
        videos
            .par_iter()
            .enumerate()
            .map(|(i, v)| one_video(cfg, v, i, &traces, cache.as_ref()))
            .collect()
    });

    let mut ok = Vec::new();
    let mut failures = Vec::new();
    let mut last_err = None;
    for (v, r) in videos.iter().zip(results) {
        match r {
            Ok(o) => ok.push(o),
            Err(e) => {
                log::error!("video {}: {e}", v.video_id);
                failures.push(FailureRow {
                    video_id: v.video_id.clone(),
                    error: e.to_string(),
                });
                last_err = Some(e);
            }
        }
    }
    if ok.is_empty() {
        return Err(last_err.unwrap_or_else(|| CliError::Config("dataset has no videos".into())));
    }

    let mut metrics: Vec<MetricsRow> = ok.iter().map(|o| o.row.clone()).collect();
    let stage = |f: fn(&VideoOutcome) -> &MetricReport| {
        mean_reports(&ok.iter().map(|o| f(o).clone()).collect::<Vec<_>>()).expect("non-empty")
    };
    let mut mean_row = MetricsRow::new(
        "mean".into(),
        ok.iter().map(|o| o.row.chunks).sum::<usize>() / ok.len(),
        &stage(|o| &o.metrics.0),
        &stage(|o| &o.metrics.1),
        &stage(|o| &o.metrics.2),
    );
    mean_row.ranked_beats_raw = Some(ok.iter().all(|o| o.row.ranked_beats_raw == Some(true)));
    metrics.push(mean_row);
    let calls: Vec<CallsRow> = ok.iter().map(|o| o.calls.clone()).collect();

    let dir = &cfg.out_dir;
    let mut out = Outputs::default();
    let (seed, mode) = (cfg.seed, "vod");
    write_csv(&out.push(dir.join("vod_metrics.csv")), seed, mode, &metrics)?;
    write_csv(&out.push(dir.join("vod_calls.csv")), seed, mode, &calls)?;
    let curves: Vec<&CurveRow> = ok.iter().flat_map(|o| &o.curve).collect();
    write_csv(&out.push(dir.join("vod_weights.csv")), seed, mode, &curves)?;
    let sigma: Vec<&SigmaRow> = ok.iter().flat_map(|o| &o.sigma).collect();
    write_csv(
        &out.push(dir.join("vod_sigma_sweep.csv")),
        seed,
        mode,
        &sigma,
    )?;
    let qoe: Vec<&QoeRow> = ok.iter().flat_map(|o| &o.qoe).collect();
    write_csv(&out.push(dir.join("vod_qoe.csv")), seed, mode, &qoe)?;
    if !failures.is_empty() {
        write_csv(
            &out.push(dir.join("vod_failures.csv")),
            seed,
            mode,
            &failures,
        )?;
    }
    Ok(VodSummary {
        videos: videos.len(),
        failed: failures.len(),
        metrics,
        calls,
        outputs: out,
    })
}
