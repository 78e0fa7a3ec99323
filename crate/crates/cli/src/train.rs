//! Trains one forecaster per output length on the training split, checks
//! its gradients, then saves it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use salstream_core::forecast::{
    evaluate, gradient_check, train, windows_from_video, ForecastModel, Sample,
};
use salstream_core::live::model_file_name;
use salstream_core::model::VideoRecord;
use salstream_core::rng::{derive_seed, tags};

use crate::config::ExperimentConfig;
use crate::dataset::{self, Split};
use crate::error::CliError;
use crate::pool;
use crate::report::{write_csv, Outputs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub video_id: String,
    pub split: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub l_out: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_plcc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradRow {
    pub l_out: usize,
    pub param: String,
    pub max_rel_err: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub l_out: usize,
    pub kind: String,
    pub file: String,
    pub train_windows: usize,
    pub val_windows: usize,
    pub test_windows: usize,
    pub best_epoch: usize,
    pub test_loss: Option<f64>,
    pub test_mse: Option<f64>,
    pub test_plcc: Option<f64>,
    pub flat_targets: u64,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub models: Vec<ModelRow>,
    pub grad_max_rel_err: f64,
    pub outputs: Outputs,
}

/// Training windows over a set of videos. Inputs use the ground-truth
/// series; the targets are the following `l_out` ground-truth weights.
pub fn samples(videos: &[&VideoRecord], l_in: usize, l_out: usize, stride: usize) -> Vec<Sample> {
    videos
        .iter()
        .flat_map(|v| windows_from_video(v, &v.gt(), l_in, l_out, stride))
        .collect()
}

struct Trained {
    row: ModelRow,
    curve: Vec<CurveRow>,
    grads: Vec<GradRow>,
    max_rel: f64,
    model: ForecastModel,
}

fn train_one(
    cfg: &ExperimentConfig,
    l_out: usize,
    sets: [&[&VideoRecord]; 3],
) -> Result<Trained, CliError> {
    let m = cfg.perception.m;
    let [tr, va, te] = sets.map(|s| samples(s, m, l_out, cfg.forecast.stride));
    if tr.is_empty() {
        return Err(CliError::Training(format!(
            "l_out {l_out}: no training windows (videos shorter than {} chunks)",
            m + l_out
        )));
    }
    let hyper = cfg.hyper(l_out);
    let init = ForecastModel::init(
        cfg.forecast.kind,
        hyper,
        derive_seed(cfg.seed, tags::INIT, l_out as u64),
    )?;
    let tc = cfg.train_config();
    let outcome = train(init, &tr, &va, &tc)?;

    let k = cfg.forecast.grad_check_samples.min(tr.len());
    let report = gradient_check(&outcome.model, &tr[..k], tc.lambda, 1e-5)?;
    let tol = cfg.forecast.grad_check_tol;
    let grads = report
        .per_param
        .iter()
        .map(|(p, e)| GradRow {
            l_out,
            param: p.clone(),
            max_rel_err: *e,
            passed: *e < tol,
        })
        .collect();
    report.ensure_below(tol)?;

    let test = if te.is_empty() {
        None
    } else {
        Some(evaluate(&outcome.model, &te, tc.lambda)?)
    };
    let file = model_file_name(&cfg.forecast.prefix, l_out);
    Ok(Trained {
        row: ModelRow {
            l_out,
            kind: serde_json::to_value(cfg.forecast.kind)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            file,
            train_windows: tr.len(),
            val_windows: va.len(),
            test_windows: te.len(),
            best_epoch: outcome.best_epoch,
            test_loss: test.map(|t| t.loss),
            test_mse: test.map(|t| t.mse),
            test_plcc: test.and_then(|t| t.plcc),
            flat_targets: outcome.diagnostics.flat_targets,
        },
        curve: outcome
            .curve
            .iter()
            .map(|e| CurveRow {
                l_out,
                epoch: e.epoch,
                train_loss: e.train_loss,
                val_loss: e.val_loss,
                val_plcc: e.val_plcc,
            })
            .collect(),
        grads,
        max_rel: report.max_rel_err,
        model: outcome.model,
    })
}

/// Trains every configured output length. Nothing is saved unless every
/// model passes its gradient check.
pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainSummary, CliError> {
    let videos = dataset::videos(cfg)?;
    let split = dataset::split(videos.len(), cfg.data.split, cfg.seed);
    let pick = |k: Split| -> Vec<&VideoRecord> {
        videos
            .iter()
            .zip(&split)
            .filter(|(_, s)| **s == k)
            .map(|(v, _)| v)
            .collect()
    };
    let (tr, va, te) = (pick(Split::Train), pick(Split::Val), pick(Split::Test));
    let outputs = cfg.pretrained_outputs();
    let results: Vec<Result<Trained, CliError>> = pool(cfg)?.install(|| {
        outputs
            .par_iter()
            .map(|&l| train_one(cfg, l, [&tr, &va, &te]))
            .collect()
    });
    let trained = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let dir = &cfg.out_dir;
    let model_dir = cfg.model_dir();
    std::fs::create_dir_all(&model_dir)?;
    let mut out = Outputs::default();
    for t in &trained {
        let p = out.push(model_dir.join(&t.row.file));
        t.model.save(&p)?;
    }
    let (seed, mode) = (cfg.seed, "train");
    let split_rows: Vec<SplitRow> = videos
        .iter()
        .zip(&split)
        .map(|(v, s)| SplitRow {
            video_id: v.video_id.clone(),
            split: s.name().into(),
        })
        .collect();
    write_csv(
        &out.push(dir.join("train_split.csv")),
        seed,
        mode,
        &split_rows,
    )?;
    let curve: Vec<&CurveRow> = trained.iter().flat_map(|t| &t.curve).collect();
    write_csv(&out.push(dir.join("train_curve.csv")), seed, mode, &curve)?;
    let grads: Vec<&GradRow> = trained.iter().flat_map(|t| &t.grads).collect();
    write_csv(
        &out.push(dir.join("train_gradcheck.csv")),
        seed,
        mode,
        &grads,
    )?;
    let models: Vec<ModelRow> = trained.iter().map(|t| t.row.clone()).collect();
    write_csv(&out.push(dir.join("train_models.csv")), seed, mode, &models)?;
    Ok(TrainSummary {
        grad_max_rel_err: trained.iter().map(|t| t.max_rel).fold(0.0, f64::max),
        models,
        outputs: out,
    })
}
