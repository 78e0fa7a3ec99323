//! Scores an arbitrary weight file against the dataset's ground truth.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use salstream_core::model::{mean_reports, MetricReport};

use crate::config::ExperimentConfig;
use crate::dataset;
use crate::error::CliError;
use crate::report::{write_csv, Outputs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub video_id: String,
    pub chunks: usize,
    pub plcc: Option<f64>,
    pub srcc: Option<f64>,
    pub map50: f64,
    pub map15: f64,
    pub mae: f64,
    pub rmse: f64,
}

impl MetricRow {
    fn new(video_id: String, chunks: usize, r: &MetricReport) -> Self {
        Self {
            video_id,
            chunks,
            plcc: r.plcc,
            srcc: r.srcc,
            map50: r.map50,
            map15: r.map15,
            mae: r.mae,
            rmse: r.rmse,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MetricsSummary {
    pub rows: Vec<MetricRow>,
    pub outputs: Outputs,
}

/// Reads `video_id`, `chunk_index` and the named weight column from
/// `weights` (other columns are ignored) and evaluates every video it
/// covers. The last row holds the means.
pub fn run_metrics(
    cfg: &ExperimentConfig,
    weights: &Path,
    column: &str,
) -> Result<MetricsSummary, CliError> {
    let videos = dataset::videos(cfg)?;
    let shown = weights.display().to_string();
    let err = |line: u64, msg: String| CliError::Dataset {
        path: shown.clone(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(weights)
        .map_err(|e| err(0, e.to_string()))?;
    let headers = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let col = |n: &str| headers.iter().position(|h| h == n);
    let (Some(c_id), Some(c_idx), Some(c_w)) = (col("video_id"), col("chunk_index"), col(column))
    else {
        return Err(err(
            1,
            format!("header must contain video_id, chunk_index and {column}"),
        ));
    };
    let mut got: HashMap<String, Vec<Option<f64>>> = HashMap::new();
    let lens: HashMap<&str, usize> = videos
        .iter()
        .map(|v| (v.video_id.as_str(), v.len()))
        .collect();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = &rec[c_id];
        let Some(&len) = lens.get(id) else {
            return Err(err(line, format!("unknown video {id}")));
        };
        let idx: usize = rec[c_idx]
            .parse()
            .ok()
            .filter(|&i| i < len)
            .ok_or_else(|| err(line, format!("chunk_index {:?} out of range", &rec[c_idx])))?;
        let w: f64 = rec[c_w]
            .parse()
            .ok()
            .filter(|w: &f64| w.is_finite())
            .ok_or_else(|| err(line, format!("{column} {:?} is not a number", &rec[c_w])))?;
        got.entry(id.to_string()).or_insert_with(|| vec![None; len])[idx] = Some(w);
    }

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for v in &videos {
        let Some(w) = got.get(&v.video_id) else {
            continue;
        };
        let Some(w) = w.iter().copied().collect::<Option<Vec<f64>>>() else {
            return Err(CliError::Config(format!(
                "{shown}: video {} is missing chunks",
                v.video_id
            )));
        };
        let r =
            MetricReport::evaluate(&w, &v.gt()).map_err(|e| CliError::Simulation(e.to_string()))?;
        rows.push(MetricRow::new(v.video_id.clone(), v.len(), &r));
        reports.push(r);
    }
    let Some(mean) = mean_reports(&reports) else {
        return Err(CliError::Config(format!(
            "{shown}: no rows match the dataset"
        )));
    };
    let total: usize = rows.iter().map(|r| r.chunks).sum();
    rows.push(MetricRow::new("mean".into(), total / reports.len(), &mean));

    let mut out = Outputs::default();
    write_csv(
        &out.push(cfg.out_dir.join("metrics.csv")),
        cfg.seed,
        "metrics",
        &rows,
    )?;
    Ok(MetricsSummary { rows, outputs: out })
}
