//! Sliding-window rating: walk the video in windows of `m` chunks, thread the
//! running summary from one window to the next, and collect the raw ratings.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{VideoRecord, WeightSeries};
use crate::rater::{Oracle, OracleError, WindowRequest, WindowResponse};

/// Which frame of a chunk represents it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorFrame {
    #[default]
    First,
    Middle,
    Last,
}

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error("video {0} has no chunks")]
    EmptyVideo(String),
    #[error("window {window}: {source}")]
    Oracle {
        window: usize,
        #[source]
        source: OracleError,
    },
    #[error("window {window}: oracle returned {got} ratings for {expected} frames")]
    RatingCount {
        window: usize,
        got: usize,
        expected: usize,
    },
    #[error("response cache {path}: {message}")]
    Cache { path: PathBuf, message: String },
}

impl PerceptionError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, Self::Oracle { source, .. } if source.is_retriable())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionResult {
    pub raw_ratings: Vec<u8>,
    /// Running summary after each window; the last one is the global summary.
    pub summaries: Vec<String>,
    pub window_length: usize,
    pub responses: Vec<WindowResponse>,
}

impl PerceptionResult {
    pub fn global_summary(&self) -> &str {
        self.summaries.last().map_or("", String::as_str)
    }

    pub fn len(&self) -> usize {
        self.raw_ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_ratings.is_empty()
    }
}

/// Chunk ranges of the `⌈D/m⌉` windows; the last one may be short.
pub fn window_ranges(len: usize, m: usize) -> Vec<Range<usize>> {
    assert!(m >= 1, "window length must be positive");
    (0..len.div_ceil(m))
        .map(|k| k * m..((k + 1) * m).min(len))
        .collect()
}

/// One cached window response, keyed by `(video_id, window_index)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub video_id: String,
    pub window_index: usize,
    pub frame_indices: Vec<usize>,
    pub ratings: Vec<u8>,
    pub partial_summary: String,
    pub total_summary: String,
    pub latency_s: f64,
}

impl CacheRecord {
    fn response(&self) -> WindowResponse {
        WindowResponse {
            ratings: self.ratings.clone(),
            partial_summary: self.partial_summary.clone(),
            total_summary: self.total_summary.clone(),
            latency_s: self.latency_s,
        }
    }
}

/// JSON-lines store of window responses so an interrupted run can resume
/// without repeating oracle calls.
#[derive(Debug, Default)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    records: HashMap<(String, usize), CacheRecord>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or starts) a cache file. Later records for the same key win.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PerceptionError> {
        let path = path.as_ref().to_path_buf();
        let cache_err = |message: String| PerceptionError::Cache {
            path: path.clone(),
            message,
        };
        let mut records = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(|e| cache_err(e.to_string()))?;
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| cache_err(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord = serde_json::from_str(&line)
                    .map_err(|e| cache_err(format!("line {}: {e}", n + 1)))?;
                records.insert((rec.video_id.clone(), rec.window_index), rec);
            }
        }
        Ok(Self {
            path: Some(path),
            records,
        })
    }

    pub fn get(&self, video_id: &str, window_index: usize) -> Option<&CacheRecord> {
        self.records.get(&(video_id.to_string(), window_index))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn insert(&mut self, rec: CacheRecord) -> Result<(), PerceptionError> {
        if let Some(path) = &self.path {
            let cache_err = |e: std::io::Error| PerceptionError::Cache {
                path: path.clone(),
                message: e.to_string(),
            };
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(cache_err)?;
            let line = serde_json::to_string(&rec).expect("cache record serializes");
            writeln!(f, "{line}").map_err(cache_err)?;
        }
        self.records
            .insert((rec.video_id.clone(), rec.window_index), rec);
        Ok(())
    }
}

pub fn run_perception<O: Oracle + ?Sized>(
    video: &VideoRecord,
    m: usize,
    oracle: &mut O,
) -> Result<PerceptionResult, PerceptionError> {
    run_perception_cached(video, m, AnchorFrame::First, oracle, None)
}

/// Rates every window in order. Window `k`'s request carries window
/// `k-1`'s total summary (the title for `k = 0`). Windows already present in
/// `cache` with matching frames are reused without an oracle call.
pub fn run_perception_cached<O: Oracle + ?Sized>(
    video: &VideoRecord,
    m: usize,
    anchor: AnchorFrame,
    oracle: &mut O,
    mut cache: Option<&mut ResponseCache>,
) -> Result<PerceptionResult, PerceptionError> {
    if m == 0 {
        return Err(PerceptionError::ZeroWindow);
    }
    if video.is_empty() {
        return Err(PerceptionError::EmptyVideo(video.video_id.clone()));
    }
    let ranges = window_ranges(video.len(), m);
    let mut raw_ratings = Vec::with_capacity(video.len());
    let mut summaries = Vec::with_capacity(ranges.len());
    let mut responses = Vec::with_capacity(ranges.len());
    let mut prev_summary = video.title_info.clone();

    for (k, range) in ranges.into_iter().enumerate() {
        let frames: Vec<usize> = range.collect();
        let cached = cache
            .as_deref()
            .and_then(|c| c.get(&video.video_id, k))
            .filter(|r| r.frame_indices == frames && r.ratings.len() == frames.len())
            .map(CacheRecord::response);
        let response = match cached {
            Some(r) => r,
            None => {
                let req = WindowRequest {
                    window_index: k,
                    frame_indices: frames.clone(),
                    prev_summary: prev_summary.clone(),
                    video_info: video.title_info.clone(),
                    anchor,
                };
                let r = oracle
                    .rate_window(&req)
                    .map_err(|source| PerceptionError::Oracle { window: k, source })?;
                if r.ratings.len() != frames.len() {
                    return Err(PerceptionError::RatingCount {
                        window: k,
                        got: r.ratings.len(),
                        expected: frames.len(),
                    });
                }
                if let Some(c) = cache.as_deref_mut() {
                    c.insert(CacheRecord {
                        video_id: video.video_id.clone(),
                        window_index: k,
                        frame_indices: frames.clone(),
                        ratings: r.ratings.clone(),
                        partial_summary: r.partial_summary.clone(),
                        total_summary: r.total_summary.clone(),
                        latency_s: r.latency_s,
                    })?;
                }
                r
            }
        };
        raw_ratings.extend_from_slice(&response.ratings);
        prev_summary = response.total_summary.clone();
        summaries.push(response.total_summary.clone());
        responses.push(response);
    }

    Ok(PerceptionResult {
        raw_ratings,
        summaries,
        window_length: m,
        responses,
    })
}

/// Ratings rescaled to `[0, 1]` with no cross-window correction.
pub fn raw_weights(p: &PerceptionResult) -> WeightSeries {
    WeightSeries::clamped(p.raw_ratings.iter().map(|&r| f64::from(r) / 100.0))
}
