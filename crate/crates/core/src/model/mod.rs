//! Domain types shared across the pipeline, plus the evaluation metrics.

mod metrics;

pub use metrics::{
    average_ranks, mae_rmse, mean_ap, mean_reports, plcc, srcc, MetricError, MetricReport,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default dimensionality of frame / text embeddings.
pub const DEFAULT_EMBEDDING_DIM: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("chunk {index}: duration must be positive, got {duration}")]
    BadDuration { index: usize, duration: f64 },
    #[error("chunk {index}: saliency {value} outside [0, 1]")]
    SaliencyOutOfRange { index: usize, value: f64 },
    #[error("chunk {index}: embedding has length {got}, expected {expected}")]
    EmbeddingDim {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("video has no chunks")]
    EmptyVideo,
    #[error("chunk {index} has ordinal {got}; chunks must be numbered 0..D")]
    ChunkOrdinal { index: usize, got: usize },
    #[error("chunk durations differ within one video ({first} vs {other})")]
    UnequalDurations { first: f64, other: f64 },
    #[error("weight {value} at position {index} is not a finite value in [0, 1]")]
    WeightOutOfRange { index: usize, value: f64 },
}

/// One fixed-duration video chunk, represented by its anchor frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub index: usize,
    pub duration_s: f64,
    pub gt_saliency: f64,
    /// Precomputed image feature of the anchor frame.
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    /// Title and background text used to seed the running summary.
    pub title_info: String,
    pub chunks: Vec<ChunkRecord>,
    /// Precomputed text feature of the video summary.
    pub text_embedding: Vec<f64>,
}

impl VideoRecord {
    /// Checks the per-video invariants: non-empty, ordinals `0..D`, equal
    /// positive durations, saliency in `[0, 1]`, one embedding dimension.
    pub fn validate(&self) -> Result<(), ModelError> {
        let first = self.chunks.first().ok_or(ModelError::EmptyVideo)?;
        let dim = self.text_embedding.len();
        for (i, c) in self.chunks.iter().enumerate() {
            if c.index != i {
                return Err(ModelError::ChunkOrdinal {
                    index: i,
                    got: c.index,
                });
            }
            if !(c.duration_s > 0.0) || !c.duration_s.is_finite() {
                return Err(ModelError::BadDuration {
                    index: i,
                    duration: c.duration_s,
                });
            }
            if c.duration_s != first.duration_s {
                return Err(ModelError::UnequalDurations {
                    first: first.duration_s,
                    other: c.duration_s,
                });
            }
            if !(0.0..=1.0).contains(&c.gt_saliency) {
                return Err(ModelError::SaliencyOutOfRange {
                    index: i,
                    value: c.gt_saliency,
                });
            }
            if c.embedding.len() != dim {
                return Err(ModelError::EmbeddingDim {
                    index: i,
                    got: c.embedding.len(),
                    expected: dim,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunk_duration(&self) -> f64 {
        self.chunks.first().map_or(1.0, |c| c.duration_s)
    }

    pub fn embedding_dim(&self) -> usize {
        self.text_embedding.len()
    }

    pub fn gt(&self) -> Vec<f64> {
        self.chunks.iter().map(|c| c.gt_saliency).collect()
    }
}

/// Per-chunk weights, each a finite value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightSeries(Vec<f64>);

impl WeightSeries {
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(ModelError::WeightOutOfRange { index, value });
        }
        Ok(Self(values))
    }

    /// Builds a series by clamping every value into `[0, 1]`; NaN maps to 0.
    pub fn clamped(values: impl IntoIterator<Item = f64>) -> Self {
        Self(
            values
                .into_iter()
                .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
                .collect(),
        )
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.0.get(i).copied()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for WeightSeries {
    type Error = ModelError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<WeightSeries> for Vec<f64> {
    fn from(w: WeightSeries) -> Self {
        w.0
    }
}

impl AsRef<[f64]> for WeightSeries {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
