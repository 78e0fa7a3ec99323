//! On-demand re-ranking: merge the per-window sorted groups into one global
//! order using the oracle as a batched comparator, map rank positions to
//! weights, and smooth.

mod merge;
mod smooth;

pub use merge::{global_sort, merge_two, resume_sort, MergeProgress, SortError, SortState};
pub use smooth::{gaussian_kernel, gaussian_smooth};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MetricError, MetricReport, WeightSeries};
use crate::perception::{window_ranges, PerceptionResult};
use crate::rater::{Oracle, OracleError};

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("window length {0} too small to merge (need at least 2)")]
    WindowTooSmall(usize),
    #[error("smoothing sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("smoothing kernel size must be at least 1")]
    BadKernel,
    #[error("order is not a permutation of 0..{0}")]
    NotPermutation(usize),
    #[error(transparent)]
    Sort(#[from] Box<SortError>),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl From<SortError> for RankingError {
    fn from(e: SortError) -> Self {
        Self::Sort(Box::new(e))
    }
}

impl RankingError {
    pub fn oracle(&self) -> Option<&OracleError> {
        match self {
            Self::Sort(e) => Some(&e.source),
            _ => None,
        }
    }
}

/// Chunk ordinals, best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SortedGroup(pub Vec<usize>);

impl SortedGroup {
    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// How a seeded window group is admitted before merging.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafPolicy {
    /// Use the rating order as-is (ties broken by chunk index).
    TrustRatings,
    /// One oracle sort for groups whose ratings contain ties; others as-is.
    #[default]
    SortTies,
    /// One oracle sort for every group.
    SortAll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingConfig {
    pub sigma: f64,
    /// Smoothing kernel taps; `None` means the video length.
    pub kernel_size: Option<usize>,
    pub leaf_policy: LeafPolicy,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            sigma: 5.0,
            kernel_size: None,
            leaf_policy: LeafPolicy::SortTies,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    /// Permutation of `0..D`, best first.
    pub global_order: Vec<usize>,
    pub normalized_weights: WeightSeries,
    pub smoothed_weights: WeightSeries,
    pub sort_calls_used: u64,
}

/// One group per perception window, ordered by raw rating descending with
/// ties going to the lower chunk index. Makes no oracle calls.
pub fn seed_groups(p: &PerceptionResult) -> Vec<SortedGroup> {
    window_ranges(p.raw_ratings.len(), p.window_length.max(1))
        .into_iter()
        .map(|range| {
            let mut idx: Vec<usize> = range.collect();
            idx.sort_by(|&a, &b| p.raw_ratings[b].cmp(&p.raw_ratings[a]).then(a.cmp(&b)));
            SortedGroup(idx)
        })
        .collect()
}

/// Whether each seeded group contains tied ratings.
pub fn groups_with_ties(p: &PerceptionResult, groups: &[SortedGroup]) -> Vec<bool> {
    groups
        .iter()
        .map(|g| {
            g.0.windows(2)
                .any(|w| p.raw_ratings[w[0]] == p.raw_ratings[w[1]])
        })
        .collect()
}

/// Worst-case oracle calls to sort `k` groups:
/// `T(1) = 1`, `T(k) = T(⌊k/2⌋) + T(⌈k/2⌉) + 2k − 1`.
pub fn recurrence_t(k: u64) -> u64 {
    assert!(k >= 1, "group count must be positive");
    // (T(n), T(n+1)) from (T(j), T(j+1)) with j = ⌊n/2⌋
    fn pair(n: u64) -> (u64, u64) {
        if n == 1 {
            return (1, 5);
        }
        let j = n / 2;
        let (tj, tj1) = pair(j);
        if n.is_multiple_of(2) {
            (2 * tj + 4 * j - 1, tj + tj1 + 4 * j + 1)
        } else {
            (tj + tj1 + 4 * j + 1, 2 * tj1 + 4 * j + 3)
        }
    }
    pair(k).0
}

/// Weight `(D−1−p)/(D−1)` for the chunk at sorted position `p`; a single
/// chunk gets 1.
pub fn rank_to_weights(order: &[usize]) -> Result<WeightSeries, RankingError> {
    let d = order.len();
    let mut weights = vec![f64::NAN; d];
    for (pos, &chunk) in order.iter().enumerate() {
        if chunk >= d || !weights[chunk].is_nan() {
            return Err(RankingError::NotPermutation(d));
        }
        weights[chunk] = if d == 1 {
            1.0
        } else {
            (d - 1 - pos) as f64 / (d - 1) as f64
        };
    }
    Ok(WeightSeries::clamped(weights))
}

/// Perception result in, globally ranked and smoothed weights out.
pub fn rank_video<O: Oracle + ?Sized>(
    p: &PerceptionResult,
    cfg: &RankingConfig,
    oracle: &mut O,
) -> Result<RankingResult, RankingError> {
    let groups = seed_groups(p);
    let refine = match cfg.leaf_policy {
        LeafPolicy::TrustRatings => vec![false; groups.len()],
        LeafPolicy::SortTies => groups_with_ties(p, &groups),
        LeafPolicy::SortAll => vec![true; groups.len()],
    };
    let state = SortState::new(
        groups,
        refine,
        p.global_summary().to_string(),
        p.window_length,
    )?;
    let (global_order, sort_calls_used) = resume_sort(state, oracle)?;
    finish(global_order, sort_calls_used, cfg)
}

/// Weights and smoothing for an already computed global order.
pub fn finish(
    global_order: Vec<usize>,
    sort_calls_used: u64,
    cfg: &RankingConfig,
) -> Result<RankingResult, RankingError> {
    let normalized_weights = rank_to_weights(&global_order)?;
    let size = cfg.kernel_size.unwrap_or(global_order.len()).max(1);
    let smoothed_weights = gaussian_smooth(normalized_weights.values(), cfg.sigma, size)?;
    Ok(RankingResult {
        global_order,
        normalized_weights,
        smoothed_weights,
        sort_calls_used,
    })
}

/// Metrics of the smoothed rank weights for each smoothing width.
pub fn sigma_sweep(
    normalized: &[f64],
    gt: &[f64],
    sigmas: &[f64],
    kernel_size: usize,
) -> Result<Vec<(f64, MetricReport)>, RankingError> {
    sigmas
        .iter()
        .map(|&s| {
            let w = gaussian_smooth(normalized, s, kernel_size)?;
            Ok((s, MetricReport::evaluate(w.values(), gt)?))
        })
        .collect()
}
