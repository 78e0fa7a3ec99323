//! Trace-driven chunk download simulation with a weighted-QoE model
//! predictive controller.

mod controller;
mod session;
mod trace;

pub use controller::{
    harmonic_mean, mpc_decide, mpc_decide_unweighted, mpc_plan, mpc_plan_unweighted, BufferBased,
    Controller, DecisionContext, RateBased, RobustMpc, ThroughputEstimator,
};
pub use session::{
    simulate_session, ChunkRow, SessionConfig, SessionReport, StaticWeights, UniformWeights,
    WeightSource,
};
pub use trace::NetworkTrace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AbrError {
    #[error("bitrate ladder must be non-empty, positive and strictly ascending")]
    BadLadder,
    #[error("trace line {line}: {msg}")]
    TraceParse { line: usize, msg: String },
    #[error("trace: {0}")]
    BadTrace(String),
    #[error("length mismatch: {decisions} decisions vs {weights} weights")]
    LengthMismatch { decisions: usize, weights: usize },
    #[error("invalid parameter: {0}")]
    BadParam(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BitrateLadder {
    levels: Vec<f64>,
}

impl BitrateLadder {
    pub fn new(levels_kbps: Vec<f64>) -> Result<Self, AbrError> {
        let ok = !levels_kbps.is_empty()
            && levels_kbps.iter().all(|&l| l > 0.0 && l.is_finite())
            && levels_kbps.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(Self {
                levels: levels_kbps,
            })
        } else {
            Err(AbrError::BadLadder)
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn kbps(&self, level: usize) -> f64 {
        self.levels[level]
    }

    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }
}

impl Default for BitrateLadder {
    fn default() -> Self {
        Self {
            levels: vec![300.0, 750.0, 1200.0, 1850.0, 2850.0, 4300.0],
        }
    }
}

impl TryFrom<Vec<f64>> for BitrateLadder {
    type Error = AbrError;

    fn try_from(v: Vec<f64>) -> Result<Self, AbrError> {
        Self::new(v)
    }
}

impl From<BitrateLadder> for Vec<f64> {
    fn from(l: BitrateLadder) -> Self {
        l.levels
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityMap {
    /// Bitrate in Mbps.
    #[default]
    Linear,
    /// `ln(bitrate / lowest bitrate)`.
    Log,
}

/// Which part of the per-chunk QoE a weight multiplies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScope {
    /// `w·(quality − rebuffer − smoothness)`.
    #[default]
    Full,
    /// `w·quality − rebuffer − smoothness`.
    QualityOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QoeParams {
    /// Penalty per second of stall.
    pub rebuffer_penalty: f64,
    /// Penalty per unit of quality change between consecutive chunks.
    pub smoothness_penalty: f64,
    pub quality_map: QualityMap,
    pub weight_scope: WeightScope,
}

impl Default for QoeParams {
    fn default() -> Self {
        Self {
            rebuffer_penalty: 4.3,
            smoothness_penalty: 1.0,
            quality_map: QualityMap::Linear,
            weight_scope: WeightScope::Full,
        }
    }
}

impl QoeParams {
    pub fn validate(&self) -> Result<(), AbrError> {
        for (name, v) in [
            ("rebuffer_penalty", self.rebuffer_penalty),
            ("smoothness_penalty", self.smoothness_penalty),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(AbrError::BadParam(format!("{name} = {v}")));
            }
        }
        Ok(())
    }

    pub fn quality(&self, ladder: &BitrateLadder, level: usize) -> f64 {
        let kbps = ladder.kbps(level);
        match self.quality_map {
            QualityMap::Linear => kbps / 1000.0,
            QualityMap::Log => (kbps / ladder.kbps(0)).ln(),
        }
    }

    /// Components of one chunk's QoE before weighting.
    pub fn chunk_terms(
        &self,
        ladder: &BitrateLadder,
        level: usize,
        prev_level: Option<usize>,
        rebuffer_s: f64,
    ) -> ChunkTerms {
        let quality = self.quality(ladder, level);
        let smooth = prev_level
            .map(|p| (quality - self.quality(ladder, p)).abs())
            .unwrap_or(0.0);
        ChunkTerms {
            quality,
            rebuffer_cost: self.rebuffer_penalty * rebuffer_s,
            smoothness_cost: self.smoothness_penalty * smooth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChunkTerms {
    pub quality: f64,
    pub rebuffer_cost: f64,
    pub smoothness_cost: f64,
}

impl ChunkTerms {
    pub fn unweighted(&self) -> f64 {
        self.quality - self.rebuffer_cost - self.smoothness_cost
    }

    pub fn weighted(&self, w: f64, scope: WeightScope) -> f64 {
        match scope {
            WeightScope::Full => w * self.unweighted(),
            WeightScope::QualityOnly => {
                w * self.quality - self.rebuffer_cost - self.smoothness_cost
            }
        }
    }
}

/// One downloaded chunk: chosen level and stall incurred before it played.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub level: usize,
    pub rebuffer_s: f64,
}

/// `Σ w_i · q_i` over a session. The first chunk has no smoothness term.
pub fn weighted_qoe(
    decisions: &[Decision],
    weights: &[f64],
    ladder: &BitrateLadder,
    params: &QoeParams,
) -> Result<f64, AbrError> {
    if decisions.len() != weights.len() {
        return Err(AbrError::LengthMismatch {
            decisions: decisions.len(),
            weights: weights.len(),
        });
    }
    let mut prev = None;
    let mut total = 0.0;
    for (d, &w) in decisions.iter().zip(weights) {
        total += params
            .chunk_terms(ladder, d.level, prev, d.rebuffer_s)
            .weighted(w, params.weight_scope);
        prev = Some(d.level);
    }
    Ok(total)
}

/// Plain QoE sum, every chunk counted once.
pub fn unweighted_qoe(decisions: &[Decision], ladder: &BitrateLadder, params: &QoeParams) -> f64 {
    let mut prev = None;
    let mut total = 0.0;
    for d in decisions {
        total += params
            .chunk_terms(ladder, d.level, prev, d.rebuffer_s)
            .unweighted();
        prev = Some(d.level);
    }
    total
}
