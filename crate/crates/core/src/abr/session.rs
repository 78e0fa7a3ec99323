use serde::{Deserialize, Serialize};

use super::{
    unweighted_qoe, weighted_qoe, AbrError, BitrateLadder, Controller, Decision, DecisionContext,
    NetworkTrace, QoeParams, ThroughputEstimator,
};

/// Supplies the weights a controller sees for the chunks about to be
/// fetched.
pub trait WeightSource {
    /// Weights for chunks `next..next + n`, shorter at the end of the video.
    fn weights_ahead(&mut self, next: usize, n: usize) -> Vec<f64>;
}

/// Every chunk weighs 1.
#[derive(Debug, Clone, Copy)]
pub struct UniformWeights {
    pub len: usize,
}

impl WeightSource for UniformWeights {
    fn weights_ahead(&mut self, next: usize, n: usize) -> Vec<f64> {
        vec![1.0; n.min(self.len.saturating_sub(next))]
    }
}

/// Weights known in advance for the whole video.
#[derive(Debug, Clone)]
pub struct StaticWeights(pub Vec<f64>);

impl WeightSource for StaticWeights {
    fn weights_ahead(&mut self, next: usize, n: usize) -> Vec<f64> {
        let end = (next + n).min(self.0.len());
        self.0
            .get(next..end)
            .map(<[f64]>::to_vec)
            .unwrap_or_default()
    }
}

impl<W: WeightSource + ?Sized> WeightSource for &mut W {
    fn weights_ahead(&mut self, next: usize, n: usize) -> Vec<f64> {
        (**self).weights_ahead(next, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub chunk_s: f64,
    pub horizon: usize,
    pub buffer_cap_s: f64,
    /// Throughput samples used by the predictor.
    pub history: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            chunk_s: 1.0,
            horizon: 5,
            buffer_cap_s: 60.0,
            history: 5,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), AbrError> {
        if !(self.chunk_s > 0.0 && self.chunk_s.is_finite()) {
            return Err(AbrError::BadParam(format!("chunk_s = {}", self.chunk_s)));
        }
        if self.horizon == 0 || self.history == 0 {
            return Err(AbrError::BadParam(
                "horizon and history must be at least 1".into(),
            ));
        }
        if !(self.buffer_cap_s >= self.chunk_s) {
            return Err(AbrError::BadParam(format!(
                "buffer_cap_s = {}",
                self.buffer_cap_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkRow {
    pub index: usize,
    pub level: usize,
    pub bitrate_kbps: f64,
    /// Session clock when the download started.
    pub start_s: f64,
    pub download_s: f64,
    pub rebuffer_s: f64,
    /// Buffer after the chunk arrived.
    pub buffer_s: f64,
    /// Weight the session is scored with.
    pub weight: f64,
    /// Unweighted QoE of this chunk.
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub controller: String,
    pub rows: Vec<ChunkRow>,
    /// Time until the first chunk arrived; not counted as rebuffering.
    pub startup_s: f64,
    pub total_rebuffer_s: f64,
    pub weighted_qoe: f64,
    pub unweighted_qoe: f64,
}

impl SessionReport {
    pub fn decisions(&self) -> Vec<Decision> {
        self.rows
            .iter()
            .map(|r| Decision {
                level: r.level,
                rebuffer_s: r.rebuffer_s,
            })
            .collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.weight).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Downloads `eval_weights.len()` chunks back to back over `trace`.
///
/// Playback starts once the first chunk arrives. A later download longer
/// than the buffer stalls for the difference. When the buffer would exceed
/// its cap the client idles until it drains back. The controller sees
/// weights from `source`; the session is scored with `eval_weights`.
pub fn simulate_session<C: Controller + ?Sized, W: WeightSource + ?Sized>(
    ladder: &BitrateLadder,
    trace: &NetworkTrace,
    params: &QoeParams,
    cfg: &SessionConfig,
    controller: &mut C,
    source: &mut W,
    eval_weights: &[f64],
) -> Result<SessionReport, AbrError> {
    cfg.validate()?;
    params.validate()?;
    let mut estimator = ThroughputEstimator::new(cfg.history);
    let (mut clock, mut buffer) = (0.0f64, 0.0f64);
    let mut last_level = None;
    let mut startup_s = 0.0;
    let mut rows = Vec::with_capacity(eval_weights.len());

    for (index, &weight) in eval_weights.iter().enumerate() {
        let ahead = source.weights_ahead(index, cfg.horizon);
        let prediction = estimator.predict();
        let ctx = DecisionContext {
            chunk_index: index,
            buffer_s: buffer,
            last_level,
            weights_ahead: &ahead,
            harmonic_kbps: prediction.map(|p| p.0),
            robust_kbps: prediction.map(|p| p.1),
            chunk_s: cfg.chunk_s,
            ladder,
            params,
        };
        let level = controller.decide(&ctx).min(ladder.top());
        let kilobits = ladder.kbps(level) * cfg.chunk_s;
        let start_s = clock;
        let download_s = trace.download_time(kilobits, clock);
        clock += download_s;

        let rebuffer_s = if index == 0 {
            startup_s = download_s;
            0.0
        } else if download_s > buffer {
            download_s - buffer
        } else {
            0.0
        };
        buffer = (buffer - download_s).max(0.0) + cfg.chunk_s;
        if buffer > cfg.buffer_cap_s {
            clock += buffer - cfg.buffer_cap_s;
            buffer = cfg.buffer_cap_s;
        }
        estimator.observe(kilobits / download_s);

        let q = params
            .chunk_terms(ladder, level, last_level, rebuffer_s)
            .unweighted();
        rows.push(ChunkRow {
            index,
            level,
            bitrate_kbps: ladder.kbps(level),
            start_s,
            download_s,
            rebuffer_s,
            buffer_s: buffer,
            weight,
            q,
        });
        last_level = Some(level);
    }

    let decisions: Vec<Decision> = rows
        .iter()
        .map(|r| Decision {
            level: r.level,
            rebuffer_s: r.rebuffer_s,
        })
        .collect();
    Ok(SessionReport {
        controller: controller.name().to_string(),
        total_rebuffer_s: rows.iter().map(|r| r.rebuffer_s).sum(),
        weighted_qoe: weighted_qoe(&decisions, eval_weights, ladder, params)?,
        unweighted_qoe: unweighted_qoe(&decisions, ladder, params),
        startup_s,
        rows,
    })
}
