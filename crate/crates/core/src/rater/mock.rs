use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    ensure_permutation, CallLedger, Oracle, OracleError, SortRequest, TokenCost, WindowRequest,
    WindowResponse,
};
use crate::model::VideoRecord;
use crate::rng::{stream_rng, tags};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockOracleConfig {
    /// Strength `A` of the per-window affine distortion: the slope is drawn
    /// from `[1-A, 1+A]` and the offset from `[-A, A]`.
    pub window_bias_amplitude: f64,
    /// Std of the additive rating noise, in rating points.
    pub rating_noise_std: f64,
    /// Probability of each adjacent swap applied to the true order.
    pub comparator_swap_prob: f64,
    pub latency_mean_s: f64,
    pub latency_std_s: f64,
    pub rng_seed: u64,
    pub token_cost: TokenCost,
}

impl Default for MockOracleConfig {
    fn default() -> Self {
        Self {
            window_bias_amplitude: 0.0,
            rating_noise_std: 0.0,
            comparator_swap_prob: 0.0,
            latency_mean_s: 9.83,
            latency_std_s: 0.83,
            rng_seed: 0,
            token_cost: TokenCost::default(),
        }
    }
}

impl MockOracleConfig {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |what: &str, v: f64| Err(OracleError::Config(format!("{what} = {v}")));
        if !(self.window_bias_amplitude >= 0.0 && self.window_bias_amplitude.is_finite()) {
            return bad(
                "window_bias_amplitude must be >= 0",
                self.window_bias_amplitude,
            );
        }
        if !(self.rating_noise_std >= 0.0 && self.rating_noise_std.is_finite()) {
            return bad("rating_noise_std must be >= 0", self.rating_noise_std);
        }
        if !(0.0..0.5).contains(&self.comparator_swap_prob) {
            return bad(
                "comparator_swap_prob must be in [0, 0.5)",
                self.comparator_swap_prob,
            );
        }
        if !(self.latency_mean_s >= 0.0 && self.latency_mean_s.is_finite()) {
            return bad("latency_mean_s must be >= 0", self.latency_mean_s);
        }
        if !(self.latency_std_s >= 0.0 && self.latency_std_s.is_finite()) {
            return bad("latency_std_s must be >= 0", self.latency_std_s);
        }
        Ok(())
    }
}

/// Ground-truth-driven oracle with seeded distortions.
///
/// Every response is a pure function of the request, the seed and the
/// invocation ordinal, so replaying the same call sequence reproduces the
/// same responses exactly.
#[derive(Debug, Clone)]
pub struct MockOracle {
    video_id: String,
    gt: Vec<f64>,
    cfg: MockOracleConfig,
    invocations: u64,
    ledger: CallLedger,
}

impl MockOracle {
    pub fn new(
        video_id: impl Into<String>,
        gt: Vec<f64>,
        cfg: MockOracleConfig,
    ) -> Result<Self, OracleError> {
        cfg.validate()?;
        Ok(Self {
            video_id: video_id.into(),
            gt,
            cfg,
            invocations: 0,
            ledger: CallLedger::default(),
        })
    }

    pub fn for_video(video: &VideoRecord, cfg: MockOracleConfig) -> Result<Self, OracleError> {
        Self::new(video.video_id.clone(), video.gt(), cfg)
    }

    pub fn config(&self) -> &MockOracleConfig {
        &self.cfg
    }

    /// The affine distortion `(slope, offset)` applied to window `k`.
    pub fn window_distortion(&self, k: usize) -> (f64, f64) {
        let a = self.cfg.window_bias_amplitude;
        if a == 0.0 {
            return (1.0, 0.0);
        }
        let mut rng = stream_rng(self.cfg.rng_seed, tags::WINDOW_AFFINE, k as u64);
        let u: f64 = rng.random_range(-1.0..=1.0);
        let v: f64 = rng.random_range(-1.0..=1.0);
        (1.0 + a * u, a * v)
    }

    fn next_ordinal(&mut self) -> u64 {
        let o = self.invocations;
        self.invocations += 1;
        o
    }

    fn check_indices(&self, idx: &[usize]) -> Result<(), OracleError> {
        match idx.iter().find(|&&i| i >= self.gt.len()) {
            Some(i) => Err(OracleError::InvalidRequest(format!(
                "chunk {i} out of range for video {} with {} chunks",
                self.video_id,
                self.gt.len()
            ))),
            None => Ok(()),
        }
    }
}

impl Oracle for MockOracle {
    fn rate_window(&mut self, req: &WindowRequest) -> Result<WindowResponse, OracleError> {
        req.validate()?;
        self.check_indices(&req.frame_indices)?;
        let ordinal = self.next_ordinal();
        self.ledger
            .record_rate(req.frame_indices.len(), &self.cfg.token_cost);

        let (slope, offset) = self.window_distortion(req.window_index);
        let mut rng = stream_rng(self.cfg.rng_seed, tags::RATE_CALL, ordinal);
        let noise = Normal::new(0.0, self.cfg.rating_noise_std).expect("validated std");
        let ratings = req
            .frame_indices
            .iter()
            .map(|&i| {
                let eps = if self.cfg.rating_noise_std > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                let raw = (100.0 * (slope * self.gt[i] + offset) + eps).round();
                raw.clamp(0.0, 100.0) as u8
            })
            .collect();
        let latency = Normal::new(self.cfg.latency_mean_s, self.cfg.latency_std_s)
            .expect("validated latency")
            .sample(&mut rng)
            .max(0.0);

        let k = req.window_index;
        let first = req.frame_indices[0];
        let last = *req.frame_indices.last().expect("validated non-empty");
        Ok(WindowResponse {
            ratings,
            partial_summary: format!("window {k}: chunks {first}-{last} of {}", self.video_id),
            total_summary: format!(
                "{} story through window {k} (chunks 0-{last})",
                self.video_id
            ),
            latency_s: latency,
        })
    }

    fn sort_window(&mut self, req: &SortRequest) -> Result<Vec<usize>, OracleError> {
        req.validate()?;
        self.check_indices(&req.candidate_indices)?;
        let ordinal = self.next_ordinal();
        self.ledger
            .record_sort(req.candidate_indices.len(), &self.cfg.token_cost);

        let mut order = req.candidate_indices.clone();
        order.sort_by(|&a, &b| self.gt[b].total_cmp(&self.gt[a]).then(a.cmp(&b)));
        let p = self.cfg.comparator_swap_prob;
        if p > 0.0 {
            let mut rng = stream_rng(self.cfg.rng_seed, tags::SORT_CALL, ordinal);
            for i in 0..order.len().saturating_sub(1) {
                if rng.random_bool(p) {
                    order.swap(i, i + 1);
                }
            }
        }
        ensure_permutation(req, &order)?;
        Ok(order)
    }

    fn ledger(&self) -> CallLedger {
        self.ledger
    }
}
