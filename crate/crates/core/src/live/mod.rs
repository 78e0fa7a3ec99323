//! Live-stream weight forecasting on a discrete-event clock.
//!
//! Every `m` played chunks the latest window is sent to the rater. When the
//! ratings come back, a forecaster long enough to bridge the rater and
//! forecaster latency plus the next window and the controller's horizon is
//! chosen and started. Its output lands in a shared weight pool. The bitrate
//! controller reads the pool after every chunk and never waits; missing
//! entries read as 1.

mod replay;
mod sim;

pub use replay::{
    check_causality, chunk_coverage, decision_weights, replay_utility, utility,
    utility_after_warmup, QueryLog,
};
pub use sim::{run_live_session, Event, LiveSession, TimelineEntry};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forecast::{ForecastError, ForecastInput, ForecastModel, ModelKind};
use crate::perception::AnchorFrame;
use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum LiveError {
    #[error("invalid live config: {0}")]
    Config(String),
    #[error("no forecast model for output length(s) {0:?}")]
    MissingModels(Vec<usize>),
    #[error("causality violated at event {seq}: {msg}")]
    Causality { seq: usize, msg: String },
    #[error("replay mismatch at event {seq}: {msg}")]
    Replay { seq: usize, msg: String },
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Normal latency clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub mean_s: f64,
    pub std_s: f64,
}

impl LatencyModel {
    pub fn fixed(s: f64) -> Self {
        Self {
            mean_s: s,
            std_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), LiveError> {
        if !(self.mean_s >= 0.0
            && self.mean_s.is_finite()
            && self.std_s >= 0.0
            && self.std_s.is_finite())
        {
            return Err(LiveError::Config(format!("latency {self:?}")));
        }
        Ok(())
    }

    pub fn sample(&self, seed: u64, stream: u64, ordinal: u64) -> f64 {
        if self.std_s == 0.0 {
            return self.mean_s;
        }
        let mut rng = stream_rng(seed, stream, ordinal);
        Normal::new(self.mean_s, self.std_s)
            .expect("validated latency")
            .sample(&mut rng)
            .max(0.0)
    }
}

/// Measured rater latency (mean, std) in seconds per window length, for the
/// window lengths that were benchmarked.
#[allow(clippy::approx_constant)]
pub fn table_latency(m: usize) -> Option<LatencyModel> {
    let (mean_s, std_s) = match m {
        2 => (3.14, 1.52),
        4 => (4.2, 1.8),
        6 => (6.4, 0.65),
        8 => (8.14, 0.54),
        10 => (9.83, 0.83),
        _ => return None,
    };
    Some(LatencyModel { mean_s, std_s })
}

/// Mean forecaster inference time in seconds.
pub const FORECAST_LATENCY_S: f64 = 1.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveConfig {
    /// Chunk duration in seconds.
    pub chunk_s: f64,
    /// Window length.
    pub m: usize,
    /// Controller horizon.
    pub horizon: usize,
    /// Output lengths with a trained forecaster, ascending.
    pub pretrained_outputs: Vec<usize>,
    /// Initial forecaster latency estimate.
    pub forecast_latency_est_s: f64,
    /// Actual forecaster latency in the simulation.
    pub forecast_latency: LatencyModel,
    /// Smoothing factor of the forecaster latency estimate.
    pub ewma_alpha: f64,
    pub anchor: AnchorFrame,
    pub video_info: String,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self::for_window(10)
    }
}

impl LiveConfig {
    /// Defaults with pretrained outputs `{m, 2m, 3m}`.
    pub fn for_window(m: usize) -> Self {
        Self {
            chunk_s: 1.0,
            m,
            horizon: 5,
            pretrained_outputs: vec![m, 2 * m, 3 * m],
            forecast_latency_est_s: FORECAST_LATENCY_S,
            forecast_latency: LatencyModel::fixed(FORECAST_LATENCY_S),
            ewma_alpha: 0.3,
            anchor: AnchorFrame::First,
            video_info: String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), LiveError> {
        let bad = |m: String| Err(LiveError::Config(m));
        if !(self.chunk_s > 0.0 && self.chunk_s.is_finite()) {
            return bad(format!("chunk_s = {}", self.chunk_s));
        }
        if self.m == 0 || self.horizon == 0 {
            return bad("m and horizon must be at least 1".into());
        }
        if self.pretrained_outputs.is_empty()
            || self.pretrained_outputs.contains(&0)
            || !self.pretrained_outputs.windows(2).all(|w| w[0] < w[1])
        {
            return bad("pretrained_outputs must be non-empty, positive and ascending".into());
        }
        if !(self.forecast_latency_est_s >= 0.0 && self.forecast_latency_est_s.is_finite()) {
            return bad(format!(
                "forecast_latency_est_s = {}",
                self.forecast_latency_est_s
            ));
        }
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            return bad(format!("ewma_alpha = {}", self.ewma_alpha));
        }
        self.forecast_latency.validate()
    }
}

/// Forecast length needed to cover rater latency `delta_t`, forecaster
/// latency `delta`, the next window and the controller horizon:
/// `⌈(Δt + δ)/d⌉ + m + N`.
pub fn required_lout(delta_t: f64, delta: f64, d: f64, m: usize, n: usize) -> usize {
    let wait = ((delta_t + delta) / d - 1e-9).ceil().max(0.0) as usize;
    wait + m + n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub l_out: usize,
    /// Chunks the chosen length falls short of the requirement.
    pub shortfall: usize,
}

/// Smallest available length covering `required`; the largest one, with the
/// shortfall recorded, when none does. A session that used any short
/// forecast logs one warning at the end.
pub fn select_model(required: usize, available: &[usize]) -> Selection {
    match available.iter().find(|&&l| l >= required) {
        Some(&l_out) => Selection {
            l_out,
            shortfall: 0,
        },
        None => {
            let l_out = *available.last().expect("available lengths are non-empty");
            log::debug!(
                "no forecaster reaches {required} chunks; using {l_out} and padding with 1"
            );
            Selection {
                l_out,
                shortfall: required - l_out,
            }
        }
    }
}

/// Produces future weights for a given output length.
pub trait Forecaster {
    fn forecast(&mut self, l_out: usize, input: &ForecastInput) -> Result<Vec<f64>, ForecastError>;
}

/// One trained model per output length.
#[derive(Debug, Clone, Default)]
pub struct ModelBank {
    models: BTreeMap<usize, ForecastModel>,
}

impl ModelBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: ForecastModel) {
        self.models.insert(model.hyper.l_out, model);
    }

    pub fn outputs(&self) -> Vec<usize> {
        self.models.keys().copied().collect()
    }

    pub fn get(&self, l_out: usize) -> Option<&ForecastModel> {
        self.models.get(&l_out)
    }

    /// Requested lengths with no model.
    pub fn missing(&self, wanted: &[usize]) -> Vec<usize> {
        wanted
            .iter()
            .copied()
            .filter(|l| !self.models.contains_key(l))
            .collect()
    }

    /// Loads `<dir>/<prefix>_lout<L>.json` for every requested length.
    pub fn load_dir(
        dir: impl AsRef<Path>,
        prefix: &str,
        outputs: &[usize],
    ) -> Result<Self, LiveError> {
        let mut bank = Self::new();
        let mut gaps = Vec::new();
        for &l in outputs {
            let path = dir.as_ref().join(model_file_name(prefix, l));
            if path.exists() {
                bank.insert(ForecastModel::load(&path)?);
            } else {
                gaps.push(l);
            }
        }
        if gaps.is_empty() {
            Ok(bank)
        } else {
            Err(LiveError::MissingModels(gaps))
        }
    }

    pub fn kinds(&self) -> Vec<ModelKind> {
        self.models.values().map(|m| m.kind).collect()
    }
}

pub fn model_file_name(prefix: &str, l_out: usize) -> String {
    format!("{prefix}_lout{l_out}.json")
}

impl Forecaster for ModelBank {
    fn forecast(&mut self, l_out: usize, input: &ForecastInput) -> Result<Vec<f64>, ForecastError> {
        let model = self
            .models
            .get(&l_out)
            .ok_or_else(|| ForecastError::Shape(format!("no model with l_out {l_out}")))?;
        model.predict(input)
    }
}

/// Repeats the most recent rated weight; a stand-in with no learned state.
#[derive(Debug, Clone, Copy, Default)]
pub struct LastValueForecaster;

impl Forecaster for LastValueForecaster {
    fn forecast(&mut self, l_out: usize, input: &ForecastInput) -> Result<Vec<f64>, ForecastError> {
        let last = input.series.last().copied().unwrap_or(1.0);
        Ok(vec![last.clamp(0.0, 1.0); l_out])
    }
}

/// Writes the timeline as JSON lines.
pub fn write_timeline(path: impl AsRef<Path>, timeline: &[TimelineEntry]) -> Result<(), LiveError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in timeline {
        serde_json::to_writer(&mut w, e).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a timeline written by [`write_timeline`]. Blank lines and `#`
/// comment lines are skipped.
pub fn read_timeline(path: impl AsRef<Path>) -> Result<Vec<TimelineEntry>, LiveError> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| serde_json::from_str(l).map_err(|e| LiveError::Io(std::io::Error::other(e))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn required_length() {
        assert_eq!(required_lout(9.83, 1.35, 1.0, 10, 5), 27);
        assert_eq!(required_lout(0.0, 0.0, 1.0, 10, 5), 15);
        assert_eq!(required_lout(0.1, 0.0, 1.0, 10, 5), 16);
        assert_eq!(required_lout(2.0, 0.0, 1.0, 2, 2), 6);
        assert_eq!(required_lout(3.0, 1.0, 2.0, 1, 1), 4);
    }

    #[test]
    fn selection() {
        let avail = [10, 20, 30];
        assert_eq!(
            select_model(27, &avail),
            Selection {
                l_out: 30,
                shortfall: 0
            }
        );
        assert_eq!(
            select_model(10, &avail),
            Selection {
                l_out: 10,
                shortfall: 0
            }
        );
        assert_eq!(
            select_model(35, &avail),
            Selection {
                l_out: 30,
                shortfall: 5
            }
        );
        assert_eq!(select_model(1, &avail).l_out, 10);
    }

    #[test]
    fn config_checks() {
        assert!(LiveConfig::default().validate().is_ok());
        let mut c = LiveConfig {
            pretrained_outputs: vec![20, 10],
            ..LiveConfig::default()
        };
        assert!(c.validate().is_err());
        c = LiveConfig::default();
        c.m = 0;
        assert!(c.validate().is_err());
        assert_eq!(table_latency(10).unwrap().mean_s, 9.83);
        assert!(table_latency(3).is_none());
    }
}
