//! Experiment configuration, read from a TOML file.
//!
//! Relative paths are resolved against the directory holding the config
//! file. API keys are never read from here; the HTTP oracle names the
//! environment variable that holds one.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use salstream_core::abr::{BitrateLadder, QoeParams, SessionConfig};
use salstream_core::forecast::{Hyper, ModelKind, TrainConfig};
use salstream_core::live::{LatencyModel, LiveConfig, FORECAST_LATENCY_S};
use salstream_core::perception::AnchorFrame;
use salstream_core::ranking::RankingConfig;
use salstream_core::rater::{HttpOracleConfig, MockOracleConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Vod,
    Live,
    Train,
    Metrics,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Vod => "vod",
            Mode::Live => "live",
            Mode::Train => "train",
            Mode::Metrics => "metrics",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// If set, must match the subcommand.
    pub mode: Option<Mode>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Videos processed in parallel.
    pub workers: usize,
    pub data: DataConfig,
    pub oracle: OracleConfig,
    pub perception: PerceptionConfig,
    pub ranking: RankingSection,
    pub forecast: ForecastConfig,
    pub live: LiveSection,
    pub abr: AbrConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: None,
            seed: 0,
            out_dir: PathBuf::from("out"),
            workers: 1,
            data: DataConfig::default(),
            oracle: OracleConfig::default(),
            perception: PerceptionConfig::default(),
            ranking: RankingSection::default(),
            forecast: ForecastConfig::default(),
            live: LiveSection::default(),
            abr: AbrConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Per-chunk CSV. When absent a synthetic dataset is generated.
    pub dataset: Option<PathBuf>,
    /// Two-column throughput traces. When empty, synthetic traces are used.
    pub traces: Vec<PathBuf>,
    pub chunk_s: f64,
    /// Train / validation / test fractions over videos.
    pub split: [f64; 3],
    pub synthetic: SyntheticData,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            traces: Vec::new(),
            chunk_s: 1.0,
            split: [0.7, 0.15, 0.15],
            synthetic: SyntheticData::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticData {
    pub videos: usize,
    pub chunks: usize,
    pub embedding_dim: usize,
    pub embedding_noise: f64,
    pub lookahead: usize,
    pub traces: usize,
    pub trace_mean_kbps: f64,
}

impl Default for SyntheticData {
    fn default() -> Self {
        Self {
            videos: 12,
            chunks: 120,
            embedding_dim: 16,
            embedding_noise: 0.05,
            lookahead: 5,
            traces: 4,
            trace_mean_kbps: 1800.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: OracleKind,
    /// The mock's own `rng_seed` is ignored; each video gets a seed derived
    /// from the experiment seed.
    pub mock: MockOracleConfig,
    pub http: HttpOracleConfig,
    /// Optional JSON-lines cache of rating responses.
    pub cache: Option<PathBuf>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            kind: OracleKind::Mock,
            mock: MockOracleConfig::default(),
            http: HttpOracleConfig::default(),
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    pub m: usize,
    pub anchor: AnchorFrame,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            m: 10,
            anchor: AnchorFrame::First,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingSection {
    #[serde(flatten)]
    pub core: RankingConfig,
    /// Smoothing widths reported in the sigma sweep.
    pub sigma_sweep: Vec<f64>,
}

impl Default for RankingSection {
    fn default() -> Self {
        Self {
            core: RankingConfig::default(),
            sigma_sweep: vec![2.5, 5.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub kind: ModelKind,
    pub d_model: usize,
    pub heads: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Step between consecutive training windows.
    pub stride: usize,
    /// Where model files are written and read. Defaults to `<out_dir>/models`.
    pub model_dir: Option<PathBuf>,
    pub prefix: String,
    pub grad_check_samples: usize,
    pub grad_check_tol: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::MultiModal,
            d_model: 32,
            heads: 4,
            lambda: 1.0,
            learning_rate: 0.05,
            epochs: 100,
            batch_size: 16,
            stride: 2,
            model_dir: None,
            prefix: "forecast".into(),
            grad_check_samples: 2,
            grad_check_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecasterChoice {
    /// Trained model files from `forecast.model_dir`.
    Model,
    /// Repeat the last rated weight.
    LastValue,
    /// No forecasts; every query falls back to defaults.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiveVideos {
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveSection {
    pub horizon: usize,
    /// Defaults to `{m, 2m, 3m}`.
    pub pretrained_outputs: Option<Vec<usize>>,
    pub forecaster: ForecasterChoice,
    /// Use the measured per-window-length rater latency where one exists
    /// instead of the oracle's configured latency.
    pub table_latency: bool,
    pub forecast_latency_est_s: f64,
    pub forecast_latency: LatencyModel,
    pub ewma_alpha: f64,
    pub videos: LiveVideos,
}

impl Default for LiveSection {
    fn default() -> Self {
        Self {
            horizon: 5,
            pretrained_outputs: None,
            forecaster: ForecasterChoice::Model,
            table_latency: true,
            forecast_latency_est_s: FORECAST_LATENCY_S,
            forecast_latency: LatencyModel::fixed(FORECAST_LATENCY_S),
            ewma_alpha: 0.3,
            videos: LiveVideos::Test,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbrConfig {
    pub ladder: BitrateLadder,
    pub qoe: QoeParams,
    pub session: SessionConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads, resolves relative paths, applies overrides and validates.
    pub fn load(path: &Path, mode: Option<Mode>, ov: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.apply(ov);
        cfg.validate(mode)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(m) = ov.m {
            self.perception.m = m;
        }
        if let Some(s) = ov.seed {
            self.seed = s;
        }
        if let Some(o) = &ov.out {
            self.out_dir = o.clone();
        }
        if let Some(w) = ov.workers {
            self.workers = w;
        }
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        if let Some(p) = self.data.dataset.as_mut() {
            fix(p);
        }
        self.data.traces.iter_mut().for_each(fix);
        if let Some(p) = self.oracle.cache.as_mut() {
            fix(p);
        }
        if let Some(p) = self.forecast.model_dir.as_mut() {
            fix(p);
        }
    }

    /// `mode`, when given, must match the mode the file declares.
    pub fn validate(&self, mode: Option<Mode>) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let (Some(declared), Some(mode)) = (self.mode, mode) {
            if declared != mode {
                return bad(format!(
                    "config declares mode {} but {} was requested",
                    declared.name(),
                    mode.name()
                ));
            }
        }
        if let Some(p) = &self.data.dataset {
            if !p.is_file() {
                return bad(format!("dataset {} does not exist", p.display()));
            }
        }
        for t in &self.data.traces {
            if !t.is_file() {
                return bad(format!("trace {} does not exist", t.display()));
            }
        }
        if !(self.data.chunk_s > 0.0 && self.data.chunk_s.is_finite()) {
            return bad(format!("data.chunk_s = {}", self.data.chunk_s));
        }
        let s = self.data.split;
        if s.iter().any(|&f| !(0.0..=1.0).contains(&f)) || ((s[0] + s[1] + s[2]) - 1.0).abs() > 1e-9
        {
            return bad(format!("data.split {s:?} must be fractions summing to 1"));
        }
        if self.data.dataset.is_none() && self.data.synthetic.videos == 0 {
            return bad("data.synthetic.videos must be positive".into());
        }
        if self.data.traces.is_empty()
            && (self.data.synthetic.traces == 0 || !(self.data.synthetic.trace_mean_kbps > 0.0))
        {
            return bad("synthetic traces need a positive count and mean".into());
        }
        if self.perception.m == 0 {
            return bad("perception.m must be at least 1".into());
        }
        let r = &self.ranking.core;
        if !(r.sigma > 0.0 && r.sigma.is_finite()) {
            return bad(format!("ranking.sigma = {}", r.sigma));
        }
        if r.kernel_size == Some(0) {
            return bad("ranking.kernel_size must be positive".into());
        }
        if self
            .ranking
            .sigma_sweep
            .iter()
            .any(|&x| !(x > 0.0 && x.is_finite()))
        {
            return bad("ranking.sigma_sweep entries must be positive".into());
        }
        if self.oracle.kind == OracleKind::Mock {
            self.oracle.mock.validate()?;
        }
        for l in self.pretrained_outputs() {
            self.hyper(l)
                .validate()
                .map_err(|e| CliError::Config(format!("forecast: {e}")))?;
        }
        self.train_config()
            .validate()
            .map_err(|e| CliError::Config(format!("forecast: {e}")))?;
        if self.forecast.grad_check_samples == 0 || !(self.forecast.grad_check_tol > 0.0) {
            return bad("forecast grad check needs samples and a positive tolerance".into());
        }
        self.live_config().validate()?;
        self.abr.qoe.validate()?;
        self.abr.session.validate()?;
        if (self.abr.session.chunk_s - self.data.chunk_s).abs() > 1e-12 {
            return bad(format!(
                "abr.session.chunk_s ({}) differs from data.chunk_s ({})",
                self.abr.session.chunk_s, self.data.chunk_s
            ));
        }
        if self.abr.session.horizon != self.live.horizon {
            return bad("abr.session.horizon and live.horizon must agree".into());
        }
        Ok(())
    }

    pub fn pretrained_outputs(&self) -> Vec<usize> {
        let m = self.perception.m;
        self.live
            .pretrained_outputs
            .clone()
            .unwrap_or_else(|| vec![m, 2 * m, 3 * m])
    }

    pub fn embedding_dim(&self) -> usize {
        self.data.synthetic.embedding_dim
    }

    /// Model shape for one output length; the input length is the window.
    pub fn hyper(&self, l_out: usize) -> Hyper {
        Hyper {
            d_model: self.forecast.d_model,
            heads: self.forecast.heads,
            lambda: self.forecast.lambda,
            ..Hyper::new(self.perception.m, l_out, self.embedding_dim())
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.forecast.learning_rate,
            epochs: self.forecast.epochs,
            batch_size: self.forecast.batch_size,
            rng_seed: self.seed,
            lambda: self.forecast.lambda,
        }
    }

    pub fn live_config(&self) -> LiveConfig {
        LiveConfig {
            chunk_s: self.data.chunk_s,
            m: self.perception.m,
            horizon: self.live.horizon,
            pretrained_outputs: self.pretrained_outputs(),
            forecast_latency_est_s: self.live.forecast_latency_est_s,
            forecast_latency: self.live.forecast_latency,
            ewma_alpha: self.live.ewma_alpha,
            anchor: self.perception.anchor,
            video_info: String::new(),
        }
    }

    pub fn model_dir(&self) -> PathBuf {
        self.forecast
            .model_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("models"))
    }
}
