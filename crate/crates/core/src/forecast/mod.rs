//! Future-weight forecasting from recent weights and chunk content.

mod attention;
mod loss;
mod mlp;
mod train;

pub use attention::softmax;
pub use loss::{loss, loss_and_grad, LossDiagnostics};
pub use train::{
    evaluate, gradient_check, train, EpochStats, EvalStats, GradCheckReport, TrainConfig,
    TrainOutcome,
};

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::VideoRecord;
use crate::rng::{stream_rng, tags};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("bad hyperparameters: {0}")]
    Hyper(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("gradient check failed on {param}: relative error {rel_err:e}")]
    GradCheck { param: String, rel_err: f64 },
    #[error("model file: {0}")]
    Format(String),
    #[error("dataset line {line}: {msg}")]
    Dataset { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub l_in: usize,
    pub l_out: usize,
    pub d_model: usize,
    pub heads: usize,
    /// Embedding width of frame and text tokens.
    pub emb_dim: usize,
    /// Weight of the correlation term in the loss.
    pub lambda: f64,
}

impl Hyper {
    pub fn new(l_in: usize, l_out: usize, emb_dim: usize) -> Self {
        Self {
            l_in,
            l_out,
            d_model: 32,
            heads: 4,
            emb_dim,
            lambda: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ForecastError> {
        let bad = |m: &str| Err(ForecastError::Hyper(m.to_string()));
        if self.l_in == 0 || self.l_out == 0 || self.emb_dim == 0 {
            return bad("l_in, l_out and emb_dim must be positive");
        }
        if self.heads == 0 || self.d_model == 0 || !self.d_model.is_multiple_of(self.heads) {
            return bad("d_model must be a positive multiple of heads");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Series queries attend over frame and text embeddings.
    MultiModal,
    /// Series-only feed-forward network.
    UniModal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastInput {
    /// Recent weights, oldest first.
    pub series: Vec<f64>,
    /// One embedding per series position.
    pub frame_embeddings: Vec<Vec<f64>>,
    pub text_embedding: Vec<f64>,
}

impl ForecastInput {
    pub fn check(&self, h: &Hyper) -> Result<(), ForecastError> {
        let shape = |m: String| Err(ForecastError::Shape(m));
        if self.series.len() != h.l_in {
            return shape(format!("series length {} != {}", self.series.len(), h.l_in));
        }
        if self.series.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return shape("series values must lie in [0, 1]".into());
        }
        if self.frame_embeddings.len() != h.l_in {
            return shape(format!(
                "{} frame embeddings for {} positions",
                self.frame_embeddings.len(),
                h.l_in
            ));
        }
        for (i, row) in self
            .frame_embeddings
            .iter()
            .chain(std::iter::once(&self.text_embedding))
            .enumerate()
        {
            if row.len() != h.emb_dim {
                return shape(format!(
                    "embedding {i} has width {} != {}",
                    row.len(),
                    h.emb_dim
                ));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return shape(format!("embedding {i} has a non-finite entry"));
            }
        }
        Ok(())
    }
}

/// One training window: an input and the weights that followed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    #[serde(flatten)]
    pub input: ForecastInput,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    fn zeros(name: &str, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.to_string(),
            shape,
            data: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub kind: ModelKind,
    pub hyper: Hyper,
    pub params: Vec<Tensor>,
}

const FORMAT: &str = "salstream-forecast";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: ForecastModel,
}

enum Cache {
    Attention(attention::Cache),
    Mlp(mlp::Cache),
}

impl ForecastModel {
    fn shapes(kind: ModelKind, h: &Hyper) -> Vec<(&'static str, Vec<usize>)> {
        match kind {
            ModelKind::MultiModal => attention::shapes(h),
            ModelKind::UniModal => mlp::shapes(h),
        }
    }

    /// All parameters zero.
    pub fn zeros(kind: ModelKind, hyper: Hyper) -> Result<Self, ForecastError> {
        hyper.validate()?;
        let params = Self::shapes(kind, &hyper)
            .into_iter()
            .map(|(name, shape)| Tensor::zeros(name, shape))
            .collect();
        Ok(Self {
            kind,
            hyper,
            params,
        })
    }

    /// Seeded uniform Glorot initialisation for matrices, small uniform
    /// values for positional tables, zero biases.
    pub fn init(kind: ModelKind, hyper: Hyper, seed: u64) -> Result<Self, ForecastError> {
        let mut model = Self::zeros(kind, hyper)?;
        let mut rng = stream_rng(seed, tags::INIT, 0);
        for t in &mut model.params {
            let limit = match t.shape.as_slice() {
                [_] if t.name.ends_with("_b") => continue,
                [n] => (3.0 / *n as f64).sqrt(),
                [_, _] if t.name.ends_with("_pos") => 0.1,
                [rows, cols] => (6.0 / (rows + cols) as f64).sqrt(),
                _ => unreachable!("tensors are rank 1 or 2"),
            };
            for x in &mut t.data {
                *x = rng.random_range(-limit..limit);
            }
        }
        Ok(model)
    }

    pub fn multi_modal(hyper: Hyper, seed: u64) -> Result<Self, ForecastError> {
        Self::init(ModelKind::MultiModal, hyper, seed)
    }

    pub fn uni_modal(hyper: Hyper, seed: u64) -> Result<Self, ForecastError> {
        Self::init(ModelKind::UniModal, hyper, seed)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|t| t.data.len()).sum()
    }

    fn forward_cached(&self, x: &ForecastInput) -> (Vec<f64>, Cache) {
        match self.kind {
            ModelKind::MultiModal => {
                let (y, c) = attention::forward(&self.hyper, &self.params, x);
                (y, Cache::Attention(c))
            }
            ModelKind::UniModal => {
                let (y, c) = mlp::forward(&self.hyper, &self.params, x);
                (y, Cache::Mlp(c))
            }
        }
    }

    fn backward(&self, x: &ForecastInput, cache: &Cache, dy: &[f64], g: &mut [Vec<f64>]) {
        match cache {
            Cache::Attention(c) => attention::backward(&self.hyper, &self.params, x, c, dy, g),
            Cache::Mlp(c) => mlp::backward(&self.hyper, &self.params, x, c, dy, g),
        }
    }

    /// Unclamped output, as used in training.
    pub fn forward(&self, x: &ForecastInput) -> Result<Vec<f64>, ForecastError> {
        x.check(&self.hyper)?;
        Ok(self.forward_cached(x).0)
    }

    /// Output clamped to `[0, 1]`.
    pub fn predict(&self, x: &ForecastInput) -> Result<Vec<f64>, ForecastError> {
        Ok(self
            .forward(x)?
            .into_iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect())
    }

    pub fn forward_batch(&self, xs: &[ForecastInput]) -> Result<Vec<Vec<f64>>, ForecastError> {
        xs.iter().map(|x| self.forward(x)).collect()
    }

    /// Attention rows `[head][query][token]`; `None` for the series-only
    /// model.
    pub fn attention_maps(
        &self,
        x: &ForecastInput,
    ) -> Result<Option<Vec<Vec<Vec<f64>>>>, ForecastError> {
        x.check(&self.hyper)?;
        Ok(match self.kind {
            ModelKind::MultiModal => Some(attention::attention_maps(&self.hyper, &self.params, x)),
            ModelKind::UniModal => None,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ForecastError> {
        let file: ModelFile =
            serde_json::from_str(s).map_err(|e| ForecastError::Format(e.to_string()))?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(ForecastError::Format(format!(
                "unsupported {} v{}",
                file.format, file.version
            )));
        }
        let model = file.model;
        model.hyper.validate()?;
        let expected = Self::shapes(model.kind, &model.hyper);
        if expected.len() != model.params.len() {
            return Err(ForecastError::Format("wrong tensor count".into()));
        }
        for ((name, shape), t) in expected.iter().zip(&model.params) {
            if t.name != *name
                || t.shape != *shape
                || t.data.len() != shape.iter().product::<usize>()
            {
                return Err(ForecastError::Format(format!(
                    "tensor {} malformed",
                    t.name
                )));
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ForecastError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ForecastError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Sliding training windows over one video: `l_in` weights and embeddings
/// in, the next `l_out` weights out.
pub fn windows_from_video(
    video: &VideoRecord,
    series: &[f64],
    l_in: usize,
    l_out: usize,
    stride: usize,
) -> Vec<Sample> {
    let d = video.len().min(series.len());
    if d < l_in + l_out {
        return Vec::new();
    }
    let gt = video.gt();
    (0..=d - l_in - l_out)
        .step_by(stride.max(1))
        .map(|t| Sample {
            input: ForecastInput {
                series: series[t..t + l_in].to_vec(),
                frame_embeddings: video.chunks[t..t + l_in]
                    .iter()
                    .map(|c| c.embedding.clone())
                    .collect(),
                text_embedding: video.text_embedding.clone(),
            },
            target: gt[t + l_in..t + l_in + l_out].to_vec(),
        })
        .collect()
}

pub fn write_dataset(path: impl AsRef<Path>, samples: &[Sample]) -> Result<(), ForecastError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut w, s).map_err(|e| ForecastError::Format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<Sample>, ForecastError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Sample = serde_json::from_str(&line).map_err(|e| ForecastError::Dataset {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(h: &Hyper, seed: u64) -> ForecastInput {
        let mut rng = stream_rng(seed, tags::EMBEDDING, 99);
        ForecastInput {
            series: (0..h.l_in).map(|_| rng.random_range(0.0..1.0)).collect(),
            frame_embeddings: (0..h.l_in)
                .map(|_| {
                    (0..h.emb_dim)
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect()
                })
                .collect(),
            text_embedding: (0..h.emb_dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        }
    }

    fn tiny() -> Hyper {
        Hyper {
            l_in: 4,
            l_out: 4,
            d_model: 8,
            heads: 2,
            emb_dim: 8,
            lambda: 1.0,
        }
    }

    #[test]
    fn zero_model_outputs_bias() {
        let h = tiny();
        for kind in [ModelKind::MultiModal, ModelKind::UniModal] {
            let mut m = ForecastModel::zeros(kind, h).unwrap();
            let last = m.params.len() - 1;
            m.params[last].data = vec![0.1, -0.2, 0.3, 1.7];
            assert_eq!(m.forward(&input(&h, 1)).unwrap(), vec![0.1, -0.2, 0.3, 1.7]);
            assert_eq!(m.predict(&input(&h, 1)).unwrap(), vec![0.1, 0.0, 0.3, 1.0]);
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let h = tiny();
        let m = ForecastModel::multi_modal(h, 3).unwrap();
        let maps = m.attention_maps(&input(&h, 2)).unwrap().unwrap();
        assert_eq!(maps.len(), 2);
        for row in maps.iter().flatten() {
            assert_eq!(row.len(), h.l_in + 1);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let h = tiny();
        for kind in [ModelKind::MultiModal, ModelKind::UniModal] {
            let m = ForecastModel::init(kind, h, 11).unwrap();
            let back = ForecastModel::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m);
            let x = input(&h, 4);
            assert_eq!(back.forward(&x).unwrap(), m.forward(&x).unwrap());
        }
        assert!(ForecastModel::from_json("{\"format\":\"x\"}").is_err());
    }

    #[test]
    fn input_checks() {
        let h = tiny();
        let m = ForecastModel::multi_modal(h, 0).unwrap();
        let mut x = input(&h, 0);
        x.series[0] = 1.5;
        assert!(m.forward(&x).is_err());
        let mut x = input(&h, 0);
        x.text_embedding.pop();
        assert!(m.forward(&x).is_err());
        let bad = Hyper { heads: 3, ..h };
        assert!(ForecastModel::multi_modal(bad, 0).is_err());
    }
}
