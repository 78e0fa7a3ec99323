use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{loss_and_grad, ForecastError, ForecastModel, LossDiagnostics, Sample};
use crate::model::plcc;
use crate::rng::{stream_rng, tags};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
    /// Weight of the correlation term in the loss.
    pub lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 100,
            batch_size: 16,
            rng_seed: 0,
            lambda: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ForecastError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ForecastError::Hyper(format!(
                "learning_rate = {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(ForecastError::Hyper(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ForecastError::Hyper(format!("lambda = {}", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub loss: f64,
    pub mse: f64,
    /// Mean per-window correlation of clamped predictions, over windows
    /// where it is defined.
    pub plcc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_plcc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: ForecastModel,
    /// Epoch 0 is the initial model.
    pub curve: Vec<EpochStats>,
    pub best_epoch: usize,
    pub diagnostics: LossDiagnostics,
}

fn check_samples(model: &ForecastModel, samples: &[Sample]) -> Result<(), ForecastError> {
    for (i, s) in samples.iter().enumerate() {
        s.input
            .check(&model.hyper)
            .map_err(|e| ForecastError::Shape(format!("sample {i}: {e}")))?;
        if s.target.len() != model.hyper.l_out {
            return Err(ForecastError::Shape(format!(
                "sample {i}: target length {} != {}",
                s.target.len(),
                model.hyper.l_out
            )));
        }
    }
    Ok(())
}

pub fn evaluate(
    model: &ForecastModel,
    samples: &[Sample],
    lambda: f64,
) -> Result<EvalStats, ForecastError> {
    check_samples(model, samples)?;
    let mut diag = LossDiagnostics::default();
    let (mut total, mut mse, mut corr, mut defined) = (0.0, 0.0, 0.0, 0usize);
    for s in samples {
        let y = model.forward_cached(&s.input).0;
        total += loss_and_grad(&y, &s.target, lambda, &mut diag)?.0;
        mse += loss_and_grad(&y, &s.target, 0.0, &mut diag)?.0;
        let clamped: Vec<f64> = y.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        if let Ok(r) = plcc(&clamped, &s.target) {
            corr += r;
            defined += 1;
        }
    }
    let n = samples.len().max(1) as f64;
    Ok(EvalStats {
        loss: total / n,
        mse: mse / n,
        plcc: (defined > 0).then(|| corr / defined as f64),
    })
}

/// Mean loss over `batch` and its gradient for every parameter tensor.
fn batch_gradient(
    model: &ForecastModel,
    batch: &[&Sample],
    lambda: f64,
    diag: &mut LossDiagnostics,
) -> Result<(f64, Vec<Vec<f64>>), ForecastError> {
    let mut grads: Vec<Vec<f64>> = model
        .params
        .iter()
        .map(|t| vec![0.0; t.data.len()])
        .collect();
    let mut total = 0.0;
    let inv = 1.0 / batch.len() as f64;
    for s in batch {
        let (y, cache) = model.forward_cached(&s.input);
        let (l, mut dy) = loss_and_grad(&y, &s.target, lambda, diag)?;
        total += l * inv;
        dy.iter_mut().for_each(|v| *v *= inv);
        model.backward(&s.input, &cache, &dy, &mut grads);
    }
    for (t, g) in model.params.iter().zip(&grads) {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(ForecastError::NonFiniteGradient(t.name.clone()));
        }
    }
    Ok((total, grads))
}

fn batch_loss(model: &ForecastModel, batch: &[&Sample], lambda: f64) -> f64 {
    let mut diag = LossDiagnostics::default();
    batch
        .iter()
        .map(|s| {
            let y = model.forward_cached(&s.input).0;
            loss_and_grad(&y, &s.target, lambda, &mut diag).map_or(f64::NAN, |(l, _)| l)
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Mini-batch gradient descent with a fixed step. Batches are drawn from a
/// seeded shuffle each epoch; the returned model is the one with the lowest
/// validation loss (training loss when `val` is empty).
pub fn train(
    mut model: ForecastModel,
    train_set: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ForecastError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(ForecastError::Shape("empty training set".into()));
    }
    check_samples(&model, train_set)?;
    check_samples(&model, val)?;
    model.hyper.lambda = cfg.lambda;
    let selection = if val.is_empty() { train_set } else { val };

    let init = evaluate(&model, selection, cfg.lambda)?;
    let mut curve = vec![EpochStats {
        epoch: 0,
        train_loss: evaluate(&model, train_set, cfg.lambda)?.loss,
        val_loss: init.loss,
        val_plcc: init.plcc,
    }];
    let mut best = (init.loss, 0usize, model.clone());
    let mut diagnostics = LossDiagnostics::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut stream_rng(cfg.rng_seed, tags::SHUFFLE, epoch as u64));
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (l, grads) = batch_gradient(&model, &batch, cfg.lambda, &mut diagnostics)?;
            epoch_loss += l * batch.len() as f64;
            for (t, g) in model.params.iter_mut().zip(&grads) {
                for (p, gi) in t.data.iter_mut().zip(g) {
                    *p -= cfg.learning_rate * gi;
                }
            }
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(ForecastError::Diverged {
                epoch,
                loss: train_loss,
            });
        }
        let stats = evaluate(&model, selection, cfg.lambda)?;
        if !stats.loss.is_finite() {
            return Err(ForecastError::Diverged {
                epoch,
                loss: stats.loss,
            });
        }
        log::debug!("epoch {epoch}: train {train_loss:.5} val {:.5}", stats.loss);
        if stats.loss < best.0 {
            best = (stats.loss, epoch, model.clone());
        }
        curve.push(EpochStats {
            epoch,
            train_loss,
            val_loss: stats.loss,
            val_plcc: stats.plcc,
        });
    }
    Ok(TrainOutcome {
        model: best.2,
        curve,
        best_epoch: best.1,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// Worst relative error per parameter tensor.
    pub per_param: Vec<(String, f64)>,
    pub max_rel_err: f64,
    pub worst_param: String,
}

impl GradCheckReport {
    pub fn ensure_below(&self, tol: f64) -> Result<(), ForecastError> {
        if self.max_rel_err < tol {
            Ok(())
        } else {
            Err(ForecastError::GradCheck {
                param: self.worst_param.clone(),
                rel_err: self.max_rel_err,
            })
        }
    }
}

/// Compares analytic gradients against central differences with step `h`.
///
/// The error for one entry is `|a − n| / max(|a|, |n|, 1e-6)`; the floor
/// keeps entries that are zero up to rounding from dominating.
pub fn gradient_check(
    model: &ForecastModel,
    batch: &[Sample],
    lambda: f64,
    h: f64,
) -> Result<GradCheckReport, ForecastError> {
    check_samples(model, batch)?;
    let refs: Vec<&Sample> = batch.iter().collect();
    let (_, analytic) = batch_gradient(model, &refs, lambda, &mut LossDiagnostics::default())?;
    let mut probe = model.clone();
    let mut per_param = Vec::with_capacity(model.params.len());
    for (pi, tensor) in model.params.iter().enumerate() {
        let mut worst: f64 = 0.0;
        #[allow(clippy::needless_range_loop)]
        for i in 0..tensor.data.len() {
            let orig = tensor.data[i];
            probe.params[pi].data[i] = orig + h;
            let up = batch_loss(&probe, &refs, lambda);
            probe.params[pi].data[i] = orig - h;
            let down = batch_loss(&probe, &refs, lambda);
            probe.params[pi].data[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
        }
        per_param.push((tensor.name.clone(), worst));
    }
    let (worst_param, max_rel_err) =
        per_param
            .iter()
            .cloned()
            .fold((String::new(), 0.0f64), |acc, (n, e)| {
                if e > acc.1 {
                    (n, e)
                } else {
                    acc
                }
            });
    Ok(GradCheckReport {
        per_param,
        max_rel_err,
        worst_param,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{ForecastInput, Hyper, ModelKind};
    use rand::Rng;

    fn random_samples(h: &Hyper, n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = stream_rng(seed, tags::EMBEDDING, 7);
        (0..n)
            .map(|_| Sample {
                input: ForecastInput {
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
                },
                target: (0..h.l_out).map(|_| rng.random_range(0.0..1.0)).collect(),
            })
            .collect()
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
    fn gradients_match_finite_differences() {
        let h = tiny();
        for kind in [ModelKind::MultiModal, ModelKind::UniModal] {
            for seed in 0..3 {
                let m = ForecastModel::init(kind, h, seed).unwrap();
                let batch = random_samples(&h, 3, seed);
                for lambda in [0.0, 1.0] {
                    let r = gradient_check(&m, &batch, lambda, 1e-5).unwrap();
                    assert!(
                        r.max_rel_err < 1e-4,
                        "{kind:?} seed {seed} λ {lambda}: {r:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn training_is_reproducible_and_improves() {
        let h = tiny();
        let data = random_samples(&h, 24, 5);
        let cfg = TrainConfig {
            epochs: 15,
            batch_size: 8,
            rng_seed: 3,
            ..TrainConfig::default()
        };
        let m = ForecastModel::multi_modal(h, 1).unwrap();
        let a = train(m.clone(), &data, &[], &cfg).unwrap();
        let b = train(m, &data, &[], &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.curve, b.curve);
        assert!(a.curve[a.best_epoch].val_loss < a.curve[0].val_loss);
    }

    #[test]
    fn divergence_is_reported() {
        let h = tiny();
        let data = random_samples(&h, 8, 5);
        let cfg = TrainConfig {
            learning_rate: 1e6,
            epochs: 50,
            ..TrainConfig::default()
        };
        let err = train(ForecastModel::uni_modal(h, 0).unwrap(), &data, &[], &cfg).unwrap_err();
        assert!(
            matches!(
                err,
                ForecastError::Diverged { .. } | ForecastError::NonFiniteGradient(_)
            ),
            "{err}"
        );
    }
}
