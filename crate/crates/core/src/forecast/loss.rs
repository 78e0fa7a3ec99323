use super::ForecastError;

/// Counts of samples where the correlation term was undefined and replaced
/// by its maximum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LossDiagnostics {
    pub flat_targets: u64,
    pub flat_predictions: u64,
}

impl LossDiagnostics {
    pub fn merge(&mut self, other: LossDiagnostics) {
        self.flat_targets += other.flat_targets;
        self.flat_predictions += other.flat_predictions;
    }
}

/// Centred values and their sum of squares.
fn centered(v: &[f64]) -> (Vec<f64>, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let ss = c.iter().map(|x| x * x).sum::<f64>();
    (c, ss)
}

fn is_flat(norm: f64, v: &[f64]) -> bool {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    norm <= 1e-12 * scale * (v.len() as f64).sqrt()
}

/// `MSE(pred, gt) + λ·(1 − PLCC(pred, gt))` and its gradient in `pred`.
///
/// When either series is flat the correlation term is taken as `λ` with zero
/// gradient and the matching diagnostics counter is bumped.
pub fn loss_and_grad(
    pred: &[f64],
    gt: &[f64],
    lambda: f64,
    diag: &mut LossDiagnostics,
) -> Result<(f64, Vec<f64>), ForecastError> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(ForecastError::Shape(format!(
            "loss over {} predictions and {} targets",
            pred.len(),
            gt.len()
        )));
    }
    let n = pred.len() as f64;
    let mut value = 0.0;
    let mut grad: Vec<f64> = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            value += (p - g) * (p - g) / n;
            2.0 * (p - g) / n
        })
        .collect();
    if lambda == 0.0 {
        return Ok((value, grad));
    }
    let (pc, pss) = centered(pred);
    let (gc, gss) = centered(gt);
    let (pn, gn) = (pss.sqrt(), gss.sqrt());
    if is_flat(gn, gt) || is_flat(pn, pred) {
        if is_flat(gn, gt) {
            diag.flat_targets += 1;
        } else {
            diag.flat_predictions += 1;
        }
        return Ok((value + lambda, grad));
    }
    // sqrt of the product is exact when pred == gt, so r is exactly 1 there
    let den = (pss * gss).sqrt();
    let r = pc.iter().zip(&gc).map(|(a, b)| a * b).sum::<f64>() / den;
    value += lambda * (1.0 - r);
    for ((g, p), t) in grad.iter_mut().zip(&pc).zip(&gc) {
        *g -= lambda * (t / den - r * p / pss);
    }
    Ok((value, grad))
}

/// Loss value only.
pub fn loss(pred: &[f64], gt: &[f64], lambda: f64) -> Result<f64, ForecastError> {
    loss_and_grad(pred, gt, lambda, &mut LossDiagnostics::default()).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reductions() {
        let gt = [0.2, 0.9, 0.4];
        assert!(loss(&gt, &gt, 1.0).unwrap().abs() < 1e-15);
        assert!((loss(&[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap() - 3.0).abs() < 1e-12);
        let pred = [0.5, 0.1, 0.3];
        let mse = pred
            .iter()
            .zip(&gt)
            .map(|(p, g)| (p - g) * (p - g))
            .sum::<f64>()
            / 3.0;
        assert_eq!(loss(&pred, &gt, 0.0).unwrap(), mse);
    }

    #[test]
    fn flat_target_counts() {
        let mut d = LossDiagnostics::default();
        let (v, g) = loss_and_grad(&[0.1, 0.3], &[0.5, 0.5], 2.0, &mut d).unwrap();
        assert!((v - (0.16 + 0.04) / 2.0 - 2.0).abs() < 1e-12);
        assert_eq!(d.flat_targets, 1);
        assert!((g[0] - (-0.4)).abs() < 1e-12);
        loss_and_grad(&[0.3, 0.3], &[0.1, 0.5], 1.0, &mut d).unwrap();
        assert_eq!(d.flat_predictions, 1);
        assert!(loss(&[0.1], &[0.1, 0.2], 1.0).is_err());
    }

    #[test]
    fn correlation_gradient_ignores_shift() {
        let mut d = LossDiagnostics::default();
        let pred = [0.3, 0.8, 0.1, 0.6];
        let gt = [0.2, 0.4, 0.9, 0.1];
        let (_, full) = loss_and_grad(&pred, &gt, 1.0, &mut d).unwrap();
        let (_, mse) = loss_and_grad(&pred, &gt, 0.0, &mut d).unwrap();
        let corr_sum: f64 = full.iter().zip(&mse).map(|(a, b)| a - b).sum();
        assert!(corr_sum.abs() < 1e-14);
    }
}
