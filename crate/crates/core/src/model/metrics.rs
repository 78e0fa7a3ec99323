use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("correlation undefined: input series is constant")]
    Undefined,
    #[error("top fraction {0} outside (0, 1]")]
    BadFraction(f64),
}

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<(), MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < min {
        return Err(MetricError::TooShort {
            need: min,
            got: x.len(),
        });
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson linear correlation coefficient.
pub fn plcc(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y, 2)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::Undefined);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks in ascending order; tied values share the mean of their
/// rank span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn srcc(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y, 2)?;
    plcc(&average_ranks(x), &average_ranks(y))
}

/// Indices sorted by value descending, ties broken by lower index.
pub(crate) fn descending_order(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    order
}

/// Number of positives for a top fraction of `len` items, `⌈f·len⌉`.
///
/// The small slack keeps products such as `0.15 * 200` from rounding up to
/// an extra item.
pub(crate) fn top_count(fraction: f64, len: usize) -> usize {
    let raw = fraction * len as f64;
    ((raw - 1e-9).ceil().max(1.0) as usize).min(len)
}

/// Average precision of `pred` at recovering the top `top_fraction` of `gt`.
///
/// Positives are the `⌈top_fraction·D⌉` chunks with highest ground truth;
/// candidates are ranked by `pred` descending. Both orders break ties by the
/// lower index. The result is the mean, over positives, of the precision at
/// each positive's rank.
pub fn mean_ap(pred: &[f64], gt: &[f64], top_fraction: f64) -> Result<f64, MetricError> {
    check_pair(pred, gt, 1)?;
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(MetricError::BadFraction(top_fraction));
    }
    let k = top_count(top_fraction, gt.len());
    let mut positive = vec![false; gt.len()];
    for &i in descending_order(gt).iter().take(k) {
        positive[i] = true;
    }
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    for (rank, &i) in descending_order(pred).iter().enumerate() {
        if positive[i] {
            hits += 1;
            precision_sum += hits as f64 / (rank + 1) as f64;
            if hits == k {
                break;
            }
        }
    }
    Ok(precision_sum / k as f64)
}

/// Mean absolute error and root mean squared error.
pub fn mae_rmse(pred: &[f64], gt: &[f64]) -> Result<(f64, f64), MetricError> {
    check_pair(pred, gt, 1)?;
    let n = pred.len() as f64;
    let (abs, sq) = pred.iter().zip(gt).fold((0.0, 0.0), |(a, s), (p, g)| {
        let r = p - g;
        (a + r.abs(), s + r * r)
    });
    Ok((abs / n, (sq / n).sqrt()))
}

/// Point metrics for one predicted weight curve against ground truth.
///
/// `plcc` / `srcc` are `None` when the correlation is undefined (a constant
/// input series).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub plcc: Option<f64>,
    pub srcc: Option<f64>,
    pub map50: f64,
    pub map15: f64,
    pub mae: f64,
    pub rmse: f64,
}

fn defined(r: Result<f64, MetricError>) -> Result<Option<f64>, MetricError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(MetricError::Undefined) => Ok(None),
        Err(e) => Err(e),
    }
}

impl MetricReport {
    pub fn evaluate(pred: &[f64], gt: &[f64]) -> Result<Self, MetricError> {
        check_pair(pred, gt, 2)?;
        let (mae, rmse) = mae_rmse(pred, gt)?;
        Ok(Self {
            plcc: defined(plcc(pred, gt))?,
            srcc: defined(srcc(pred, gt))?,
            map50: mean_ap(pred, gt, 0.5)?,
            map15: mean_ap(pred, gt, 0.15)?,
            mae,
            rmse,
        })
    }
}

/// Macro average over videos. Correlations average over the reports where
/// they are defined.
pub fn mean_reports(reports: &[MetricReport]) -> Option<MetricReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let avg_opt = |f: fn(&MetricReport) -> Option<f64>| {
        let vals: Vec<f64> = reports.iter().filter_map(f).collect();
        (!vals.is_empty()).then(|| mean(&vals))
    };
    Some(MetricReport {
        plcc: avg_opt(|r| r.plcc),
        srcc: avg_opt(|r| r.srcc),
        map50: reports.iter().map(|r| r.map50).sum::<f64>() / n,
        map15: reports.iter().map(|r| r.map15).sum::<f64>() / n,
        mae: reports.iter().map(|r| r.mae).sum::<f64>() / n,
        rmse: reports.iter().map(|r| r.rmse).sum::<f64>() / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plcc_examples() {
        assert_eq!(plcc(&[1., 2., 3.], &[1., 2., 3.]), Ok(1.0));
        assert_eq!(plcc(&[1., 2., 3.], &[3., 2., 1.]), Ok(-1.0));
        assert_eq!(plcc(&[0., 1., 0., 1.], &[0., 1., 1., 0.]), Ok(0.0));
    }

    #[test]
    fn plcc_errors() {
        assert_eq!(
            plcc(&[1., 2.], &[1.]),
            Err(MetricError::LengthMismatch { left: 2, right: 1 })
        );
        assert_eq!(
            plcc(&[1.], &[1.]),
            Err(MetricError::TooShort { need: 2, got: 1 })
        );
        assert_eq!(
            plcc(&[2., 2., 2.], &[1., 2., 3.]),
            Err(MetricError::Undefined)
        );
    }

    #[test]
    fn srcc_examples() {
        assert_eq!(srcc(&[1., 5., 9.], &[0.1, 0.2, 0.3]), Ok(1.0));
        assert!((srcc(&[1., 2., 2., 3.], &[10., 20., 20., 30.]).unwrap() - 1.0).abs() < 1e-15);
        assert!((srcc(&[1., 2., 3., 4.], &[1., 3., 2., 4.]).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(srcc(&[4., 4.], &[1., 2.]), Err(MetricError::Undefined));
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(average_ranks(&[3., 1., 3., 2.]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn mean_ap_examples() {
        let gt = [0.9, 0.7, 0.4, 0.1];
        assert_eq!(mean_ap(&gt, &gt, 0.5), Ok(1.0));
        assert_eq!(mean_ap(&gt, &gt, 0.15), Ok(1.0));
        // positives {0, 1} land at ranks 3 and 4: (1/3 + 2/4) / 2
        let rev = [0.1, 0.4, 0.7, 0.9];
        assert!((mean_ap(&rev, &gt, 0.5).unwrap() - 5.0 / 12.0).abs() < 1e-15);
        // constant gt: positives are indices 0 and 1
        assert_eq!(mean_ap(&[0.9, 0.8, 0.1, 0.0], &[0.5; 4], 0.5), Ok(1.0));
        assert!(mean_ap(&[0.0, 0.1, 0.8, 0.9], &[0.5; 4], 0.5).unwrap() < 1.0);
        assert_eq!(
            mean_ap(&[], &[], 0.5),
            Err(MetricError::TooShort { need: 1, got: 0 })
        );
        assert_eq!(
            mean_ap(&[1.0], &[1.0], 0.0),
            Err(MetricError::BadFraction(0.0))
        );
    }

    #[test]
    fn top_count_rounding() {
        assert_eq!(top_count(0.15, 200), 30);
        assert_eq!(top_count(0.5, 21), 11);
        assert_eq!(top_count(0.01, 5), 1);
        assert_eq!(top_count(1.0, 7), 7);
    }

    #[test]
    fn mae_rmse_examples() {
        assert_eq!(mae_rmse(&[0.3, 0.4], &[0.3, 0.4]), Ok((0.0, 0.0)));
        assert_eq!(mae_rmse(&[0., 0.], &[1., 1.]), Ok((1.0, 1.0)));
        assert_eq!(mae_rmse(&[0., 2.], &[1., 1.]), Ok((1.0, 1.0)));
        assert!(mae_rmse(&[0.], &[]).is_err());
    }

    #[test]
    fn report_flags_constant_prediction() {
        let r = MetricReport::evaluate(&[0.5; 4], &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(r.plcc, None);
        assert_eq!(r.srcc, None);
        let avg = mean_reports(&[
            r,
            MetricReport::evaluate(&[0.1, 0.2, 0.3, 0.4], &[0.1, 0.2, 0.3, 0.4]).unwrap(),
        ])
        .unwrap();
        assert_eq!(avg.plcc, Some(1.0));
    }
}
