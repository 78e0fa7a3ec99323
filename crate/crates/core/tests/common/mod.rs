//! Brute-force reference implementations for the metric tests.
#![allow(dead_code)]

/// Pearson correlation from raw sums, no centring pass.
pub fn plcc_sums(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let den = ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    // rounding can leave a tiny residue for constant input
    (den > 1e-9 * (n * sxx + n * syy).max(1.0))
        .then(|| ((n * sxy - sx * sy) / den).clamp(-1.0, 1.0))
}

/// Rank by counting: smaller values plus half the ties (self included).
pub fn count_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let less = v.iter().filter(|b| *b < a).count() as f64;
            let eq = v.iter().filter(|b| *b == a).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect()
}

pub fn srcc_counting(x: &[f64], y: &[f64]) -> Option<f64> {
    plcc_sums(&count_ranks(x), &count_ranks(y))
}

/// Position of item `i` when `v` is ordered descending with ties to the
/// lower index, found by counting items that beat it.
fn position(v: &[f64], i: usize) -> usize {
    (0..v.len())
        .filter(|&j| v[j] > v[i] || (v[j] == v[i] && j < i))
        .count()
}

/// Average precision by definition: for each positive, precision over the
/// items ranked at or above it.
pub fn mean_ap_definition(pred: &[f64], gt: &[f64], fraction: f64) -> f64 {
    let n = gt.len();
    let k = (((fraction * n as f64) - 1e-9).ceil().max(1.0) as usize).min(n);
    let positive: Vec<bool> = (0..n).map(|i| position(gt, i) < k).collect();
    let mut sum = 0.0;
    for i in (0..n).filter(|&i| positive[i]) {
        let r = position(pred, i);
        let above = (0..n)
            .filter(|&j| positive[j] && position(pred, j) <= r)
            .count();
        sum += above as f64 / (r + 1) as f64;
    }
    sum / k as f64
}

/// All permutations of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for at in 0..=p.len() {
            let mut q = p.clone();
            q.insert(at, n - 1);
            out.push(q);
        }
    }
    out
}
