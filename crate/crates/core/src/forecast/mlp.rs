//! Series-only baseline: `y = W_2·tanh(W_1·x + b_1) + b_2`.

use super::attention::out_head;
use super::{ForecastInput, Hyper, Tensor};

const W1: usize = 0;
const B1: usize = 1;
const W2: usize = 2;
const B2: usize = 3;

pub(super) fn shapes(h: &Hyper) -> Vec<(&'static str, Vec<usize>)> {
    vec![
        ("hidden_w", vec![h.d_model, h.l_in]),
        ("hidden_b", vec![h.d_model]),
        ("out_w", vec![h.l_out, h.d_model]),
        ("out_b", vec![h.l_out]),
    ]
}

pub(super) struct Cache {
    hidden: Vec<f64>,
}

pub(super) fn forward(_h: &Hyper, p: &[Tensor], x: &ForecastInput) -> (Vec<f64>, Cache) {
    let pre = out_head(&p[W1].data, &p[B1].data, &x.series);
    let hidden: Vec<f64> = pre.into_iter().map(f64::tanh).collect();
    let y = out_head(&p[W2].data, &p[B2].data, &hidden);
    (y, Cache { hidden })
}

pub(super) fn backward(
    h: &Hyper,
    p: &[Tensor],
    x: &ForecastInput,
    cache: &Cache,
    dy: &[f64],
    g: &mut [Vec<f64>],
) {
    let (l, d) = (h.l_in, h.d_model);
    let mut dhid = vec![0.0; d];
    for (o, &dyo) in dy.iter().enumerate() {
        g[B2][o] += dyo;
        for i in 0..d {
            g[W2][o * d + i] += dyo * cache.hidden[i];
            dhid[i] += dyo * p[W2].data[o * d + i];
        }
    }
    for i in 0..d {
        let dpre = dhid[i] * (1.0 - cache.hidden[i] * cache.hidden[i]);
        g[B1][i] += dpre;
        for t in 0..l {
            g[W1][i * l + t] += dpre * x.series[t];
        }
    }
}
