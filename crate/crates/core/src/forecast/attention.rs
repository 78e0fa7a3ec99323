//! Series queries attending over frame-embedding tokens plus one text token.
//!
//! ```text
//! s_t   = x_t·w_s + b_s + p_t                 (t < L_in)
//! q_t   = s_t·W_q + b_q
//! c_j   = e_j + r_j                           (j ≤ L_in, e_{L_in} = text)
//! k_j   = c_j·W_k + b_k,  v_j = c_j·W_v + b_v
//! o_t   = concat_h softmax_j(q_t^h·k_j^h / √d_h) v_j^h
//! y     = W_o·flatten(s + o) + b_o
//! ```

use super::{ForecastInput, Hyper, Tensor};

pub(super) const WS: usize = 0;
pub(super) const BS: usize = 1;
pub(super) const POS_S: usize = 2;
pub(super) const WQ: usize = 3;
pub(super) const BQ: usize = 4;
pub(super) const POS_C: usize = 5;
pub(super) const WK: usize = 6;
pub(super) const BK: usize = 7;
pub(super) const WV: usize = 8;
pub(super) const BV: usize = 9;
pub(super) const WO: usize = 10;
pub(super) const BO: usize = 11;

pub(super) fn shapes(h: &Hyper) -> Vec<(&'static str, Vec<usize>)> {
    let (l, d, e, t, o) = (h.l_in, h.d_model, h.emb_dim, h.l_in + 1, h.l_out);
    vec![
        ("series_w", vec![d]),
        ("series_b", vec![d]),
        ("series_pos", vec![l, d]),
        ("q_w", vec![d, d]),
        ("q_b", vec![d]),
        ("content_pos", vec![t, e]),
        ("k_w", vec![e, d]),
        ("k_b", vec![d]),
        ("v_w", vec![e, d]),
        ("v_b", vec![d]),
        ("out_w", vec![o, l * d]),
        ("out_b", vec![o]),
    ]
}

pub(super) struct Cache {
    s: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    /// `[head][query][token]`
    attn: Vec<Vec<Vec<f64>>>,
    z: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|x| x / sum).collect()
}

fn affine(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    // x (n) times w (n × m) plus b (m)
    let m = b.len();
    let mut out = b.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * m..(i + 1) * m];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
    out
}

pub(super) fn forward(h: &Hyper, p: &[Tensor], x: &ForecastInput) -> (Vec<f64>, Cache) {
    let (l, d, e) = (h.l_in, h.d_model, h.emb_dim);
    let dh = d / h.heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let s: Vec<Vec<f64>> = (0..l)
        .map(|t| {
            (0..d)
                .map(|i| x.series[t] * p[WS].data[i] + p[BS].data[i] + p[POS_S].data[t * d + i])
                .collect()
        })
        .collect();
    let q: Vec<Vec<f64>> = s
        .iter()
        .map(|st| affine(st, &p[WQ].data, &p[BQ].data))
        .collect();
    let c: Vec<Vec<f64>> = x
        .frame_embeddings
        .iter()
        .chain(std::iter::once(&x.text_embedding))
        .enumerate()
        .map(|(j, emb)| {
            emb.iter()
                .zip(&p[POS_C].data[j * e..(j + 1) * e])
                .map(|(a, b)| a + b)
                .collect()
        })
        .collect();
    let k: Vec<Vec<f64>> = c
        .iter()
        .map(|cj| affine(cj, &p[WK].data, &p[BK].data))
        .collect();
    let v: Vec<Vec<f64>> = c
        .iter()
        .map(|cj| affine(cj, &p[WV].data, &p[BV].data))
        .collect();

    let mut z = vec![0.0; l * d];
    let mut attn = Vec::with_capacity(h.heads);
    for head in 0..h.heads {
        let cols = head * dh..(head + 1) * dh;
        let mut rows = Vec::with_capacity(l);
        for t in 0..l {
            let logits: Vec<f64> = k
                .iter()
                .map(|kj| {
                    q[t][cols.clone()]
                        .iter()
                        .zip(&kj[cols.clone()])
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        * scale
                })
                .collect();
            let a = softmax(&logits);
            for col in cols.clone() {
                let o: f64 = a.iter().zip(&v).map(|(aj, vj)| aj * vj[col]).sum();
                z[t * d + col] = s[t][col] + o;
            }
            rows.push(a);
        }
        attn.push(rows);
    }
    let y = out_head(&p[WO].data, &p[BO].data, &z);
    (
        y,
        Cache {
            s,
            q,
            c,
            k,
            v,
            attn,
            z,
        },
    )
}

pub(super) fn out_head(w: &[f64], b: &[f64], z: &[f64]) -> Vec<f64> {
    let n = z.len();
    b.iter()
        .enumerate()
        .map(|(o, &bo)| {
            bo + w[o * n..(o + 1) * n]
                .iter()
                .zip(z)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        })
        .collect()
}

/// Attention rows of every head, `[head][query][token]`.
pub(super) fn attention_maps(h: &Hyper, p: &[Tensor], x: &ForecastInput) -> Vec<Vec<Vec<f64>>> {
    forward(h, p, x).1.attn
}

/// Accumulates `∂loss/∂θ` for one sample into `g`, given `dy = ∂loss/∂y`.
pub(super) fn backward(
    h: &Hyper,
    p: &[Tensor],
    x: &ForecastInput,
    cache: &Cache,
    dy: &[f64],
    g: &mut [Vec<f64>],
) {
    let (l, d, e, t_len) = (h.l_in, h.d_model, h.emb_dim, h.l_in + 1);
    let dh = d / h.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let n = l * d;

    // output head
    let mut dz = vec![0.0; n];
    for (o, &dyo) in dy.iter().enumerate() {
        g[BO][o] += dyo;
        let row = &p[WO].data[o * n..(o + 1) * n];
        let grow = &mut g[WO][o * n..(o + 1) * n];
        for i in 0..n {
            grow[i] += dyo * cache.z[i];
            dz[i] += dyo * row[i];
        }
    }

    // residual: z = s + o
    let mut ds: Vec<Vec<f64>> = (0..l).map(|t| dz[t * d..(t + 1) * d].to_vec()).collect();
    let mut dq = vec![vec![0.0; d]; l];
    let mut dk = vec![vec![0.0; d]; t_len];
    let mut dv = vec![vec![0.0; d]; t_len];
    for head in 0..h.heads {
        let cols = head * dh..(head + 1) * dh;
        for t in 0..l {
            let a = &cache.attn[head][t];
            let dout = &dz[t * d + cols.start..t * d + cols.end];
            let da: Vec<f64> = cache
                .v
                .iter()
                .map(|vj| dout.iter().zip(&vj[cols.clone()]).map(|(x, y)| x * y).sum())
                .collect();
            for (j, &aj) in a.iter().enumerate() {
                for (c, &dc) in cols.clone().zip(dout) {
                    dv[j][c] += aj * dc;
                }
            }
            let dot: f64 = a.iter().zip(&da).map(|(x, y)| x * y).sum();
            for j in 0..t_len {
                let dlogit = a[j] * (da[j] - dot) * scale;
                if dlogit == 0.0 {
                    continue;
                }
                for c in cols.clone() {
                    dq[t][c] += dlogit * cache.k[j][c];
                    dk[j][c] += dlogit * cache.q[t][c];
                }
            }
        }
    }

    // query projection
    for t in 0..l {
        for (a, dsa) in ds[t].iter_mut().enumerate() {
            let row = &p[WQ].data[a * d..(a + 1) * d];
            let grow = &mut g[WQ][a * d..(a + 1) * d];
            let sa = cache.s[t][a];
            let mut acc = 0.0;
            for b in 0..d {
                grow[b] += sa * dq[t][b];
                acc += row[b] * dq[t][b];
            }
            *dsa += acc;
        }
        for b in 0..d {
            g[BQ][b] += dq[t][b];
        }
    }

    // key and value projections, content positions
    for j in 0..t_len {
        for i in 0..e {
            let ci = cache.c[j][i];
            let (wk, wv) = (
                &p[WK].data[i * d..(i + 1) * d],
                &p[WV].data[i * d..(i + 1) * d],
            );
            let mut dc = 0.0;
            for b in 0..d {
                g[WK][i * d + b] += ci * dk[j][b];
                g[WV][i * d + b] += ci * dv[j][b];
                dc += wk[b] * dk[j][b] + wv[b] * dv[j][b];
            }
            g[POS_C][j * e + i] += dc;
        }
        for b in 0..d {
            g[BK][b] += dk[j][b];
            g[BV][b] += dv[j][b];
        }
    }

    // series embedding
    for t in 0..l {
        for i in 0..d {
            g[WS][i] += x.series[t] * ds[t][i];
            g[BS][i] += ds[t][i];
            g[POS_S][t * d + i] += ds[t][i];
        }
    }
}
