//! Seeded synthetic data: smooth saliency curves and stand-in content
//! embeddings.
//!
//! Frame embeddings are a fixed random linear map of a few per-chunk
//! features (current saliency and the mean saliency of the next few chunks)
//! plus Gaussian noise. The look-ahead feature mirrors real footage, where
//! what is on screen often foreshadows what comes next; it is what gives a
//! content-aware forecaster something to learn beyond the series itself.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::{ChunkRecord, VideoRecord};
use crate::rng::{stream_rng, tags};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub embedding_dim: usize,
    /// Chunks averaged into the look-ahead feature.
    pub lookahead: usize,
    pub embedding_noise: f64,
    pub chunk_duration_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            embedding_dim: crate::model::DEFAULT_EMBEDDING_DIM,
            lookahead: 5,
            embedding_noise: 0.05,
            chunk_duration_s: 1.0,
        }
    }
}

/// A smooth saliency curve in `[0, 1]`: a slow baseline plus a handful of
/// Gaussian bumps, min-max normalised.
pub fn saliency_curve(len: usize, seed: u64) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    let mut rng = stream_rng(seed, tags::SALIENCY, len as u64);
    let bumps = 2 + len / 30;
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let period: f64 = rng.random_range(40.0..120.0);
    let mut curve: Vec<f64> = (0..len)
        .map(|t| 0.3 * (std::f64::consts::TAU * t as f64 / period + phase).sin())
        .collect();
    for _ in 0..bumps {
        let center: f64 = rng.random_range(0.0..len as f64);
        let width: f64 = rng.random_range(3.0..12.0);
        let height: f64 = rng.random_range(0.4..1.0);
        for (t, v) in curve.iter_mut().enumerate() {
            let z = (t as f64 - center) / width;
            *v += height * (-0.5 * z * z).exp();
        }
    }
    normalise(&mut curve);
    curve
}

/// Repeating ramp from 0 to 1 with the given period.
pub fn sawtooth(len: usize, period: usize) -> Vec<f64> {
    let p = period.max(2);
    (0..len).map(|t| (t % p) as f64 / (p - 1) as f64).collect()
}

fn normalise(v: &mut [f64]) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for x in v.iter_mut() {
        *x = if span > 0.0 { (*x - lo) / span } else { 0.5 };
    }
}

const FRAME_FEATURES: usize = 3;
const TEXT_FEATURES: usize = 3;

/// Fixed random projections from saliency features to embedding space.
#[derive(Debug, Clone)]
pub struct EmbeddingGenerator {
    dim: usize,
    lookahead: usize,
    noise: f64,
    frame_proj: Vec<[f64; FRAME_FEATURES]>,
    text_proj: Vec<[f64; TEXT_FEATURES]>,
}

impl EmbeddingGenerator {
    pub fn new(cfg: &SynthConfig, seed: u64) -> Self {
        let mut rng = stream_rng(seed, tags::PROJECTION, cfg.embedding_dim as u64);
        let mut row = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect::<Vec<f64>>()
        };
        let frame_proj = (0..cfg.embedding_dim)
            .map(|_| {
                let r = row(FRAME_FEATURES);
                [r[0], r[1], r[2]]
            })
            .collect();
        let text_proj = (0..cfg.embedding_dim)
            .map(|_| {
                let r = row(TEXT_FEATURES);
                [r[0], r[1], r[2]]
            })
            .collect();
        Self {
            dim: cfg.embedding_dim,
            lookahead: cfg.lookahead.max(1),
            noise: cfg.embedding_noise,
            frame_proj,
            text_proj,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_embeddings(&self, gt: &[f64], seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(seed, tags::EMBEDDING, gt.len() as u64);
        let noise = Normal::new(0.0, self.noise.max(0.0)).expect("finite std");
        let scale = 1.0 / (FRAME_FEATURES as f64).sqrt();
        (0..gt.len())
            .map(|t| {
                let end = (t + self.lookahead).min(gt.len() - 1);
                let ahead = if end > t {
                    gt[t + 1..=end].iter().sum::<f64>() / (end - t) as f64
                } else {
                    gt[t]
                };
                let f = [gt[t], ahead, 1.0];
                self.frame_proj
                    .iter()
                    .map(|p| {
                        scale * (p[0] * f[0] + p[1] * f[1] + p[2] * f[2]) + noise.sample(&mut rng)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn text_embedding(&self, gt: &[f64]) -> Vec<f64> {
        let n = gt.len().max(1) as f64;
        let mean = gt.iter().sum::<f64>() / n;
        let var = gt.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
        let f = [mean, var.sqrt(), 1.0];
        let scale = 1.0 / (TEXT_FEATURES as f64).sqrt();
        self.text_proj
            .iter()
            .map(|p| scale * (p[0] * f[0] + p[1] * f[1] + p[2] * f[2]))
            .collect()
    }

    /// Fills in embeddings for a video whose chunks carry only saliency.
    pub fn embed_video(&self, video: &mut VideoRecord, seed: u64) {
        let gt = video.gt();
        for (c, e) in video
            .chunks
            .iter_mut()
            .zip(self.frame_embeddings(&gt, seed))
        {
            c.embedding = e;
        }
        video.text_embedding = self.text_embedding(&gt);
    }
}

pub fn synthetic_video(
    video_id: &str,
    len: usize,
    generator: &EmbeddingGenerator,
    chunk_duration_s: f64,
    seed: u64,
) -> VideoRecord {
    let gt = saliency_curve(len, seed);
    let mut video = VideoRecord {
        video_id: video_id.to_string(),
        title_info: format!("synthetic video {video_id}"),
        chunks: gt
            .iter()
            .enumerate()
            .map(|(index, &g)| ChunkRecord {
                index,
                duration_s: chunk_duration_s,
                gt_saliency: g,
                embedding: Vec::new(),
            })
            .collect(),
        text_embedding: Vec::new(),
    };
    generator.embed_video(&mut video, seed);
    video
}

/// `count` synthetic videos sharing one embedding generator.
pub fn synthetic_corpus(
    count: usize,
    len: usize,
    cfg: &SynthConfig,
    seed: u64,
) -> Vec<VideoRecord> {
    let generator = EmbeddingGenerator::new(cfg, seed);
    (0..count)
        .map(|i| {
            let vseed = crate::rng::derive_seed(seed, tags::VIDEO, i as u64);
            synthetic_video(
                &format!("syn{i:03}"),
                len,
                &generator,
                cfg.chunk_duration_s,
                vseed,
            )
        })
        .collect()
}
