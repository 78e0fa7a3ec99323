//! Per-chunk dataset CSV and network traces.
//!
//! Schema: `video_id,chunk_index,gt_saliency[,emb_0..emb_{E-1}]`, one row
//! per chunk, chunks of a video numbered from 0. Without embedding columns
//! the seeded generator fills them in.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use salstream_core::abr::NetworkTrace;
use salstream_core::model::{ChunkRecord, VideoRecord};
use salstream_core::rng::{derive_seed, stream_rng, tags};
use salstream_core::synth::{synthetic_video, EmbeddingGenerator, SynthConfig};

use crate::config::ExperimentConfig;
use crate::error::CliError;

fn synth_config(cfg: &ExperimentConfig) -> SynthConfig {
    SynthConfig {
        embedding_dim: cfg.data.synthetic.embedding_dim,
        lookahead: cfg.data.synthetic.lookahead,
        embedding_noise: cfg.data.synthetic.embedding_noise,
        chunk_duration_s: cfg.data.chunk_s,
    }
}

pub fn generator(cfg: &ExperimentConfig) -> EmbeddingGenerator {
    EmbeddingGenerator::new(&synth_config(cfg), cfg.seed)
}

/// Parses a dataset CSV. Videos come back in order of first appearance.
/// Embeddings absent from the file are synthesized from the saliency
/// curve with `generator`.
pub fn load_dataset(
    path: &Path,
    chunk_s: f64,
    generator: &EmbeddingGenerator,
    seed: u64,
) -> Result<Vec<VideoRecord>, CliError> {
    let shown = path.display().to_string();
    let err = |line: u64, msg: String| CliError::Dataset {
        path: shown.clone(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(0, e.to_string()))?;
    let headers = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(c_id), Some(c_idx), Some(c_gt)) =
        (col("video_id"), col("chunk_index"), col("gt_saliency"))
    else {
        return Err(err(
            1,
            "header must contain video_id, chunk_index and gt_saliency".into(),
        ));
    };
    let mut emb_cols = Vec::new();
    while let Some(c) = col(&format!("emb_{}", emb_cols.len())) {
        emb_cols.push(c);
    }
    if let Some(h) = headers
        .iter()
        .find(|h| h.starts_with("emb_") && !emb_cols.iter().any(|&c| &headers[c] == *h))
    {
        return Err(err(1, format!("embedding column {h} out of sequence")));
    }

    let mut order: Vec<String> = Vec::new();
    // per video: (chunk_index, gt, embedding, line)
    type Row = (usize, f64, Vec<f64>, u64);
    let mut rows: BTreeMap<String, Vec<Row>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |c: usize| rec.get(c).unwrap_or("");
        let id = field(c_id).to_string();
        if id.is_empty() {
            return Err(err(line, "empty video_id".into()));
        }
        let idx: usize = field(c_idx).parse().map_err(|_| {
            err(
                line,
                format!("chunk_index {:?} is not an integer", field(c_idx)),
            )
        })?;
        let gt: f64 = field(c_gt).parse().map_err(|_| {
            err(
                line,
                format!("gt_saliency {:?} is not a number", field(c_gt)),
            )
        })?;
        if !(0.0..=1.0).contains(&gt) {
            return Err(err(line, format!("gt_saliency {gt} outside [0, 1]")));
        }
        let emb = emb_cols
            .iter()
            .map(|&c| {
                field(c)
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        err(
                            line,
                            format!("{} {:?} is not a number", &headers[c], field(c)),
                        )
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if !rows.contains_key(&id) {
            order.push(id.clone());
        }
        rows.entry(id).or_default().push((idx, gt, emb, line));
    }
    if order.is_empty() {
        return Err(err(1, "no rows".into()));
    }

    let mut videos = Vec::with_capacity(order.len());
    for (vi, id) in order.into_iter().enumerate() {
        let mut chunks = rows.remove(&id).expect("id was recorded");
        chunks.sort_by_key(|c| c.0);
        for (expected, c) in chunks.iter().enumerate() {
            if c.0 != expected {
                return Err(err(
                    c.3,
                    format!(
                        "video {id}: chunk_index {} where {expected} was expected",
                        c.0
                    ),
                ));
            }
        }
        let has_emb = !emb_cols.is_empty();
        let mut video = VideoRecord {
            video_id: id.clone(),
            title_info: id.clone(),
            chunks: chunks
                .iter()
                .map(|(index, gt, emb, _)| ChunkRecord {
                    index: *index,
                    duration_s: chunk_s,
                    gt_saliency: *gt,
                    embedding: emb.clone(),
                })
                .collect(),
            text_embedding: Vec::new(),
        };
        if has_emb {
            video.text_embedding = mean_embedding(&video);
        } else {
            generator.embed_video(&mut video, derive_seed(seed, tags::VIDEO, vi as u64));
        }
        video
            .validate()
            .map_err(|e| err(chunks[0].3, format!("video {id}: {e}")))?;
        videos.push(video);
    }
    Ok(videos)
}

/// Pooled frame embedding, standing in for a summary text feature when the
/// dataset carries only frame features.
fn mean_embedding(v: &VideoRecord) -> Vec<f64> {
    let dim = v.chunks.first().map_or(0, |c| c.embedding.len());
    let mut out = vec![0.0; dim];
    for c in &v.chunks {
        for (o, e) in out.iter_mut().zip(&c.embedding) {
            *o += e;
        }
    }
    let n = v.len().max(1) as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Writes videos in the dataset schema, with embedding columns when the
/// videos carry embeddings.
pub fn write_dataset(
    path: &Path,
    videos: &[VideoRecord],
    with_embeddings: bool,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = if with_embeddings {
        videos.first().map_or(0, VideoRecord::embedding_dim)
    } else {
        0
    };
    let mut header = vec![
        "video_id".to_string(),
        "chunk_index".into(),
        "gt_saliency".into(),
    ];
    header.extend((0..dim).map(|k| format!("emb_{k}")));
    w.write_record(&header)?;
    for v in videos {
        for c in &v.chunks {
            let mut row = vec![
                v.video_id.clone(),
                c.index.to_string(),
                c.gt_saliency.to_string(),
            ];
            row.extend(c.embedding.iter().take(dim).map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn synthetic_dataset(cfg: &ExperimentConfig) -> Vec<VideoRecord> {
    let g = generator(cfg);
    (0..cfg.data.synthetic.videos)
        .map(|i| {
            synthetic_video(
                &format!("syn{i:03}"),
                cfg.data.synthetic.chunks,
                &g,
                cfg.data.chunk_s,
                derive_seed(cfg.seed, tags::VIDEO, i as u64),
            )
        })
        .collect()
}

/// The configured dataset, or a synthetic one when none is given.
pub fn videos(cfg: &ExperimentConfig) -> Result<Vec<VideoRecord>, CliError> {
    match &cfg.data.dataset {
        Some(p) => {
            let v = load_dataset(p, cfg.data.chunk_s, &generator(cfg), cfg.seed)?;
            let want = cfg.embedding_dim();
            if let Some(bad) = v.iter().find(|x| x.embedding_dim() != want) {
                return Err(CliError::Config(format!(
                    "video {} has {}-dimensional embeddings; data.synthetic.embedding_dim is {want}",
                    bad.video_id,
                    bad.embedding_dim()
                )));
            }
            Ok(v)
        }
        None => Ok(synthetic_dataset(cfg)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Seeded shuffle of video positions into train / val / test.
pub fn split(n: usize, fractions: [f64; 3], seed: u64) -> Vec<Split> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, tags::SPLIT, n as u64));
    let n_train = (fractions[0] * n as f64).round() as usize;
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train.min(n));
    let mut out = vec![Split::Test; n];
    for (rank, &i) in idx.iter().enumerate() {
        out[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    out
}

/// Named traces: the configured files, or seeded synthetic ones.
pub fn traces(cfg: &ExperimentConfig) -> Result<Vec<(String, NetworkTrace)>, CliError> {
    if !cfg.data.traces.is_empty() {
        return cfg
            .data
            .traces
            .iter()
            .map(|p| {
                let name = p.file_stem().map_or_else(
                    || p.display().to_string(),
                    |s| s.to_string_lossy().into_owned(),
                );
                let text = std::fs::read_to_string(p)?;
                let t = NetworkTrace::parse(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Ok((name, t))
            })
            .collect();
    }
    let s = &cfg.data.synthetic;
    let len = (s.chunks as f64 * cfg.data.chunk_s * 2.0).max(60.0) as usize;
    Ok((0..s.traces)
        .map(|k| {
            (
                format!("synthetic{k}"),
                synthetic_trace(
                    len,
                    s.trace_mean_kbps,
                    derive_seed(cfg.seed, tags::VIDEO, 1000 + k as u64),
                ),
            )
        })
        .collect())
}

/// One-second segments whose throughput follows a log-normal random walk
/// around `mean_kbps`.
pub fn synthetic_trace(seconds: usize, mean_kbps: f64, seed: u64) -> NetworkTrace {
    let mut rng = stream_rng(seed, tags::VIDEO, seconds as u64);
    let mut level = mean_kbps.ln();
    let samples = (0..seconds.max(2))
        .map(|t| {
            level = 0.8 * level + 0.2 * mean_kbps.ln() + 0.15 * (rng.random::<f64>() - 0.5);
            let kbps = LogNormal::new(level, 0.25)
                .expect("finite parameters")
                .sample(&mut rng)
                .clamp(0.1 * mean_kbps, 5.0 * mean_kbps);
            (t as f64, kbps)
        })
        .collect();
    NetworkTrace::new(samples).expect("synthetic trace is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_ratios() {
        let s = split(20, [0.7, 0.15, 0.15], 3);
        let count = |k| s.iter().filter(|&&x| x == k).count();
        assert_eq!(count(Split::Train), 14);
        assert_eq!(count(Split::Val), 3);
        assert_eq!(count(Split::Test), 3);
        assert_eq!(s, split(20, [0.7, 0.15, 0.15], 3));
    }

    #[test]
    fn synthetic_trace_is_positive() {
        let t = synthetic_trace(100, 1500.0, 1);
        assert!(t.mean_kbps() > 300.0 && t.mean_kbps() < 7500.0);
    }
}
