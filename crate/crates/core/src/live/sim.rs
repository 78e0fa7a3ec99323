use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{required_lout, select_model, Forecaster, LiveConfig, LiveError};
use crate::forecast::ForecastInput;
use crate::model::VideoRecord;
use crate::rater::{Oracle, WindowRequest, WindowResponse};
use crate::rng::tags;

/// One line of the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    ChunkPlayed {
        chunk: usize,
    },
    RaterSubmitted {
        window: usize,
        first: usize,
        last: usize,
    },
    RaterResponded {
        window: usize,
        latency_s: f64,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    ForecastSubmitted {
        window: usize,
        required: usize,
        l_out: usize,
        shortfall: usize,
        delta_est_s: f64,
        first_chunk: usize,
    },
    ForecastCompleted {
        window: usize,
        first_chunk: usize,
        weights: Vec<f64>,
        /// Trailing entries that are padding for a too-short forecast.
        padded: usize,
        latency_s: f64,
    },
    ForecastFailed {
        window: usize,
        error: String,
    },
    WeightsQueried {
        after_chunk: usize,
        first: usize,
        weights: Vec<f64>,
        /// Whether each weight came from a forecast.
        served: Vec<bool>,
        hit: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub seq: usize,
    pub t: f64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone)]
pub struct LiveSession {
    pub timeline: Vec<TimelineEntry>,
    pub chunk_count: usize,
    pub horizon: usize,
}

impl LiveSession {
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.timeline {
            s.push_str(&serde_json::to_string(e).expect("timeline serializes"));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
struct PoolEntry {
    weight: f64,
    window: usize,
    padded: bool,
}

enum Pending {
    Chunk(usize),
    Response {
        window: usize,
        first: usize,
        last: usize,
        result: Result<WindowResponse, String>,
    },
    Forecast {
        window: usize,
        first_chunk: usize,
        weights: Vec<f64>,
        padded: usize,
        latency_s: f64,
    },
}

struct Scheduled {
    t: f64,
    order: u64,
    what: Pending,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // reversed: BinaryHeap pops the earliest time, then the earliest scheduled
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then(other.order.cmp(&self.order))
    }
}

struct Loop<'a, O: ?Sized, F: ?Sized> {
    cfg: &'a LiveConfig,
    video: &'a VideoRecord,
    oracle: &'a mut O,
    forecaster: &'a mut F,
    seed: u64,
    queue: BinaryHeap<Scheduled>,
    order: u64,
    timeline: Vec<TimelineEntry>,
    pool: Vec<Option<PoolEntry>>,
    summary: String,
    delta_est: f64,
}

impl<O: Oracle + ?Sized, F: Forecaster + ?Sized> Loop<'_, O, F> {
    fn schedule(&mut self, t: f64, what: Pending) {
        self.queue.push(Scheduled {
            t,
            order: self.order,
            what,
        });
        self.order += 1;
    }

    fn log(&mut self, t: f64, event: Event) {
        let seq = self.timeline.len();
        self.timeline.push(TimelineEntry { seq, t, event });
    }

    fn chunk_played(&mut self, t: f64, chunk: usize) {
        self.log(t, Event::ChunkPlayed { chunk });
        let m = self.cfg.m;
        if (chunk + 1).is_multiple_of(m) {
            let window = chunk / m;
            let first = chunk + 1 - m;
            let req = WindowRequest {
                window_index: window,
                frame_indices: (first..=chunk).collect(),
                prev_summary: self.summary.clone(),
                video_info: self.cfg.video_info.clone(),
                anchor: self.cfg.anchor,
            };
            // the rater works in the background; its answer is delivered
            // after its own latency
            let result = self.oracle.rate_window(&req).map_err(|e| e.to_string());
            let latency = result.as_ref().map_or(0.0, |r| r.latency_s);
            self.log(
                t,
                Event::RaterSubmitted {
                    window,
                    first,
                    last: chunk,
                },
            );
            self.schedule(
                t + latency,
                Pending::Response {
                    window,
                    first,
                    last: chunk,
                    result,
                },
            );
        }
        self.query(t, chunk);
    }

    fn query(&mut self, t: f64, after_chunk: usize) {
        let first = after_chunk + 1;
        let end = (first + self.cfg.horizon).min(self.pool.len());
        if first >= end {
            return;
        }
        let (weights, served): (Vec<f64>, Vec<bool>) = self.pool[first..end]
            .iter()
            .map(|e| match e {
                Some(p) if !p.padded => (p.weight, true),
                Some(p) => (p.weight, false),
                None => (1.0, false),
            })
            .unzip();
        let hit = served.iter().all(|&s| s);
        self.log(
            t,
            Event::WeightsQueried {
                after_chunk,
                first,
                weights,
                served,
                hit,
            },
        );
    }

    fn responded(
        &mut self,
        t: f64,
        window: usize,
        first: usize,
        last: usize,
        result: Result<WindowResponse, String>,
    ) {
        let resp = match result {
            Ok(r) => r,
            Err(error) => {
                self.log(
                    t,
                    Event::RaterResponded {
                        window,
                        latency_s: 0.0,
                        ok: false,
                        error: Some(error),
                    },
                );
                return;
            }
        };
        self.log(
            t,
            Event::RaterResponded {
                window,
                latency_s: resp.latency_s,
                ok: true,
                error: None,
            },
        );
        self.summary = resp.total_summary.clone();

        let required = required_lout(
            resp.latency_s,
            self.delta_est,
            self.cfg.chunk_s,
            self.cfg.m,
            self.cfg.horizon,
        );
        let sel = select_model(required, &self.cfg.pretrained_outputs);
        let first_chunk = last + 1;
        self.log(
            t,
            Event::ForecastSubmitted {
                window,
                required,
                l_out: sel.l_out,
                shortfall: sel.shortfall,
                delta_est_s: self.delta_est,
                first_chunk,
            },
        );
        let input = ForecastInput {
            series: resp.ratings.iter().map(|&r| f64::from(r) / 100.0).collect(),
            frame_embeddings: self.video.chunks[first..=last]
                .iter()
                .map(|c| c.embedding.clone())
                .collect(),
            text_embedding: self.video.text_embedding.clone(),
        };
        match self.forecaster.forecast(sel.l_out, &input) {
            Ok(mut weights) => {
                weights.truncate(sel.l_out);
                weights.extend(std::iter::repeat_n(1.0, sel.shortfall));
                let latency_s = self.cfg.forecast_latency.sample(
                    self.seed,
                    tags::FORECAST_LATENCY,
                    window as u64,
                );
                self.schedule(
                    t + latency_s,
                    Pending::Forecast {
                        window,
                        first_chunk,
                        weights,
                        padded: sel.shortfall,
                        latency_s,
                    },
                );
            }
            Err(e) => self.log(
                t,
                Event::ForecastFailed {
                    window,
                    error: e.to_string(),
                },
            ),
        }
    }

    fn completed(
        &mut self,
        t: f64,
        window: usize,
        first_chunk: usize,
        weights: Vec<f64>,
        padded: usize,
        latency_s: f64,
    ) {
        let real = weights.len() - padded;
        for (k, &w) in weights.iter().enumerate() {
            let Some(slot) = self.pool.get_mut(first_chunk + k) else {
                break;
            };
            if slot.is_some_and(|p| p.window > window) {
                continue;
            }
            *slot = Some(PoolEntry {
                weight: w.clamp(0.0, 1.0),
                window,
                padded: k >= real,
            });
        }
        let a = self.cfg.ewma_alpha;
        self.delta_est = a * latency_s + (1.0 - a) * self.delta_est;
        self.log(
            t,
            Event::ForecastCompleted {
                window,
                first_chunk,
                weights,
                padded,
                latency_s,
            },
        );
    }
}

/// Plays `video` in real time. Chunk `i` finishes playing at `(i + 1)·d`.
/// Events at the same instant run in the order they were scheduled.
pub fn run_live_session<O: Oracle + ?Sized, F: Forecaster + ?Sized>(
    video: &VideoRecord,
    cfg: &LiveConfig,
    oracle: &mut O,
    forecaster: &mut F,
    seed: u64,
) -> Result<LiveSession, LiveError> {
    cfg.validate()?;
    let d = video.len();
    let mut lp = Loop {
        cfg,
        video,
        oracle,
        forecaster,
        seed,
        queue: BinaryHeap::new(),
        order: 0,
        timeline: Vec::new(),
        pool: vec![None; d],
        summary: String::new(),
        delta_est: cfg.forecast_latency_est_s,
    };
    for i in 0..d {
        lp.schedule((i + 1) as f64 * cfg.chunk_s, Pending::Chunk(i));
    }
    while let Some(next) = lp.queue.pop() {
        match next.what {
            Pending::Chunk(i) => lp.chunk_played(next.t, i),
            Pending::Response {
                window,
                first,
                last,
                result,
            } => lp.responded(next.t, window, first, last, result),
            Pending::Forecast {
                window,
                first_chunk,
                weights,
                padded,
                latency_s,
            } => lp.completed(next.t, window, first_chunk, weights, padded, latency_s),
        }
    }
    let short = lp
        .timeline
        .iter()
        .filter(|e| matches!(e.event, Event::ForecastSubmitted { shortfall, .. } if shortfall > 0))
        .count();
    if short > 0 {
        log::warn!(
            "video {}: {short} forecasts were shorter than required and padded with 1",
            video.video_id
        );
    }
    Ok(LiveSession {
        timeline: lp.timeline,
        chunk_count: d,
        horizon: cfg.horizon,
    })
}
