use std::collections::{HashMap, HashSet};

use super::sim::{Event, TimelineEntry};
use super::LiveError;
use crate::abr::WeightSource;

fn queries(timeline: &[TimelineEntry]) -> impl Iterator<Item = (&TimelineEntry, bool)> {
    timeline.iter().filter_map(|e| match &e.event {
        Event::WeightsQueried { hit, .. } => Some((e, *hit)),
        _ => None,
    })
}

fn ratio(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Fraction of weight queries served entirely from forecasts.
pub fn utility(timeline: &[TimelineEntry]) -> f64 {
    let (h, n) = queries(timeline).fold((0, 0), |(h, n), (_, hit)| (h + hit as usize, n + 1));
    ratio(h, n)
}

/// Same, counting only queries after the first forecast landed.
pub fn utility_after_warmup(timeline: &[TimelineEntry]) -> f64 {
    let Some(start) = timeline
        .iter()
        .position(|e| matches!(e.event, Event::ForecastCompleted { .. }))
    else {
        return 0.0;
    };
    let (h, n) =
        queries(&timeline[start..]).fold((0, 0), |(h, n), (_, hit)| (h + hit as usize, n + 1));
    ratio(h, n)
}

/// Rebuilds the weight pool from the completed forecasts alone, re-answers
/// every query, and checks the recorded answers against it. Returns the
/// utility of the re-answered queries.
pub fn replay_utility(timeline: &[TimelineEntry], chunk_count: usize) -> Result<f64, LiveError> {
    // (weight, window, padded)
    let mut pool: Vec<Option<(f64, usize, bool)>> = vec![None; chunk_count];
    let (mut hits, mut total) = (0, 0);
    for e in timeline {
        match &e.event {
            Event::ForecastCompleted {
                window,
                first_chunk,
                weights,
                padded,
                ..
            } => {
                let real = weights.len() - padded;
                for (k, &w) in weights.iter().enumerate() {
                    let Some(slot) = pool.get_mut(first_chunk + k) else {
                        break;
                    };
                    if slot.is_some_and(|p| p.1 > *window) {
                        continue;
                    }
                    *slot = Some((w.clamp(0.0, 1.0), *window, k >= real));
                }
            }
            Event::WeightsQueried {
                first,
                weights,
                served,
                hit,
                ..
            } => {
                let end = (first + weights.len()).min(chunk_count);
                let (w2, s2): (Vec<f64>, Vec<bool>) = pool[*first..end]
                    .iter()
                    .map(|p| match p {
                        Some((w, _, false)) => (*w, true),
                        Some((w, _, true)) => (*w, false),
                        None => (1.0, false),
                    })
                    .unzip();
                let h2 = s2.iter().all(|&s| s);
                if &w2 != weights || &s2 != served || h2 != *hit {
                    return Err(LiveError::Replay {
                        seq: e.seq,
                        msg: format!("recorded {weights:?}/{served:?}, replayed {w2:?}/{s2:?}"),
                    });
                }
                hits += h2 as usize;
                total += 1;
            }
            _ => {}
        }
    }
    Ok(ratio(hits, total))
}

/// Checks ordering and causality over a session log:
/// clock and sequence monotone; every response follows its submission;
/// every forecast starts no earlier than the ratings it uses arrived and
/// completes at most once; and every weight query is answered at the very
/// instant its chunk finished, with no rater or forecaster event in between.
pub fn check_causality(timeline: &[TimelineEntry]) -> Result<(), LiveError> {
    let fail = |seq: usize, msg: String| Err(LiveError::Causality { seq, msg });
    let mut submitted: HashMap<usize, f64> = HashMap::new();
    let mut responded: HashMap<usize, (f64, bool)> = HashMap::new();
    let mut forecast_started: HashMap<usize, f64> = HashMap::new();
    let mut completed: HashSet<usize> = HashSet::new();
    let mut last_chunk: Option<(usize, usize, f64)> = None;

    for (i, e) in timeline.iter().enumerate() {
        if e.seq != i {
            return fail(
                e.seq,
                format!("sequence number out of order (position {i})"),
            );
        }
        if i > 0 && e.t < timeline[i - 1].t {
            return fail(e.seq, "clock went backwards".into());
        }
        match &e.event {
            Event::ChunkPlayed { chunk } => last_chunk = Some((*chunk, i, e.t)),
            Event::RaterSubmitted { window, .. } => {
                if submitted.insert(*window, e.t).is_some() {
                    return fail(e.seq, format!("window {window} submitted twice"));
                }
                if !matches!(last_chunk, Some((_, j, t)) if j + 1 == i && t == e.t) {
                    return fail(e.seq, "submission not issued at a chunk boundary".into());
                }
            }
            Event::RaterResponded { window, ok, .. } => {
                let Some(&ts) = submitted.get(window) else {
                    return fail(e.seq, format!("response for unsubmitted window {window}"));
                };
                if e.t < ts {
                    return fail(
                        e.seq,
                        format!("window {window} answered before it was sent"),
                    );
                }
                if responded.insert(*window, (e.t, *ok)).is_some() {
                    return fail(e.seq, format!("window {window} answered twice"));
                }
            }
            Event::ForecastSubmitted { window, .. } => {
                match responded.get(window) {
                    Some(&(tr, true)) if tr <= e.t => {}
                    _ => {
                        return fail(
                            e.seq,
                            format!("forecast for window {window} without its ratings"),
                        )
                    }
                }
                if forecast_started.insert(*window, e.t).is_some() {
                    return fail(e.seq, format!("window {window} forecast twice"));
                }
            }
            Event::ForecastCompleted { window, .. } => {
                match forecast_started.get(window) {
                    Some(&ts) if ts <= e.t => {}
                    _ => return fail(e.seq, format!("completion without submission for {window}")),
                }
                if !completed.insert(*window) {
                    return fail(e.seq, format!("window {window} completed twice"));
                }
            }
            Event::ForecastFailed { window, .. } => {
                if !forecast_started.contains_key(window) {
                    return fail(e.seq, format!("failure without submission for {window}"));
                }
            }
            Event::WeightsQueried { after_chunk, .. } => {
                let Some((chunk, j, t)) = last_chunk else {
                    return fail(e.seq, "query before any chunk played".into());
                };
                if chunk != *after_chunk || t != e.t {
                    return fail(e.seq, format!("query for chunk {after_chunk} was delayed"));
                }
                let between_ok = timeline[j + 1..i]
                    .iter()
                    .all(|x| matches!(x.event, Event::RaterSubmitted { .. }));
                if !between_ok {
                    return fail(e.seq, "query waited on another event".into());
                }
            }
        }
    }
    Ok(())
}

/// Weight the controller had for each chunk when choosing its level:
/// `Some` if it came from a forecast.
pub fn decision_weights(timeline: &[TimelineEntry], chunk_count: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; chunk_count];
    for e in timeline {
        if let Event::WeightsQueried {
            first,
            weights,
            served,
            ..
        } = &e.event
        {
            if let (Some(&w), Some(true)) = (weights.first(), served.first()) {
                out[*first] = Some(w);
            }
        }
    }
    out
}

/// Serves a controller exactly the answers recorded in a live session.
#[derive(Debug, Clone)]
pub struct QueryLog {
    answers: HashMap<usize, Vec<f64>>,
    len: usize,
}

impl QueryLog {
    pub fn from_timeline(timeline: &[TimelineEntry], chunk_count: usize) -> Self {
        let answers = timeline
            .iter()
            .filter_map(|e| match &e.event {
                Event::WeightsQueried { first, weights, .. } => Some((*first, weights.clone())),
                _ => None,
            })
            .collect();
        Self {
            answers,
            len: chunk_count,
        }
    }
}

impl WeightSource for QueryLog {
    fn weights_ahead(&mut self, next: usize, n: usize) -> Vec<f64> {
        let avail = n.min(self.len.saturating_sub(next));
        match self.answers.get(&next) {
            Some(w) => {
                let mut w = w.clone();
                w.resize(avail, 1.0);
                w
            }
            None => vec![1.0; avail],
        }
    }
}

/// Fraction of chunks whose own weight came from a forecast when the
/// controller chose their level. The first chunk is never covered.
pub fn chunk_coverage(timeline: &[TimelineEntry], chunk_count: usize) -> f64 {
    let covered = decision_weights(timeline, chunk_count)
        .iter()
        .filter(|w| w.is_some())
        .count();
    ratio(covered, chunk_count)
}
