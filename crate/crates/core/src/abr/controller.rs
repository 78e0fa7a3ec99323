use std::collections::VecDeque;

use super::{BitrateLadder, ChunkTerms, QoeParams};

/// Recent throughput samples are averaged harmonically; the robust estimate
/// divides by one plus the worst recent relative prediction error.
#[derive(Debug, Clone)]
pub struct ThroughputEstimator {
    window: usize,
    samples: VecDeque<f64>,
    errors: VecDeque<f64>,
    pending: Option<f64>,
}

impl Default for ThroughputEstimator {
    fn default() -> Self {
        Self::new(5)
    }
}

impl ThroughputEstimator {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            samples: VecDeque::new(),
            errors: VecDeque::new(),
            pending: None,
        }
    }

    /// Records a measured throughput and, if a prediction was outstanding,
    /// its relative error.
    pub fn observe(&mut self, kbps: f64) {
        if let Some(p) = self.pending.take() {
            push_bounded(&mut self.errors, (p - kbps).abs() / kbps, self.window);
        }
        push_bounded(&mut self.samples, kbps, self.window);
    }

    pub fn history(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().copied()
    }

    /// `(harmonic, robust)` predictions, or `None` before any sample. The
    /// harmonic value is remembered to score against the next observation.
    pub fn predict(&mut self) -> Option<(f64, f64)> {
        let h = harmonic_mean(self.samples.iter().copied())?;
        let max_err = self.errors.iter().copied().fold(0.0, f64::max);
        self.pending = Some(h);
        Some((h, h / (1.0 + max_err)))
    }
}

fn push_bounded(q: &mut VecDeque<f64>, v: f64, cap: usize) {
    if q.len() == cap {
        q.pop_front();
    }
    q.push_back(v);
}

pub fn harmonic_mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (n, inv) = values
        .into_iter()
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + 1.0 / v));
    (n > 0).then(|| n as f64 / inv)
}

/// What a controller sees before choosing the next chunk's level.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub chunk_index: usize,
    pub buffer_s: f64,
    pub last_level: Option<usize>,
    /// Weights for this chunk and the following ones, up to the horizon.
    pub weights_ahead: &'a [f64],
    pub harmonic_kbps: Option<f64>,
    pub robust_kbps: Option<f64>,
    pub chunk_s: f64,
    pub ladder: &'a BitrateLadder,
    pub params: &'a QoeParams,
}

pub trait Controller {
    fn name(&self) -> &'static str;
    fn decide(&mut self, ctx: &DecisionContext) -> usize;
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn decide(&mut self, ctx: &DecisionContext) -> usize {
        (**self).decide(ctx)
    }
}

struct Search<'a, F> {
    ctx: &'a DecisionContext<'a>,
    throughput: f64,
    score: F,
    plan: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl<F: Fn(&ChunkTerms, usize) -> f64> Search<'_, F> {
    fn walk(&mut self, buffer: f64, prev: Option<usize>, acc: f64) {
        let step = self.plan.len();
        if step == self.ctx.weights_ahead.len() {
            let better = match &self.best {
                None => true,
                Some((b, _)) => acc > b + 1e-9 * b.abs(),
            };
            if better {
                self.best = Some((acc, self.plan.clone()));
            }
            return;
        }
        for level in 0..self.ctx.ladder.len() {
            let download = self.ctx.ladder.kbps(level) * self.ctx.chunk_s / self.throughput;
            let rebuffer = (download - buffer).max(0.0);
            let next_buffer = (buffer - download).max(0.0) + self.ctx.chunk_s;
            let terms = self
                .ctx
                .params
                .chunk_terms(self.ctx.ladder, level, prev, rebuffer);
            let gain = (self.score)(&terms, step);
            self.plan.push(level);
            self.walk(next_buffer, Some(level), acc + gain);
            self.plan.pop();
        }
    }
}

fn search_plan<F: Fn(&ChunkTerms, usize) -> f64>(
    ctx: &DecisionContext,
    score: F,
) -> Option<(Vec<usize>, f64)> {
    let throughput = ctx.robust_kbps.filter(|&t| t > 0.0)?;
    if ctx.weights_ahead.is_empty() {
        return None;
    }
    let mut s = Search {
        ctx,
        throughput,
        score,
        plan: Vec::with_capacity(ctx.weights_ahead.len()),
        best: None,
    };
    s.walk(ctx.buffer_s, ctx.last_level, 0.0);
    s.best.map(|(v, p)| (p, v))
}

/// Best plan over every level sequence of the horizon and its weighted
/// score. Plans are visited in lexicographic order and only a strictly
/// better score replaces the incumbent, so ties go to lower levels.
pub fn mpc_plan(ctx: &DecisionContext) -> Option<(Vec<usize>, f64)> {
    let scope = ctx.params.weight_scope;
    search_plan(ctx, |t, j| t.weighted(ctx.weights_ahead[j], scope))
}

/// Same search with every chunk counted once, ignoring the weights' values.
pub fn mpc_plan_unweighted(ctx: &DecisionContext) -> Option<(Vec<usize>, f64)> {
    search_plan(ctx, |t, _| t.unweighted())
}

/// First level of the best weighted plan; the lowest level when no
/// throughput has been observed yet.
pub fn mpc_decide(ctx: &DecisionContext) -> usize {
    mpc_plan(ctx).map_or(0, |(p, _)| p[0])
}

pub fn mpc_decide_unweighted(ctx: &DecisionContext) -> usize {
    mpc_plan_unweighted(ctx).map_or(0, |(p, _)| p[0])
}

#[derive(Debug, Clone, Copy)]
pub struct RobustMpc {
    pub weighted: bool,
}

impl Controller for RobustMpc {
    fn name(&self) -> &'static str {
        if self.weighted {
            "robust_mpc"
        } else {
            "robust_mpc_unweighted"
        }
    }

    fn decide(&mut self, ctx: &DecisionContext) -> usize {
        if self.weighted {
            mpc_decide(ctx)
        } else {
            mpc_decide_unweighted(ctx)
        }
    }
}

/// Buffer-occupancy map: lowest level below the reservoir, top level above
/// reservoir plus cushion, linear in between.
#[derive(Debug, Clone, Copy)]
pub struct BufferBased {
    pub reservoir_s: f64,
    pub cushion_s: f64,
}

impl Default for BufferBased {
    fn default() -> Self {
        Self {
            reservoir_s: 5.0,
            cushion_s: 10.0,
        }
    }
}

impl Controller for BufferBased {
    fn name(&self) -> &'static str {
        "buffer_based"
    }

    fn decide(&mut self, ctx: &DecisionContext) -> usize {
        let top = ctx.ladder.top();
        if ctx.buffer_s < self.reservoir_s {
            0
        } else if ctx.buffer_s >= self.reservoir_s + self.cushion_s {
            top
        } else {
            let frac = (ctx.buffer_s - self.reservoir_s) / self.cushion_s;
            ((frac * top as f64).floor() as usize).min(top)
        }
    }
}

/// Highest level not above the harmonic-mean throughput.
#[derive(Debug, Clone, Copy, Default)]
pub struct RateBased;

impl Controller for RateBased {
    fn name(&self) -> &'static str {
        "rate_based"
    }

    fn decide(&mut self, ctx: &DecisionContext) -> usize {
        let Some(rate) = ctx.harmonic_kbps else {
            return 0;
        };
        ctx.ladder
            .levels()
            .iter()
            .rposition(|&l| l <= rate)
            .unwrap_or(0)
    }
}
