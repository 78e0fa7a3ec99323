use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{RankingError, SortedGroup};
use crate::rater::{Oracle, OracleError, SortRequest};

/// In-flight merge of two sorted groups.
///
/// Items returned by the oracle but not committed go back to the front of
/// the group they came from, in the oracle's order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeProgress {
    pub a: VecDeque<usize>,
    pub b: VecDeque<usize>,
    pub committed: Vec<usize>,
}

impl MergeProgress {
    pub fn new(a: Vec<usize>, b: Vec<usize>) -> Self {
        Self {
            a: a.into(),
            b: b.into(),
            committed: Vec::with_capacity(0),
        }
    }

    pub fn is_done(&self) -> bool {
        self.a.is_empty() && self.b.is_empty()
    }

    /// Advances the merge by at most one oracle call. Returns the number of
    /// calls made. State changes only after the call succeeds.
    pub fn step<O: Oracle + ?Sized>(
        &mut self,
        m: usize,
        summary: &str,
        oracle: &mut O,
    ) -> Result<u64, OracleError> {
        if self.a.is_empty() || self.b.is_empty() {
            self.committed.extend(self.a.drain(..));
            self.committed.extend(self.b.drain(..));
            return Ok(0);
        }
        if self.a.len() + self.b.len() <= m {
            let cand: Vec<usize> = self.a.iter().chain(&self.b).copied().collect();
            let order = sort_call(oracle, cand, summary)?;
            self.committed.extend(order);
            self.a.clear();
            self.b.clear();
            return Ok(1);
        }
        let ha = m.div_ceil(2).min(self.a.len());
        let hb = (m / 2).min(self.b.len());
        let cand: Vec<usize> = self
            .a
            .iter()
            .take(ha)
            .chain(self.b.iter().take(hb))
            .copied()
            .collect();
        let order = sort_call(oracle, cand, summary)?;

        let from_a: Vec<usize> = self.a.iter().take(ha).copied().collect();
        // A group's items left outside the window rank below its lowest
        // window item, so everything up to the first such boundary is final.
        // That is never fewer than ⌊m/2⌋ items.
        let last_pos = |from_a_side: bool| {
            order
                .iter()
                .rposition(|i| from_a.contains(i) == from_a_side)
                .expect("each side contributed")
        };
        let mut commit = order.len();
        if self.a.len() > ha {
            commit = commit.min(last_pos(true) + 1);
        }
        if self.b.len() > hb {
            commit = commit.min(last_pos(false) + 1);
        }
        self.a.drain(..ha);
        self.b.drain(..hb);
        let (keep, rest) = order.split_at(commit);
        self.committed.extend_from_slice(keep);
        for &i in rest.iter().rev() {
            if from_a.contains(&i) {
                self.a.push_front(i);
            } else {
                self.b.push_front(i);
            }
        }
        Ok(1)
    }

    pub fn into_committed(self) -> Vec<usize> {
        self.committed
    }
}

fn sort_call<O: Oracle + ?Sized>(
    oracle: &mut O,
    candidate_indices: Vec<usize>,
    summary: &str,
) -> Result<Vec<usize>, OracleError> {
    oracle.sort_window(&SortRequest {
        candidate_indices,
        global_summary: summary.to_string(),
    })
}

/// Merges two sorted groups. Returns the merged order and the number of
/// oracle calls.
pub fn merge_two<O: Oracle + ?Sized>(
    a: &SortedGroup,
    b: &SortedGroup,
    summary: &str,
    m: usize,
    oracle: &mut O,
) -> Result<(SortedGroup, u64), OracleError> {
    if m < 2 {
        return Err(OracleError::InvalidRequest(format!("merge window {m} < 2")));
    }
    let mut progress = MergeProgress::new(a.0.clone(), b.0.clone());
    let mut calls = 0;
    while !progress.is_done() {
        calls += progress.step(m, summary, oracle)?;
    }
    Ok((SortedGroup(progress.into_committed()), calls))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Leaf(usize),
    Merge,
}

/// Post-order schedule of the binary recursion; the left half takes
/// `⌈k/2⌉` groups.
fn plan(lo: usize, hi: usize, out: &mut Vec<Step>) {
    if hi - lo == 1 {
        out.push(Step::Leaf(lo));
        return;
    }
    let mid = lo + (hi - lo).div_ceil(2);
    plan(lo, mid, out);
    plan(mid, hi, out);
    out.push(Step::Merge);
}

/// Resumable state of a global sort. Serialized as the snapshot written when
/// an oracle call fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortState {
    pub groups: Vec<SortedGroup>,
    /// Groups that get one oracle sort before merging.
    pub refine: Vec<bool>,
    pub summary: String,
    pub m: usize,
    /// Next step of the schedule to run.
    pub cursor: usize,
    /// Finished sub-results awaiting their merge.
    pub stack: Vec<Vec<usize>>,
    pub current: Option<MergeProgress>,
    pub sort_calls: u64,
}

impl SortState {
    pub fn new(
        groups: Vec<SortedGroup>,
        refine: Vec<bool>,
        summary: String,
        m: usize,
    ) -> Result<Self, RankingError> {
        if groups.len() > 1 && m < 2 {
            return Err(RankingError::WindowTooSmall(m));
        }
        assert_eq!(groups.len(), refine.len(), "one refine flag per group");
        Ok(Self {
            groups,
            refine,
            summary,
            m,
            cursor: 0,
            stack: Vec::new(),
            current: None,
            sort_calls: 0,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sort state serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    fn run<O: Oracle + ?Sized>(&mut self, oracle: &mut O) -> Result<(), OracleError> {
        if self.groups.is_empty() {
            return Ok(());
        }
        let mut steps = Vec::new();
        plan(0, self.groups.len(), &mut steps);
        while let Some(&step) = steps.get(self.cursor) {
            match step {
                Step::Leaf(i) => {
                    let group = &self.groups[i].0;
                    let sorted = if self.refine[i] && group.len() > 1 {
                        let order = sort_call(oracle, group.clone(), &self.summary)?;
                        self.sort_calls += 1;
                        order
                    } else {
                        group.clone()
                    };
                    self.stack.push(sorted);
                }
                Step::Merge => {
                    if self.current.is_none() {
                        let b = self.stack.pop().expect("merge has a right operand");
                        let a = self.stack.pop().expect("merge has a left operand");
                        self.current = Some(MergeProgress::new(a, b));
                    }
                    let progress = self.current.as_mut().expect("merge in progress");
                    while !progress.is_done() {
                        self.sort_calls += progress.step(self.m, &self.summary, oracle)?;
                    }
                    let done = self.current.take().expect("merge in progress");
                    self.stack.push(done.into_committed());
                }
            }
            self.cursor += 1;
        }
        Ok(())
    }
}

/// An oracle failure during a global sort, with the state needed to resume.
#[derive(Debug)]
pub struct SortError {
    pub source: OracleError,
    pub snapshot: SortState,
}

impl fmt::Display for SortError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sort interrupted at step {} after {} calls: {}",
            self.snapshot.cursor, self.snapshot.sort_calls, self.source
        )
    }
}

impl std::error::Error for SortError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Runs (or continues) a sort to completion. Returns the global order and
/// the total oracle calls, including those made before any interruption.
// the error carries the whole resumable state by design
#[allow(clippy::result_large_err)]
pub fn resume_sort<O: Oracle + ?Sized>(
    mut state: SortState,
    oracle: &mut O,
) -> Result<(Vec<usize>, u64), SortError> {
    match state.run(oracle) {
        Ok(()) => Ok((state.stack.pop().unwrap_or_default(), state.sort_calls)),
        Err(source) => Err(SortError {
            source,
            snapshot: state,
        }),
    }
}

/// Merges seeded groups into one global order, trusting each group's order.
pub fn global_sort<O: Oracle + ?Sized>(
    groups: &[SortedGroup],
    summary: &str,
    m: usize,
    oracle: &mut O,
) -> Result<(Vec<usize>, u64), RankingError> {
    let state = SortState::new(
        groups.to_vec(),
        vec![false; groups.len()],
        summary.into(),
        m,
    )?;
    Ok(resume_sort(state, oracle)?)
}
