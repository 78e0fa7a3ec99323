//! The rating / sorting oracle that stands in for a multimodal LLM.
//!
//! [`MockOracle`] is a deterministic simulator driven by ground truth; the
//! optional [`HttpOracle`] talks to a chat-completions endpoint using the
//! prompt grammar in [`prompt`].

#[cfg(feature = "http")]
mod http;
mod mock;
pub mod prompt;

#[cfg(feature = "http")]
pub use http::{HttpOracle, HttpOracleConfig};
pub use mock::{MockOracle, MockOracleConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::AnchorFrame;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed reply: {0}")]
    MalformedReply(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("oracle configuration: {0}")]
    Config(String),
}

impl OracleError {
    /// Transport failures and malformed replies may succeed on a retry.
    pub fn is_retriable(&self) -> bool {
        matches!(self, Self::Transport(_) | Self::MalformedReply(_))
    }
}

/// One sliding window submitted for rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRequest {
    /// 0-based window ordinal within the video.
    pub window_index: usize,
    pub frame_indices: Vec<usize>,
    pub prev_summary: String,
    pub video_info: String,
    #[serde(default)]
    pub anchor: AnchorFrame,
}

impl WindowRequest {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.frame_indices.is_empty() {
            return Err(OracleError::InvalidRequest("empty window".into()));
        }
        if self.frame_indices.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(OracleError::InvalidRequest(format!(
                "window frames must be contiguous and increasing: {:?}",
                self.frame_indices
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResponse {
    /// Integer ratings in `[0, 100]`, one per requested frame.
    pub ratings: Vec<u8>,
    pub partial_summary: String,
    pub total_summary: String,
    pub latency_s: f64,
}

/// Candidates drawn from two sorted groups, to be ordered best-first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortRequest {
    pub candidate_indices: Vec<usize>,
    pub global_summary: String,
}

impl SortRequest {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.candidate_indices.is_empty() {
            return Err(OracleError::InvalidRequest("empty sort request".into()));
        }
        let mut seen = self.candidate_indices.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(OracleError::InvalidRequest(format!(
                "duplicate candidates in {:?}",
                self.candidate_indices
            )));
        }
        Ok(())
    }
}

/// Fails unless `reply` is a permutation of the request's candidates.
pub fn ensure_permutation(req: &SortRequest, reply: &[usize]) -> Result<(), OracleError> {
    let mut a = req.candidate_indices.clone();
    let mut b = reply.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return Err(OracleError::MalformedReply(format!(
            "sort reply {reply:?} is not a permutation of {:?}",
            req.candidate_indices
        )));
    }
    Ok(())
}

/// Per-call token estimate: `per_call + per_frame * frames`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenCost {
    pub per_frame: u64,
    pub per_call: u64,
}

impl Default for TokenCost {
    fn default() -> Self {
        // 85 tokens is the flat cost of one low-detail image tile.
        Self {
            per_frame: 85,
            per_call: 250,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallLedger {
    pub rate_calls: u64,
    pub sort_calls: u64,
    pub total_tokens_estimate: u64,
}

impl CallLedger {
    pub(crate) fn record_rate(&mut self, frames: usize, cost: &TokenCost) {
        self.rate_calls += 1;
        self.total_tokens_estimate += cost.per_call + cost.per_frame * frames as u64;
    }

    pub(crate) fn record_sort(&mut self, frames: usize, cost: &TokenCost) {
        self.sort_calls += 1;
        self.total_tokens_estimate += cost.per_call + cost.per_frame * frames as u64;
    }
}

/// Rating and comparison capability used by perception and ranking.
///
/// Calls take `&mut self`: an instance hands out invocation ordinals in a
/// single total order.
pub trait Oracle {
    fn rate_window(&mut self, req: &WindowRequest) -> Result<WindowResponse, OracleError>;

    /// Orders the candidates best-first. Implementations must return a
    /// permutation of `req.candidate_indices`.
    fn sort_window(&mut self, req: &SortRequest) -> Result<Vec<usize>, OracleError>;

    fn ledger(&self) -> CallLedger;
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn rate_window(&mut self, req: &WindowRequest) -> Result<WindowResponse, OracleError> {
        (**self).rate_window(req)
    }

    fn sort_window(&mut self, req: &SortRequest) -> Result<Vec<usize>, OracleError> {
        (**self).sort_window(req)
    }

    fn ledger(&self) -> CallLedger {
        (**self).ledger()
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn rate_window(&mut self, req: &WindowRequest) -> Result<WindowResponse, OracleError> {
        (**self).rate_window(req)
    }

    fn sort_window(&mut self, req: &SortRequest) -> Result<Vec<usize>, OracleError> {
        (**self).sort_window(req)
    }

    fn ledger(&self) -> CallLedger {
        (**self).ledger()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation() {
        let mut r = WindowRequest {
            window_index: 0,
            frame_indices: vec![3, 4, 5],
            prev_summary: String::new(),
            video_info: String::new(),
            anchor: AnchorFrame::First,
        };
        assert!(r.validate().is_ok());
        r.frame_indices = vec![3, 5];
        assert!(r.validate().is_err());
        r.frame_indices.clear();
        assert!(r.validate().is_err());

        let s = SortRequest {
            candidate_indices: vec![1, 1],
            global_summary: String::new(),
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn permutation_check() {
        let s = SortRequest {
            candidate_indices: vec![7, 3, 5],
            global_summary: String::new(),
        };
        assert!(ensure_permutation(&s, &[5, 3, 7]).is_ok());
        assert!(ensure_permutation(&s, &[5, 3]).is_err());
        assert!(ensure_permutation(&s, &[5, 3, 3]).is_err());
        assert!(ensure_permutation(&s, &[5, 3, 8])
            .unwrap_err()
            .is_retriable());
    }

    #[test]
    fn ledger_token_estimate() {
        let mut l = CallLedger::default();
        let cost = TokenCost {
            per_frame: 10,
            per_call: 5,
        };
        l.record_rate(10, &cost);
        l.record_sort(4, &cost);
        assert_eq!(
            l,
            CallLedger {
                rate_calls: 1,
                sort_calls: 1,
                total_tokens_estimate: 105 + 45
            }
        );
    }
}
