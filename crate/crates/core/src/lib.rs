//! Content-aware adaptive streaming.
//!
//! Per-chunk saliency weights are obtained from a rating oracle over sliding
//! windows ([`perception`]), globally re-ranked with an oracle-guided merge
//! sort for on-demand video ([`ranking`]), forecast ahead of the playhead for
//! live video ([`forecast`], [`live`]), and consumed by a weighted-QoE bitrate
//! controller ([`abr`]).

// `!(x >= lo)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abr;
pub mod forecast;
pub mod live;
pub mod model;
pub mod perception;
pub mod ranking;
pub mod rater;
pub mod rng;
pub mod synth;
