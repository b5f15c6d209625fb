//! Online network design at desk scale.
//!
//! Everything here runs against an [`metric::OnlineMetric`]: points arrive one
//! at a time and reveal their distances to all previous points. On top of that
//! model the crate maintains:
//!
//! - [`last`]: a greedy Steiner tree plus direct edges with root-stretch ≤ 7,
//! - [`mlast`]: the multi-sink variant with stretch ≤ 3 against a growing sink set,
//! - [`spanner`]: an online multicommodity spanner with O(k) edges and
//!   4·log₂k stretch, certified through per-scale meta-graph girth,
//! - [`bab`]: deterministic single-sink buy-at-bulk over a pruned cable
//!   schedule, layered over per-type multi-sink trees,
//! - [`oblivious`]: randomized and deterministic cost-oblivious buy-at-bulk
//!   driven by per-type spanners and waypoint ladders.
//!
//! [`oracles`] holds the exact baselines (MST, Dreyfus–Wagner Steiner trees,
//! rent-or-buy enumeration, tiny brute force) and [`harness`] wires instances,
//! runs, invariant checks, and oracle comparisons together for the CLI.

#![forbid(unsafe_code)]

pub mod bab;
pub mod cables;
pub mod graph;
pub mod harness;
pub mod last;
pub mod metric;
pub mod mlast;
pub mod nets;
pub mod oblivious;
pub mod oracles;
pub mod spanner;

use std::sync::OnceLock;

/// Relative comparison tolerance used by every strict-inequality trigger.
/// Overridable through the `ONBAB_TOL` environment variable (read once).
pub fn tol() -> f64 {
    static TOL: OnceLock<f64> = OnceLock::new();
    *TOL.get_or_init(|| {
        std::env::var("ONBAB_TOL")
            .ok()
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|t| t.is_finite() && *t >= 0.0)
            .unwrap_or(1e-9)
    })
}

/// `a > b` up to relative tolerance: true iff a exceeds b by more than tol·|b|.
pub fn strictly_greater(a: f64, b: f64) -> bool {
    a > b + tol() * b.abs()
}

/// `a ≤ b` up to relative tolerance.
pub fn leq(a: f64, b: f64) -> bool {
    !strictly_greater(a, b)
}

/// `a == b` up to relative tolerance (scaled by the larger magnitude).
pub fn approx_eq(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() <= tol() * scale
}
