//! Discrete-time Markov chain from the short-time map
//! `e^{ℒΔt}|k><k| ≈ s_k |k><k| + d_k |k-1><k-1|`, `d_k = h_k Γ Δt`.

use crate::error::{invalid, Result};
use crate::ladder::DickeLadder;
use crate::table::DiagonalState;

/// Applies `steps` chain steps of length `delta_t` starting from `|m0>`.
/// First-order accurate in `delta_t` at fixed `t = steps·delta_t`.
pub fn discrete_time_propagate(
    ladder: &DickeLadder,
    initial_m0: usize,
    delta_t: f64,
    steps: usize,
) -> Result<DiagonalState> {
    ladder.check_pair(0, initial_m0)?;
    let jump_scale = ladder.gamma() * delta_t;
    if !(delta_t > 0.0) || !(jump_scale * (ladder.h_max() as f64) < 1.0) {
        return invalid(format!("step {delta_t} violates Γ·h_max·Δt < 1 (h_max = {})", ladder.h_max()));
    }
    let d: Vec<f64> = ladder.coefficients().iter().map(|&h| h as f64 * jump_scale).collect();
    let mut p = DiagonalState::basis(ladder.dim(), initial_m0).populations;
    let top = initial_m0;
    for _ in 0..steps {
        // In place from the bottom up: p[m] needs the old p[m + 1].
        for m in 0..=top {
            let stay = (1.0 - d[m]) * p[m];
            let feed = if m < top { d[m + 1] * p[m + 1] } else { 0.0 };
            p[m] = stay + feed;
        }
    }
    Ok(DiagonalState { time: steps as f64 * delta_t, populations: p })
}
