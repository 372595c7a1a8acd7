//! Power series `ρ_m(t) = Σ_n (Γt)^n/n! ρ_m^{(n)}` from the order recursion
//! `ρ_{m-1}^{(n+1)} = -h_{m-1} ρ_{m-1}^{(n)} + h_m ρ_m^{(n)}`.

use rug::{Float, Integer};

use crate::error::{Error, Result};
use crate::ladder::DickeLadder;
use crate::table::DiagonalState;

/// Exact series coefficients. `table[n][m]` is `ρ_m^{(n)}`; for a Dicke
/// initial state every coefficient is an integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesCoefficients {
    pub initial_m0: usize,
    pub h_max: u64,
    pub table: Vec<Vec<Integer>>,
}

impl SeriesCoefficients {
    pub fn order(&self) -> usize {
        self.table.len() - 1
    }

    pub fn coefficient(&self, n: usize, m: usize) -> &Integer {
        &self.table[n][m]
    }
}

pub fn series_coefficients(ladder: &DickeLadder, initial_m0: usize, n_max: usize) -> Result<SeriesCoefficients> {
    ladder.check_pair(0, initial_m0)?;
    let dim = ladder.dim();
    let mut table = Vec::with_capacity(n_max + 1);
    let mut current = vec![Integer::new(); dim];
    current[initial_m0] = Integer::from(1);
    for _ in 0..n_max {
        let mut next = vec![Integer::new(); dim];
        for m in 0..dim {
            let mut v = Integer::from(&current[m] * ladder.h(m));
            v = -v;
            if m + 1 < dim {
                v += &current[m + 1] * ladder.h(m + 1);
            }
            next[m] = v;
        }
        table.push(std::mem::replace(&mut current, next));
    }
    table.push(current);
    Ok(SeriesCoefficients { initial_m0, h_max: ladder.h_max(), table })
}

/// Truncated series together with a rigorous bound on the discarded tail.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesValue {
    pub state: DiagonalState,
    pub remainder_bound: f64,
}

/// Tail bound `Σ_{n > n_max} x^n / n!` with `x = 2 h_max Γt`, using
/// `|ρ_m^{(n)}| <= (2 h_max)^n` and a geometric majorant for the tail.
pub fn tail_bound(h_max: u64, tau: f64, n_max: usize) -> f64 {
    let x = 2.0 * h_max as f64 * tau;
    if x == 0.0 {
        return 0.0;
    }
    let ratio = x / (n_max as f64 + 2.0);
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    // First omitted term x^{n+1}/(n+1)!, accumulated in log space.
    let log_first: f64 = (1..=n_max + 1).map(|k| (x / k as f64).ln()).sum();
    log_first.exp() / (1.0 - ratio)
}

pub fn evaluate_series(coeffs: &SeriesCoefficients, gamma: f64, t: f64, tolerance: f64) -> Result<SeriesValue> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument("time must be nonnegative".into()));
    }
    let tau = gamma * t;
    let n_max = coeffs.order();
    let bound = tail_bound(coeffs.h_max, tau, n_max);
    if !(bound <= tolerance) {
        return Err(Error::Truncation { bound, tolerance });
    }
    // Partial sums can reach e^{x}; give them that many guard bits.
    let x = 2.0 * coeffs.h_max as f64 * tau;
    let bits = 128 + (x * std::f64::consts::LOG2_E).ceil() as u32;
    let dim = coeffs.table[0].len();
    let mut sums = vec![Float::with_val(bits, 0); dim];
    let tau_f = Float::with_val(bits, tau);
    let mut weight = Float::with_val(bits, 1);
    for (n, row) in coeffs.table.iter().enumerate() {
        if n > 0 {
            weight *= &tau_f;
            weight /= n as u32;
        }
        for (s, c) in sums.iter_mut().zip(row) {
            if *c != 0 {
                *s += Float::with_val(bits, c) * &weight;
            }
        }
    }
    Ok(SeriesValue {
        state: DiagonalState { time: t, populations: sums.iter().map(Float::to_f64).collect() },
        remainder_bound: bound,
    })
}
