//! Population snapshots, time grids and the per-method evolution table.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Solver that produced a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Residue,
    Jordan,
    Laplace,
    Series,
    Ode,
    Discrete,
    Mc,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Method::Residue, Method::Jordan, Method::Laplace, Method::Series, Method::Ode, Method::Discrete, Method::Mc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Residue => "residue",
            Method::Jordan => "jordan",
            Method::Laplace => "laplace",
            Method::Series => "series",
            Method::Ode => "ode",
            Method::Discrete => "discrete",
            Method::Mc => "mc",
        }
    }

    /// Methods whose output is exact up to floating-point error.
    pub fn is_exact(self) -> bool {
        matches!(self, Method::Residue | Method::Jordan | Method::Laplace | Method::Ode)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown method '{s}'"))
    }
}

/// Diagonal of the density matrix at one instant, indexed by `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalState {
    pub time: f64,
    pub populations: Vec<f64>,
}

impl DiagonalState {
    /// Pure Dicke state `|m0><m0|` at `t = 0`.
    pub fn basis(dim: usize, m0: usize) -> Self {
        let mut populations = vec![0.0; dim];
        populations[m0] = 1.0;
        Self { time: 0.0, populations }
    }

    pub fn trace_defect(&self) -> f64 {
        (self.populations.iter().sum::<f64>() - 1.0).abs()
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        if self.populations.iter().any(|&p| !(-tol..=1.0 + tol).contains(&p)) {
            return invalid("population outside [0, 1]");
        }
        if self.trace_defect() > tol {
            return invalid(format!("populations sum to {}", self.populations.iter().sum::<f64>()));
        }
        Ok(())
    }
}

/// Precision bookkeeping for one row (target state) of a table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDiagnostics {
    pub mantissa_bits: u32,
    /// Consistency canary at `t = 0` for this state.
    pub defect: f64,
}

/// Populations on a time grid. `populations[k][m]` is `ρ_m(times[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTable {
    pub method: Method,
    pub n_emitters: usize,
    pub gamma: f64,
    pub initial_m0: usize,
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
    /// Statistical errors, present for Monte Carlo tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<StateDiagnostics>,
}

impl EvolutionTable {
    pub fn dim(&self) -> usize {
        self.n_emitters + 1
    }

    pub fn state(&self, k: usize) -> DiagonalState {
        DiagonalState { time: self.times[k], populations: self.populations[k].clone() }
    }

    /// Time series of one population.
    pub fn series(&self, m: usize) -> Vec<f64> {
        self.populations.iter().map(|row| row[m]).collect()
    }

    pub fn trace_defects(&self) -> Vec<f64> {
        self.populations.iter().map(|row| (row.iter().sum::<f64>() - 1.0).abs()).collect()
    }

    pub fn max_trace_defect(&self) -> f64 {
        self.trace_defects().into_iter().fold(0.0, f64::max)
    }

    pub fn min_population(&self) -> f64 {
        self.populations.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_bits(&self) -> u32 {
        self.diagnostics.iter().map(|d| d.mantissa_bits).max().unwrap_or(53)
    }

    /// Largest |difference| over every entry; panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &EvolutionTable) -> f64 {
        assert_eq!(self.times.len(), other.times.len(), "grid length mismatch");
        self.populations
            .iter()
            .zip(&other.populations)
            .flat_map(|(a, b)| {
                assert_eq!(a.len(), b.len(), "dimension mismatch");
                a.iter().zip(b).map(|(x, y)| (x - y).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Per-time max |difference|.
    pub fn abs_diff_by_time(&self, other: &EvolutionTable) -> Vec<f64> {
        self.populations
            .iter()
            .zip(&other.populations)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
            .collect()
    }
}

pub fn validate_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return invalid("time grid is empty");
    }
    if !(times[0] >= 0.0) || times.iter().any(|t| !t.is_finite()) {
        return invalid("time grid must be finite and start at t >= 0");
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("time grid must be strictly increasing");
    }
    Ok(())
}

/// `points` equally spaced times on `[0, t_max]`.
pub fn linear_grid(t_max: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && t_max > 0.0);
    let step = t_max / (points - 1) as f64;
    (0..points).map(|k| if k + 1 == points { t_max } else { k as f64 * step }).collect()
}

/// `t = 0` followed by `points - 1` geometrically spaced times from
/// `t_min` to `t_max`.
pub fn log_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && t_min > 0.0 && t_max > t_min);
    let mut out = Vec::with_capacity(points);
    out.push(0.0);
    let n = points - 1;
    let ratio = (t_max / t_min).ln();
    for k in 0..n {
        let frac = if n == 1 { 1.0 } else { k as f64 / (n - 1) as f64 };
        out.push(if k + 1 == n { t_max } else { t_min * (ratio * frac).exp() });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = linear_grid(3.0, 301);
        assert_eq!(g.len(), 301);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[300], 3.0);
        validate_grid(&g).unwrap();

        let g = log_grid(1e-3, 2.0, 50);
        assert_eq!(g.len(), 50);
        assert_eq!(g[1], 1e-3);
        assert_eq!(*g.last().unwrap(), 2.0);
        validate_grid(&g).unwrap();

        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[-1.0, 0.0]).is_err());
        assert!(validate_grid(&[0.0, 0.0]).is_err());
        assert!(validate_grid(&[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn basis_state() {
        let s = DiagonalState::basis(4, 2);
        assert_eq!(s.populations, vec![0.0, 0.0, 1.0, 0.0]);
        s.check(0.0).unwrap();
        let bad = DiagonalState { time: 0.0, populations: vec![0.5, 0.6] };
        assert!(bad.check(1e-12).is_err());
    }
}
