//! One entry point over every method, as used by the scans and the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::DickeLadder;
use crate::oracle::{self, OdeTolerances};
use crate::precision::PrecisionPolicy;
use crate::table::{validate_grid, DiagonalState, EvolutionTable, Method, StateDiagnostics};
use crate::{par, residue, spectral, trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub policy: PrecisionPolicy,
    pub ode: OdeTolerances,
    /// Truncation tolerance of the power series.
    pub series_tolerance: f64,
    pub series_max_order: usize,
    /// Target `Γ h_max Δt` of the discrete-time chain.
    pub discrete_step: f64,
    pub n_traj: u64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            policy: PrecisionPolicy::auto(),
            ode: OdeTolerances::default(),
            series_tolerance: 1e-12,
            series_max_order: 20_000,
            discrete_step: 1e-3,
            n_traj: 10_000,
            seed: 0,
        }
    }
}

pub fn solve(
    ladder: &DickeLadder,
    initial_m0: usize,
    time_grid: &[f64],
    method: Method,
    options: &SolveOptions,
) -> Result<EvolutionTable> {
    ladder.check_pair(0, initial_m0)?;
    validate_grid(time_grid)?;
    match method {
        Method::Residue => residue::evaluate_distribution(ladder, initial_m0, &options.policy, time_grid),
        Method::Jordan => spectral::jordan_distribution(ladder, initial_m0, &options.policy, time_grid),
        Method::Laplace => spectral::laplace_distribution(ladder, initial_m0, &options.policy, time_grid),
        Method::Ode => oracle::integrate_rate_equations(ladder, initial_m0, time_grid, options.ode),
        Method::Series => series_table(ladder, initial_m0, time_grid, options),
        Method::Discrete => discrete_table(ladder, initial_m0, time_grid, options),
        Method::Mc => Ok(trajectory::estimate(ladder, initial_m0, time_grid, options.n_traj, options.seed)?.to_table()),
    }
}

fn series_table(
    ladder: &DickeLadder,
    initial_m0: usize,
    time_grid: &[f64],
    options: &SolveOptions,
) -> Result<EvolutionTable> {
    let tau_max = ladder.gamma() * time_grid.last().copied().unwrap_or(0.0);
    let tol = options.series_tolerance;
    let mut order = 16usize;
    while oracle::series::tail_bound(ladder.h_max(), tau_max, order) > tol {
        if order >= options.series_max_order {
            let bound = oracle::series::tail_bound(ladder.h_max(), tau_max, order);
            return Err(Error::Truncation { bound, tolerance: tol });
        }
        order = (order * 2).min(options.series_max_order);
    }
    let coeffs = oracle::series_coefficients(ladder, initial_m0, order)?;
    let values: Result<Vec<_>> =
        par::map_indexed(time_grid.len(), |k| oracle::evaluate_series(&coeffs, ladder.gamma(), time_grid[k], tol))
            .into_iter()
            .collect();
    let values = values?;
    let diagnostics = vec![StateDiagnostics { mantissa_bits: 0, defect: 0.0 }; ladder.dim()];
    Ok(EvolutionTable {
        method: Method::Series,
        n_emitters: ladder.n(),
        gamma: ladder.gamma(),
        initial_m0,
        times: time_grid.to_vec(),
        populations: values.into_iter().map(|v| v.state.populations).collect(),
        std_errors: None,
        diagnostics,
    })
}

fn discrete_table(
    ladder: &DickeLadder,
    initial_m0: usize,
    time_grid: &[f64],
    options: &SolveOptions,
) -> Result<EvolutionTable> {
    let rate = ladder.gamma() * ladder.h_max() as f64;
    let target = options.discrete_step / rate;
    let states: Result<Vec<_>> = par::map_indexed(time_grid.len(), |k| {
        let t = time_grid[k];
        if t == 0.0 {
            return Ok(DiagonalState::basis(ladder.dim(), initial_m0));
        }
        let steps = (t / target).ceil() as usize;
        oracle::discrete_time_propagate(ladder, initial_m0, t / steps as f64, steps)
    })
    .into_iter()
    .collect();
    Ok(EvolutionTable {
        method: Method::Discrete,
        n_emitters: ladder.n(),
        gamma: ladder.gamma(),
        initial_m0,
        times: time_grid.to_vec(),
        populations: states?.into_iter().map(|s| s.populations).collect(),
        std_errors: None,
        diagnostics: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::linear_grid;

    #[test]
    fn every_method_agrees_on_a_small_case() {
        let l = DickeLadder::new(4, 1.0).unwrap();
        let grid = linear_grid(0.6, 7);
        let opts = SolveOptions { n_traj: 20_000, ..SolveOptions::default() };
        let reference = solve(&l, 4, &grid, Method::Residue, &opts).unwrap();
        for method in Method::ALL {
            let t = solve(&l, 4, &grid, method, &opts).unwrap();
            assert_eq!(t.method, method);
            let tol = match method {
                Method::Mc => 0.03,
                Method::Discrete => 1e-2,
                _ => 1e-9,
            };
            assert!(t.max_abs_diff(&reference) <= tol, "{method}");
        }
    }

    #[test]
    fn series_refuses_long_times() {
        let l = DickeLadder::new(30, 1.0).unwrap();
        let opts = SolveOptions { series_max_order: 64, ..SolveOptions::default() };
        assert!(matches!(solve(&l, 30, &[0.0, 5.0], Method::Series, &opts), Err(Error::Truncation { .. })));
    }
}
