use serde::{Deserialize, Serialize};

use dicke_core::oracle::OdeTolerances;
use dicke_core::table::{linear_grid, log_grid};
use dicke_core::{DickeLadder, Method, PrecisionPolicy, SolveOptions};

use crate::args::{Format, GridArgs, PrecisionArgs, PrecisionChoice, SolverArgs, Spacing, SystemArgs};
use crate::error::{CliError, CliResult};

/// Everything a run depends on, echoed into JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_emitters: usize,
    pub gamma: f64,
    pub initial_m0: usize,
    pub t_max: f64,
    pub grid_points: usize,
    pub grid_spacing: Spacing,
    pub t_min: Option<f64>,
    pub method: Method,
    pub precision: PrecisionPolicy,
    pub solver: SolveOptions,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub format: Format,
    pub path: Option<String>,
    pub digits: u8,
}

pub fn precision_policy(p: &PrecisionArgs) -> CliResult<PrecisionPolicy> {
    let policy = match p.precision {
        PrecisionChoice::Auto => PrecisionPolicy::auto().with_cap(p.precision_cap).with_tolerance(p.precision_tol),
        PrecisionChoice::Double => PrecisionPolicy::fixed_double(),
        PrecisionChoice::Fixed => {
            let bits = p.bits.ok_or_else(|| CliError::Usage("--precision fixed needs --bits".into()))?;
            PrecisionPolicy::fixed_bits(bits)
        }
    };
    policy.validate()?;
    Ok(policy)
}

pub fn solve_options(policy: PrecisionPolicy, s: &SolverArgs) -> SolveOptions {
    SolveOptions {
        policy,
        ode: OdeTolerances::new(s.rtol, s.atol),
        series_tolerance: s.series_tol,
        discrete_step: s.discrete_step,
        n_traj: s.ntraj,
        seed: s.seed,
        ..SolveOptions::default()
    }
}

/// Validated system and grid settings.
pub struct Resolved {
    pub n_emitters: usize,
    pub gamma: f64,
    pub initial_m0: usize,
    pub t_max: f64,
    pub grid_points: usize,
    pub grid_spacing: Spacing,
    pub t_min: Option<f64>,
}

pub fn resolve(system: &SystemArgs, grid: &GridArgs) -> CliResult<Resolved> {
    let n = system.n;
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    if !(system.gamma > 0.0 && system.gamma.is_finite()) {
        return Err(CliError::Usage("--gamma must be positive".into()));
    }
    let m0 = system.initial.unwrap_or(n);
    if m0 > n {
        return Err(CliError::Usage(format!("--initial {m0} exceeds N = {n}")));
    }
    let scale = n as f64 * system.gamma;
    let t_max = grid.t_max.unwrap_or(((n as f64).ln() + 12.0) / scale);
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(CliError::Usage("--t-max must be positive".into()));
    }
    if grid.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let spacing = grid.spacing.unwrap_or(if n < 64 { Spacing::Linear } else { Spacing::Log });
    let t_min = match spacing {
        Spacing::Linear => None,
        Spacing::Log => {
            let t = grid.t_min.unwrap_or(1e-3 / scale).min(t_max / 2.0);
            if !(t > 0.0) {
                return Err(CliError::Usage("--t-min must be positive".into()));
            }
            Some(t)
        }
    };
    Ok(Resolved {
        n_emitters: n,
        gamma: system.gamma,
        initial_m0: m0,
        t_max,
        grid_points: grid.points,
        grid_spacing: spacing,
        t_min,
    })
}

impl Resolved {
    pub fn ladder(&self) -> CliResult<DickeLadder> {
        Ok(DickeLadder::new(self.n_emitters, self.gamma)?)
    }

    pub fn grid(&self) -> Vec<f64> {
        match self.t_min {
            None => linear_grid(self.t_max, self.grid_points),
            Some(t_min) => log_grid(t_min, self.t_max, self.grid_points),
        }
    }

    pub fn into_config(self, method: Method, solver: SolveOptions, output: OutputConfig) -> RunConfig {
        RunConfig {
            n_emitters: self.n_emitters,
            gamma: self.gamma,
            initial_m0: self.initial_m0,
            t_max: self.t_max,
            grid_points: self.grid_points,
            grid_spacing: self.grid_spacing,
            t_min: self.t_min,
            method,
            precision: solver.policy,
            solver,
            output,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Vec<f64> {
        match self.t_min {
            None => linear_grid(self.t_max, self.grid_points),
            Some(t_min) => log_grid(t_min, self.t_max, self.grid_points),
        }
    }
}
