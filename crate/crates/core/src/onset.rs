//! Where double-precision residue evaluation breaks down, and whether
//! automatic escalation repairs it.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ladder::DickeLadder;
use crate::precision::PrecisionPolicy;
use crate::residue::evaluate_distribution;
use crate::table::linear_grid;

/// Health of one residue evaluation over the default grid of its `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceProbe {
    pub n_emitters: usize,
    pub mantissa_bits: u32,
    pub max_trace_defect: f64,
    pub min_population: f64,
}

impl TraceProbe {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_trace_defect <= tolerance && self.min_population >= -tolerance
    }
}

/// Probe grid: `points` linear times out to `(ln N + 12)/(NΓ)`, long
/// enough for the ground state to fill up.
pub fn probe_grid(n: usize, gamma: f64, points: usize) -> Vec<f64> {
    let n = n as f64;
    linear_grid((n.ln() + 12.0) / (n * gamma), points.max(2))
}

pub fn probe(n: usize, gamma: f64, points: usize, policy: &PrecisionPolicy) -> Result<TraceProbe> {
    let ladder = DickeLadder::new(n, gamma)?;
    let table = evaluate_distribution(&ladder, n, policy, &probe_grid(n, gamma, points))?;
    Ok(TraceProbe {
        n_emitters: n,
        mantissa_bits: table.max_bits(),
        max_trace_defect: table.max_trace_defect(),
        min_population: table.min_population(),
    })
}

/// Smallest `N <= max_n` whose double-precision evaluation from the fully
/// inverted state violates the trace criterion, with its probe.
pub fn double_precision_onset(gamma: f64, max_n: usize, points: usize, tolerance: f64) -> Result<Option<TraceProbe>> {
    let policy = PrecisionPolicy::fixed_double();
    for n in 1..=max_n {
        let p = probe(n, gamma, points, &policy)?;
        if !p.passes(tolerance) {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

/// Auto-precision probes at the onset, doubling up to `max_n`.
pub fn auto_recovery(
    gamma: f64,
    from_n: usize,
    max_n: usize,
    points: usize,
    policy: &PrecisionPolicy,
) -> Result<Vec<TraceProbe>> {
    let mut ns = Vec::new();
    let mut n = from_n.max(1);
    while n < max_n {
        ns.push(n);
        n *= 2;
    }
    ns.push(max_n);
    ns.into_iter().map(|n| probe(n, gamma, points, policy)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_systems_pass_in_double() {
        for n in 1..=8 {
            assert!(probe(n, 1.0, 40, &PrecisionPolicy::fixed_double()).unwrap().passes(1e-9));
        }
    }

    #[test]
    fn onset_exists_and_auto_repairs_it() {
        let onset = double_precision_onset(1.0, 64, 40, 1e-9).unwrap().expect("double breaks down below 64");
        assert!(onset.n_emitters > 8);
        let fixed = auto_recovery(1.0, onset.n_emitters, onset.n_emitters, 40, &PrecisionPolicy::auto()).unwrap();
        assert!(fixed[0].passes(1e-9));
        assert!(fixed[0].mantissa_bits > 53);
    }
}
