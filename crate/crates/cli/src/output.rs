use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use dicke_core::{EmissionCurve, EvolutionTable, Method, PrecisionMode};

use crate::config::RunConfig;
use crate::error::CliResult;

pub const SCHEMA_VERSION: u32 = 1;

/// Shortest scientific notation with `digits` significant digits.
pub fn format_sig(x: f64, digits: u8) -> String {
    format!("{:.*e}", usize::from(digits.max(1)) - 1, x)
}

pub fn write_csv<W: Write>(out: W, table: &EvolutionTable, curve: &EmissionCurve, digits: u8) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..table.dim()).map(|m| format!("rho_{m}")));
    header.push("rate".into());
    w.write_record(&header)?;
    for (k, &t) in table.times.iter().enumerate() {
        let mut row = Vec::with_capacity(table.dim() + 2);
        row.push(format_sig(t, digits));
        row.extend(table.populations[k].iter().map(|&p| format_sig(p, digits)));
        row.push(format_sig(curve.rate[k], digits));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBlock {
    /// Monte Carlo standard errors, `[time][m]`.
    pub std_errors: Option<Vec<Vec<f64>>>,
    pub trace_defects: Vec<f64>,
    pub max_trace_defect: f64,
    pub min_population: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub precision_target: f64,
    pub precision_cap_bits: u32,
    pub ode_rel_tol: f64,
    pub ode_abs_tol: f64,
    pub series_tolerance: f64,
    pub discrete_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub method: Method,
    pub precision_mode: PrecisionMode,
    /// Widest mantissa used by any row; 0 where not applicable.
    pub mantissa_bits: u32,
    pub precision_defect: f64,
    pub max_trace_defect: f64,
    pub tolerances: Tolerances,
    pub n_traj: Option<u64>,
    pub seed: Option<u64>,
}

/// The JSON interchange document of `solve` and `trajectories`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDocument {
    pub schema: u32,
    pub config: RunConfig,
    pub grid: Vec<f64>,
    /// `[time][m]`.
    pub populations: Vec<Vec<f64>>,
    pub rate: Vec<f64>,
    pub errors: ErrorBlock,
    pub metadata: Metadata,
}

impl SolveDocument {
    pub fn new(config: RunConfig, table: &EvolutionTable, curve: &EmissionCurve) -> Self {
        let stochastic = table.method == Method::Mc;
        let defect = table.diagnostics.iter().map(|d| d.defect).fold(0.0, f64::max);
        let metadata = Metadata {
            tool: "dicke".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            method: table.method,
            precision_mode: config.precision.mode,
            mantissa_bits: table.max_bits(),
            precision_defect: defect,
            max_trace_defect: table.max_trace_defect(),
            tolerances: Tolerances {
                precision_target: config.precision.target_tolerance,
                precision_cap_bits: config.precision.cap_bits,
                ode_rel_tol: config.solver.ode.rel_tol,
                ode_abs_tol: config.solver.ode.abs_tol,
                series_tolerance: config.solver.series_tolerance,
                discrete_step: config.solver.discrete_step,
            },
            n_traj: stochastic.then_some(config.solver.n_traj),
            seed: stochastic.then_some(config.solver.seed),
        };
        Self {
            schema: SCHEMA_VERSION,
            config,
            grid: table.times.clone(),
            populations: table.populations.clone(),
            rate: curve.rate.clone(),
            errors: ErrorBlock {
                std_errors: table.std_errors.clone(),
                trace_defects: table.trace_defects(),
                max_trace_defect: table.max_trace_defect(),
                min_population: table.min_population(),
            },
            metadata,
        }
    }
}

/// Writes `body` to `path`, or to standard output.
pub fn emit(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<()> {
    match path {
        Some(p) => {
            let mut f = io::BufWriter::new(File::create(p)?);
            body(&mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::E.powi(-40), -2.5e300, 0.0] {
            let s = format_sig(x, 17);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_sig(0.125, 3), "1.25e-1");
    }
}
