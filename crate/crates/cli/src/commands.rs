use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use dicke_core::observables::{scaling_scan, LinearFit};
use dicke_core::onset::{auto_recovery, double_precision_onset, probe_grid, TraceProbe};
use dicke_core::{emission_curve, solve, trajectory, DickeLadder, EvolutionTable, Method};

use crate::args::{BenchArgs, CompareArgs, Format, ScanArgs, SolveArgs, TrajectoryArgs};
use crate::config::{precision_policy, resolve, solve_options, OutputConfig};
use crate::error::{CliError, CliResult};
use crate::output::{emit, format_sig, write_csv, write_json, SolveDocument, SCHEMA_VERSION};

/// Trace criterion shared by compare and bench.
const TRACE_TOLERANCE: f64 = 1e-9;

fn output_config(format: Format, path: Option<&std::path::Path>, digits: u8) -> OutputConfig {
    OutputConfig { format, path: path.map(|p| p.display().to_string()), digits }
}

pub fn cmd_solve(a: &SolveArgs) -> CliResult<()> {
    let resolved = resolve(&a.system, &a.grid)?;
    let ladder = resolved.ladder()?;
    let options = solve_options(precision_policy(&a.precision)?, &a.solver);
    let grid = resolved.grid();
    let m0 = resolved.initial_m0;
    let table = solve(&ladder, m0, &grid, a.method, &options)?;
    let output = output_config(a.output.format, a.output.file.as_deref(), a.output.digits);
    let config = resolved.into_config(a.method, options, output);
    write_table(&config, &table, &ladder)
}

fn write_table(config: &crate::config::RunConfig, table: &EvolutionTable, ladder: &DickeLadder) -> CliResult<()> {
    let curve = emission_curve(table, ladder)?;
    let path = config.output.path.as_deref().map(std::path::Path::new);
    match config.output.format {
        Format::Csv => emit(path, |w| write_csv(w, table, &curve, config.output.digits)),
        Format::Json => {
            let doc = SolveDocument::new(config.clone(), table, &curve);
            emit(path, |w| write_json(w, &doc))
        }
    }
}

#[derive(Debug, Serialize)]
struct PairReport {
    a: Method,
    b: Method,
    max_abs: f64,
    per_time: Vec<f64>,
    checked: bool,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct ZReport {
    estimate: Method,
    reference: Method,
    entries: usize,
    fraction_beyond_3: f64,
    max_abs_z: f64,
}

pub fn cmd_compare(a: &CompareArgs) -> CliResult<()> {
    let mut methods = a.methods.clone();
    methods.dedup();
    let distinct: std::collections::BTreeSet<&str> = methods.iter().map(|m| m.name()).collect();
    if distinct.len() < 2 {
        return Err(CliError::Usage("compare needs at least two distinct methods".into()));
    }
    let resolved = resolve(&a.system, &a.grid)?;
    let ladder = resolved.ladder()?;
    let options = solve_options(precision_policy(&a.precision)?, &a.solver);
    let grid = resolved.grid();
    let tables: Vec<EvolutionTable> =
        methods.iter().map(|&m| solve(&ladder, resolved.initial_m0, &grid, m, &options)).collect::<Result<_, _>>()?;

    let mut pairs = Vec::new();
    let mut z_reports = Vec::new();
    for i in 0..tables.len() {
        for j in i + 1..tables.len() {
            let (x, y) = (&tables[i], &tables[j]);
            if x.method == Method::Mc || y.method == Method::Mc {
                let (mc, exact) = if x.method == Method::Mc { (x, y) } else { (y, x) };
                if exact.method != Method::Mc {
                    z_reports.push(z_scores(mc, exact, options.n_traj));
                }
                continue;
            }
            let per_time = x.abs_diff_by_time(y);
            let max_abs = per_time.iter().copied().fold(0.0, f64::max);
            let checked = x.method.is_exact() && y.method.is_exact();
            pairs.push(PairReport {
                a: x.method,
                b: y.method,
                max_abs,
                per_time,
                checked,
                passed: !checked || max_abs <= a.tolerance,
            });
        }
    }
    let passed = pairs.iter().all(|p| p.passed);
    let report = json!({
        "schema": SCHEMA_VERSION,
        "config": {
            "n_emitters": resolved.n_emitters,
            "gamma": resolved.gamma,
            "initial_m0": resolved.initial_m0,
            "grid_points": grid.len(),
            "t_max": resolved.t_max,
            "methods": methods,
            "tolerance": a.tolerance,
            "solver": options,
        },
        "grid": grid,
        "pairs": pairs,
        "monte_carlo": z_reports,
        "passed": passed,
    });
    emit(a.file.as_deref(), |w| write_json(w, &report))?;
    if !passed {
        let worst = pairs.iter().filter(|p| !p.passed).map(|p| p.max_abs).fold(0.0, f64::max);
        return Err(CliError::Comparison(format!(
            "exact methods differ by {} > {:e}",
            format_sig(worst, 3),
            a.tolerance
        )));
    }
    Ok(())
}

fn z_scores(mc: &EvolutionTable, exact: &EvolutionTable, n_traj: u64) -> ZReport {
    let z = trajectory::standardized_residuals(&mc.populations, exact, n_traj);
    let beyond = z.iter().filter(|v| v.abs() > 3.0).count();
    ZReport {
        estimate: mc.method,
        reference: exact.method,
        entries: z.len(),
        fraction_beyond_3: if z.is_empty() { 0.0 } else { beyond as f64 / z.len() as f64 },
        max_abs_z: z.iter().map(|v| v.abs()).fold(0.0, f64::max),
    }
}

pub fn cmd_trajectories(a: &TrajectoryArgs) -> CliResult<()> {
    let resolved = resolve(&a.system, &a.grid)?;
    let ladder = resolved.ladder()?;
    let m0 = resolved.initial_m0;
    if let Some(k) = a.records {
        let records: Vec<_> =
            (0..k).map(|i| trajectory::sample_indexed(&ladder, m0, a.seed, i)).collect::<Result<_, _>>()?;
        return emit(a.output.file.as_deref(), |w| write_json(w, &records));
    }
    if a.ntraj == 0 {
        return Err(CliError::Usage("--ntraj must be at least 1".into()));
    }
    let grid = resolved.grid();
    let est = trajectory::estimate(&ladder, m0, &grid, a.ntraj, a.seed)?;
    let mut options = dicke_core::SolveOptions { n_traj: a.ntraj, seed: a.seed, ..Default::default() };
    options.policy = dicke_core::PrecisionPolicy::fixed_double();
    let output = output_config(a.output.format, a.output.file.as_deref(), a.output.digits);
    let config = resolved.into_config(Method::Mc, options, output);
    write_table(&config, &est.to_table(), &ladder)
}

pub fn cmd_scan(a: &ScanArgs) -> CliResult<()> {
    if a.ns.is_empty() {
        return Err(CliError::Usage("--ns is empty".into()));
    }
    if !a.method.is_exact() {
        return Err(CliError::Usage(format!("scan needs an exact method, got {}", a.method)));
    }
    let options = solve_options(precision_policy(&a.precision)?, &a.solver);
    let scan = scaling_scan(&a.ns, a.gamma, a.method, &options)?;
    match a.format {
        Format::Json => {
            let report = json!({
                "schema": SCHEMA_VERSION,
                "config": { "ns": a.ns, "gamma": a.gamma, "method": a.method, "solver": options },
                "summaries": scan.summaries,
                "rate_exponent": scan.rate_fit.map(|f: LinearFit| f.slope),
                "rate_fit": scan.rate_fit,
                "time_fit": scan.time_fit,
            });
            emit(a.file.as_deref(), |w| write_json(w, &report))
        }
        Format::Csv => emit(a.file.as_deref(), |w| {
            let mut c = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
            c.write_record(["n", "peak_time", "peak_rate", "boundary_peak"])?;
            for s in &scan.summaries {
                c.write_record([
                    s.n_emitters.to_string(),
                    format_sig(s.peak_time, 17),
                    format_sig(s.peak_rate, 17),
                    s.boundary_peak.to_string(),
                ])?;
            }
            c.flush()?;
            Ok(())
        }),
    }
}

#[derive(Debug, Serialize)]
struct Timing {
    method: Method,
    n_emitters: usize,
    wall_seconds: f64,
    mantissa_bits: u32,
    max_trace_defect: f64,
}

pub fn cmd_bench(a: &BenchArgs) -> CliResult<()> {
    if a.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    if a.max_n == 0 {
        return Err(CliError::Usage("--max-n must be at least 1".into()));
    }
    let policy = precision_policy(&a.precision)?;
    let options = solve_options(policy, &a.solver);
    let mut timings = Vec::new();
    for &method in &a.methods {
        for &n in &a.ns {
            let ladder = DickeLadder::new(n, a.gamma)?;
            let grid = probe_grid(n, a.gamma, a.points);
            let start = Instant::now();
            let table = solve(&ladder, n, &grid, method, &options)?;
            timings.push(Timing {
                method,
                n_emitters: n,
                wall_seconds: start.elapsed().as_secs_f64(),
                mantissa_bits: table.max_bits(),
                max_trace_defect: table.max_trace_defect(),
            });
        }
    }
    let onset = double_precision_onset(a.gamma, a.max_n, a.points, TRACE_TOLERANCE)?;
    let recovery: Vec<TraceProbe> = match &onset {
        Some(p) => auto_recovery(a.gamma, p.n_emitters, a.max_n, a.points, &policy)?,
        None => Vec::new(),
    };
    let recovered = recovery.iter().all(|p| p.passes(TRACE_TOLERANCE));
    let report = json!({
        "schema": SCHEMA_VERSION,
        "config": {
            "ns": a.ns, "methods": a.methods, "points": a.points, "max_n": a.max_n,
            "gamma": a.gamma, "trace_tolerance": TRACE_TOLERANCE, "solver": options,
            "parallel": dicke_core::par::is_parallel(),
        },
        "timings": timings,
        "double_onset": onset,
        "double_onset_n": onset.map(|p| p.n_emitters),
        "auto_recovery": recovery,
        "recovered": recovered,
    });
    emit(a.file.as_deref(), |w| write_json(w, &report))?;
    if !recovered {
        return Err(CliError::Solver(dicke_core::Error::PrecisionFailure {
            cap_bits: policy.cap_bits,
            defect: recovery.iter().map(|p| p.max_trace_defect).fold(0.0, f64::max),
        }));
    }
    Ok(())
}
