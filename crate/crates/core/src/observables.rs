//! Radiated power `Γ Σ_m h_m ρ_m(t)`, burst location and cross-N scaling.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ladder::DickeLadder;
use crate::par;
use crate::solve::{solve, SolveOptions};
use crate::table::{linear_grid, log_grid, EvolutionTable, Method};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionCurve {
    pub source_method: Method,
    pub n_emitters: usize,
    pub gamma: f64,
    pub times: Vec<f64>,
    pub rate: Vec<f64>,
}

pub fn emission_curve(table: &EvolutionTable, ladder: &DickeLadder) -> Result<EmissionCurve> {
    if table.dim() != ladder.dim() {
        return invalid("table and ladder disagree on N");
    }
    let rate = table
        .populations
        .iter()
        .map(|row| ladder.gamma() * row.iter().enumerate().map(|(m, p)| ladder.h(m) as f64 * p).sum::<f64>())
        .collect();
    Ok(EmissionCurve {
        source_method: table.method,
        n_emitters: ladder.n(),
        gamma: ladder.gamma(),
        times: table.times.clone(),
        rate,
    })
}

impl EmissionCurve {
    /// Trapezoid rule over the curve's own grid.
    pub fn integral(&self) -> f64 {
        self.times.windows(2).zip(self.rate.windows(2)).map(|(t, r)| 0.5 * (t[1] - t[0]) * (r[0] + r[1])).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstSummary {
    pub n_emitters: usize,
    pub peak_time: f64,
    pub peak_rate: f64,
    /// The maximum sits at `t = 0`: the emission only decays.
    pub boundary_peak: bool,
}

pub fn burst_summary(curve: &EmissionCurve) -> Result<BurstSummary> {
    let r = &curve.rate;
    let t = &curve.times;
    if r.is_empty() {
        return invalid("empty emission curve");
    }
    let mut i = 0;
    for k in 1..r.len() {
        if r[k] > r[i] {
            i = k;
        }
    }
    if i == 0 && t[0] == 0.0 {
        return Ok(BurstSummary { n_emitters: curve.n_emitters, peak_time: 0.0, peak_rate: r[0], boundary_peak: true });
    }
    if i == 0 || i + 1 == r.len() {
        return Err(Error::GridTooCoarse(format!("maximum at grid end t = {}", t[i])));
    }
    // Parabola through the three points around the grid maximum.
    let (x0, x1, x2) = (t[i - 1], t[i], t[i + 1]);
    let (y0, y1, y2) = (r[i - 1], r[i], r[i + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    let (peak_time, peak_rate) = if curv < 0.0 {
        // y = y1 + b (x - x1) + curv (x - x1)^2 with b from the divided differences.
        let b = d01 + curv * (x1 - x0);
        let dx = (-b / (2.0 * curv)).clamp(x0 - x1, x2 - x1);
        (x1 + dx, y1 + b * dx + curv * dx * dx)
    } else {
        (x1, y1)
    };
    Ok(BurstSummary { n_emitters: curve.n_emitters, peak_time, peak_rate: peak_rate.max(y1), boundary_peak: false })
}

/// Locates the burst from the fully inverted state: a coarse grid sized
/// by `ln N/(NΓ)`, widened while the maximum sits on its right end, then a
/// fine grid around the coarse maximum.
pub fn locate_burst(ladder: &DickeLadder, method: Method, options: &SolveOptions) -> Result<BurstSummary> {
    let n = ladder.n() as f64;
    let g = ladder.gamma();
    let mut t_end = 4.0 * (n.ln() + 1.0) / (n * g);
    for _ in 0..8 {
        let grid = linear_grid(t_end, 121);
        let curve = emission_curve(&solve(ladder, ladder.n(), &grid, method, options)?, ladder)?;
        match burst_summary(&curve) {
            Ok(s) if s.boundary_peak => return Ok(s),
            Ok(_) => {
                let i = argmax(&curve.rate);
                let fine = linear_grid(grid[i + 1] - grid[i - 1], 41);
                let fine: Vec<f64> = fine.iter().map(|x| x + grid[i - 1]).collect();
                let fine_curve = emission_curve(&solve(ladder, ladder.n(), &fine, method, options)?, ladder)?;
                return burst_summary(&fine_curve).or_else(|_| burst_summary(&curve));
            }
            Err(Error::GridTooCoarse(_)) => t_end *= 2.0,
            Err(e) => return Err(e),
        }
    }
    Err(Error::GridTooCoarse(format!("no maximum before t = {t_end}")))
}

fn argmax(v: &[f64]) -> usize {
    let mut i = 0;
    for k in 1..v.len() {
        if v[k] > v[i] {
            i = k;
        }
    }
    i
}

/// Least-squares line `y = intercept + slope·x` and Pearson correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub correlation: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(LinearFit { slope, intercept: my - slope * mx, correlation: sxy / (sxx * syy).sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingScan {
    pub method: Method,
    pub gamma: f64,
    pub summaries: Vec<BurstSummary>,
    /// `ln(peak_rate)` against `ln N`; the slope is the amplitude exponent.
    pub rate_fit: Option<LinearFit>,
    /// `peak_time` against `ln(N)/(NΓ)`.
    pub time_fit: Option<LinearFit>,
}

pub fn scaling_scan(n_list: &[usize], gamma: f64, method: Method, options: &SolveOptions) -> Result<ScalingScan> {
    if let Some(&n) = n_list.iter().find(|&&n| n < 2) {
        return invalid(format!("scaling scan needs N >= 2, got {n}"));
    }
    let summaries: Result<Vec<BurstSummary>> =
        par::map_indexed(n_list.len(), |k| locate_burst(&DickeLadder::new(n_list[k], gamma)?, method, options))
            .into_iter()
            .collect();
    let summaries = summaries?;
    let interior: Vec<&BurstSummary> = summaries.iter().filter(|s| !s.boundary_peak).collect();
    let ln_n: Vec<f64> = interior.iter().map(|s| (s.n_emitters as f64).ln()).collect();
    let ln_rate: Vec<f64> = interior.iter().map(|s| s.peak_rate.ln()).collect();
    let x_time: Vec<f64> =
        interior.iter().map(|s| (s.n_emitters as f64).ln() / (s.n_emitters as f64 * gamma)).collect();
    let t: Vec<f64> = interior.iter().map(|s| s.peak_time).collect();
    Ok(ScalingScan {
        method,
        gamma,
        rate_fit: linear_fit(&ln_n, &ln_rate),
        time_fit: linear_fit(&x_time, &t),
        summaries,
    })
}

/// Total emitted photons `∫ rate dt` against the initial excitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumRule {
    pub emitted: f64,
    pub expected: f64,
    pub relative_error: f64,
    pub t_end: f64,
}

/// Trapezoid quadrature on a log grid extended until the rate has fallen
/// below `1e-12·NΓ`.
pub fn photon_sum_rule(
    ladder: &DickeLadder,
    initial_m0: usize,
    method: Method,
    options: &SolveOptions,
) -> Result<SumRule> {
    if initial_m0 == 0 {
        return Ok(SumRule { emitted: 0.0, expected: 0.0, relative_error: 0.0, t_end: 0.0 });
    }
    let scale = ladder.n() as f64 * ladder.gamma();
    let mut t_end = 30.0 / scale;
    for _ in 0..20 {
        let grid = log_grid(1e-4 / scale, t_end, 3000);
        let curve = emission_curve(&solve(ladder, initial_m0, &grid, method, options)?, ladder)?;
        if *curve.rate.last().unwrap() < 1e-12 * scale {
            let emitted = curve.integral();
            let expected = initial_m0 as f64;
            return Ok(SumRule { emitted, expected, relative_error: (emitted - expected).abs() / expected, t_end });
        }
        t_end *= 1.5;
    }
    Err(Error::GridTooCoarse("emission tail did not decay".into()))
}
