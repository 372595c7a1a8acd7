//! Closed-form populations as residue sums of
//! `f_{m0,m}(z, t) = (-1)^{m0-m} h_{m0}···h_{m+1} e^{-zΓt} / ∏_{k=m}^{m0} (z - h_k)`.
//!
//! Coefficients are exact rationals built from integer pole differences.
//! Only the final sum of exponentials is rounded, at a width chosen by the
//! [`PrecisionPolicy`]: the terms of a below-equator state are huge and of
//! alternating sign while their sum is a probability, so double precision
//! stops being sufficient around N ≈ 20 (see `dicke bench`).

use std::collections::HashMap;
use std::fmt;

use rug::{Float, Integer, Rational};

use crate::error::{invalid, Result};
use crate::ladder::{classify_poles, DickeLadder};
use crate::par;
use crate::precision::{PrecisionMode, PrecisionPolicy, DOUBLE_BITS};
use crate::table::{validate_grid, EvolutionTable, Method, StateDiagnostics};

/// One pole's contribution `(A + B·Γt) e^{-h Γt}`.
#[derive(Clone, PartialEq, Eq)]
pub struct ResidueTerm {
    pub pole_value: u64,
    pub multiplicity: u8,
    pub coefficient_const: Rational,
    pub coefficient_linear: Rational,
}

impl fmt::Debug for ResidueTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}·Γt)·exp(-{}Γt)", self.coefficient_const, self.coefficient_linear, self.pole_value)
    }
}

impl ResidueTerm {
    pub fn simple(pole_value: u64, coefficient: Rational) -> Self {
        Self { pole_value, multiplicity: 1, coefficient_const: coefficient, coefficient_linear: Rational::new() }
    }

    /// Value in `f64` arithmetic; only trustworthy for small coefficients.
    pub fn eval_f64(&self, tau: f64) -> f64 {
        (self.coefficient_const.to_f64() + self.coefficient_linear.to_f64() * tau)
            * (-(self.pole_value as f64) * tau).exp()
    }
}

/// Residue terms of one `(m, m0)` pair plus the working precision accepted
/// for evaluating them.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueExpansion {
    pub target_m: usize,
    pub initial_m0: usize,
    pub terms: Vec<ResidueTerm>,
    pub mode: PrecisionMode,
    pub mantissa_bits: u32,
    /// Consistency canary at `t = 0`, see [`canary`].
    pub defect: f64,
}

impl ResidueExpansion {
    pub fn diagnostics(&self) -> StateDiagnostics {
        StateDiagnostics { mantissa_bits: self.mantissa_bits, defect: self.defect }
    }

    /// `log2 Σ_p (|A_p| + |B_p|)`: how many bits the cancellation eats.
    pub fn log2_magnitude(&self) -> f64 {
        let mut mag = Float::with_val(64, 0);
        for t in &self.terms {
            mag += Float::with_val(64, &*t.coefficient_const.as_abs());
            mag += Float::with_val(64, &*t.coefficient_linear.as_abs());
        }
        mag.log2().to_f64()
    }

    pub fn evaluate(&self, gamma: f64, t: f64) -> f64 {
        evaluate_population(self, gamma, t)
    }
}

/// Exact residue terms for target `m` from initial Dicke state `m0`, with a
/// working precision selected by `policy`.
pub fn residue_terms(
    ladder: &DickeLadder,
    target_m: usize,
    initial_m0: usize,
    policy: &PrecisionPolicy,
) -> Result<ResidueExpansion> {
    let terms = exact_terms(ladder, target_m, initial_m0)?;
    with_precision(terms, target_m, initial_m0, policy)
}

/// Attaches the working precision `policy` selects for `terms`.
pub(crate) fn with_precision(
    terms: Vec<ResidueTerm>,
    target_m: usize,
    initial_m0: usize,
    policy: &PrecisionPolicy,
) -> Result<ResidueExpansion> {
    let delta = u32::from(target_m == initial_m0);
    let (_, bits, defect) = policy.escalate(|bits| ((), canary(&terms, delta, policy.mode, bits)))?;
    Ok(ResidueExpansion { target_m, initial_m0, terms, mode: policy.mode, mantissa_bits: bits, defect })
}

/// Exact coefficients, one term per distinct pole.
pub fn exact_terms(ladder: &DickeLadder, target_m: usize, initial_m0: usize) -> Result<Vec<ResidueTerm>> {
    let poles = classify_poles(ladder, target_m, initial_m0)?;
    let h: Vec<i64> = (target_m..=initial_m0).map(|k| ladder.h(k) as i64).collect();

    // (-1)^{m0-m} h_{m0}···h_{m+1}
    let mut numerator = Integer::from(1);
    for &hk in &h[1..] {
        numerator *= hk;
    }
    if (initial_m0 - target_m) % 2 == 1 {
        numerator = -numerator;
    }

    let mut terms = Vec::with_capacity(poles.poles.len());
    for pole in &poles.poles {
        let v = pole.value as i64;
        let mut q = Integer::from(1);
        for &hk in &h {
            if hk != v {
                q *= v - hk;
            }
        }
        // C = num / Q is the residue of a simple pole.
        let c = Rational::from((numerator.clone(), q.clone()));
        if pole.multiplicity == 1 {
            terms.push(ResidueTerm::simple(pole.value, c));
            continue;
        }
        // d/dz [g(z) e^{-zΓt}] with g = num / ∏_{h_k≠v}(z - h_k):
        //   A = -C Σ_k 1/(v - h_k),  B = -C.
        // Σ_k 1/d_k is carried as (Σ_k Q/d_k) / Q to avoid rational sums.
        let mut s = Integer::new();
        for &hk in &h {
            if hk != v {
                s += Integer::from(q.div_exact_ref(&Integer::from(v - hk)));
            }
        }
        let a = -Rational::from((numerator.clone() * s, q.clone() * &q));
        terms.push(ResidueTerm {
            pole_value: pole.value,
            multiplicity: 2,
            coefficient_const: a,
            coefficient_linear: -c,
        });
    }
    Ok(terms)
}

/// `max(|Σ_p round(A_p) - δ|, 2^{-bits} Σ_p (|A_p| + |B_p|))` evaluated at
/// `bits` (or in `f64`). The first part is the `t = 0` reconstruction
/// defect; the second covers coefficient sets that happen to sum exactly
/// but still lose digits once multiplied by rounded exponentials.
pub fn canary(terms: &[ResidueTerm], delta: u32, mode: PrecisionMode, bits: u32) -> f64 {
    if mode == PrecisionMode::FixedDouble {
        let sum: f64 = terms.iter().map(|t| t.coefficient_const.to_f64()).sum();
        let mag: f64 =
            terms.iter().map(|t| t.coefficient_const.to_f64().abs() + t.coefficient_linear.to_f64().abs()).sum();
        let defect = (sum - f64::from(delta)).abs();
        let bound = mag * f64::EPSILON / 2.0;
        return if defect.is_nan() || bound.is_nan() { f64::INFINITY } else { defect.max(bound) };
    }
    let mut sum = Float::with_val(bits, 0);
    let mut mag = Float::with_val(64, 0);
    for t in terms {
        sum += Float::with_val(bits, &t.coefficient_const);
        mag += Float::with_val(64, &*t.coefficient_const.as_abs());
        mag += Float::with_val(64, &*t.coefficient_linear.as_abs());
    }
    sum -= delta;
    let bound = mag >> bits;
    sum.abs().to_f64().max(bound.to_f64())
}

/// `Σ_p (A_p + B_p Γt) e^{-h_p Γt}` at the expansion's working precision.
pub fn evaluate_population(expansion: &ResidueExpansion, gamma: f64, t: f64) -> f64 {
    let tau = gamma * t;
    if expansion.mode == PrecisionMode::FixedDouble {
        return expansion.terms.iter().map(|term| term.eval_f64(tau)).sum();
    }
    let bits = expansion.mantissa_bits;
    let tau_f = Float::with_val(bits, tau);
    let mut acc = Float::with_val(bits, 0);
    for term in &expansion.terms {
        let e = exp_neg(bits, term.pole_value, &tau_f);
        let mut coeff = Float::with_val(bits, &term.coefficient_linear);
        coeff *= &tau_f;
        coeff += &term.coefficient_const;
        acc += coeff * e;
    }
    acc.to_f64()
}

fn exp_neg(bits: u32, value: u64, tau: &Float) -> Float {
    let mut x = Float::with_val(bits, value);
    x *= tau;
    x = -x;
    x.exp()
}

/// Precomputed coefficients for a whole distribution, rounded once.
enum Rows {
    Double(Vec<Vec<(usize, f64, f64)>>),
    Multi { bits: u32, rows: Vec<Vec<(usize, Float, Float)>> },
}

/// Batch evaluator for all rows `m <= m0` sharing one table of
/// exponentials per time point.
pub struct DistributionEvaluator {
    dim: usize,
    values: Vec<u64>,
    rows: Rows,
}

impl DistributionEvaluator {
    pub fn new(expansions: &[ResidueExpansion], dim: usize) -> Self {
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut values = Vec::new();
        for e in expansions {
            for t in &e.terms {
                index.entry(t.pole_value).or_insert_with(|| {
                    values.push(t.pole_value);
                    values.len() - 1
                });
            }
        }
        let double = expansions.iter().all(|e| e.mode == PrecisionMode::FixedDouble);
        let rows = if double {
            Rows::Double(
                expansions
                    .iter()
                    .map(|e| {
                        e.terms
                            .iter()
                            .map(|t| {
                                (index[&t.pole_value], t.coefficient_const.to_f64(), t.coefficient_linear.to_f64())
                            })
                            .collect()
                    })
                    .collect(),
            )
        } else {
            let bits = expansions.iter().map(|e| e.mantissa_bits).max().unwrap_or(DOUBLE_BITS);
            Rows::Multi {
                bits,
                rows: expansions
                    .iter()
                    .map(|e| {
                        e.terms
                            .iter()
                            .map(|t| {
                                (
                                    index[&t.pole_value],
                                    Float::with_val(bits, &t.coefficient_const),
                                    Float::with_val(bits, &t.coefficient_linear),
                                )
                            })
                            .collect()
                    })
                    .collect(),
            }
        };
        Self { dim, values, rows }
    }

    /// Populations `ρ_0..ρ_N` at dimensionless time `tau = Γt`; rows beyond
    /// the supplied expansions are zero.
    pub fn eval(&self, tau: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        match &self.rows {
            Rows::Double(rows) => {
                let e: Vec<f64> = self.values.iter().map(|&v| (-(v as f64) * tau).exp()).collect();
                for (m, row) in rows.iter().enumerate() {
                    out[m] = row.iter().map(|&(k, a, b)| (a + b * tau) * e[k]).sum();
                }
            }
            Rows::Multi { bits, rows } => {
                let bits = *bits;
                let tau_f = Float::with_val(bits, tau);
                let e: Vec<Float> = self.values.iter().map(|&v| exp_neg(bits, v, &tau_f)).collect();
                let te: Vec<Float> = e.iter().map(|x| Float::with_val(bits, x * &tau_f)).collect();
                let mut acc = Float::with_val(bits, 0);
                let mut prod = Float::with_val(bits, 0);
                for (m, row) in rows.iter().enumerate() {
                    acc.assign_zero();
                    for (k, a, b) in row {
                        prod.assign_product(a, &e[*k]);
                        acc += &prod;
                        if !b.is_zero() {
                            prod.assign_product(b, &te[*k]);
                            acc += &prod;
                        }
                    }
                    out[m] = acc.to_f64();
                }
            }
        }
        out
    }
}

trait FloatExt {
    fn assign_zero(&mut self);
    fn assign_product(&mut self, a: &Float, b: &Float);
}

impl FloatExt for Float {
    fn assign_zero(&mut self) {
        use rug::Assign;
        self.assign(0);
    }

    fn assign_product(&mut self, a: &Float, b: &Float) {
        use rug::Assign;
        self.assign(a * b);
    }
}

/// Expansions for every target `m <= m0`.
pub fn distribution_expansions(
    ladder: &DickeLadder,
    initial_m0: usize,
    policy: &PrecisionPolicy,
) -> Result<Vec<ResidueExpansion>> {
    ladder.check_pair(0, initial_m0)?;
    par::map_indexed(initial_m0 + 1, |m| residue_terms(ladder, m, initial_m0, policy)).into_iter().collect()
}

/// Full `(N+1) × |grid|` table from the residue solution.
pub fn evaluate_distribution(
    ladder: &DickeLadder,
    initial_m0: usize,
    policy: &PrecisionPolicy,
    time_grid: &[f64],
) -> Result<EvolutionTable> {
    validate_grid(time_grid)?;
    let expansions = distribution_expansions(ladder, initial_m0, policy)?;
    Ok(tabulate(Method::Residue, ladder, initial_m0, &expansions, time_grid))
}

pub(crate) fn tabulate(
    method: Method,
    ladder: &DickeLadder,
    initial_m0: usize,
    expansions: &[ResidueExpansion],
    time_grid: &[f64],
) -> EvolutionTable {
    let evaluator = DistributionEvaluator::new(expansions, ladder.dim());
    let gamma = ladder.gamma();
    let populations = par::map_indexed(time_grid.len(), |k| evaluator.eval(gamma * time_grid[k]));
    let bits = expansions.iter().map(|e| e.mantissa_bits).max().unwrap_or(DOUBLE_BITS);
    let mut diagnostics: Vec<StateDiagnostics> = expansions.iter().map(|e| e.diagnostics()).collect();
    diagnostics.resize(ladder.dim(), StateDiagnostics { mantissa_bits: bits, defect: 0.0 });
    EvolutionTable {
        method,
        n_emitters: ladder.n(),
        gamma,
        initial_m0,
        times: time_grid.to_vec(),
        populations,
        std_errors: None,
        diagnostics,
    }
}

/// Simple-pole formula valid on and above the equator when starting fully
/// inverted:
/// `ρ_m = Σ_{j=m}^{N} (-1)^{N-m} h_N···h_{m+1} ∏_{j'≠j} (h_j - h_{j'})^{-1} e^{-h_j Γt}`.
/// Below the equator the product hits a zero difference and the formula is
/// invalid, which is reported as an error.
pub fn above_equator_closed_form(ladder: &DickeLadder, target_m: usize) -> Result<Vec<ResidueTerm>> {
    let n = ladder.n();
    if target_m > n {
        return invalid(format!("state {target_m} outside ladder"));
    }
    let lowest = if n.is_multiple_of(2) { n / 2 + 1 } else { n.div_ceil(2) };
    if target_m < lowest {
        return invalid(format!(
            "closed form holds only for m >= {lowest} (N = {n}); m = {target_m} is below the equator"
        ));
    }
    let mut prefactor = Integer::from(1);
    for k in target_m + 1..=n {
        prefactor *= ladder.h(k);
    }
    if (n - target_m) % 2 == 1 {
        prefactor = -prefactor;
    }
    let mut terms = Vec::with_capacity(n - target_m + 1);
    for j in target_m..=n {
        let hj = ladder.h(j) as i64;
        let mut denom = Integer::from(1);
        for jp in (target_m..=n).filter(|&jp| jp != j) {
            denom *= hj - ladder.h(jp) as i64;
        }
        terms.push(ResidueTerm::simple(ladder.h(j), Rational::from((prefactor.clone(), denom))));
    }
    Ok(terms)
}
