//! Resolvent `R(z) = (z - H)⁻¹`. In physical ordering it is upper
//! triangular with `R_{mm'}(z) = 1/(z+h_m) ∏_{j=m+1}^{m'} h_j/(z+h_j)`.

use num_complex::Complex64;
use rug::{Integer, Rational};

use crate::error::{invalid, Error, Result};
use crate::ladder::DickeLadder;
use crate::precision::PrecisionPolicy;
use crate::residue::{self, ResidueTerm};
use crate::table::{validate_grid, EvolutionTable, Method};

/// One matrix element as a rational function: `numerator / ∏_p (z + p)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolventElement {
    pub row_m: usize,
    pub col_m: usize,
    /// `h_m, …, h_{m'}` with repetition; empty for the zero element.
    pub poles: Vec<u64>,
    pub numerator: Integer,
}

impl ResolventElement {
    pub fn new(ladder: &DickeLadder, row_m: usize, col_m: usize) -> Result<Self> {
        if row_m > ladder.n() || col_m > ladder.n() {
            return invalid(format!("resolvent index outside 0..={}", ladder.n()));
        }
        if row_m > col_m {
            return Ok(Self { row_m, col_m, poles: Vec::new(), numerator: Integer::new() });
        }
        let mut numerator = Integer::from(1);
        for j in row_m + 1..=col_m {
            numerator *= ladder.h(j);
        }
        let poles = (row_m..=col_m).map(|j| ladder.h(j)).collect();
        Ok(Self { row_m, col_m, poles, numerator })
    }

    pub fn is_zero(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if self.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if let Some(&p) = self.poles.iter().find(|&&p| z.im == 0.0 && z.re == -(p as f64)) {
            return Err(Error::Singularity { pole: p });
        }
        // Interleave the numerator factors with the denominators to keep
        // intermediate magnitudes near one.
        let mut acc = Complex64::new(1.0, 0.0) / (z + self.poles[0] as f64);
        for &p in &self.poles[1..] {
            acc *= p as f64 / (z + p as f64);
        }
        Ok(acc)
    }
}

pub fn resolvent_element(ladder: &DickeLadder, row_m: usize, col_m: usize, z: Complex64) -> Result<Complex64> {
    ResolventElement::new(ladder, row_m, col_m)?.eval(z)
}

/// Residues of `R_{m m0}(z) e^{zΓt}` at `z = -h_p`, written as decaying
/// terms `(A + BΓt) e^{-h_p Γt}`.
pub fn invert_laplace(ladder: &DickeLadder, target_m: usize, initial_m0: usize) -> Result<Vec<ResidueTerm>> {
    ladder.check_pair(target_m, initial_m0)?;
    let elem = ResolventElement::new(ladder, target_m, initial_m0)?;
    // Distinct poles in order of first appearance, with multiplicity.
    let mut distinct: Vec<(u64, u8)> = Vec::new();
    for &p in &elem.poles {
        match distinct.iter_mut().find(|(v, _)| *v == p) {
            Some((_, k)) => *k += 1,
            None => distinct.push((p, 1)),
        }
    }
    let mut terms = Vec::with_capacity(distinct.len());
    for &(v, mult) in &distinct {
        // g(z) = (z + v)^k R(z) evaluated at z = -v: remaining factors are h_p - v.
        let mut g = Rational::from(&elem.numerator);
        let mut log_deriv = Rational::new();
        for &(p, k) in &distinct {
            if p == v {
                continue;
            }
            let d = Rational::from(p as i64 - v as i64);
            for _ in 0..k {
                g /= &d;
                log_deriv -= Rational::from(d.recip_ref());
            }
        }
        match mult {
            1 => terms.push(ResidueTerm::simple(v, g)),
            // d/dz [g(z) e^{zΓt}] = (g'/g + Γt) g e^{zΓt}
            2 => terms.push(ResidueTerm {
                pole_value: v,
                multiplicity: 2,
                coefficient_const: Rational::from(&g * &log_deriv),
                coefficient_linear: g,
            }),
            _ => return Err(Error::UnsupportedDegeneracy),
        }
    }
    Ok(terms)
}

/// Full distribution from the inverse Laplace transform.
pub fn laplace_distribution(
    ladder: &DickeLadder,
    initial_m0: usize,
    policy: &PrecisionPolicy,
    time_grid: &[f64],
) -> Result<EvolutionTable> {
    validate_grid(time_grid)?;
    ladder.check_pair(0, initial_m0)?;
    let expansions: Result<Vec<_>> = crate::par::map_indexed(initial_m0 + 1, |m| {
        invert_laplace(ladder, m, initial_m0).and_then(|t| residue::with_precision(t, m, initial_m0, policy))
    })
    .into_iter()
    .collect();
    Ok(residue::tabulate(Method::Laplace, ladder, initial_m0, &expansions?, time_grid))
}
