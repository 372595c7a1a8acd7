//! Constrained sums `S^{(M)}_{n_t} = Σ_{i_1+…+i_{n_t}=M} a_1^{i_1}···a_{n_t}^{i_{n_t}}`,
//! by brute-force enumeration and by residues of
//! `z^{M+n_t-1} / ∏_k (z - a_k)`.

use rug::ops::Pow;
use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::par;

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstrainedSumQuery {
    pub terms: Vec<Rational>,
    pub total_degree: u32,
}

impl ConstrainedSumQuery {
    pub fn new(terms: Vec<Rational>, total_degree: u32) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("constrained sum needs at least one term".into()));
        }
        Ok(Self { terms, total_degree })
    }

    pub fn from_ints(terms: &[i64], total_degree: u32) -> Result<Self> {
        Self::new(terms.iter().map(|&a| Rational::from(a)).collect(), total_degree)
    }

    /// Number of exponent tuples, `C(M + n_t - 1, n_t - 1)`.
    pub fn enumeration_size(&self) -> u128 {
        let n = self.terms.len() as u32;
        let total = Integer::from(self.total_degree + n - 1);
        total.binomial(n - 1).to_u128().unwrap_or(u128::MAX)
    }
}

pub fn constrained_sum_bruteforce(query: &ConstrainedSumQuery) -> Result<Rational> {
    constrained_sum_bruteforce_capped(query, DEFAULT_ENUMERATION_CAP)
}

pub fn constrained_sum_bruteforce_capped(query: &ConstrainedSumQuery, cap: u128) -> Result<Rational> {
    let size = query.enumeration_size();
    if size > cap {
        return Err(Error::EnumerationCap { size, cap });
    }
    let m = query.total_degree;
    let a = &query.terms;
    // Exact rationals: the reduction order does not affect the result.
    let partials = par::map_indexed(m as usize + 1, |first| {
        let mut exps = vec![0u32; a.len()];
        exps[0] = first as u32;
        let mut acc = Rational::new();
        enumerate(a, &mut exps, 1, m - first as u32, &mut acc);
        acc
    });
    Ok(partials.into_iter().sum())
}

fn enumerate(a: &[Rational], exps: &mut [u32], pos: usize, remaining: u32, acc: &mut Rational) {
    if pos + 1 == a.len() || a.len() == 1 {
        if a.len() == 1 {
            if remaining != 0 {
                return;
            }
        } else {
            exps[pos] = remaining;
        }
        let mut term = Rational::from(1);
        for (ai, &e) in a.iter().zip(exps.iter()) {
            term *= rpow(ai, e);
        }
        *acc += term;
        return;
    }
    for e in 0..=remaining {
        exps[pos] = e;
        enumerate(a, exps, pos + 1, remaining - e, acc);
    }
}

fn rpow(a: &Rational, e: u32) -> Rational {
    a.clone().pow(e)
}

/// Residue evaluation. Supports pairwise distinct terms or exactly one
/// value repeated twice; anything more degenerate is rejected.
pub fn constrained_sum_residue(query: &ConstrainedSumQuery) -> Result<Rational> {
    // Distinct values with multiplicities.
    let mut poles: Vec<(Rational, u32)> = Vec::new();
    for a in &query.terms {
        match poles.iter_mut().find(|(v, _)| v == a) {
            Some((_, mult)) => *mult += 1,
            None => poles.push((a.clone(), 1)),
        }
    }
    let repeated = poles.iter().filter(|(_, k)| *k > 1).count();
    if repeated > 1 || poles.iter().any(|(_, k)| *k > 2) {
        return Err(Error::UnsupportedDegeneracy);
    }
    let e = query.total_degree + query.terms.len() as u32 - 1;
    let mut total = Rational::new();
    for (i, (a, mult)) in poles.iter().enumerate() {
        // g(z) = z^e / ∏_{other poles} (z - b)^{k_b}
        let mut denom = Rational::from(1);
        let mut log_deriv = Rational::new();
        for (j, (b, k)) in poles.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = Rational::from(a - b);
            for _ in 0..*k {
                log_deriv += Rational::from(d.recip_ref());
                denom *= &d;
            }
        }
        let residue = if *mult == 1 {
            rpow(a, e) / denom
        } else {
            // g'(a) = (e a^{e-1} - a^e Σ k_b/(a - b)) / ∏ (a - b)^{k_b}
            let lead = rpow(a, e - 1) * e;
            let corr = rpow(a, e) * log_deriv;
            (lead - corr) / denom
        };
        total += residue;
    }
    Ok(total)
}
