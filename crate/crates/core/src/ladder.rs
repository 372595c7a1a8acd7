//! The Dicke ladder: emitter count, decay rate and the collective
//! coefficients `h_m = m (N + 1 - m)` every solver is built on.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Largest emitter count accepted by [`DickeLadder::new`].
pub const DEFAULT_MAX_EMITTERS: usize = 4096;

/// Problem definition for `N` collectively decaying two-level emitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DickeLadder {
    n_emitters: usize,
    gamma: f64,
    h: Vec<u64>,
}

impl DickeLadder {
    pub fn new(n_emitters: usize, gamma: f64) -> Result<Self> {
        Self::with_max(n_emitters, gamma, DEFAULT_MAX_EMITTERS)
    }

    pub fn with_max(n_emitters: usize, gamma: f64, max_emitters: usize) -> Result<Self> {
        if n_emitters == 0 {
            return invalid("number of emitters must be positive");
        }
        if n_emitters > max_emitters {
            return invalid(format!("number of emitters {n_emitters} exceeds the configured maximum {max_emitters}"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return invalid(format!("decay rate must be positive and finite, got {gamma}"));
        }
        let np1 = n_emitters as u64 + 1;
        let h = (0..=n_emitters as u64).map(|m| m * (np1 - m)).collect();
        Ok(Self { n_emitters, gamma, h })
    }

    /// Number of emitters `N`.
    pub fn n(&self) -> usize {
        self.n_emitters
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Number of Dicke states, `N + 1`.
    pub fn dim(&self) -> usize {
        self.n_emitters + 1
    }

    /// `h_m` for `0 <= m <= N + 1`; the value at `N + 1` is zero, which is
    /// how the zero mode is labelled in the Jordan construction.
    pub fn h(&self, m: usize) -> u64 {
        if m == self.n_emitters + 1 {
            0
        } else {
            self.h[m]
        }
    }

    pub fn coefficients(&self) -> &[u64] {
        &self.h
    }

    /// `m̄ = N + 1 - m`, the partner index with `h_m = h_m̄`.
    pub fn mirror(&self, m: usize) -> usize {
        self.n_emitters + 1 - m
    }

    pub fn h_max(&self) -> u64 {
        let np1 = self.n_emitters as u64 + 1;
        np1.div_ceil(2) * (np1 / 2)
    }

    /// `⌈N/2⌉`, the lowest eigen-label used by the Jordan construction.
    pub fn half_up(&self) -> usize {
        self.n_emitters.div_ceil(2)
    }

    pub(crate) fn check_pair(&self, target_m: usize, initial_m0: usize) -> Result<()> {
        if initial_m0 > self.n_emitters {
            return invalid(format!("initial state {initial_m0} outside ladder 0..={}", self.n_emitters));
        }
        if target_m > initial_m0 {
            return invalid(format!("target state {target_m} lies above initial state {initial_m0}"));
        }
        Ok(())
    }
}

/// One pole of the residue integrand `f_{m0,m}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pole {
    pub value: u64,
    pub multiplicity: u8,
    /// Lowest ladder index in `[m, m0]` carrying this value.
    pub index: usize,
}

/// Classified poles for a target state `m` reached from `m0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoleSet {
    pub target_m: usize,
    pub initial_m0: usize,
    pub poles: Vec<Pole>,
}

impl PoleSet {
    pub fn simple_count(&self) -> usize {
        self.poles.iter().filter(|p| p.multiplicity == 1).count()
    }

    pub fn double_count(&self) -> usize {
        self.poles.iter().filter(|p| p.multiplicity == 2).count()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.poles.iter().map(|p| p.multiplicity as usize).sum()
    }
}

/// Groups `h_m, ..., h_{m0}` by value. Poles are listed in order of their
/// lowest index.
pub fn classify_poles(ladder: &DickeLadder, target_m: usize, initial_m0: usize) -> crate::Result<PoleSet> {
    ladder.check_pair(target_m, initial_m0)?;
    let mut poles: Vec<Pole> = Vec::with_capacity(initial_m0 - target_m + 1);
    for k in target_m..=initial_m0 {
        let value = ladder.h(k);
        // Equal values sit at mirrored indices, so the partner (if inside the
        // range) was already visited when k is the upper one.
        let partner = ladder.mirror(k);
        if partner < k && partner >= target_m && k != 0 {
            let pole = poles.iter_mut().find(|p| p.index == partner).expect("mirror index visited earlier");
            debug_assert_eq!(pole.value, value);
            pole.multiplicity += 1;
        } else {
            poles.push(Pole { value, multiplicity: 1, index: k });
        }
    }
    Ok(PoleSet { target_m, initial_m0, poles })
}

/// The generator `H` of `dρ/d(Γt) = H ρ`, stored as its two bands in the
/// physical (ground state first) ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateMatrix {
    h: Vec<u64>,
}

impl RateMatrix {
    pub fn new(ladder: &DickeLadder) -> Self {
        Self { h: ladder.coefficients().to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    /// Diagonal entry acting on state `m`.
    pub fn diagonal(&self, m: usize) -> i64 {
        -(self.h[m] as i64)
    }

    /// Feeding rate from state `m` into `m - 1` (`m >= 1`).
    pub fn feed(&self, m: usize) -> i64 {
        self.h[m] as i64
    }

    /// `(H x)_m = -h_m x_m + h_{m+1} x_{m+1}` in physical ordering.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.h.len()];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.h.len() - 1;
        for m in 0..=n {
            let mut v = -(self.h[m] as f64) * x[m];
            if m < n {
                v += self.h[m + 1] as f64 * x[m + 1];
            }
            out[m] = v;
        }
    }

    /// Entry `H[row][col]` with both indices physical.
    pub fn entry(&self, row: usize, col: usize) -> i64 {
        if row == col {
            self.diagonal(row)
        } else if col == row + 1 {
            self.feed(col)
        } else {
            0
        }
    }

    /// Dense matrix in the top-down layout (row and column 0 is `m = N`).
    pub fn dense_top_down(&self) -> Vec<Vec<i64>> {
        let n = self.h.len() - 1;
        (0..=n).map(|r| (0..=n).map(|c| self.entry(n - r, n - c)).collect()).collect()
    }

    pub fn column_sums(&self) -> Vec<i64> {
        let n = self.h.len() - 1;
        (0..=n).map(|c| (0..=n).map(|r| self.entry(r, c)).sum()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(set: &PoleSet) -> Vec<(u64, u8)> {
        let mut v: Vec<_> = set.poles.iter().map(|p| (p.value, p.multiplicity)).collect();
        v.sort();
        v
    }

    #[test]
    fn coefficients_small_ladders() {
        assert_eq!(DickeLadder::new(4, 1.0).unwrap().coefficients(), &[0, 4, 6, 6, 4]);
        assert_eq!(DickeLadder::new(1, 1.0).unwrap().coefficients(), &[0, 1]);
        assert_eq!(DickeLadder::new(3, 1.0).unwrap().coefficients(), &[0, 3, 4, 3]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(DickeLadder::new(0, 1.0).is_err());
        assert!(DickeLadder::new(3, 0.0).is_err());
        assert!(DickeLadder::new(3, -1.0).is_err());
        assert!(DickeLadder::new(3, f64::NAN).is_err());
        assert!(DickeLadder::new(DEFAULT_MAX_EMITTERS + 1, 1.0).is_err());
        assert!(DickeLadder::with_max(10, 1.0, 8).is_err());
    }

    #[test]
    fn ladder_symmetry_sweep() {
        for n in 1..=64 {
            let l = DickeLadder::new(n, 1.0).unwrap();
            assert_eq!(l.h(0), 0);
            assert_eq!(l.h(n), n as u64);
            for m in 1..=n {
                assert_eq!(l.h(m), l.h(l.mirror(m)));
            }
            let max = *l.coefficients().iter().max().unwrap();
            assert_eq!(max, l.h_max());
        }
    }

    #[test]
    fn pole_examples() {
        let l4 = DickeLadder::new(4, 1.0).unwrap();
        let set = classify_poles(&l4, 3, 4).unwrap();
        assert_eq!(
            set.poles,
            vec![Pole { value: 6, multiplicity: 1, index: 3 }, Pole { value: 4, multiplicity: 1, index: 4 }]
        );
        assert_eq!(values(&classify_poles(&l4, 0, 4).unwrap()), vec![(0, 1), (4, 2), (6, 2)]);

        let l3 = DickeLadder::new(3, 1.0).unwrap();
        assert_eq!(values(&classify_poles(&l3, 1, 3).unwrap()), vec![(3, 2), (4, 1)]);

        let l5 = DickeLadder::new(5, 1.0).unwrap();
        let set = classify_poles(&l5, 0, 5).unwrap();
        let middle = set.poles.iter().find(|p| p.value == 9).unwrap();
        assert_eq!(middle.multiplicity, 1);
        assert_eq!(middle.index, 3);

        assert!(classify_poles(&l4, 3, 2).is_err());
        assert!(classify_poles(&l4, 0, 5).is_err());
    }

    #[test]
    fn pole_census_properties() {
        for n in 1..=40 {
            let l = DickeLadder::new(n, 1.0).unwrap();
            let top = classify_poles(&l, n, n).unwrap();
            assert_eq!(top.poles, vec![Pole { value: n as u64, multiplicity: 1, index: n }]);
            for m in 0..=n {
                let set = classify_poles(&l, m, n).unwrap();
                assert_eq!(set.total_multiplicity(), n - m + 1);
                // Direct occurrence count over the index range.
                for pole in &set.poles {
                    let count = (m..=n).filter(|&k| l.h(k) == pole.value).count();
                    assert_eq!(count, pole.multiplicity as usize);
                    assert!(pole.multiplicity <= 2);
                }
                if n % 2 == 0 && m > n / 2 {
                    assert_eq!(set.double_count(), 0);
                }
                if 2 * m < n + 1 {
                    assert_eq!(set.double_count(), n / 2 - m.saturating_sub(1));
                }
                if n % 2 == 1 && m <= n.div_ceil(2) {
                    let mid = l.h(n.div_ceil(2));
                    let p = set.poles.iter().find(|p| p.value == mid).unwrap();
                    assert_eq!(p.multiplicity, 1);
                }
            }
        }
    }

    #[test]
    fn rate_matrix_layout() {
        let l1 = DickeLadder::new(1, 1.0).unwrap();
        assert_eq!(RateMatrix::new(&l1).dense_top_down(), vec![vec![-1, 0], vec![1, 0]]);

        let l2 = DickeLadder::new(2, 1.0).unwrap();
        let h2 = RateMatrix::new(&l2).dense_top_down();
        assert_eq!(h2, vec![vec![-2, 0, 0], vec![2, -2, 0], vec![0, 2, 0]]);

        for n in 1..=30 {
            let l = DickeLadder::new(n, 1.0).unwrap();
            let h = RateMatrix::new(&l);
            assert!(h.column_sums().iter().all(|&s| s == 0));
            let dense = h.dense_top_down();
            for (r, row) in dense.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    if c > r || r > c + 1 {
                        assert_eq!(v, 0);
                    }
                }
                assert_eq!(row[r], -(l.h(n - r) as i64));
            }
            let mut excited = vec![0.0; n + 1];
            excited[n] = 1.0;
            let d = h.apply(&excited);
            assert_eq!(d[n], -(n as f64));
            assert_eq!(d[n - 1], n as f64);
        }
    }
}
