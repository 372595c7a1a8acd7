//! Closed-form Jordan data of the rate matrix.
//!
//! Eigen-labels follow the mirror convention: `j = n..=N+1` with
//! `n = ⌈N/2⌉`, eigenvalue `-h_j`, and `j = N+1` the zero mode. For
//! `n < j <= N` the eigenvalue `-h_j` is shared with the mirror index and
//! carries a generalized vector; `v^{(n)}` exists only for odd `N`.
//!
//! Internally the similarity is kept in its lower-triangular layout `T̃`:
//! rows run top-down (row `r` is `m = N - r`) and columns are
//! `[w^{(N)}, …, w^{(n+1)}, (v^{(n)}), v^{(n+1)}, …, v^{(N+1)}]`, i.e.
//! `w^{(j)}` sits in column `N - j` and `v^{(j)}` in column `j - 1`.
//! Public accessors translate to physical `m` ordering.

use rug::ops::Pow;
use rug::{Assign, Float, Rational};

use crate::error::{invalid, Error, Result};
use crate::ladder::{DickeLadder, RateMatrix};
use crate::precision::{PrecisionMode, PrecisionPolicy};
use crate::table::{validate_grid, DiagonalState, EvolutionTable, Method, StateDiagnostics};

fn hq(ladder: &DickeLadder, i: usize) -> i64 {
    ladder.h(i) as i64
}

fn ratio(num: i64, den: i64) -> Rational {
    Rational::from((num, den))
}

fn check_label(ladder: &DickeLadder, j: usize, lo: usize, hi: usize, what: &str) -> Result<()> {
    if j < lo || j > hi {
        return invalid(format!("{what} label j={j} outside {lo}..={hi} for N={}", ladder.n()));
    }
    Ok(())
}

/// `(H x)_m` in exact arithmetic, physical ordering.
fn apply_exact(ladder: &DickeLadder, x: &[Rational]) -> Vec<Rational> {
    let n = ladder.n();
    (0..=n)
        .map(|m| {
            let mut y = Rational::from(&x[m] * -hq(ladder, m));
            if m < n {
                y += Rational::from(&x[m + 1] * hq(ladder, m + 1));
            }
            y
        })
        .collect()
}

fn eigenvector_unchecked(ladder: &DickeLadder, j: usize) -> Vec<Rational> {
    let n = ladder.n();
    let hj = hq(ladder, j);
    let top = ladder.mirror(j);
    let mut v = vec![Rational::new(); n + 1];
    // v_m = ∏_{i=j+1}^{m̄} h_{i-1}/(h_i - h_j); the product is empty at m = j̄.
    let mut p = Rational::from(1);
    for m in (0..=top).rev() {
        if m < top {
            let i = ladder.mirror(m);
            p *= ratio(hq(ladder, i - 1), hq(ladder, i) - hj);
        }
        v[m] = p.clone();
    }
    v
}

/// Right eigenvector for eigenvalue `-h_j`, physical ordering, exact.
pub fn eigenvector(ladder: &DickeLadder, j: usize) -> Result<Vec<Rational>> {
    check_label(ladder, j, ladder.half_up().max(1), ladder.n() + 1, "eigenvector")?;
    // N odd keeps v^{(n)}; for even N the label n is the mirror of n+1.
    if ladder.n().is_multiple_of(2) && j == ladder.half_up() && ladder.n() > 0 {
        return invalid(format!("eigenvector label j={j} duplicates j={} for even N", j + 1));
    }
    let v = eigenvector_unchecked(ladder, j);
    let hj = hq(ladder, j);
    let hv = apply_exact(ladder, &v);
    if hv.iter().zip(&v).any(|(a, b)| *a != Rational::from(b * -hj)) {
        return Err(Error::InvalidArgument(format!("eigenvector j={j} fails H v = -h_j v")));
    }
    Ok(v)
}

/// Generalized eigenvector with `(H + h_j) w = v^{(j)}`, physical ordering.
pub fn generalized_eigenvector(ladder: &DickeLadder, j: usize) -> Result<Vec<Rational>> {
    let n = ladder.n();
    check_label(ladder, j, ladder.half_up() + 1, n, "generalized eigenvector")?;
    let v = eigenvector_unchecked(ladder, j);
    let w = generalized_unchecked(ladder, j, &v);
    let hj = hq(ladder, j);
    let hw = apply_exact(ladder, &w);
    for m in 0..=n {
        let lhs = Rational::from(&w[m] * hj) + &hw[m];
        if lhs != v[m] {
            return Err(Error::InvalidArgument(format!("generalized eigenvector j={j} fails its chain relation")));
        }
    }
    Ok(w)
}

fn generalized_unchecked(ladder: &DickeLadder, j: usize, v: &[Rational]) -> Vec<Rational> {
    let n = ladder.n();
    let hj = hq(ladder, j);
    let jbar = ladder.mirror(j);
    let mut w = vec![Rational::new(); n + 1];
    // Upper part, j >= m > j̄: (1/h_{j-1}) ∏_{i=m̄+1}^{j-1} (h_i - h_j)/h_{i-1}.
    let mut p = Rational::from((1, hq(ladder, j - 1)));
    for m in jbar + 1..=j {
        if m > jbar + 1 {
            let i = ladder.mirror(m) + 1;
            p *= ratio(hq(ladder, i) - hj, hq(ladder, i - 1));
        }
        w[m] = p.clone();
    }
    // Lower part, j̄ >= m >= 0: v_m Σ_{i=m̄+1}^{N+1} 1/(h_i - h_j).
    let mut s = Rational::new();
    for m in 0..=jbar {
        let i = ladder.mirror(m) + 1;
        if i <= n + 1 {
            s += ratio(1, hq(ladder, i) - hj);
        }
        w[m] = Rational::from(&v[m] * &s);
    }
    w
}

/// One Jordan block: eigenvalue `-h_j` with label `j`, size 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JordanBlock {
    pub label: usize,
    pub eigenvalue: i64,
    pub size: usize,
}

/// Exact lower-triangular similarity and the diagonal blocks of its inverse.
struct ExactParts {
    lower: Vec<Vec<Rational>>,
    inv11: Vec<Vec<Rational>>,
    inv22: Vec<Vec<Rational>>,
    k: usize,
}

fn exact_parts(ladder: &DickeLadder) -> ExactParts {
    let n = ladder.n();
    let d = n + 1;
    let half = ladder.half_up();
    let k = n - half;
    let mut lower = vec![vec![Rational::new(); d]; d];
    let first_v = if n % 2 == 1 { half } else { half + 1 };
    for j in first_v..=n + 1 {
        let v = eigenvector_unchecked(ladder, j);
        if (half + 1..=n).contains(&j) {
            let w = generalized_unchecked(ladder, j, &v);
            for (m, x) in w.into_iter().enumerate() {
                lower[n - m][n - j] = x;
            }
        }
        for (m, x) in v.into_iter().enumerate() {
            lower[n - m][j - 1] = x;
        }
    }

    // (T̃₁₁⁻¹)_{m,j} for rows m and columns j in N..=n+1, nonzero for m <= j:
    //   h_m ∏_{i=m+1}^{j} h_i/(h_i-h_m) · ∏_{i=n+1}^{m-1} (h_i/(h_i-h_m))² · [N odd] h_n/(h_n-h_m)
    let mut inv11 = vec![vec![Rational::new(); k]; k];
    for r in 0..k {
        let m = n - r;
        let hm = hq(ladder, m);
        let mut base = Rational::from(hm);
        for i in half + 1..m {
            let f = ratio(hq(ladder, i), hq(ladder, i) - hm);
            base *= &f;
            base *= &f;
        }
        if n % 2 == 1 {
            base *= ratio(hq(ladder, half), hq(ladder, half) - hm);
        }
        // Column c has label j = N - c; walk j upward from m.
        for c in (0..=r).rev() {
            let j = n - c;
            if j > m {
                base *= ratio(hq(ladder, j), hq(ladder, j) - hm);
            }
            inv11[r][c] = base.clone();
        }
    }

    // (T̃₂₂⁻¹)_{m,j} for rows m = N-r and eigenvector labels j = c+1,
    // nonzero for j <= m̄: ∏_{i=j}^{m̄-1} h_i/(h_i - h_{m̄}).
    let size = d - k;
    let mut inv22 = vec![vec![Rational::new(); size]; size];
    for r in k..d {
        let mbar = ladder.mirror(n - r);
        let hb = hq(ladder, mbar);
        let mut p = Rational::from(1);
        for c in (k..=r).rev() {
            let j = c + 1;
            if j < mbar {
                p *= ratio(hq(ladder, j), hq(ladder, j) - hb);
            }
            inv22[r - k][c - k] = p.clone();
        }
    }
    ExactParts { lower, inv11, inv22, k }
}

struct Rounded {
    lower: Vec<Vec<Float>>,
    lower_inv: Vec<Vec<Float>>,
}

fn round_parts(parts: &ExactParts, bits: u32) -> Rounded {
    let d = parts.lower.len();
    let k = parts.k;
    let lower: Vec<Vec<Float>> =
        parts.lower.iter().map(|row| row.iter().map(|x| Float::with_val(bits, x)).collect()).collect();
    let mut lower_inv = vec![vec![Float::new(bits); d]; d];
    for r in 0..k {
        for c in 0..=r {
            lower_inv[r][c].assign(&parts.inv11[r][c]);
        }
    }
    for r in k..d {
        for c in k..=r {
            lower_inv[r][c].assign(&parts.inv22[r - k][c - k]);
        }
    }
    // Lower-left block -T̃₂₂⁻¹ T̃₂₁ T̃₁₁⁻¹, accumulated at working precision.
    let mut a = vec![vec![Float::new(bits); k]; d - k];
    for q in k..d {
        for c in 0..k {
            let acc = &mut a[q - k][c];
            for p in c..k {
                if !lower[q][p].is_zero() {
                    *acc += &lower[q][p] * &lower_inv[p][c];
                }
            }
        }
    }
    for r in k..d {
        for c in 0..k {
            let mut acc = Float::new(bits);
            for q in k..=r {
                acc += &lower_inv[r][q] * &a[q - k][c];
            }
            lower_inv[r][c] = -acc;
        }
    }
    Rounded { lower, lower_inv }
}

fn log2_abs(x: &Rational) -> f64 {
    if *x == 0 {
        return f64::NEG_INFINITY;
    }
    let (mantissa, exp) = Float::with_val(53, x).to_f64_exp();
    exp as f64 + mantissa.abs().log2()
}

/// Lower bound on `log2 max Σ_q |T̃_rq||T̃⁻¹_qc|` from the exactly known
/// diagonal blocks of `T̃⁻¹`.
fn log2_scale_floor(parts: &ExactParts) -> f64 {
    let d = parts.lower.len();
    let k = parts.k;
    let mut best = f64::NEG_INFINITY;
    for q in 0..d {
        let below = (q..d).map(|r| log2_abs(&parts.lower[r][q])).fold(f64::NEG_INFINITY, f64::max);
        let left = if q < k {
            parts.inv11[q][..=q].iter().map(log2_abs).fold(f64::NEG_INFINITY, f64::max)
        } else {
            parts.inv22[q - k][..=q - k].iter().map(log2_abs).fold(f64::NEG_INFINITY, f64::max)
        };
        best = best.max(below + left);
    }
    best
}

/// `max(max|T̃ T̃⁻¹ - 1|, 2^{-bits} max Σ_q |T̃_rq||T̃⁻¹_qc|)`.
fn identity_defect(r: &Rounded, bits: u32) -> f64 {
    let d = r.lower.len();
    let abs_l: Vec<Vec<f64>> = r.lower.iter().map(|row| row.iter().map(|x| x.to_f64().abs()).collect()).collect();
    let abs_i: Vec<Vec<f64>> = r.lower_inv.iter().map(|row| row.iter().map(|x| x.to_f64().abs()).collect()).collect();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut acc = Float::new(bits);
    for row in 0..d {
        for col in 0..=row {
            acc.assign(if row == col { -1 } else { 0 });
            let mut mag = 0.0;
            for q in col..=row {
                acc += &r.lower[row][q] * &r.lower_inv[q][col];
                mag += abs_l[row][q] * abs_i[q][col];
            }
            worst = worst.max(acc.to_f64().abs());
            scale = scale.max(mag);
        }
    }
    let bound = scale * 2f64.powi(-(bits as i32));
    if worst.is_nan() || bound.is_nan() {
        f64::INFINITY
    } else {
        worst.max(bound)
    }
}

/// `H = T J T⁻¹` from the closed forms, held at a working precision chosen
/// by the identity defect of `T̃ T̃⁻¹`.
#[derive(Debug, Clone)]
pub struct JordanDecomposition {
    pub n_emitters: usize,
    pub gamma: f64,
    pub blocks: Vec<JordanBlock>,
    /// `permutation[c]` is the `T̃` column of column `c` of `T`.
    pub permutation: Vec<usize>,
    pub mode: PrecisionMode,
    pub mantissa_bits: u32,
    pub defect: f64,
    lower: Vec<Vec<Float>>,
    lower_inv: Vec<Vec<Float>>,
    // Per T̃ column: decay value h_j and, for a v column with a partner,
    // the T̃ column of its w.
    column_h: Vec<u64>,
    partner: Vec<Option<usize>>,
    rate: RateMatrix,
}

pub fn jordan_decompose(ladder: &DickeLadder, policy: &PrecisionPolicy) -> Result<JordanDecomposition> {
    let n = ladder.n();
    let half = ladder.half_up();
    let parts = exact_parts(ladder);
    let floor = log2_scale_floor(&parts);
    let (rounded, bits, defect) = policy.escalate(|bits| {
        // A width whose round-off floor alone misses the target would fail
        // the full check too; skip the O(N³) work for it.
        let floor_defect = (floor - bits as f64).exp2();
        if policy.mode == PrecisionMode::Auto && floor_defect > 2.0 * policy.target_tolerance {
            return (None, floor_defect);
        }
        let r = round_parts(&parts, bits);
        let d = identity_defect(&r, bits);
        (Some(r), d)
    })?;
    let rounded = rounded.expect("accepted widths are always evaluated");

    let mut blocks = Vec::new();
    let mut permutation = Vec::with_capacity(n + 1);
    if n % 2 == 1 {
        blocks.push(JordanBlock { label: half, eigenvalue: -hq(ladder, half), size: 1 });
        permutation.push(half - 1);
    }
    for j in half + 1..=n {
        blocks.push(JordanBlock { label: j, eigenvalue: -hq(ladder, j), size: 2 });
        permutation.push(j - 1);
        permutation.push(n - j);
    }
    blocks.push(JordanBlock { label: n + 1, eigenvalue: 0, size: 1 });
    permutation.push(n);

    let mut column_h = vec![0u64; n + 1];
    let mut partner = vec![None; n + 1];
    let first_v = if n % 2 == 1 { half } else { half + 1 };
    for j in first_v..=n + 1 {
        column_h[j - 1] = ladder.h(j);
        if (half + 1..=n).contains(&j) {
            column_h[n - j] = ladder.h(j);
            partner[j - 1] = Some(n - j);
        }
    }

    Ok(JordanDecomposition {
        n_emitters: n,
        gamma: ladder.gamma(),
        blocks,
        permutation,
        mode: policy.mode,
        mantissa_bits: bits,
        defect,
        lower: rounded.lower,
        lower_inv: rounded.lower_inv,
        column_h,
        partner,
        rate: RateMatrix::new(ladder),
    })
}

impl JordanDecomposition {
    pub fn dim(&self) -> usize {
        self.n_emitters + 1
    }

    /// `(#J₁, #J₂)`.
    pub fn block_census(&self) -> (usize, usize) {
        let two = self.blocks.iter().filter(|b| b.size == 2).count();
        (self.blocks.len() - two, two)
    }

    /// `T̃`: rows top-down, columns in the lower-triangular layout.
    pub fn lower_triangular(&self) -> &[Vec<Float>] {
        &self.lower
    }

    pub fn lower_triangular_inverse(&self) -> &[Vec<Float>] {
        &self.lower_inv
    }

    /// `T`, rows indexed by physical `m`, columns in block order.
    pub fn similarity(&self) -> Vec<Vec<Float>> {
        let n = self.n_emitters;
        (0..=n).map(|m| self.permutation.iter().map(|&p| self.lower[n - m][p].clone()).collect()).collect()
    }

    /// `T⁻¹`, rows in block order, columns indexed by physical `m`.
    pub fn similarity_inverse(&self) -> Vec<Vec<Float>> {
        let n = self.n_emitters;
        self.permutation.iter().map(|&p| (0..=n).map(|m| self.lower_inv[p][n - m].clone()).collect()).collect()
    }

    /// `J` in block order, with ones above the diagonal inside size-2 blocks.
    pub fn jordan_matrix(&self) -> Vec<Vec<i64>> {
        let d = self.dim();
        let mut j = vec![vec![0i64; d]; d];
        let mut at = 0;
        for b in &self.blocks {
            for s in 0..b.size {
                j[at + s][at + s] = b.eigenvalue;
            }
            if b.size == 2 {
                j[at][at + 1] = 1;
            }
            at += b.size;
        }
        j
    }

    /// `max |T J T⁻¹ - H|` evaluated at the working precision.
    pub fn reconstruction_defect(&self) -> f64 {
        let bits = self.mantissa_bits;
        let t = self.similarity();
        let ti = self.similarity_inverse();
        let jm = self.jordan_matrix();
        let d = self.dim();
        // T J, exploiting the bidiagonal J.
        let mut tj = vec![vec![Float::new(bits); d]; d];
        for r in 0..d {
            for c in 0..d {
                let mut acc = Float::with_val(bits, &t[r][c] * jm[c][c]);
                if c > 0 && jm[c - 1][c] != 0 {
                    acc += &t[r][c - 1];
                }
                tj[r][c] = acc;
            }
        }
        let mut worst: f64 = 0.0;
        let mut acc = Float::new(bits);
        for r in 0..d {
            for c in 0..d {
                acc.assign(-self.rate.entry(r, c));
                for q in 0..d {
                    acc += &tj[r][q] * &ti[q][c];
                }
                worst = worst.max(acc.to_f64().abs());
            }
        }
        worst
    }

    fn to_chain(&self, initial: &[f64]) -> Vec<Float> {
        let n = self.n_emitters;
        let bits = self.mantissa_bits;
        let x: Vec<Float> = (0..=n).map(|r| Float::with_val(bits, initial[n - r])).collect();
        (0..=n)
            .map(|i| {
                let mut acc = Float::new(bits);
                for (q, xq) in x.iter().enumerate().take(i + 1) {
                    if !xq.is_zero() {
                        acc += &self.lower_inv[i][q] * xq;
                    }
                }
                acc
            })
            .collect()
    }

    fn populations_from_chain(&self, chain: &[Float], tau: f64) -> Vec<f64> {
        let n = self.n_emitters;
        let bits = self.mantissa_bits;
        let tau_f = Float::with_val(bits, tau);
        // e^{-h τ} as an integer power of e^{-τ}, once per distinct h.
        let base = Float::with_val(bits, -&tau_f).exp();
        let mut powers: Vec<(u64, Float)> = Vec::new();
        let mut moved: Vec<Float> = Vec::with_capacity(n + 1);
        for (i, c) in chain.iter().enumerate() {
            let h = self.column_h[i];
            let e = match powers.iter().find(|(v, _)| *v == h) {
                Some((_, e)) => e.clone(),
                None => {
                    let e = Float::with_val(bits, (&base).pow(h as u32));
                    powers.push((h, e.clone()));
                    e
                }
            };
            let mut y = c.clone();
            if let Some(w) = self.partner[i] {
                y += &chain[w] * &tau_f;
            }
            moved.push(y * e);
        }
        let mut out = vec![0.0; n + 1];
        let mut acc = Float::new(bits);
        for r in 0..=n {
            acc.assign(0);
            for (q, c) in moved.iter().enumerate().take(r + 1) {
                acc += &self.lower[r][q] * c;
            }
            out[n - r] = acc.to_f64();
        }
        out
    }

    pub fn propagate(&self, t: f64, initial: &DiagonalState) -> Result<DiagonalState> {
        propagate(self, self.gamma, t, initial)
    }
}

/// `ρ(t₀+t) = T e^{JΓt} T⁻¹ ρ(t₀)`, applied block by block.
pub fn propagate(decomp: &JordanDecomposition, gamma: f64, t: f64, initial: &DiagonalState) -> Result<DiagonalState> {
    if !(t >= 0.0 && t.is_finite()) {
        return invalid("propagation time must be finite and nonnegative");
    }
    if initial.populations.len() != decomp.dim() {
        return invalid("initial state has wrong dimension");
    }
    let chain = decomp.to_chain(&initial.populations);
    Ok(DiagonalState { time: initial.time + t, populations: decomp.populations_from_chain(&chain, gamma * t) })
}

/// Populations on `time_grid` from an arbitrary diagonal state at `t = 0`.
pub fn jordan_table_from(decomp: &JordanDecomposition, initial: &[f64], time_grid: &[f64]) -> Result<EvolutionTable> {
    validate_grid(time_grid)?;
    if initial.len() != decomp.dim() {
        return invalid("initial state has wrong dimension");
    }
    let chain = decomp.to_chain(initial);
    let populations = crate::par::map_indexed(time_grid.len(), |k| {
        decomp.populations_from_chain(&chain, decomp.gamma * time_grid[k])
    });
    let diag = StateDiagnostics { mantissa_bits: decomp.mantissa_bits, defect: decomp.defect };
    Ok(EvolutionTable {
        method: Method::Jordan,
        n_emitters: decomp.n_emitters,
        gamma: decomp.gamma,
        initial_m0: initial.iter().rposition(|&p| p != 0.0).unwrap_or(0),
        times: time_grid.to_vec(),
        populations,
        std_errors: None,
        diagnostics: vec![diag; decomp.dim()],
    })
}

pub fn jordan_distribution(
    ladder: &DickeLadder,
    initial_m0: usize,
    policy: &PrecisionPolicy,
    time_grid: &[f64],
) -> Result<EvolutionTable> {
    ladder.check_pair(0, initial_m0)?;
    let decomp = jordan_decompose(ladder, policy)?;
    let start = DiagonalState::basis(ladder.dim(), initial_m0);
    let mut table = jordan_table_from(&decomp, &start.populations, time_grid)?;
    table.initial_m0 = initial_m0;
    Ok(table)
}
