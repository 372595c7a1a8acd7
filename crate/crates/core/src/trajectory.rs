//! Quantum-jump unraveling. Between jumps only the norm of the state
//! changes, so a trajectory is fully described by its waiting times
//! `τ_m = -ln(p_m)/(Γ h_m)` down the ladder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ladder::DickeLadder;
use crate::par;
use crate::table::{validate_grid, EvolutionTable, Method};

/// One trajectory from `initial_m0` to the ground state. Entry `k` of each
/// vector belongs to the jump out of `m = initial_m0 - k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed_index: u64,
    pub initial_m0: usize,
    pub draws: Vec<f64>,
    pub waiting_times: Vec<f64>,
    pub jump_times: Vec<f64>,
}

impl TrajectoryRecord {
    /// Time of the jump `m -> m-1`, for `1 <= m <= initial_m0`.
    pub fn jump_time(&self, m: usize) -> f64 {
        self.jump_times[self.initial_m0 - m]
    }

    /// State occupied at time `t`; right-continuous at jump instants.
    pub fn state_at(&self, t: f64) -> usize {
        self.initial_m0 - self.jump_times.partition_point(|&tj| tj <= t)
    }
}

/// Uniform on the open interval `(0, 1)`: zero draws are redrawn.
fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let p: f64 = rng.random();
        if p > 0.0 {
            return p;
        }
    }
}

/// Independent substream for trajectory `index` under `root_seed`.
pub fn trajectory_stream(root_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(index);
    rng
}

pub fn sample_trajectory<R: Rng + ?Sized>(
    ladder: &DickeLadder,
    initial_m0: usize,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    let draws: Vec<f64> = (0..initial_m0).map(|_| open_uniform(rng)).collect();
    trajectory_from_draws(ladder, initial_m0, draws)
}

/// Builds the record for given draws `p_{m0}, …, p_1`.
pub fn trajectory_from_draws(ladder: &DickeLadder, initial_m0: usize, draws: Vec<f64>) -> Result<TrajectoryRecord> {
    ladder.check_pair(0, initial_m0)?;
    if draws.len() != initial_m0 {
        return invalid(format!("expected {initial_m0} draws, got {}", draws.len()));
    }
    if draws.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
        return invalid("draws must lie in (0, 1]");
    }
    let gamma = ladder.gamma();
    let waiting_times: Vec<f64> =
        draws.iter().enumerate().map(|(k, &p)| -p.ln() / (gamma * ladder.h(initial_m0 - k) as f64)).collect();
    let mut t = 0.0;
    let jump_times = waiting_times
        .iter()
        .map(|&tau| {
            t += tau;
            t
        })
        .collect();
    Ok(TrajectoryRecord { seed_index: 0, initial_m0, draws, waiting_times, jump_times })
}

pub fn bin_trajectory(record: &TrajectoryRecord, time_grid: &[f64]) -> Vec<usize> {
    time_grid.iter().map(|&t| record.state_at(t)).collect()
}

/// Monte Carlo estimate of the populations with binomial error bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub n_emitters: usize,
    pub gamma: f64,
    pub initial_m0: usize,
    pub times: Vec<f64>,
    /// `[time][m]` sample means.
    pub populations: Vec<Vec<f64>>,
    /// `[time][m]` standard errors `√(p̂(1-p̂)/n_traj)`.
    pub std_errors: Vec<Vec<f64>>,
    /// `[time][m]` occupancy counts; each row sums to `n_traj`.
    pub counts: Vec<Vec<u64>>,
    pub n_traj: u64,
    pub seed: u64,
}

impl McEstimate {
    pub fn to_table(&self) -> EvolutionTable {
        EvolutionTable {
            method: Method::Mc,
            n_emitters: self.n_emitters,
            gamma: self.gamma,
            initial_m0: self.initial_m0,
            times: self.times.clone(),
            populations: self.populations.clone(),
            std_errors: Some(self.std_errors.clone()),
            diagnostics: Vec::new(),
        }
    }

    pub fn standardized_residuals(&self, exact: &EvolutionTable) -> Vec<f64> {
        standardized_residuals(&self.populations, exact, self.n_traj)
    }
}

/// Binomial-model residuals `(p̂ - p)/√(p(1-p)/n)` with `p` the exact
/// population, for every entry where the model variance is nonzero. The
/// sample variance would understate σ for rare levels seen once or twice.
pub fn standardized_residuals(estimate: &[Vec<f64>], exact: &EvolutionTable, n_traj: u64) -> Vec<f64> {
    let n = n_traj as f64;
    let mut z = Vec::new();
    for (row, exact_row) in estimate.iter().zip(&exact.populations) {
        for (&p_hat, &p) in row.iter().zip(exact_row) {
            let s = (p * (1.0 - p) / n).sqrt();
            if s > 0.0 {
                z.push((p_hat - p) / s);
            }
        }
    }
    z
}

const CHUNK: usize = 1024;

pub fn estimate(
    ladder: &DickeLadder,
    initial_m0: usize,
    time_grid: &[f64],
    n_traj: u64,
    root_seed: u64,
) -> Result<McEstimate> {
    ladder.check_pair(0, initial_m0)?;
    validate_grid(time_grid)?;
    if n_traj == 0 {
        return invalid("n_traj must be at least 1");
    }
    let dim = ladder.dim();
    let n_t = time_grid.len();
    // Integer counts make the merge order irrelevant: any worker count
    // yields the same sums.
    let partial = par::fold_chunks(
        n_traj as usize,
        CHUNK,
        || vec![0u64; n_t * dim],
        |acc, i| {
            let mut rng = trajectory_stream(root_seed, i as u64);
            let record = sample_trajectory(ladder, initial_m0, &mut rng).expect("validated above");
            for (k, &t) in time_grid.iter().enumerate() {
                acc[k * dim + record.state_at(t)] += 1;
            }
        },
    );
    let mut flat = vec![0u64; n_t * dim];
    for chunk in partial {
        for (a, b) in flat.iter_mut().zip(chunk) {
            *a += b;
        }
    }
    let counts: Vec<Vec<u64>> = flat.chunks(dim).map(<[u64]>::to_vec).collect();
    let n = n_traj as f64;
    let populations: Vec<Vec<f64>> = counts.iter().map(|r| r.iter().map(|&c| c as f64 / n).collect()).collect();
    let std_errors = populations.iter().map(|r| r.iter().map(|&p| (p * (1.0 - p) / n).sqrt()).collect()).collect();
    Ok(McEstimate {
        n_emitters: ladder.n(),
        gamma: ladder.gamma(),
        initial_m0,
        times: time_grid.to_vec(),
        populations,
        std_errors,
        counts,
        n_traj,
        seed: root_seed,
    })
}

/// Per-trajectory sampler used by the CLI to dump raw records.
pub fn sample_indexed(ladder: &DickeLadder, initial_m0: usize, root_seed: u64, index: u64) -> Result<TrajectoryRecord> {
    let mut rng = trajectory_stream(root_seed, index);
    let mut record = sample_trajectory(ladder, initial_m0, &mut rng)?;
    record.seed_index = index;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_condition_examples() {
        let l = DickeLadder::new(2, 1.0).unwrap();
        let e = (-1.0f64).exp();
        let r = trajectory_from_draws(&l, 2, vec![e, e]).unwrap();
        assert!((r.waiting_times[0] - 0.5).abs() < 1e-15);
        assert!((r.waiting_times[1] - 0.5).abs() < 1e-15);
        assert!((r.jump_time(2) - 0.5).abs() < 1e-15);
        assert!((r.jump_time(1) - 1.0).abs() < 1e-15);

        let l = DickeLadder::new(1, 2.0).unwrap();
        let r = trajectory_from_draws(&l, 1, vec![0.5]).unwrap();
        assert!((r.waiting_times[0] - 2f64.ln() / 2.0).abs() < 1e-15);

        let r = trajectory_from_draws(&l, 1, vec![1.0 - 1e-15]).unwrap();
        assert!(r.waiting_times[0] > 0.0 && r.waiting_times[0] < 1e-14);
        assert!(trajectory_from_draws(&l, 1, vec![0.0]).is_err());
    }

    #[test]
    fn binning_is_right_continuous() {
        let l = DickeLadder::new(2, 1.0).unwrap();
        let e = (-1.0f64).exp();
        let mut r = trajectory_from_draws(&l, 2, vec![e, e]).unwrap();
        // Pin exact jump instants.
        r.jump_times = vec![0.5, 1.0];
        assert_eq!(bin_trajectory(&r, &[0.0, 0.49, 0.5, 0.99, 1.0, 7.0]), vec![2, 2, 1, 1, 0, 0]);
    }

    #[test]
    fn sampled_records_are_consistent() {
        let l = DickeLadder::new(9, 1.5).unwrap();
        for i in 0..50 {
            let r = sample_indexed(&l, 9, 7, i).unwrap();
            assert_eq!(r.seed_index, i);
            for k in 0..9 {
                let m = 9 - k;
                assert!(r.draws[k] > 0.0 && r.draws[k] < 1.0);
                assert_eq!(r.waiting_times[k], -r.draws[k].ln() / (1.5 * l.h(m) as f64));
            }
            assert!(r.jump_times.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(r, sample_indexed(&l, 9, 7, i).unwrap());
        }
        assert_ne!(sample_indexed(&l, 9, 7, 0).unwrap().draws, sample_indexed(&l, 9, 7, 1).unwrap().draws);
    }

    #[test]
    fn zero_draws_are_rejected() {
        struct Scripted(Vec<u64>);
        impl rand::RngCore for Scripted {
            fn next_u32(&mut self) -> u32 {
                self.next_u64() as u32
            }
            fn next_u64(&mut self) -> u64 {
                self.0.remove(0)
            }
            fn fill_bytes(&mut self, dst: &mut [u8]) {
                rand::rand_core::impls::fill_bytes_via_next(self, dst)
            }
        }
        let mut rng = Scripted(vec![0, 0, u64::MAX / 2]);
        let p = open_uniform(&mut rng);
        assert!(p > 0.49 && p < 0.51);
    }

    #[test]
    fn single_trajectory_is_indicator() {
        let l = DickeLadder::new(4, 1.0).unwrap();
        let grid = [0.0, 0.1, 0.5, 2.0];
        let est = estimate(&l, 4, &grid, 1, 3).unwrap();
        for row in &est.populations {
            assert_eq!(row.iter().filter(|&&p| p == 1.0).count(), 1);
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn single_emitter_statistics() {
        let l = DickeLadder::new(1, 1.0).unwrap();
        let est = estimate(&l, 1, &[0.0, 1.0], 100_000, 2024).unwrap();
        let exact = (-1.0f64).exp();
        let sigma = (exact * (1.0 - exact) / 1e5).sqrt();
        assert!((est.populations[1][1] - exact).abs() <= 3.0 * sigma);
        for (k, row) in est.counts.iter().enumerate() {
            assert_eq!(row.iter().sum::<u64>(), 100_000);
            for &s in &est.std_errors[k] {
                assert!(s <= 0.5 / 1e5f64.sqrt());
            }
        }
    }

    #[test]
    fn waiting_time_means() {
        let l = DickeLadder::new(6, 1.0).unwrap();
        let n = 20_000u64;
        let mut sums = [0.0f64; 6];
        for i in 0..n {
            let r = sample_indexed(&l, 6, 11, i).unwrap();
            for (k, tau) in r.waiting_times.iter().enumerate() {
                sums[k] += tau;
            }
        }
        for (k, s) in sums.iter().enumerate() {
            // Exponential waiting times: the standard deviation equals the mean.
            let mean = 1.0 / l.h(6 - k) as f64;
            assert!((s / n as f64 - mean).abs() <= 3.0 * mean / (n as f64).sqrt());
        }
    }

    #[test]
    fn reproducible() {
        let l = DickeLadder::new(5, 1.0).unwrap();
        let grid = [0.0, 0.2, 0.4];
        let a = estimate(&l, 5, &grid, 3000, 42).unwrap();
        assert_eq!(a, estimate(&l, 5, &grid, 3000, 42).unwrap());
        assert_ne!(a.counts, estimate(&l, 5, &grid, 3000, 43).unwrap().counts);
        assert!(estimate(&l, 5, &grid, 0, 42).is_err());
    }
}
