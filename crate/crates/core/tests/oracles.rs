use dicke_core::observables::photon_sum_rule;
use dicke_core::oracle::{discrete_time_propagate, integrate_rate_equations, OdeTolerances};
use dicke_core::residue::evaluate_distribution;
use dicke_core::trajectory::estimate;
use dicke_core::{solve, DickeLadder, Method, PrecisionPolicy, SolveOptions};

fn discrete_error(ladder: &DickeLadder, t: f64, steps: usize, exact: &[f64]) -> f64 {
    let p = discrete_time_propagate(ladder, ladder.n(), t / steps as f64, steps).unwrap();
    p.populations.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn discrete_chain_converges_at_first_order() {
    for n in [2, 5, 8] {
        let ladder = DickeLadder::new(n, 1.0).unwrap();
        let t = 0.6 / n as f64;
        let exact = evaluate_distribution(&ladder, n, &PrecisionPolicy::auto(), &[t]).unwrap().populations[0].clone();
        let coarse = discrete_error(&ladder, t, 400, &exact);
        let fine = discrete_error(&ladder, t, 800, &exact);
        let order = (coarse / fine).log2();
        assert!((0.9..=1.1).contains(&order), "N = {n}: order {order}");
    }
}

#[test]
fn general_initial_states_match_ode() {
    let tol = OdeTolerances::new(1e-12, 1e-14);
    for n in [3, 7, 12, 20] {
        let ladder = DickeLadder::new(n, 0.5).unwrap();
        let grid: Vec<f64> = (0..=30).map(|k| k as f64 * 0.4 / n as f64).collect();
        for m0 in 0..=n {
            let ode = integrate_rate_equations(&ladder, m0, &grid, tol).unwrap();
            for method in [Method::Residue, Method::Jordan, Method::Laplace] {
                let table = solve(&ladder, m0, &grid, method, &SolveOptions::default()).unwrap();
                assert!(table.max_abs_diff(&ode) <= 1e-9, "N = {n}, m0 = {m0}, {method}");
            }
        }
    }
}

#[test]
fn monte_carlo_is_independent_of_worker_count() {
    let ladder = DickeLadder::new(8, 1.0).unwrap();
    let grid: Vec<f64> = (0..20).map(|k| k as f64 * 0.05).collect();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate(&ladder, 8, &grid, 20_000, 7).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.counts, four.counts);
    assert_eq!(one.populations, four.populations);
    assert_eq!(one.std_errors, four.std_errors);
}

#[test]
fn monte_carlo_counts_conserve_trajectories() {
    let ladder = DickeLadder::new(6, 1.0).unwrap();
    let est = estimate(&ladder, 4, &[0.0, 0.1, 1.0], 5_000, 3).unwrap();
    for row in &est.counts {
        assert_eq!(row.iter().sum::<u64>(), 5_000);
        assert!(row[5..].iter().all(|&c| c == 0));
    }
    assert_eq!(est.counts[0][4], 5_000);
}

#[test]
fn photon_sum_rule_holds_for_exact_methods() {
    for n in [1, 2, 5, 16, 32] {
        let ladder = DickeLadder::new(n, 1.0).unwrap();
        for method in [Method::Residue, Method::Ode] {
            for m0 in [n, n.div_ceil(2)] {
                let rule = photon_sum_rule(&ladder, m0, method, &SolveOptions::default()).unwrap();
                assert!(rule.relative_error <= 1e-3, "N = {n}, m0 = {m0}, {method}: {rule:?}");
            }
        }
    }
}
