use proptest::prelude::*;
use rug::Rational;

use dicke_core::oracle::{constrained_sum_bruteforce, constrained_sum_residue, ConstrainedSumQuery};
use dicke_core::residue::{evaluate_distribution, exact_terms};
use dicke_core::spectral::invert_laplace;
use dicke_core::{emission_curve, solve, DickeLadder, Method, PrecisionPolicy, SolveOptions};

fn ladder_and_m0() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=24).prop_flat_map(|n| (Just(n), 0..=n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_methods_conserve_probability((n, m0) in ladder_and_m0(), tau in 0.01f64..3.0) {
        let ladder = DickeLadder::new(n, 1.0).unwrap();
        let grid = [0.0, tau / (n + 1) as f64, tau];
        for method in [Method::Residue, Method::Jordan, Method::Laplace, Method::Ode] {
            let table = solve(&ladder, m0, &grid, method, &SolveOptions::default()).unwrap();
            prop_assert!(table.max_trace_defect() <= 1e-9, "{method}: {}", table.max_trace_defect());
            prop_assert!(table.min_population() >= -1e-9);
            for row in &table.populations {
                prop_assert!(row[m0 + 1..].iter().all(|&p| p == 0.0), "{method} populated m > m0");
            }
        }
    }

    #[test]
    fn series_matches_residue((n, m0) in (1usize..=12).prop_flat_map(|n| (Just(n), 0..=n)), tau in 0.001f64..1.5) {
        let ladder = DickeLadder::new(n, 0.7).unwrap();
        let grid = [0.0, tau];
        let opts = SolveOptions::default();
        let a = solve(&ladder, m0, &grid, Method::Series, &opts).unwrap();
        let b = solve(&ladder, m0, &grid, Method::Residue, &opts).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 1e-10);
    }

    #[test]
    fn laplace_inversion_reproduces_residue_terms((n, m0) in ladder_and_m0(), seed in 0usize..1000) {
        let ladder = DickeLadder::new(n, 1.0).unwrap();
        let m = seed % (m0 + 1);
        prop_assert_eq!(invert_laplace(&ladder, m, m0).unwrap(), exact_terms(&ladder, m, m0).unwrap());
    }

    #[test]
    fn population_flows_only_downward((n, m0) in ladder_and_m0(), t1 in 0.0f64..1.0, dt in 0.001f64..1.0) {
        // Everything at or above level k can only drain: the cumulative tail is non-increasing.
        let ladder = DickeLadder::new(n, 1.0).unwrap();
        let table = solve(&ladder, m0, &[t1, t1 + dt], Method::Residue, &SolveOptions::default()).unwrap();
        for k in 0..=n {
            let before: f64 = table.populations[0][k..].iter().sum();
            let after: f64 = table.populations[1][k..].iter().sum();
            prop_assert!(after <= before + 1e-12);
        }
    }

    #[test]
    fn emission_rate_is_method_independent((n, m0) in (2usize..=20).prop_flat_map(|n| (Just(n), 1..=n)), tau in 0.01f64..2.0) {
        let ladder = DickeLadder::new(n, 1.3).unwrap();
        let grid = [0.0, tau / 2.0, tau];
        let opts = SolveOptions::default();
        let reference = emission_curve(&solve(&ladder, m0, &grid, Method::Residue, &opts).unwrap(), &ladder).unwrap();
        for method in [Method::Jordan, Method::Laplace, Method::Ode] {
            let curve = emission_curve(&solve(&ladder, m0, &grid, method, &opts).unwrap(), &ladder).unwrap();
            for (a, b) in curve.rate.iter().zip(&reference.rate) {
                prop_assert!((a - b).abs() <= 1e-8 * (n * n) as f64, "{method}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn constrained_sum_matches_enumeration(
        raw in prop::collection::vec((-9i64..=9, 1i64..=4), 1..=5),
        double_first in any::<bool>(),
        degree in 0u32..=12,
    ) {
        // Distinct terms, optionally with one of them repeated once.
        let mut terms: Vec<Rational> = Vec::new();
        for (p, q) in raw {
            let a = Rational::from((p, q));
            if !terms.contains(&a) {
                terms.push(a);
            }
        }
        if double_first && terms.len() < 5 {
            terms.push(terms[0].clone());
        }
        let query = ConstrainedSumQuery::new(terms, degree).unwrap();
        prop_assert_eq!(constrained_sum_residue(&query).unwrap(), constrained_sum_bruteforce(&query).unwrap());
    }
}

#[test]
fn residue_and_double_policy_agree_where_double_is_healthy() {
    let grid: Vec<f64> = (0..=40).map(|k| k as f64 * 0.05).collect();
    for n in 1..=10 {
        let ladder = DickeLadder::new(n, 1.0).unwrap();
        let auto = evaluate_distribution(&ladder, n, &PrecisionPolicy::auto(), &grid).unwrap();
        let double = evaluate_distribution(&ladder, n, &PrecisionPolicy::fixed_double(), &grid).unwrap();
        assert!(auto.max_abs_diff(&double) <= 1e-9, "N = {n}");
    }
}
