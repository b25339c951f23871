mod common;

use admercs::scoring::{
    context_evidence, inhibited_product, noisy_or, run_iterations, update_delta, update_lambda, ContextIndex,
    ScoringParams,
};
use proptest::prelude::*;

fn probs(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 0..max)
}

/// A random index: `n` instances, `t` trees with 1..4 leaves each.
fn index_strategy() -> impl Strategy<Value = ContextIndex<f64>> {
    (2usize..30, 1usize..5, any::<u64>()).prop_map(|(n, t, seed)| {
        let mut rng = common::Lcg(seed);
        let leaves: Vec<usize> = (0..t).map(|_| 1 + (rng.next() * 4.0) as usize).collect();
        let mut leaf_of: Vec<Vec<usize>> = (0..n)
            .map(|_| leaves.iter().map(|&k| (rng.next() * k as f64) as usize).collect())
            .collect();
        // no empty leaves
        for (tree, &k) in leaves.iter().enumerate() {
            for leaf in 0..k.min(n) {
                leaf_of[leaf][tree] = leaf;
            }
        }
        let leaves: Vec<usize> = leaves.iter().map(|&k| k.min(n)).collect();
        let omega: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..t)
                    .map(|_| if rng.next() < 0.7 { 1.0 } else { rng.next() })
                    .collect()
            })
            .collect();
        ContextIndex::new(&leaves, &leaf_of, &omega).unwrap()
    })
}

proptest! {
    #[test]
    fn noisy_or_monotone_in_each_argument(ps in probs(8), extra in 0.0f64..=1.0, bump in 0.0f64..=1.0, g in 0.0f64..=1.0) {
        let base = noisy_or(ps.iter().copied(), g);
        let more = noisy_or(ps.iter().copied().chain([extra]), g);
        prop_assert!(more >= base - 1e-12);
        if !ps.is_empty() {
            let mut raised = ps.clone();
            raised[0] = (raised[0] + bump).min(1.0);
            prop_assert!(noisy_or(raised, g) >= base - 1e-12);
        }
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn noisy_and_identity(ps in probs(10), g in 0.0f64..=1.0) {
        let direct: f64 = ps.iter().map(|p| 1.0 - g * p).product();
        let via_or = 1.0 - noisy_or(ps.iter().copied(), g);
        prop_assert!((inhibited_product(ps.iter().copied(), g) - direct).abs() < 1e-12);
        prop_assert!((via_or - direct).abs() < 1e-12);
    }

    #[test]
    fn evidence_bounds(l in 0.0f64..=1.0, w in 0.0f64..=1.0) {
        let v = context_evidence(l, w);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(v >= l - 1e-15);
        prop_assert!(v >= 1.0 - w - 1e-15);
    }

    #[test]
    fn scores_stay_in_unit_interval(idx in index_strategy(), gd in 0.0f64..=1.0, gl in 0.0f64..=1.0) {
        let p = ScoringParams { gamma_delta: gd, gamma_lambda: gl, iterations: 10, rho: 0.9 };
        let s = run_iterations(&idx, &p).unwrap();
        prop_assert!(s.delta.iter().chain(&s.lambda).all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(s.iterations >= 1 && s.iterations <= 10);
    }

    #[test]
    fn matches_hand_evaluation(idx in index_strategy(), gd in 0.0f64..=1.0, gl in 0.0f64..=1.0) {
        // one round, so early exit cannot interfere
        let p1 = ScoringParams { gamma_delta: gd, gamma_lambda: gl, iterations: 1, rho: 0.9 };
        let s = run_iterations(&idx, &p1).unwrap();
        let (delta, lambda) = common::hand_iterate(&idx, gd, gl, 1);
        for (a, b) in s.delta.iter().zip(&delta) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in s.lambda.iter().zip(&lambda) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_escalation(idx in index_strategy(), gl in 0.0f64..=1.0, raise in 0.0f64..=1.0) {
        // raising one member's delta cannot lower any context score
        let delta: Vec<f64> = (0..idx.n_instances()).map(|i| (i as f64 * 0.37).fract()).collect();
        let base = update_lambda(&delta, &idx, gl);
        let mut up = delta.clone();
        up[0] = (up[0] + raise).min(1.0);
        let after = update_lambda(&up, &idx, gl);
        for (a, b) in after.iter().zip(&base) {
            prop_assert!(a >= &(b - 1e-12));
        }
        // delta is monotone in lambda too
        let lam: Vec<f64> = base.iter().map(|l| (l + raise).min(1.0)).collect();
        let d0 = update_delta(&base, &idx, 1.0);
        let d1 = update_delta(&lam, &idx, 1.0);
        for (a, b) in d1.iter().zip(&d0) {
            prop_assert!(a >= &(b - 1e-12));
        }
    }
}

#[test]
fn reports_fixed_point_when_converged() {
    // every instance is perfectly typical: delta and lambda stay at zero
    let idx = ContextIndex::new(&[2], &[vec![0], vec![0], vec![1]], &[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
    let s = run_iterations(&idx, &ScoringParams::default()).unwrap();
    assert!(s.delta.iter().all(|&d| d == 0.0));
    assert!(s.iterations < 10);
    let again = update_delta(&update_lambda(&s.delta, &idx, 1.0), &idx, 1.0);
    assert_eq!(again, s.delta);
}

#[test]
fn toy_example_matches_hand_evaluation() {
    let idx = common::toy_index();
    for (gd, gl) in [(1.0, 1.0), (0.5, 0.5), (0.7, 0.3)] {
        for rounds in 1..=10 {
            let p = ScoringParams { gamma_delta: gd, gamma_lambda: gl, iterations: rounds, rho: 0.9 };
            let s = run_iterations(&idx, &p).unwrap();
            let (delta, lambda) = common::hand_iterate(&idx, gd, gl, s.iterations);
            for (a, b) in s.delta.iter().zip(&delta).chain(s.lambda.iter().zip(&lambda)) {
                assert!((a - b).abs() < 1e-12, "gd={gd} gl={gl} rounds={rounds}: {a} vs {b}");
            }
        }
    }
    // the two deviating instances are flagged, the rest are not
    let s = run_iterations(&idx, &ScoringParams::default()).unwrap();
    assert_eq!(s.delta[0], 1.0);
    assert_eq!(s.delta[1], 1.0);
    assert!(s.delta[3..].iter().all(|&d| d == 0.0));
}

#[test]
fn rejects_malformed_index() {
    assert!(ContextIndex::new(&[2], &[vec![0], vec![2]], &[vec![1.0], vec![1.0]]).is_err());
    assert!(ContextIndex::new(&[1, 1], &[vec![0]], &[vec![1.0]]).is_err());
    assert!(ContextIndex::new(&[1], &[vec![0], vec![0]], &[vec![1.0]]).is_err());
}
