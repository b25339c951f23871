mod common;

use admercs::eval::{auc_roc, average_precision, average_precision_detail, evaluate};
use proptest::prelude::*;

/// Scores on a small grid so ties are common, with both classes present.
fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((0u8..5, any::<bool>()), 2..=12)
        .prop_filter("both classes", |v| v.iter().any(|p| p.1) && v.iter().any(|p| !p.1))
        .prop_map(|v| v.into_iter().map(|(s, l)| (s as f64 / 4.0, l)).unzip())
}

proptest! {
    #[test]
    fn auc_matches_pair_counting((s, l) in scored()) {
        prop_assert!((auc_roc(&s, &l).unwrap() - common::auc_pairs(&s, &l)).abs() < 1e-12);
    }

    #[test]
    fn ap_matches_prefix_definition((s, l) in scored()) {
        prop_assert!((average_precision(&s, &l).unwrap() - common::ap_prefix(&s, &l)).abs() < 1e-12);
    }

    #[test]
    fn auc_flips_under_negation((s, l) in scored()) {
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auc_roc(&s, &l).unwrap() + auc_roc(&neg, &l).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tie_flag_is_exact((s, l) in scored()) {
        let crosses = (0..s.len()).any(|i| (0..s.len()).any(|j| s[i] == s[j] && l[i] != l[j]));
        prop_assert_eq!(average_precision_detail(&s, &l).unwrap().ties_cross_classes, crosses);
    }
}

#[test]
fn random_scores_give_ap_near_contamination() {
    let mut rng = common::Lcg(99);
    let n = 1000;
    let labels: Vec<bool> = (0..n).map(|i| i % 20 == 0).collect();
    let (mut ap, mut auc) = (0.0, 0.0);
    for _ in 0..100 {
        let scores: Vec<f64> = (0..n).map(|_| rng.next()).collect();
        let r = evaluate(&scores, &labels).unwrap();
        ap += r.ap / 100.0;
        auc += r.auc / 100.0;
    }
    assert!((ap - 0.05).abs() < 0.02, "ap {ap}");
    assert!((auc - 0.5).abs() < 0.02, "auc {auc}");
}

#[test]
fn single_class_and_mismatch_are_errors() {
    assert!(auc_roc(&[0.1, 0.2], &[true, true]).is_err());
    assert!(average_precision(&[0.1], &[true, false]).is_err());
    assert!(evaluate(&[f64::NAN, 0.2], &[true, false]).is_err());
}

proptest! {
    #[test]
    fn auc_invariant_under_monotone_transform((s, l) in scored()) {
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(auc_roc(&s, &l).unwrap(), auc_roc(&t, &l).unwrap());
    }

    #[test]
    fn inverted_ranking_has_closed_form_ap(n in 2usize..=12, p in 1usize..12) {
        prop_assume!(p < n);
        // positives get the lowest scores
        let labels: Vec<bool> = (0..n).map(|i| i < p).collect();
        let scores: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let closed: f64 = (1..=p).map(|k| k as f64 / (n - p + k) as f64).sum::<f64>() / p as f64;
        prop_assert!((average_precision(&scores, &labels).unwrap() - closed).abs() < 1e-12);
        prop_assert!((common::ap_prefix(&scores, &labels) - closed).abs() < 1e-12);
    }
}

#[test]
fn worked_examples() {
    assert_eq!(auc_roc(&[0.9, 0.3, 0.5], &[true, true, false]).unwrap(), 0.5);
    assert_eq!(auc_roc(&[0.4; 4], &[true, false, true, false]).unwrap(), 0.5);
    assert_eq!(average_precision(&[0.9, 0.8, 0.3, 0.1], &[false, true, false, false]).unwrap(), 0.5);
}
