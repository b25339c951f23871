mod common;

use admercs::bench::{gen_synth_c, pattern_catalog, BenchConfig};
use admercs::scoring::noisy_or;
use admercs::{AdMercs, Dataset, Params};

fn small_bench() -> Dataset {
    let cfg = BenchConfig { n_instances: 300, ..BenchConfig::with_seed(11) };
    gen_synth_c(&cfg, &pattern_catalog()[6]).unwrap().data
}

#[test]
fn json_round_trip_is_byte_identical() {
    let d = small_bench();
    let fitted = AdMercs::fit(&d, &Params::preset("synth-c").unwrap()).unwrap();
    let text = fitted.model.to_json().unwrap();
    let back = AdMercs::from_json(&text).unwrap();
    assert_eq!(back.to_json().unwrap(), text);
    assert_eq!(back.lambda(), fitted.model.lambda());
}

#[test]
fn rescore_reproduces_training_scores() {
    let d = small_bench();
    for preset in ["synth-c", "default", "campos"] {
        let fitted = AdMercs::fit(&d, &Params::preset(preset).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        fitted.model.save(&path).unwrap();
        let loaded = AdMercs::load(&path).unwrap();
        let again = loaded.rescore(&d).unwrap();
        assert_eq!(again.iterations, fitted.state.iterations);
        for (a, b) in again.delta.iter().zip(&fitted.state.delta) {
            assert!((a - b).abs() < 1e-12, "{preset}: {a} vs {b}");
        }
    }
}

#[test]
fn new_instances_use_frozen_context_scores() {
    let d = small_bench();
    let fitted = AdMercs::fit(&d, &Params::preset("synth-c").unwrap()).unwrap();
    let m = &fitted.model;
    let gd = m.params().scoring.gamma_delta;
    for i in (0..d.n_rows()).step_by(37) {
        let x = d.instance(i);
        // hand aggregation over the located leaves
        let v: Vec<f64> = (0..m.trees().len())
            .map(|t| {
                let (leaf, w) = m.locate(t, &x);
                let l = m.lambda()[m.context_id(t, leaf)];
                l + (1.0 - l) * (1.0 - w)
            })
            .collect();
        let expected = noisy_or(v, gd);
        assert!((m.score_new_instance(&x).unwrap() - expected).abs() < 1e-12);
    }
    // the scoring index of the training data is the one built at fit time
    assert_eq!(m.context_index(&d).unwrap(), fitted.index);
}

#[test]
fn schema_mismatch_is_rejected() {
    let d = small_bench();
    let fitted = AdMercs::fit(&d, &Params::default()).unwrap();
    let other = Dataset::from_numeric_columns(&["x", "z"], vec![vec![0.0; 3], vec![1.0; 3]], None).unwrap();
    assert!(fitted.model.rescore(&other).is_err());
    assert!(fitted.model.score_new_instance(&other.instance(0)[..1]).is_err());
}

#[test]
fn params_hash_is_stable_and_sensitive() {
    let a = Params::preset("campos").unwrap();
    let mut b = a;
    assert_eq!(a.hash(), b.hash());
    b.set("rho", "0.8").unwrap();
    assert_ne!(a.hash(), b.hash());
    assert!(b.set("no_such_key", "1").is_err());
    assert!(Params::preset("nope").is_none());
}
