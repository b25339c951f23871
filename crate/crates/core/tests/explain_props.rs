mod common;

use admercs::bench::{gen_synth_c, pattern_catalog, BenchConfig};
use admercs::explain::{explain_instance, list_anomalous_contexts, ExplanationKind};
use admercs::{AdMercs, Params};

#[test]
fn explanations_are_consistent_with_the_model() {
    let catalog = pattern_catalog();
    for (k, pattern) in [0usize, 7, 14, 20, 27].into_iter().map(|k| (k, &catalog[k])) {
        let cfg = BenchConfig { n_instances: 400, ..BenchConfig::with_seed(k as u64 + 3) };
        let b = gen_synth_c::<f64>(&cfg, pattern).unwrap();
        let d = &b.data;
        let m = AdMercs::fit(d, &Params::preset("synth-c").unwrap()).unwrap().model;
        for thr in [0.5, 1.1] {
            for i in 0..d.n_rows() {
                let x = d.instance(i);
                let ex = explain_instance(&m, &x, usize::MAX, thr).unwrap();
                let v = m.evidence(&x).unwrap();
                for e in &ex {
                    let tree = &m.trees()[e.tree];
                    let (leaf, w) = m.locate(e.tree, &x);
                    assert_eq!(e.context, m.context_id(e.tree, leaf));
                    // the conditions select the instance and describe a node on its path
                    assert!(e.conditions.iter().all(|c| c.holds(&x)));
                    assert!(tree.path_to(tree.leaves[leaf]).contains(&e.node));
                    assert_eq!(e.strength, v[e.tree]);
                    match &e.kind {
                        ExplanationKind::Deviation { omega, .. } => {
                            assert!(*omega < 1.0);
                            assert_eq!(*omega, w);
                            assert_eq!(e.node, tree.scoring_node[leaf]);
                        }
                        ExplanationKind::AnomalousContext { lambda } => {
                            assert!(*lambda >= thr);
                            assert_eq!(e.node, tree.leaves[leaf]);
                        }
                    }
                }
                assert!(ex.windows(2).all(|p| p[0].strength >= p[1].strength));
                // the strongest explanation carries the largest evidence of any emitting tree
                let emitting: Vec<usize> = (0..m.trees().len())
                    .filter(|&t| {
                        let (leaf, w) = m.locate(t, &x);
                        m.lambda()[m.context_id(t, leaf)] >= thr || w < 1.0
                    })
                    .collect();
                assert_eq!(ex.len(), emitting.len());
                if let Some(top) = ex.first() {
                    let best = emitting.iter().map(|&t| v[t]).fold(f64::NEG_INFINITY, f64::max);
                    assert_eq!(top.strength, best);
                }
                let short = explain_instance(&m, &x, 1, thr).unwrap();
                assert_eq!(short.first(), ex.first());
            }
        }
    }
}

#[test]
fn violation_of_functional_dependency_is_named() {
    let (d, row) = common::eggs_teeth();
    let m = AdMercs::fit(&d, &Params::default()).unwrap().model;
    let x = d.instance(row);
    let ex = explain_instance(&m, &x, 3, 0.5).unwrap();
    let top = &ex[0];
    assert_eq!(top.target, "teeth");
    assert!(top.conditions.iter().any(|c| c.attribute == "eggs"));
    let text = top.render(m.attributes(), &m.trees()[top.tree]);
    // one-vs-rest: the egg layers are reached either as `= true` or as `!= false`
    assert!(text.contains("eggs = true") || text.contains("eggs != false"), "{text}");
    assert!(text.contains("teeth = true"), "{text}");
}

#[test]
fn anomalous_context_listing_is_sorted() {
    let cfg = BenchConfig { n_instances: 400, ..BenchConfig::with_seed(5) };
    let d = gen_synth_c::<f64>(&cfg, &pattern_catalog()[2]).unwrap().data;
    let m = AdMercs::fit(&d, &Params::preset("synth-c").unwrap()).unwrap().model;
    let all = list_anomalous_contexts(&m, 0.0);
    assert_eq!(all.len(), m.n_contexts());
    assert!(all.windows(2).all(|p| p[0].lambda >= p[1].lambda));
    assert!(list_anomalous_contexts(&m, 0.5).iter().all(|c| c.lambda >= 0.5));
}
