//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use admercs::data::{AttributeMeta, Column};
use admercs::scoring::ContextIndex;
use admercs::Dataset;

/// Mann-Whitney AUC by counting every (positive, negative) pair.
pub fn auc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Average precision from the definition: for every positive, the precision of the
/// prefix ending at it. Items with a higher score, or an equal score and an earlier
/// input position, rank before it.
pub fn ap_prefix(scores: &[f64], labels: &[bool]) -> f64 {
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let mut total = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        let above: Vec<usize> = (0..scores.len())
            .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j <= i))
            .collect();
        let hits = above.iter().filter(|&&j| labels[j]).count() as f64;
        total += hits / above.len() as f64;
    }
    total / n_pos
}

pub fn variance_of(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

pub fn gini_of(values: &[u32]) -> f64 {
    let n = values.len() as f64;
    let mut counts = std::collections::HashMap::new();
    for v in values {
        *counts.entry(*v).or_insert(0usize) += 1;
    }
    1.0 - counts.values().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

pub fn impurity_of(d: &Dataset, target: usize, members: &[u32]) -> f64 {
    match d.column(target) {
        Column::Numeric(y) => variance_of(&members.iter().map(|&i| y[i as usize]).collect::<Vec<_>>()),
        Column::Nominal(y) => gini_of(&members.iter().map(|&i| y[i as usize]).collect::<Vec<_>>()),
    }
}

/// Impurity decrease of splitting `members` into `left` and the rest.
pub fn decrease_of(d: &Dataset, target: usize, members: &[u32], left: &[u32]) -> f64 {
    let right: Vec<u32> = members.iter().copied().filter(|i| !left.contains(i)).collect();
    let n = members.len() as f64;
    impurity_of(d, target, members)
        - left.len() as f64 / n * impurity_of(d, target, left)
        - right.len() as f64 / n * impurity_of(d, target, &right)
}

/// Best impurity decrease over every admissible split of `members`, by enumeration.
pub fn brute_best_decrease(d: &Dataset, target: usize, members: &[u32], min_leaf: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    for a in (0..d.n_attributes()).filter(|&a| a != target) {
        let lefts: Vec<Vec<u32>> = match d.column(a) {
            Column::Numeric(x) => {
                let mut vals: Vec<f64> = members.iter().map(|&i| x[i as usize]).collect();
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                vals.windows(2)
                    .map(|w| {
                        let t = (w[0] + w[1]) / 2.0;
                        members.iter().copied().filter(|&i| x[i as usize] <= t).collect()
                    })
                    .collect()
            }
            Column::Nominal(x) => {
                let mut cats: Vec<u32> = members.iter().map(|&i| x[i as usize]).collect();
                cats.sort();
                cats.dedup();
                cats.iter()
                    .map(|&c| members.iter().copied().filter(|&i| x[i as usize] == c).collect())
                    .collect()
            }
        };
        for left in lefts {
            if left.len() < min_leaf || members.len() - left.len() < min_leaf {
                continue;
            }
            let dec = decrease_of(d, target, members, &left);
            best = Some(best.map_or(dec, |b: f64| b.max(dec)));
        }
    }
    best
}

/// Deterministic linear congruential stream in [0, 1), independent of the crate's RNG.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Two trees over six instances. Tree 0 has leaves {0,1,2} and {3,4,5}; tree 1 has
/// leaves {0,3}, {1,4}, {2,5}. Instances 0 and 1 have likelihood 0 in tree 1 and 1
/// in tree 0; instance 2 (the accidental inlier) and 3..5 have likelihood 1 everywhere.
pub fn toy_index() -> ContextIndex<f64> {
    let leaf_of = vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 0], vec![1, 1], vec![1, 2]];
    let omega = vec![
        vec![1.0, 0.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
        vec![1.0, 1.0],
        vec![1.0, 1.0],
        vec![1.0, 1.0],
    ];
    ContextIndex::new(&[2, 3], &leaf_of, &omega).unwrap()
}

pub const TOY_INLIER: usize = 2;

/// Hand evaluation of the update rules on an index: plain products, no log space.
pub fn hand_iterate(index: &ContextIndex<f64>, gd: f64, gl: f64, rounds: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lambda = vec![0.0; index.n_contexts()];
    let mut delta = vec![0.0; index.n_instances()];
    for _ in 0..rounds {
        for (i, di) in delta.iter_mut().enumerate() {
            let mut keep = 1.0;
            for t in 0..index.n_trees() {
                let c = index.contexts_of(i)[t] as usize;
                let v = lambda[c] + (1.0 - lambda[c]) * (1.0 - index.omega(i, t));
                keep *= 1.0 - gd * v;
            }
            *di = 1.0 - keep;
        }
        for (c, lc) in lambda.iter_mut().enumerate() {
            *lc = index
                .members(c)
                .iter()
                .map(|&i| 1.0 - gl * (1.0 - delta[i as usize]))
                .product();
        }
    }
    (delta, lambda)
}

/// A 100-row dataset where `teeth` equals `!eggs` except for row 0, plus a noise
/// attribute. 70 rows lay eggs, so the violation is rarer within `teeth`'s context. Returns the dataset and the index of the violating row.
pub fn eggs_teeth() -> (Dataset, usize) {
    let mut eggs = Vec::new();
    let mut teeth = Vec::new();
    let mut size = Vec::new();
    let mut rng = Lcg(17);
    for i in 0..100u32 {
        let e = u32::from(i < 70);
        eggs.push(e);
        teeth.push(1 - e);
        size.push(rng.next());
    }
    // row 0 lays eggs and has teeth
    teeth[0] = 1;
    let bools = || vec!["false".to_string(), "true".to_string()];
    let attrs = vec![
        AttributeMeta::nominal("eggs", 0, bools()),
        AttributeMeta::nominal("teeth", 1, bools()),
        AttributeMeta::numeric("size", 2),
    ];
    let d = Dataset::new(
        attrs,
        vec![Column::Nominal(eggs), Column::Nominal(teeth), Column::Numeric(size)],
        None,
    )
    .unwrap();
    (d, 0)
}
