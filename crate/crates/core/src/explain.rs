//! Explanations for high-scoring instances and descriptions of anomalous contexts.
//!
//! An instance is flagged by a tree either because its target value is atypical in
//! the node scoring its leaf (a deviation), or because the leaf itself is an
//! anomalous context. Both cases are described by the split conditions on the
//! root path.

use std::fmt;

use serde::Serialize;

use crate::data::{AttributeMeta, Value};
use crate::density::{Density, LikelihoodModel};
use crate::error::Result;
use crate::model::AdMercs;
use crate::scalar::Scalar;
use crate::tree::{Split, Tree};

/// Grid resolution for locating typical numeric values.
pub const TYPICAL_GRID: usize = 512;
pub const DEFAULT_LAMBDA_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Eq => "=",
            Relation::Ne => "!=",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ConditionValue<T> {
    Number(T),
    Category(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition<T> {
    pub attribute: String,
    #[serde(skip)]
    pub attribute_index: usize,
    pub relation: Relation,
    pub value: ConditionValue<T>,
    /// Category index for nominal conditions.
    #[serde(skip)]
    pub category: Option<u32>,
}

impl<T: Scalar> Condition<T> {
    /// Whether `x` satisfies the condition.
    pub fn holds(&self, x: &[Value<T>]) -> bool {
        match (&x[self.attribute_index], self.relation, &self.value) {
            (Value::Num(v), Relation::Le, ConditionValue::Number(t)) => *v <= *t,
            (Value::Num(v), Relation::Gt, ConditionValue::Number(t)) => *v > *t,
            (Value::Cat(c), Relation::Eq, _) => *c == self.category,
            (Value::Cat(c), Relation::Ne, _) => *c != self.category,
            _ => false,
        }
    }
}

impl<T: Scalar> fmt::Display for Condition<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            ConditionValue::Number(t) => write!(f, "{} {} {}", self.attribute, self.relation, fmt_num(*t)),
            ConditionValue::Category(c) => write!(f, "{} {} {}", self.attribute, self.relation, c),
        }
    }
}

fn fmt_num<T: Scalar>(x: T) -> String {
    let v = x.as_f64();
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

/// One condition per edge on the root-to-`node` path.
pub fn describe_node<T: Scalar>(tree: &Tree<T>, node: usize, attributes: &[AttributeMeta]) -> Vec<Condition<T>> {
    let path = tree.path_to(node);
    path.windows(2)
        .map(|w| {
            let parent = &tree.nodes[w[0]];
            let (left, _) = parent.children.expect("path goes through internal nodes");
            let went_left = w[1] == left;
            match parent.split.as_ref().expect("internal node has a split") {
                Split::Numeric { attribute, threshold } => Condition {
                    attribute: attributes[*attribute].name.clone(),
                    attribute_index: *attribute,
                    relation: if went_left { Relation::Le } else { Relation::Gt },
                    value: ConditionValue::Number(*threshold),
                    category: None,
                },
                Split::Nominal { attribute, category } => Condition {
                    attribute: attributes[*attribute].name.clone(),
                    attribute_index: *attribute,
                    relation: if went_left { Relation::Eq } else { Relation::Ne },
                    value: ConditionValue::Category(attributes[*attribute].category_name(*category).to_string()),
                    category: Some(*category),
                },
            }
        })
        .collect()
}

/// Merges conditions on the same attribute: the tightest `<=` and `>` bounds per
/// numeric attribute, and an `=` absorbing any `!=` on the same nominal attribute.
/// First-appearance order of attributes is kept.
pub fn simplify<T: Scalar>(conditions: &[Condition<T>]) -> Vec<Condition<T>> {
    let mut out: Vec<Condition<T>> = Vec::new();
    for c in conditions {
        let same = |o: &Condition<T>| o.attribute_index == c.attribute_index;
        match (c.relation, &c.value) {
            (Relation::Le, ConditionValue::Number(t)) | (Relation::Gt, ConditionValue::Number(t)) => {
                if let Some(prev) = out.iter_mut().find(|o| same(o) && o.relation == c.relation) {
                    if let ConditionValue::Number(p) = &mut prev.value {
                        *p = if c.relation == Relation::Le { p.min(*t) } else { p.max(*t) };
                    }
                } else {
                    out.push(c.clone());
                }
            }
            (Relation::Eq, _) => {
                out.retain(|o| !same(o));
                out.push(c.clone());
            }
            (Relation::Ne, _) => {
                let pinned = out.iter().any(|o| same(o) && o.relation == Relation::Eq);
                if !pinned && !out.contains(c) {
                    out.push(c.clone());
                }
            }
            _ => out.push(c.clone()),
        }
    }
    out
}

/// Renders conditions, joining a numeric pair into `lo < x <= hi`.
pub fn render_conditions<T: Scalar>(conditions: &[Condition<T>]) -> String {
    if conditions.is_empty() {
        return "(all instances)".into();
    }
    let mut parts = Vec::new();
    let mut used = vec![false; conditions.len()];
    for (i, c) in conditions.iter().enumerate() {
        if used[i] {
            continue;
        }
        used[i] = true;
        if let (Relation::Gt, ConditionValue::Number(lo)) = (c.relation, &c.value) {
            let partner = conditions.iter().enumerate().position(|(j, o)| {
                !used[j] && o.attribute_index == c.attribute_index && o.relation == Relation::Le
            });
            if let Some(j) = partner {
                used[j] = true;
                if let ConditionValue::Number(hi) = &conditions[j].value {
                    parts.push(format!("{} < {} <= {}", fmt_num(*lo), c.attribute, fmt_num(*hi)));
                    continue;
                }
            }
        }
        if let (Relation::Le, ConditionValue::Number(hi)) = (c.relation, &c.value) {
            let partner = conditions.iter().enumerate().position(|(j, o)| {
                !used[j] && o.attribute_index == c.attribute_index && o.relation == Relation::Gt
            });
            if let Some(j) = partner {
                used[j] = true;
                if let ConditionValue::Number(lo) = &conditions[j].value {
                    parts.push(format!("{} < {} <= {}", fmt_num(*lo), c.attribute, fmt_num(*hi)));
                    continue;
                }
            }
        }
        parts.push(c.to_string());
    }
    parts.join(" and ")
}

/// Values a likelihood model considers fully typical (`omega == 1`).
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TypicalValues<T> {
    /// Maximal closed intervals of a numeric target.
    Intervals(Vec<(T, T)>),
    /// Category indices of a nominal target.
    Categories(Vec<u32>),
}

impl<T: Scalar> TypicalValues<T> {
    pub fn contains(&self, v: &Value<T>) -> bool {
        match (self, v) {
            (TypicalValues::Intervals(iv), Value::Num(x)) => iv.iter().any(|(a, b)| a <= x && x <= b),
            (TypicalValues::Categories(cs), Value::Cat(Some(c))) => cs.contains(c),
            _ => false,
        }
    }

    pub fn render(&self, meta: &AttributeMeta) -> String {
        match self {
            TypicalValues::Intervals(iv) if iv.is_empty() => "no typical value".into(),
            TypicalValues::Intervals(iv) => {
                let parts: Vec<String> = iv
                    .iter()
                    .map(|(a, b)| format!("[{}, {}]", fmt_num(*a), fmt_num(*b)))
                    .collect();
                format!("have {} in {}", meta.name, parts.join(" or "))
            }
            TypicalValues::Categories(cs) => {
                let parts: Vec<&str> = cs.iter().map(|&c| meta.category_name(c)).collect();
                format!("have {} = {}", meta.name, parts.join(" or "))
            }
        }
    }
}

/// Bisection on `kappa - tau` between an inside point and an outside point.
fn refine<T: Scalar>(model: &LikelihoodModel<T>, mut inside: T, mut outside: T, tol: T) -> T {
    let tau = model.tau();
    for _ in 0..200 {
        if (inside - outside).abs() <= tol {
            break;
        }
        let mid = (inside + outside) / T::of(2.0);
        if model.kappa(&Value::Num(mid)) >= tau {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Typical target values of a fitted model.
///
/// Numeric targets are scanned on a [`TYPICAL_GRID`]-point grid over the sample
/// range widened by three bandwidths, merged with the samples themselves, and run
/// endpoints are refined by bisection to `1e-6` of the scanned span.
pub fn typical_values<T: Scalar>(model: &LikelihoodModel<T>) -> TypicalValues<T> {
    match &model.density {
        Density::Hist(h) => TypicalValues::Categories(
            (0..h.counts.len() as u32)
                .filter(|&c| model.omega(&Value::Cat(Some(c))) >= T::one())
                .collect(),
        ),
        Density::Kde(k) => {
            let lo = k.samples[0] - T::of(3.0) * k.bandwidth;
            let hi = k.samples[k.samples.len() - 1] + T::of(3.0) * k.bandwidth;
            let span = hi - lo;
            let step = span / T::of_usize(TYPICAL_GRID - 1);
            let mut xs: Vec<T> = (0..TYPICAL_GRID).map(|i| lo + step * T::of_usize(i)).collect();
            xs.extend_from_slice(&k.samples);
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            xs.dedup();
            let ok: Vec<bool> = xs.iter().map(|&x| model.omega(&Value::Num(x)) >= T::one()).collect();
            let tol = span * T::of(1e-6);
            let mut intervals = Vec::new();
            let mut i = 0;
            while i < xs.len() {
                if !ok[i] {
                    i += 1;
                    continue;
                }
                let start = i;
                while i + 1 < xs.len() && ok[i + 1] {
                    i += 1;
                }
                let a = if start == 0 { xs[0] } else { refine(model, xs[start], xs[start - 1], tol) };
                let b = if i + 1 == xs.len() { xs[i] } else { refine(model, xs[i], xs[i + 1], tol) };
                intervals.push((a, b));
                i += 1;
            }
            TypicalValues::Intervals(intervals)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplanationKind<T> {
    /// The target value is atypical in the scoring node.
    Deviation {
        observed: ConditionValue<T>,
        typical: TypicalValues<T>,
        omega: T,
    },
    /// The instance belongs to an anomalous context.
    AnomalousContext { lambda: T },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Explanation<T> {
    pub tree: usize,
    pub target: String,
    /// Global context id of the instance's leaf in this tree.
    pub context: usize,
    /// Node the conditions describe: the scoring node for deviations, the leaf for
    /// anomalous contexts.
    pub node: usize,
    pub conditions: Vec<Condition<T>>,
    #[serde(flatten)]
    pub kind: ExplanationKind<T>,
    /// The evidence `v` this tree contributes to the instance's score.
    pub strength: T,
}

impl<T: Scalar> Explanation<T> {
    /// Sentence in the "instances that ... typically ... but this instance ..." form.
    pub fn render(&self, attributes: &[AttributeMeta], tree: &Tree<T>) -> String {
        let meta = &attributes[tree.target];
        let who = render_conditions(&self.conditions);
        match &self.kind {
            ExplanationKind::Deviation { observed, typical, omega } => {
                let obs = match observed {
                    ConditionValue::Number(x) => fmt_num(*x),
                    ConditionValue::Category(c) => c.clone(),
                };
                format!(
                    "instances that satisfy {who} typically {} but this instance has {} = {obs} (likelihood {}, strength {})",
                    typical.render(meta),
                    meta.name,
                    fmt_num(*omega),
                    fmt_num(self.strength)
                )
            }
            ExplanationKind::AnomalousContext { lambda } => format!(
                "instances that satisfy {who} form an anomalous context (context score {}, strength {})",
                fmt_num(*lambda),
                fmt_num(self.strength)
            ),
        }
    }
}

fn observed_value<T: Scalar>(meta: &AttributeMeta, v: &Value<T>) -> ConditionValue<T> {
    match v {
        Value::Num(x) => ConditionValue::Number(*x),
        Value::Cat(Some(c)) => ConditionValue::Category(meta.category_name(*c).to_string()),
        Value::Cat(None) => ConditionValue::Category("<unseen>".into()),
    }
}

/// Per-tree explanations of `x`, strongest first, at most `top_k`.
///
/// A tree contributes an anomalous-context explanation when the instance's leaf has
/// context score at least `lambda_threshold`, otherwise a deviation explanation when
/// the instance's likelihood there is below one.
pub fn explain_instance<T: Scalar>(
    model: &AdMercs<T>,
    x: &[Value<T>],
    top_k: usize,
    lambda_threshold: T,
) -> Result<Vec<Explanation<T>>> {
    model.check_instance(x)?;
    let attrs = model.attributes();
    let mut out = Vec::new();
    for (t, tree) in model.trees().iter().enumerate() {
        let (leaf, omega) = model.locate(t, x);
        let context = model.context_id(t, leaf);
        let lambda = model.lambda()[context];
        let strength = crate::scoring::context_evidence(lambda, omega);
        if lambda >= lambda_threshold {
            let node = tree.leaves[leaf];
            out.push(Explanation {
                tree: t,
                target: attrs[tree.target].name.clone(),
                context,
                node,
                conditions: simplify(&describe_node(tree, node, attrs)),
                kind: ExplanationKind::AnomalousContext { lambda },
                strength,
            });
        } else if omega < T::one() {
            let node = tree.scoring_node[leaf];
            let lm = model.leaf_model(t, leaf);
            out.push(Explanation {
                tree: t,
                target: attrs[tree.target].name.clone(),
                context,
                node,
                conditions: simplify(&describe_node(tree, node, attrs)),
                kind: ExplanationKind::Deviation {
                    observed: observed_value(&attrs[tree.target], &x[tree.target]),
                    typical: typical_values(lm),
                    omega,
                },
                strength,
            });
        }
    }
    // stable: equal strengths keep tree order
    out.sort_by(|a, b| b.strength.partial_cmp(&a.strength).unwrap());
    out.truncate(top_k);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContextReport<T> {
    pub context: usize,
    pub tree: usize,
    pub target: String,
    pub leaf: usize,
    pub conditions: Vec<Condition<T>>,
    /// Training members of the context.
    pub members: Vec<u32>,
    pub lambda: T,
}

impl<T: Scalar> ContextReport<T> {
    pub fn render(&self) -> String {
        format!(
            "context {} (tree for {}): instances that satisfy {} -- score {}, {} members",
            self.context,
            self.target,
            render_conditions(&self.conditions),
            fmt_num(self.lambda),
            self.members.len()
        )
    }
}

/// Contexts with score at least `lambda_threshold`, highest first.
pub fn list_anomalous_contexts<T: Scalar>(model: &AdMercs<T>, lambda_threshold: T) -> Vec<ContextReport<T>> {
    let attrs = model.attributes();
    let mut out: Vec<ContextReport<T>> = (0..model.n_contexts())
        .filter(|&c| model.lambda()[c] >= lambda_threshold)
        .map(|c| {
            let (t, leaf) = model.context(c);
            let tree = &model.trees()[t];
            let node = tree.leaves[leaf];
            ContextReport {
                context: c,
                tree: t,
                target: attrs[tree.target].name.clone(),
                leaf,
                conditions: simplify(&describe_node(tree, node, attrs)),
                members: tree.nodes[node].members.clone(),
                lambda: model.lambda()[c],
            }
        })
        .collect();
    out.sort_by(|a, b| b.lambda.partial_cmp(&a.lambda).unwrap().then(a.context.cmp(&b.context)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{fit_hist, fit_kde};
    use crate::tree::TreeNode;

    fn node(parent: Option<usize>, split: Option<Split<f64>>, children: Option<(usize, usize)>, leaf: Option<usize>) -> TreeNode<f64> {
        TreeNode {
            split,
            children,
            parent,
            impurity: 0.0,
            members: vec![],
            depth: 0,
            leaf_id: leaf,
        }
    }

    fn attrs() -> Vec<AttributeMeta> {
        vec![
            AttributeMeta::numeric("x", 0),
            AttributeMeta::nominal("c", 1, vec!["a".into(), "b".into()]),
            AttributeMeta::nominal("eggs", 2, vec!["true".into(), "false".into()]),
            AttributeMeta::numeric("y", 3),
        ]
    }

    // root: x <= 0.5 ? (c = a ? leaf0 : leaf1) : (eggs = true ? leaf2 : leaf3)
    fn tree() -> Tree<f64> {
        let nodes = vec![
            node(None, Some(Split::Numeric { attribute: 0, threshold: 0.5 }), Some((1, 4)), None),
            node(Some(0), Some(Split::Nominal { attribute: 1, category: 0 }), Some((2, 3)), None),
            node(Some(1), None, None, Some(0)),
            node(Some(1), None, None, Some(1)),
            node(Some(0), Some(Split::Nominal { attribute: 2, category: 0 }), Some((5, 6)), None),
            node(Some(4), None, None, Some(2)),
            node(Some(4), None, None, Some(3)),
        ];
        Tree {
            target: 3,
            nodes,
            leaves: vec![2, 3, 5, 6],
            scoring_node: vec![2, 3, 5, 6],
        }
    }

    #[test]
    fn describe_node_edges() {
        let t = tree();
        let a = attrs();
        assert!(describe_node(&t, 0, &a).is_empty());
        let c = describe_node(&t, 2, &a);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].to_string(), "x <= 0.5");
        assert_eq!(c[1].to_string(), "c = a");
        let c = describe_node(&t, 6, &a);
        assert_eq!(c[1].to_string(), "eggs != true");
        assert_eq!(c[0].relation, Relation::Gt);
    }

    #[test]
    fn simplify_merges_bounds() {
        let mk = |rel, v: f64| Condition {
            attribute: "x".into(),
            attribute_index: 0,
            relation: rel,
            value: ConditionValue::Number(v),
            category: None,
        };
        let merged = simplify(&[mk(Relation::Le, 0.8), mk(Relation::Gt, 0.1), mk(Relation::Le, 0.5), mk(Relation::Gt, 0.3)]);
        assert_eq!(merged, vec![mk(Relation::Le, 0.5), mk(Relation::Gt, 0.3)]);
        assert_eq!(render_conditions(&merged), "0.3 < x <= 0.5");
    }

    #[test]
    fn typical_categories() {
        let mut v = vec![0u32; 9];
        v.push(1);
        let m = fit_hist::<f64>(&v, 2, 0.7).unwrap();
        assert_eq!(typical_values(&m), TypicalValues::Categories(vec![0]));
    }

    #[test]
    fn typical_interval_of_spike() {
        let m = fit_kde(&[1.5f64], 0.7, 1.0).unwrap();
        match typical_values(&m) {
            TypicalValues::Intervals(iv) => {
                assert_eq!(iv.len(), 1);
                let (a, b) = iv[0];
                assert!(a <= 1.5 && 1.5 <= b && b - a < 1e-6, "{a} {b}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn typical_intervals_are_bimodal() {
        let mut v = Vec::new();
        for k in 0..20 {
            // spread wide enough that the three values of each group form one mode
            let j = (k as f64 - 10.0) * 5e-3;
            v.extend([1.4 + j, 1.5 + j, 1.6 + j, 3.4 + j, 3.5 + j, 3.6 + j]);
        }
        let m = fit_kde(&v, 0.9, 2.2).unwrap();
        let TypicalValues::Intervals(iv) = typical_values(&m) else { unreachable!() };
        assert_eq!(iv.len(), 2, "{iv:?}");
        assert!(iv.iter().all(|(a, b)| !(*a <= 2.5 && 2.5 <= *b)));
        // grid-scan oracle: every interval point is typical, gaps between intervals are not
        for &(a, b) in &iv {
            for s in 0..=100 {
                let x = a + (b - a) * s as f64 / 100.0;
                assert_eq!(m.omega(&Value::Num(x)), 1.0);
            }
        }
        let gap = (iv[0].1 + iv[1].0) / 2.0;
        assert!(m.omega(&Value::Num(gap)) < 1.0);
    }
}
