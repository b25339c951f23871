//! Axis-aligned regression/classification trees, one per target attribute.
//!
//! Each tree predicts its target from all other attributes. Leaves act as
//! contexts; every leaf is scored through the node of lowest impurity on its
//! root path (the leaf itself included).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset, Value};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Minimum leaf size as a fraction of the training set.
    pub min_samples_leaf_frac: f64,
    /// Node-level impurity decrease a split must reach.
    pub min_impurity_decrease: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 10,
            min_samples_leaf_frac: 0.02,
            min_impurity_decrease: 0.001,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::InvalidParam("max_depth must be positive".into()));
        }
        if !(self.min_samples_leaf_frac > 0.0 && self.min_samples_leaf_frac <= 0.5) {
            return Err(Error::InvalidParam(format!(
                "min_samples_leaf must lie in (0, 0.5], got {}",
                self.min_samples_leaf_frac
            )));
        }
        if !(self.min_impurity_decrease >= 0.0 && self.min_impurity_decrease.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "min_impurity_decrease must be nonnegative, got {}",
                self.min_impurity_decrease
            )));
        }
        Ok(())
    }

    pub fn min_leaf_size(&self, n: usize) -> usize {
        ((self.min_samples_leaf_frac * n as f64).ceil() as usize).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Split<T> {
    /// Left iff `value <= threshold`.
    Numeric { attribute: usize, threshold: T },
    /// Left iff `value == category`; everything else, unseen categories included, goes right.
    Nominal { attribute: usize, category: u32 },
}

impl<T: Scalar> Split<T> {
    pub fn attribute(&self) -> usize {
        match *self {
            Split::Numeric { attribute, .. } | Split::Nominal { attribute, .. } => attribute,
        }
    }

    pub fn goes_left(&self, v: &Value<T>) -> bool {
        match (self, v) {
            (Split::Numeric { threshold, .. }, Value::Num(x)) => *x <= *threshold,
            (Split::Nominal { category, .. }, Value::Cat(c)) => *c == Some(*category),
            _ => false,
        }
    }

    fn goes_left_row(&self, d: &Dataset<T>, i: usize) -> bool {
        match (self, d.column(self.attribute())) {
            (Split::Numeric { threshold, .. }, Column::Numeric(v)) => v[i] <= *threshold,
            (Split::Nominal { category, .. }, Column::Nominal(v)) => v[i] == *category,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode<T> {
    pub split: Option<Split<T>>,
    /// (left, right) node ids.
    pub children: Option<(usize, usize)>,
    pub parent: Option<usize>,
    /// Gini (nominal target) or variance (numeric target) of the node's members.
    pub impurity: T,
    /// Training instances reaching this node, ascending.
    pub members: Vec<u32>,
    pub depth: usize,
    pub leaf_id: Option<usize>,
}

impl<T> TreeNode<T> {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub target: usize,
    /// Arena of nodes; node 0 is the root.
    pub nodes: Vec<TreeNode<T>>,
    /// Node id of every leaf, indexed by dense leaf id.
    pub leaves: Vec<usize>,
    /// Node whose likelihood model scores each leaf, indexed by leaf id.
    pub scoring_node: Vec<usize>,
}

impl<T: Scalar> Tree<T> {
    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn root(&self) -> &TreeNode<T> {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &TreeNode<T> {
        &self.nodes[id]
    }

    pub fn leaf_node(&self, leaf: usize) -> &TreeNode<T> {
        &self.nodes[self.leaves[leaf]]
    }

    /// Leaf id reached by `x`.
    pub fn route(&self, x: &[Value<T>]) -> usize {
        self.nodes[self.route_node(x)]
            .leaf_id
            .expect("descent ends in a leaf")
    }

    pub fn route_node(&self, x: &[Value<T>]) -> usize {
        let mut id = 0;
        while let (Some(split), Some((l, r))) = (&self.nodes[id].split, self.nodes[id].children) {
            id = if split.goes_left(&x[split.attribute()]) {
                l
            } else {
                r
            };
        }
        id
    }

    pub(crate) fn route_row(&self, d: &Dataset<T>, i: usize) -> usize {
        let mut id = 0;
        while let (Some(split), Some((l, r))) = (&self.nodes[id].split, self.nodes[id].children) {
            id = if split.goes_left_row(d, i) { l } else { r };
        }
        self.nodes[id].leaf_id.expect("descent ends in a leaf")
    }

    /// Node ids from the root down to `node`, both included.
    pub fn path_to(&self, node: usize) -> Vec<usize> {
        let mut path = vec![node];
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Every attribute used in a split.
    pub fn split_attributes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .filter_map(|n| n.split.as_ref().map(|s| s.attribute()))
    }

    /// Recomputes `scoring_node`: the minimum-impurity node among each leaf and
    /// its ancestors, ties resolved toward the deepest node.
    pub fn assign_scoring_nodes(&mut self) {
        self.scoring_node = self
            .leaves
            .iter()
            .map(|&leaf| {
                let mut best = leaf;
                let mut cur = leaf;
                while let Some(p) = self.nodes[cur].parent {
                    if self.nodes[p].impurity < self.nodes[best].impurity {
                        best = p;
                    }
                    cur = p;
                }
                best
            })
            .collect();
    }

    /// Rebuilds internal-node memberships from leaf memberships.
    pub(crate) fn fill_internal_members(&mut self) {
        for id in (0..self.nodes.len()).rev() {
            if let Some((l, r)) = self.nodes[id].children {
                let mut m: Vec<u32> = self.nodes[l]
                    .members
                    .iter()
                    .chain(&self.nodes[r].members)
                    .copied()
                    .collect();
                m.sort_unstable();
                self.nodes[id].members = m;
            }
        }
    }
}

/// Target column seen by the split search.
enum Target<'a, T> {
    Numeric(&'a [T]),
    Nominal(&'a [u32], usize),
}

pub fn variance<T: Scalar>(y: &[T], members: &[u32]) -> T {
    if members.is_empty() {
        return T::zero();
    }
    let n = T::of_usize(members.len());
    let mean = members.iter().map(|&i| y[i as usize]).sum::<T>() / n;
    members
        .iter()
        .map(|&i| {
            let d = y[i as usize] - mean;
            d * d
        })
        .sum::<T>()
        / n
}

pub fn gini<T: Scalar>(y: &[u32], k: usize, members: &[u32]) -> T {
    if members.is_empty() {
        return T::zero();
    }
    let mut counts = vec![0usize; k];
    for &i in members {
        counts[y[i as usize] as usize] += 1;
    }
    let n = members.len() as f64;
    let s: f64 = counts.iter().map(|&c| (c as f64 / n).powi(2)).sum();
    T::of(1.0 - s)
}

impl<'a, T: Scalar> Target<'a, T> {
    fn of(d: &'a Dataset<T>, target: usize) -> Self {
        match d.column(target) {
            Column::Numeric(v) => Target::Numeric(v),
            Column::Nominal(v) => Target::Nominal(v, d.attribute(target).categories.len()),
        }
    }

    fn impurity(&self, members: &[u32]) -> T {
        match self {
            Target::Numeric(y) => variance(y, members),
            Target::Nominal(y, k) => gini(y, *k, members),
        }
    }

    fn is_pure(&self, members: &[u32]) -> bool {
        match self {
            Target::Numeric(y) => {
                let first = y[members[0] as usize];
                members.iter().all(|&i| y[i as usize] == first)
            }
            Target::Nominal(y, _) => {
                let first = y[members[0] as usize];
                members.iter().all(|&i| y[i as usize] == first)
            }
        }
    }
}

/// Running sufficient statistics for one side of a candidate split.
#[derive(Clone)]
enum SideStats<T> {
    /// (count, sum, sum of squares) of centred targets.
    Moments(usize, T, T),
    /// (count, class counts, sum of squared class counts).
    Counts(usize, Vec<usize>, usize),
}

impl<T: Scalar> SideStats<T> {
    fn empty(target: &Target<'_, T>) -> Self {
        match target {
            Target::Numeric(_) => SideStats::Moments(0, T::zero(), T::zero()),
            Target::Nominal(_, k) => SideStats::Counts(0, vec![0; *k], 0),
        }
    }

    fn count(&self) -> usize {
        match self {
            SideStats::Moments(n, ..) | SideStats::Counts(n, ..) => *n,
        }
    }

    fn add(&mut self, target: &Target<'_, T>, centre: T, i: usize) {
        match (self, target) {
            (SideStats::Moments(n, s, q), Target::Numeric(y)) => {
                let d = y[i] - centre;
                *n += 1;
                *s = *s + d;
                *q = *q + d * d;
            }
            (SideStats::Counts(n, c, sq), Target::Nominal(y, _)) => {
                let k = y[i] as usize;
                *sq += 2 * c[k] + 1;
                c[k] += 1;
                *n += 1;
            }
            _ => unreachable!("statistics match the target kind"),
        }
    }

    fn remove(&mut self, target: &Target<'_, T>, centre: T, i: usize) {
        match (self, target) {
            (SideStats::Moments(n, s, q), Target::Numeric(y)) => {
                let d = y[i] - centre;
                *n -= 1;
                *s = *s - d;
                *q = *q - d * d;
            }
            (SideStats::Counts(n, c, sq), Target::Nominal(y, _)) => {
                let k = y[i] as usize;
                *sq -= 2 * c[k] - 1;
                c[k] -= 1;
                *n -= 1;
            }
            _ => unreachable!("statistics match the target kind"),
        }
    }

    fn impurity(&self) -> T {
        match self {
            SideStats::Moments(n, s, q) => {
                if *n == 0 {
                    return T::zero();
                }
                let nf = T::of_usize(*n);
                let m = *s / nf;
                (*q / nf - m * m).max(T::zero())
            }
            SideStats::Counts(n, _, sq) => {
                if *n == 0 {
                    return T::zero();
                }
                let nf = *n as f64;
                T::of(1.0 - *sq as f64 / (nf * nf))
            }
        }
    }
}

#[derive(Clone, Debug)]
struct Candidate<T> {
    split: Split<T>,
    decrease: T,
}

/// Keeps `a` unless `b` is strictly better; candidates are offered in
/// (attribute, threshold) order so ties keep the earliest.
fn better<T: Scalar>(best: &mut Option<Candidate<T>>, cand: Candidate<T>) {
    match best {
        Some(b) if cand.decrease <= b.decrease => {}
        _ => *best = Some(cand),
    }
}

struct Builder<'a, T> {
    data: &'a Dataset<T>,
    target_idx: usize,
    target: Target<'a, T>,
    params: TreeParams,
    min_leaf: usize,
    nodes: Vec<TreeNode<T>>,
    leaves: Vec<usize>,
    mask: Vec<bool>,
}

impl<'a, T: Scalar> Builder<'a, T> {
    fn centre(&self, members: &[u32]) -> T {
        match &self.target {
            Target::Numeric(y) => {
                members.iter().map(|&i| y[i as usize]).sum::<T>() / T::of_usize(members.len())
            }
            Target::Nominal(..) => T::zero(),
        }
    }

    fn totals(&self, members: &[u32], centre: T) -> SideStats<T> {
        let mut s = SideStats::empty(&self.target);
        for &i in members {
            s.add(&self.target, centre, i as usize);
        }
        s
    }

    fn weighted(&self, left: &SideStats<T>, right: &SideStats<T>, n: usize) -> T {
        let nf = T::of_usize(n);
        T::of_usize(left.count()) / nf * left.impurity()
            + T::of_usize(right.count()) / nf * right.impurity()
    }

    /// Best split over all non-target attributes; `sorted[a]` lists the node's
    /// members ordered by attribute `a` (numeric attributes only).
    fn best_split(
        &self,
        members: &[u32],
        sorted: &[Option<Vec<u32>>],
        impurity: T,
    ) -> Option<Candidate<T>> {
        let n = members.len();
        let centre = self.centre(members);
        let totals = self.totals(members, centre);
        let mut best = None;
        for a in 0..self.data.n_attributes() {
            if a == self.target_idx {
                continue;
            }
            match self.data.column(a) {
                Column::Numeric(x) => {
                    let order = sorted[a].as_ref().expect("numeric attributes are presorted");
                    let mut left = SideStats::empty(&self.target);
                    let mut right = totals.clone();
                    for k in 1..n {
                        let i = order[k - 1] as usize;
                        left.add(&self.target, centre, i);
                        right.remove(&self.target, centre, i);
                        if k < self.min_leaf || n - k < self.min_leaf {
                            continue;
                        }
                        let lo = x[i];
                        let hi = x[order[k] as usize];
                        if lo >= hi {
                            continue;
                        }
                        let mut threshold = (lo + hi) / T::of(2.0);
                        if threshold >= hi {
                            threshold = lo;
                        }
                        let decrease = impurity - self.weighted(&left, &right, n);
                        better(
                            &mut best,
                            Candidate {
                                split: Split::Numeric {
                                    attribute: a,
                                    threshold,
                                },
                                decrease,
                            },
                        );
                    }
                }
                Column::Nominal(x) => {
                    let k = self.data.attribute(a).categories.len();
                    let mut per_cat: Vec<Option<SideStats<T>>> = vec![None; k];
                    for &i in members {
                        per_cat[x[i as usize] as usize]
                            .get_or_insert_with(|| SideStats::empty(&self.target))
                            .add(&self.target, centre, i as usize);
                    }
                    let present = per_cat.iter().filter(|s| s.is_some()).count();
                    if present < 2 {
                        continue;
                    }
                    for (c, left) in per_cat.iter().enumerate() {
                        let Some(left) = left else { continue };
                        let nl = left.count();
                        if nl < self.min_leaf || n - nl < self.min_leaf {
                            continue;
                        }
                        let mut right = totals.clone();
                        for &i in members {
                            if x[i as usize] as usize == c {
                                right.remove(&self.target, centre, i as usize);
                            }
                        }
                        let decrease = impurity - self.weighted(left, &right, n);
                        better(
                            &mut best,
                            Candidate {
                                split: Split::Nominal {
                                    attribute: a,
                                    category: c as u32,
                                },
                                decrease,
                            },
                        );
                    }
                }
            }
        }
        best
    }

    fn grow(
        &mut self,
        members: Vec<u32>,
        sorted: Vec<Option<Vec<u32>>>,
        depth: usize,
        parent: Option<usize>,
    ) -> usize {
        let impurity = self.target.impurity(&members);
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            split: None,
            children: None,
            parent,
            impurity,
            members: Vec::new(),
            depth,
            leaf_id: None,
        });

        let candidate = if depth >= self.params.max_depth
            || members.len() < 2 * self.min_leaf
            || self.target.is_pure(&members)
        {
            None
        } else {
            self.best_split(&members, &sorted, impurity).filter(|c| {
                c.decrease > T::zero() && c.decrease >= T::of(self.params.min_impurity_decrease)
            })
        };

        let Some(cand) = candidate else {
            self.nodes[id].leaf_id = Some(self.leaves.len());
            self.leaves.push(id);
            self.nodes[id].members = members;
            return id;
        };

        for &i in &members {
            self.mask[i as usize] = cand.split.goes_left_row(self.data, i as usize);
        }
        let (left, right): (Vec<u32>, Vec<u32>) =
            members.iter().partition(|&&i| self.mask[i as usize]);
        let mut sorted_left = Vec::with_capacity(sorted.len());
        let mut sorted_right = Vec::with_capacity(sorted.len());
        for s in sorted {
            match s {
                Some(order) => {
                    let (l, r): (Vec<u32>, Vec<u32>) =
                        order.into_iter().partition(|&i| self.mask[i as usize]);
                    sorted_left.push(Some(l));
                    sorted_right.push(Some(r));
                }
                None => {
                    sorted_left.push(None);
                    sorted_right.push(None);
                }
            }
        }
        self.nodes[id].members = members;
        self.nodes[id].split = Some(cand.split);
        let l = self.grow(left, sorted_left, depth + 1, Some(id));
        let r = self.grow(right, sorted_right, depth + 1, Some(id));
        self.nodes[id].children = Some((l, r));
        id
    }
}

/// Greedy top-down induction of one tree predicting `target` from the other attributes.
///
/// Numeric candidates are midpoints between consecutive distinct values, nominal
/// candidates are one-category-versus-rest. Ties prefer the lowest attribute index,
/// then the lowest threshold (or category index).
pub fn learn_tree<T: Scalar>(d: &Dataset<T>, target: usize, params: &TreeParams) -> Result<Tree<T>> {
    params.validate()?;
    if target >= d.n_attributes() {
        return Err(Error::InvalidParam(format!("target {target} out of range")));
    }
    let n = d.n_rows();
    let members: Vec<u32> = (0..n as u32).collect();
    let sorted = (0..d.n_attributes())
        .map(|a| match d.column(a) {
            Column::Numeric(x) if a != target => {
                let mut o = members.clone();
                o.sort_by(|&i, &j| x[i as usize].partial_cmp(&x[j as usize]).unwrap().then(i.cmp(&j)));
                Some(o)
            }
            _ => None,
        })
        .collect();
    let mut b = Builder {
        data: d,
        target_idx: target,
        target: Target::of(d, target),
        params: *params,
        min_leaf: params.min_leaf_size(n),
        nodes: Vec::new(),
        leaves: Vec::new(),
        mask: vec![false; n],
    };
    b.grow(members, sorted, 0, None);
    let mut tree = Tree {
        target,
        nodes: b.nodes,
        leaves: b.leaves,
        scoring_node: Vec::new(),
    };
    tree.assign_scoring_nodes();
    Ok(tree)
}

/// One tree per attribute, fitted in parallel; `trees[j].target == j`.
pub fn learn_ensemble<T: Scalar>(d: &Dataset<T>, params: &TreeParams) -> Result<Vec<Tree<T>>> {
    params.validate()?;
    (0..d.n_attributes())
        .into_par_iter()
        .map(|t| learn_tree(d, t, params))
        .collect()
}
