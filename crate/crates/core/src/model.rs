//! The fitted detector: tree ensemble, per-context likelihood models and frozen
//! context scores, plus its on-disk format.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AttributeKind, AttributeMeta, Column, Dataset, Value};
use crate::density::{fit_model, LikelihoodModel, TargetValues};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scoring::{context_evidence, noisy_or, run_iterations, ContextIndex, ScoreState, ScoringParams};
use crate::tree::{learn_ensemble, Tree, TreeParams};

pub const MODEL_FORMAT: &str = "admercs-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Params {
    pub tree: TreeParams,
    pub scoring: ScoringParams,
}

/// Named hyperparameter sets from the benchmark grid search.
pub const PRESETS: &[&str] = &["default", "campos", "campos-hd", "hics", "synth-c", "synth-cs", "synth-i"];

impl Params {
    pub fn new(
        min_samples_leaf: f64,
        min_impurity_decrease: f64,
        rho: f64,
        gamma_lambda: f64,
        gamma_delta: f64,
    ) -> Self {
        Params {
            tree: TreeParams {
                max_depth: 10,
                min_samples_leaf_frac: min_samples_leaf,
                min_impurity_decrease,
            },
            scoring: ScoringParams {
                gamma_delta,
                gamma_lambda,
                iterations: 10,
                rho,
            },
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "default" => Params::default(),
            "campos" => Params::new(0.05, 0.05, 0.9, 0.5, 0.7),
            "campos-hd" => Params::new(0.1, 0.2, 0.7, 1.0, 0.7),
            "hics" => Params::new(0.02, 0.5, 0.9, 1.0, 1.0),
            "synth-c" => Params::new(0.02, 0.001, 0.7, 0.5, 0.2),
            "synth-cs" => Params::new(0.05, 0.001, 0.9, 1.0, 1.0),
            "synth-i" => Params::new(0.005, 0.001, 0.9, 0.5, 0.9),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        self.scoring.validate()
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidParam(format!("{key}: cannot parse '{value}' as {what}"));
        let real = || value.trim().parse::<f64>().map_err(|_| bad("a number"));
        let int = || value.trim().parse::<usize>().map_err(|_| bad("an integer"));
        match key.trim().replace('-', "_").as_str() {
            "max_depth" => self.tree.max_depth = int()?,
            "min_samples_leaf" | "min_samples_leaf_frac" => self.tree.min_samples_leaf_frac = real()?,
            "min_impurity_decrease" => self.tree.min_impurity_decrease = real()?,
            "rho" => self.scoring.rho = real()?,
            "gamma_delta" => self.scoring.gamma_delta = real()?,
            "gamma_lambda" => self.scoring.gamma_lambda = real()?,
            "iterations" => self.scoring.iterations = int()?,
            other => return Err(Error::InvalidParam(format!("unknown parameter '{other}'"))),
        }
        Ok(())
    }

    /// Canonical one-line rendering, stable across runs.
    pub fn canonical(&self) -> String {
        format!(
            "max_depth={};min_samples_leaf={};min_impurity_decrease={};rho={};gamma_lambda={};gamma_delta={};iterations={}",
            self.tree.max_depth,
            self.tree.min_samples_leaf_frac,
            self.tree.min_impurity_decrease,
            self.scoring.rho,
            self.scoring.gamma_lambda,
            self.scoring.gamma_delta,
            self.scoring.iterations
        )
    }

    /// Short hex digest of [`Params::canonical`].
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

/// Likelihood models of one tree, keyed by scoring node id.
pub type NodeModels<T> = BTreeMap<usize, LikelihoodModel<T>>;

#[derive(Clone, Debug, PartialEq)]
pub struct AdMercs<T> {
    attributes: Vec<AttributeMeta>,
    trees: Vec<Tree<T>>,
    models: Vec<NodeModels<T>>,
    /// Frozen context scores by global context id.
    lambda: Vec<T>,
    offsets: Vec<usize>,
    params: Params,
    n_train: usize,
}

/// Training outcome: the model plus the training-set scores.
#[derive(Clone, Debug)]
pub struct Fitted<T> {
    pub model: AdMercs<T>,
    pub state: ScoreState<T>,
    pub index: ContextIndex<T>,
}

fn target_values<'a, T: Scalar>(
    d: &'a Dataset<T>,
    target: usize,
    members: &[u32],
    buf_num: &'a mut Vec<T>,
    buf_cat: &'a mut Vec<u32>,
) -> TargetValues<'a, T> {
    match d.column(target) {
        Column::Numeric(v) => {
            buf_num.clear();
            buf_num.extend(members.iter().map(|&i| v[i as usize]));
            TargetValues::Numeric {
                values: buf_num,
                attribute_range: d.range(target),
            }
        }
        Column::Nominal(v) => {
            buf_cat.clear();
            buf_cat.extend(members.iter().map(|&i| v[i as usize]));
            TargetValues::Nominal {
                values: buf_cat,
                n_categories: d.attribute(target).categories.len(),
            }
        }
    }
}

fn fit_node_models<T: Scalar>(d: &Dataset<T>, tree: &Tree<T>, rho: T) -> Result<NodeModels<T>> {
    let mut models = BTreeMap::new();
    let (mut nb, mut cb) = (Vec::new(), Vec::new());
    for &node in &tree.scoring_node {
        if models.contains_key(&node) {
            continue;
        }
        let tv = target_values(d, tree.target, &tree.nodes[node].members, &mut nb, &mut cb);
        models.insert(node, fit_model(tv, rho)?);
    }
    Ok(models)
}

impl<T: Scalar> AdMercs<T> {
    /// Learns the ensemble, fits the likelihood models, and runs the score iteration.
    pub fn fit(d: &Dataset<T>, params: &Params) -> Result<Fitted<T>> {
        params.validate()?;
        let trees = learn_ensemble(d, &params.tree)?;
        let rho = T::of(params.scoring.rho);
        let models = trees
            .par_iter()
            .map(|t| fit_node_models(d, t, rho))
            .collect::<Result<Vec<_>>>()?;
        let mut offsets = Vec::with_capacity(trees.len());
        let mut total = 0;
        for t in &trees {
            offsets.push(total);
            total += t.n_leaves();
        }
        let mut model = AdMercs {
            attributes: d.attributes().to_vec(),
            trees,
            models,
            lambda: vec![T::zero(); total],
            offsets,
            params: *params,
            n_train: d.n_rows(),
        };
        let index = model.training_index(d)?;
        let state = run_iterations(&index, &params.scoring)?;
        model.lambda = state.lambda.clone();
        Ok(Fitted { model, state, index })
    }

    pub fn attributes(&self) -> &[AttributeMeta] {
        &self.attributes
    }

    pub fn trees(&self) -> &[Tree<T>] {
        &self.trees
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    /// Frozen context scores by global context id.
    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn context_id(&self, tree: usize, leaf: usize) -> usize {
        self.offsets[tree] + leaf
    }

    /// `(tree, leaf)` of a global context id.
    pub fn context(&self, id: usize) -> (usize, usize) {
        let tree = self.offsets.partition_point(|&o| o <= id) - 1;
        (tree, id - self.offsets[tree])
    }

    pub fn n_contexts(&self) -> usize {
        self.lambda.len()
    }

    /// Likelihood model scoring `leaf` of `tree`.
    pub fn leaf_model(&self, tree: usize, leaf: usize) -> &LikelihoodModel<T> {
        let node = self.trees[tree].scoring_node[leaf];
        &self.models[tree][&node]
    }

    pub fn node_model(&self, tree: usize, node: usize) -> Option<&LikelihoodModel<T>> {
        self.models[tree].get(&node)
    }

    /// Checks that `x` matches the model's attribute kinds.
    pub fn check_instance(&self, x: &[Value<T>]) -> Result<()> {
        if x.len() != self.attributes.len() {
            return Err(Error::InvalidParam(format!(
                "instance has {} cells, model expects {}",
                x.len(),
                self.attributes.len()
            )));
        }
        for (meta, v) in self.attributes.iter().zip(x) {
            let ok = match (meta.kind, v) {
                (AttributeKind::Numeric, Value::Num(x)) => x.is_finite(),
                (AttributeKind::Nominal, Value::Cat(_)) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::KindMismatch {
                    attribute: meta.name.clone(),
                    expected: meta.kind.as_str(),
                });
            }
        }
        Ok(())
    }

    /// Leaf and likelihood of `x` in tree `t`.
    pub fn locate(&self, t: usize, x: &[Value<T>]) -> (usize, T) {
        let tree = &self.trees[t];
        let leaf = tree.route(x);
        let w = self.leaf_model(t, leaf).omega(&x[tree.target]);
        (leaf, w)
    }

    /// Per-tree evidence `v` of a (possibly unseen) instance under the frozen context scores.
    pub fn evidence(&self, x: &[Value<T>]) -> Result<Vec<T>> {
        self.check_instance(x)?;
        Ok((0..self.trees.len())
            .map(|t| {
                let (leaf, w) = self.locate(t, x);
                context_evidence(self.lambda[self.context_id(t, leaf)], w)
            })
            .collect())
    }

    /// Anomaly score of an instance using the frozen context scores.
    pub fn score_new_instance(&self, x: &[Value<T>]) -> Result<T> {
        let v = self.evidence(x)?;
        Ok(noisy_or(v, T::of(self.params.scoring.gamma_delta)))
    }

    pub fn score_instances(&self, xs: &[Vec<Value<T>>]) -> Result<Vec<T>> {
        xs.par_iter().map(|x| self.score_new_instance(x)).collect()
    }

    /// Context index of a dataset routed through the fitted trees.
    pub fn context_index(&self, d: &Dataset<T>) -> Result<ContextIndex<T>> {
        self.check_schema(d)?;
        let (leaf_of, omega): (Vec<Vec<usize>>, Vec<Vec<T>>) = (0..d.n_rows())
            .into_par_iter()
            .map(|i| {
                let mut leaves = Vec::with_capacity(self.trees.len());
                let mut oms = Vec::with_capacity(self.trees.len());
                for (t, tree) in self.trees.iter().enumerate() {
                    let leaf = tree.route_row(d, i);
                    leaves.push(leaf);
                    oms.push(self.leaf_model(t, leaf).omega(&d.value(i, tree.target)));
                }
                (leaves, oms)
            })
            .unzip();
        let sizes: Vec<usize> = self.trees.iter().map(|t| t.n_leaves()).collect();
        ContextIndex::new(&sizes, &leaf_of, &omega)
    }

    fn training_index(&self, d: &Dataset<T>) -> Result<ContextIndex<T>> {
        self.context_index(d)
    }

    /// Reruns the score iteration on a dataset, treating it as the training set.
    pub fn rescore(&self, d: &Dataset<T>) -> Result<ScoreState<T>> {
        let index = self.context_index(d)?;
        run_iterations(&index, &self.params.scoring)
    }

    /// Density-only scores: one aggregation with every context presumed normal.
    pub fn density_scores(&self, d: &Dataset<T>) -> Result<Vec<T>> {
        let index = self.context_index(d)?;
        let gd = T::of(self.params.scoring.gamma_delta);
        Ok((0..index.n_instances())
            .map(|i| noisy_or(index.omegas_of(i).iter().map(|&w| T::one() - w), gd))
            .collect())
    }

    fn check_schema(&self, d: &Dataset<T>) -> Result<()> {
        if d.n_attributes() != self.attributes.len() {
            return Err(Error::Schema(format!(
                "dataset has {} attributes, model expects {}",
                d.n_attributes(),
                self.attributes.len()
            )));
        }
        for (a, b) in self.attributes.iter().zip(d.attributes()) {
            if a.name != b.name || a.kind != b.kind || (a.kind == AttributeKind::Nominal && a.categories != b.categories) {
                return Err(Error::Schema(format!(
                    "attribute '{}' does not match the model schema",
                    b.name
                )));
            }
        }
        Ok(())
    }

    // persistence

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            scalar: std::any::type_name::<T>().to_string(),
            n_train: self.n_train,
            params: self.params,
            attributes: self.attributes.clone(),
            trees: self
                .trees
                .iter()
                .zip(&self.models)
                .map(|(t, m)| {
                    let mut tree = t.clone();
                    for node in tree.nodes.iter_mut().filter(|n| !n.is_leaf()) {
                        node.members.clear();
                    }
                    TreeEntry {
                        tree,
                        models: m.clone(),
                    }
                })
                .collect(),
            lambda: self.lambda.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: FileHeader = serde_json::from_str(text)?;
        if header.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unexpected format tag '{}'", header.format)));
        }
        if header.version != MODEL_VERSION {
            return Err(Error::ModelVersion {
                found: header.version,
                expected: MODEL_VERSION,
            });
        }
        let expected = std::any::type_name::<T>();
        if header.scalar != expected {
            return Err(Error::ModelFormat(format!(
                "model stores {} scalars, loader expects {expected}",
                header.scalar
            )));
        }
        let file: ModelFile<T> = serde_json::from_str(text)?;
        let mut trees = Vec::with_capacity(file.trees.len());
        let mut models = Vec::with_capacity(file.trees.len());
        let mut offsets = Vec::new();
        let mut total = 0;
        for (t, entry) in file.trees.into_iter().enumerate() {
            let mut tree = entry.tree;
            validate_tree(&tree, t, file.attributes.len())?;
            for &s in &tree.scoring_node {
                if !entry.models.contains_key(&s) {
                    return Err(Error::ModelFormat(format!("tree {t}: no model for scoring node {s}")));
                }
            }
            tree.fill_internal_members();
            offsets.push(total);
            total += tree.n_leaves();
            trees.push(tree);
            models.push(entry.models);
        }
        if file.lambda.len() != total {
            return Err(Error::ModelFormat(format!(
                "{} context scores for {total} contexts",
                file.lambda.len()
            )));
        }
        Ok(AdMercs {
            attributes: file.attributes,
            trees,
            models,
            lambda: file.lambda,
            offsets,
            params: file.params,
            n_train: file.n_train,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn validate_tree<T: Scalar>(tree: &Tree<T>, t: usize, m: usize) -> Result<()> {
    let bad = |msg: String| Err(Error::ModelFormat(format!("tree {t}: {msg}")));
    if tree.target != t {
        return bad(format!("target {} out of order", tree.target));
    }
    if tree.nodes.is_empty() || tree.scoring_node.len() != tree.leaves.len() {
        return bad("inconsistent leaf tables".into());
    }
    for (id, node) in tree.nodes.iter().enumerate() {
        if let Some((l, r)) = node.children {
            if l >= tree.nodes.len() || r >= tree.nodes.len() || l <= id || r <= id {
                return bad(format!("node {id} has invalid children"));
            }
        }
        if node.split.is_some() != node.children.is_some() {
            return bad(format!("node {id}: split and children disagree"));
        }
        if let Some(s) = &node.split {
            if s.attribute() >= m || s.attribute() == t {
                return bad(format!("node {id} splits on attribute {}", s.attribute()));
            }
        }
    }
    for (leaf, &node) in tree.leaves.iter().enumerate() {
        if node >= tree.nodes.len() || tree.nodes[node].leaf_id != Some(leaf) {
            return bad(format!("leaf {leaf} is inconsistent"));
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct FileHeader {
    format: String,
    version: u32,
    scalar: String,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
struct TreeEntry<T> {
    #[serde(flatten)]
    tree: Tree<T>,
    models: NodeModels<T>,
}

/// On-disk model: versioned JSON. Internal-node memberships are not stored; they
/// are rebuilt from the leaves on load.
#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
struct ModelFile<T> {
    format: String,
    version: u32,
    scalar: String,
    n_train: usize,
    params: Params,
    attributes: Vec<AttributeMeta>,
    trees: Vec<TreeEntry<T>>,
    lambda: Vec<T>,
}
