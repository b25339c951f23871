//! Noisy-OR aggregation and the alternating instance/context score updates.
//!
//! Every training instance sits in exactly one leaf ("context") of every tree. With
//! `omega[i][t]` its squashed likelihood in tree `t`, the iteration alternates
//!
//! ```text
//! v[i][c]  = lambda[c] + (1 - lambda[c]) * (1 - omega[i][c])
//! delta[i] = noisy_or({ v[i][c] : i in c }; gamma_delta)
//! lambda[c] = 1 - noisy_or({ 1 - delta[i] : i in c }; gamma_lambda)
//! ```
//!
//! starting from `lambda = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{unit, Scalar};

/// Early-exit tolerance on the largest change of any score between iterations.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-6;

fn log_floor<T: Scalar>() -> T {
    T::of(1e-300).max(T::min_positive_value())
}

/// `prod_i (1 - gamma * p_i)` accumulated in log space, each factor clamped to
/// `[1e-300, 1]`.
pub fn inhibited_product<T: Scalar>(ps: impl IntoIterator<Item = T>, gamma: T) -> T {
    let floor = log_floor::<T>();
    let log_sum: T = ps
        .into_iter()
        .map(|p| (T::one() - gamma * p).max(floor).min(T::one()).ln())
        .sum();
    log_sum.exp()
}

/// `1 - prod_i (1 - gamma * p_i)`; zero for an empty input.
pub fn noisy_or<T: Scalar>(ps: impl IntoIterator<Item = T>, gamma: T) -> T {
    unit(T::one() - inhibited_product(ps, gamma))
}

/// Evidence that instance `i` is anomalous as seen from context `j`.
#[inline]
pub fn context_evidence<T: Scalar>(lambda: T, omega: T) -> T {
    unit(lambda + (T::one() - lambda) * (T::one() - omega))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoringParams {
    pub gamma_delta: f64,
    pub gamma_lambda: f64,
    pub iterations: usize,
    pub rho: f64,
}

impl Default for ScoringParams {
    fn default() -> Self {
        ScoringParams {
            gamma_delta: 1.0,
            gamma_lambda: 1.0,
            iterations: 10,
            rho: 0.9,
        }
    }
}

impl ScoringParams {
    pub fn validate(&self) -> Result<()> {
        let unit_open = |x: f64| x > 0.0 && x <= 1.0;
        if !unit_open(self.gamma_delta) {
            return Err(Error::InvalidParam(format!(
                "gamma_delta must lie in (0, 1], got {}",
                self.gamma_delta
            )));
        }
        if !unit_open(self.gamma_lambda) {
            return Err(Error::InvalidParam(format!(
                "gamma_lambda must lie in (0, 1], got {}",
                self.gamma_lambda
            )));
        }
        if !unit_open(self.rho) {
            return Err(Error::InvalidParam(format!(
                "rho must lie in (0, 1], got {}",
                self.rho
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParam("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Contexts of all trees with global ids, per-instance membership and the
/// precomputed likelihoods of every instance in its context of every tree.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextIndex<T> {
    n_instances: usize,
    n_trees: usize,
    /// First global context id of every tree.
    offsets: Vec<usize>,
    /// `(tree, leaf)` of every global context.
    contexts: Vec<(usize, usize)>,
    /// Row-major `n_instances x n_trees` global context ids.
    membership: Vec<u32>,
    /// Row-major `n_instances x n_trees` likelihoods.
    omega: Vec<T>,
    /// Members of every global context.
    members: Vec<Vec<u32>>,
}

impl<T: Scalar> ContextIndex<T> {
    /// `leaf_of[i][t]` is the leaf of instance `i` in tree `t`, `omega[i][t]` its likelihood there.
    pub fn new(leaves_per_tree: &[usize], leaf_of: &[Vec<usize>], omega: &[Vec<T>]) -> Result<Self> {
        let n_trees = leaves_per_tree.len();
        let mut offsets = Vec::with_capacity(n_trees);
        let mut contexts = Vec::new();
        for (t, &k) in leaves_per_tree.iter().enumerate() {
            offsets.push(contexts.len());
            contexts.extend((0..k).map(|l| (t, l)));
        }
        if leaf_of.len() != omega.len() {
            return Err(Error::LengthMismatch(leaf_of.len(), omega.len()));
        }
        let mut membership = Vec::with_capacity(leaf_of.len() * n_trees);
        let mut flat_omega = Vec::with_capacity(leaf_of.len() * n_trees);
        let mut members = vec![Vec::new(); contexts.len()];
        for (i, (leaves, om)) in leaf_of.iter().zip(omega).enumerate() {
            if leaves.len() != n_trees || om.len() != n_trees {
                return Err(Error::InvalidParam(format!(
                    "instance {i} must have one context and one likelihood per tree"
                )));
            }
            for t in 0..n_trees {
                if leaves[t] >= leaves_per_tree[t] {
                    return Err(Error::InvalidParam(format!(
                        "instance {i}: leaf {} out of range for tree {t}",
                        leaves[t]
                    )));
                }
                let c = offsets[t] + leaves[t];
                membership.push(c as u32);
                members[c].push(i as u32);
                flat_omega.push(unit(om[t]));
            }
        }
        Ok(ContextIndex {
            n_instances: leaf_of.len(),
            n_trees,
            offsets,
            contexts,
            membership,
            omega: flat_omega,
            members,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.n_instances
    }

    pub fn n_trees(&self) -> usize {
        self.n_trees
    }

    pub fn n_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn context_id(&self, tree: usize, leaf: usize) -> usize {
        self.offsets[tree] + leaf
    }

    /// `(tree, leaf)` of a global context id.
    pub fn context(&self, id: usize) -> (usize, usize) {
        self.contexts[id]
    }

    pub fn members(&self, context: usize) -> &[u32] {
        &self.members[context]
    }

    /// Global context ids of instance `i`, one per tree.
    pub fn contexts_of(&self, i: usize) -> &[u32] {
        &self.membership[i * self.n_trees..(i + 1) * self.n_trees]
    }

    /// Likelihoods of instance `i`, one per tree.
    pub fn omegas_of(&self, i: usize) -> &[T] {
        &self.omega[i * self.n_trees..(i + 1) * self.n_trees]
    }

    pub fn omega(&self, i: usize, tree: usize) -> T {
        self.omega[i * self.n_trees + tree]
    }

    /// Evidence `v[i][t]` of instance `i` in each of its contexts.
    pub fn evidence(&self, i: usize, lambda: &[T]) -> Vec<T> {
        self.contexts_of(i)
            .iter()
            .zip(self.omegas_of(i))
            .map(|(&c, &w)| context_evidence(lambda[c as usize], w))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreState<T> {
    /// Instance anomaly scores.
    pub delta: Vec<T>,
    /// Context anomaly scores, indexed by global context id.
    pub lambda: Vec<T>,
    /// Iterations actually performed.
    pub iterations: usize,
}

impl<T: Scalar> ScoreState<T> {
    pub fn initial(index: &ContextIndex<T>) -> Self {
        ScoreState {
            delta: vec![T::zero(); index.n_instances()],
            lambda: vec![T::zero(); index.n_contexts()],
            iterations: 0,
        }
    }
}

pub fn update_delta<T: Scalar>(lambda: &[T], index: &ContextIndex<T>, gamma_delta: T) -> Vec<T> {
    (0..index.n_instances())
        .into_par_iter()
        .map(|i| {
            let ctx = index.contexts_of(i);
            let om = index.omegas_of(i);
            noisy_or(
                ctx.iter()
                    .zip(om)
                    .map(|(&c, &w)| context_evidence(lambda[c as usize], w)),
                gamma_delta,
            )
        })
        .collect()
}

pub fn update_lambda<T: Scalar>(delta: &[T], index: &ContextIndex<T>, gamma_lambda: T) -> Vec<T> {
    (0..index.n_contexts())
        .into_par_iter()
        .map(|c| {
            // 1 - noisy_or({1 - delta}) is the inhibited product itself
            unit(inhibited_product(
                index.members(c).iter().map(|&i| T::one() - delta[i as usize]),
                gamma_lambda,
            ))
        })
        .collect()
}

fn max_abs_change<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(T::zero(), T::max)
}

/// Runs up to `params.iterations` rounds of (delta, then lambda) from `lambda = 0`,
/// stopping early once no score moves by more than [`CONVERGENCE_TOLERANCE`].
pub fn run_iterations<T: Scalar>(index: &ContextIndex<T>, params: &ScoringParams) -> Result<ScoreState<T>> {
    params.validate()?;
    let gd = T::of(params.gamma_delta);
    let gl = T::of(params.gamma_lambda);
    let tol = T::of(CONVERGENCE_TOLERANCE);
    let mut state = ScoreState::initial(index);
    for it in 0..params.iterations {
        let delta = update_delta(&state.lambda, index, gd);
        let lambda = update_lambda(&delta, index, gl);
        let converged = it > 0
            && max_abs_change(&delta, &state.delta) < tol
            && max_abs_change(&lambda, &state.lambda) < tol;
        state.delta = delta;
        state.lambda = lambda;
        state.iterations = it + 1;
        if converged {
            break;
        }
    }
    Ok(state)
}
