//! Unsupervised anomaly detection with a multi-directional decision-tree ensemble.
//!
//! One tree is learned per attribute, predicting it from the others. Each leaf is a
//! context scored by a density model of the tree's target; per-tree evidence is
//! combined by noisy-OR, and an alternating update of instance and context scores
//! lets contexts dominated by anomalies flag their remaining members too.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`.

pub mod bench;
pub mod data;
pub mod density;
pub mod error;
pub mod eval;
pub mod explain;
pub mod model;
pub mod scalar;
pub mod scoring;
pub mod tree;

pub use error::{Error, Result};
pub use model::{Fitted, Params, PRESETS};
pub use scalar::Scalar;

pub type Dataset = data::Dataset<f64>;
pub type Instance = data::Instance<f64>;
pub type Value = data::Value<f64>;
pub type Tree = tree::Tree<f64>;
pub type LikelihoodModel = density::LikelihoodModel<f64>;
pub type ContextIndex = scoring::ContextIndex<f64>;
pub type ScoreState = scoring::ScoreState<f64>;
pub type AdMercs = model::AdMercs<f64>;
pub type Explanation = explain::Explanation<f64>;
