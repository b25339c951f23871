//! Per-context likelihood models.
//!
//! A numeric target gets a Gaussian KDE, a nominal target a frequency histogram.
//! The raw density `kappa` is squashed into `omega` in [0, 1] by a threshold `tau`
//! that a fraction `rho` of the context's own training values reach.

mod isj;

pub use isj::{isj_bandwidth, silverman_bandwidth, Bandwidth, GRID_POINTS, MAX_ITERATIONS};

use serde::{Deserialize, Serialize};

use crate::data::{AttributeKind, Value};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Kernel terms beyond this many bandwidths underflow to zero in `f64`.
const KERNEL_CUTOFF: f64 = 40.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeModel<T> {
    /// Training target values, ascending.
    pub samples: Vec<T>,
    pub bandwidth: T,
    pub tau: T,
}

impl<T: Scalar> KdeModel<T> {
    pub fn kappa(&self, v: T) -> T {
        let h = self.bandwidth;
        let reach = h * T::of(KERNEL_CUTOFF);
        let lo = self.samples.partition_point(|&s| s < v - reach);
        let hi = self.samples.partition_point(|&s| s <= v + reach);
        let half = T::of(-0.5);
        let sum: T = self.samples[lo..hi]
            .iter()
            .map(|&s| {
                let z = (v - s) / h;
                (half * z * z).exp()
            })
            .sum();
        sum * T::of(INV_SQRT_2PI) / (T::of_usize(self.samples.len()) * h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistModel<T> {
    /// Count per training category.
    pub counts: Vec<u64>,
    pub total: u64,
    pub tau: T,
}

impl<T: Scalar> HistModel<T> {
    pub fn kappa(&self, category: Option<u32>) -> T {
        match category.and_then(|c| self.counts.get(c as usize)) {
            Some(&c) => T::of(c as f64 / self.total as f64),
            None => T::zero(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Density<T> {
    Kde(KdeModel<T>),
    Hist(HistModel<T>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodModel<T> {
    pub density: Density<T>,
    pub rho: T,
}

/// Training values of a scoring node's target.
#[derive(Clone, Copy, Debug)]
pub enum TargetValues<'a, T> {
    Numeric {
        values: &'a [T],
        /// Full-dataset range of the attribute; scales the spike bandwidth of
        /// single-valued contexts.
        attribute_range: T,
    },
    Nominal {
        values: &'a [u32],
        n_categories: usize,
    },
}

impl<T: Scalar> LikelihoodModel<T> {
    pub fn kind(&self) -> AttributeKind {
        match self.density {
            Density::Kde(_) => AttributeKind::Numeric,
            Density::Hist(_) => AttributeKind::Nominal,
        }
    }

    pub fn tau(&self) -> T {
        match &self.density {
            Density::Kde(k) => k.tau,
            Density::Hist(h) => h.tau,
        }
    }

    /// Density (numeric) or relative frequency (nominal) of `v`; zero on a kind mismatch.
    pub fn kappa(&self, v: &Value<T>) -> T {
        match (&self.density, v) {
            (Density::Kde(k), Value::Num(x)) => k.kappa(*x),
            (Density::Hist(h), Value::Cat(c)) => h.kappa(*c),
            _ => T::zero(),
        }
    }

    /// Squashed likelihood: 1 at or above `tau`, `kappa / tau` below it. A zero `tau`
    /// carries no contrast, so every value is typical.
    pub fn omega(&self, v: &Value<T>) -> T {
        squash(self.kappa(v), self.tau())
    }
}

pub fn squash<T: Scalar>(kappa: T, tau: T) -> T {
    if tau <= T::zero() || kappa >= tau {
        T::one()
    } else {
        (kappa / tau).max(T::zero())
    }
}

/// Lower-interpolated `q`-quantile (numpy's `interpolation="lower"`).
pub fn lower_quantile<T: Scalar>(values: &mut [T], q: f64) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).expect("densities are finite"));
    let idx = (q * (values.len() - 1) as f64).floor() as usize;
    values[idx.min(values.len() - 1)]
}

fn check_rho<T: Scalar>(rho: T) -> Result<()> {
    if rho > T::zero() && rho <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("rho must lie in (0, 1], got {rho}")))
    }
}

/// Bandwidth for a numeric sample; `Err(Degenerate)` when fewer than two distinct values.
pub fn botev_bandwidth<T: Scalar>(values: &[T]) -> Result<T> {
    let v: Vec<f64> = values.iter().map(|x| x.as_f64()).collect();
    isj_bandwidth(&v).map(|b| T::of(b.value()))
}

pub fn fit_kde<T: Scalar>(values: &[T], rho: T, attribute_range: T) -> Result<LikelihoodModel<T>> {
    check_rho(rho)?;
    if values.is_empty() {
        return Err(Error::Empty("no values to fit a density".into()));
    }
    let mut samples = values.to_vec();
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let bandwidth = match botev_bandwidth(&samples) {
        Ok(h) => h,
        Err(Error::Degenerate) => (T::of(1e-9) * attribute_range).max(T::of(1e-12)),
        Err(e) => return Err(e),
    };
    let mut model = KdeModel {
        samples,
        bandwidth,
        tau: T::zero(),
    };
    let mut kappas: Vec<T> = model.samples.iter().map(|&s| model.kappa(s)).collect();
    model.tau = lower_quantile(&mut kappas, 1.0 - rho.as_f64());
    Ok(LikelihoodModel {
        density: Density::Kde(model),
        rho,
    })
}

pub fn fit_hist<T: Scalar>(values: &[u32], n_categories: usize, rho: T) -> Result<LikelihoodModel<T>> {
    check_rho(rho)?;
    if values.is_empty() {
        return Err(Error::Empty("no values to fit a histogram".into()));
    }
    let mut counts = vec![0u64; n_categories];
    for &v in values {
        let v = v as usize;
        if v >= counts.len() {
            counts.resize(v + 1, 0);
        }
        counts[v] += 1;
    }
    let mut model = HistModel {
        counts,
        total: values.len() as u64,
        tau: T::zero(),
    };
    let mut kappas: Vec<T> = values.iter().map(|&v| model.kappa(Some(v))).collect();
    model.tau = lower_quantile(&mut kappas, 1.0 - rho.as_f64());
    Ok(LikelihoodModel {
        density: Density::Hist(model),
        rho,
    })
}

/// Fits the likelihood model of one scoring node from its members' target values.
pub fn fit_model<T: Scalar>(target: TargetValues<'_, T>, rho: T) -> Result<LikelihoodModel<T>> {
    match target {
        TargetValues::Numeric {
            values,
            attribute_range,
        } => fit_kde(values, rho, attribute_range),
        TargetValues::Nominal {
            values,
            n_categories,
        } => fit_hist(values, n_categories, rho),
    }
}
