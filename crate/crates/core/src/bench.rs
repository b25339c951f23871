//! Synthetic benchmarks with ground-truth labels.
//!
//! * Synth-C: one 2D pattern with local outliers that are invisible in either marginal.
//! * Synth-C&S: five such patterns in disjoint attribute pairs plus irrelevant
//!   uniform attributes.
//! * Synth-I: a pattern subspace plus a cluster subspace in which one cluster is
//!   dominated by outliers; its pattern-conforming members are accidental inliers.
//!
//! Outlier coordinates are stratified samples of the normal points' marginals,
//! paired so that each outlier lies at least three noise widths from the pattern.
//! Each coordinate on its own therefore looks like a normal one.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{save_csv, AttributeMeta, Column, Dataset};
use crate::error::{Error, Result};
use crate::eval::auc_roc;
use crate::scalar::Scalar;

/// Redraw rounds before outlier placement gives up.
pub const MAX_MATCH_ROUNDS: usize = 200;
/// Rounds in which unmatched coordinates are redrawn within their own stratum.
pub const STRATIFIED_ROUNDS: usize = 50;
/// Attempts at placing separated cluster centres.
const MAX_CENTER_DRAWS: usize = 10_000;
/// Minimum outlier distance to the pattern, in noise widths.
pub const ANOMALY_GAP: f64 = 3.0;
/// Fraction of the anomalous Synth-I cluster that breaks the pattern.
pub const SYNTH_I_OUTLIER_SHARE: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternFamily {
    LinearBand,
    SineCurve,
    TwoClusters,
    Ring,
    Checkerboard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// `y = intercept + slope * x` for `x` in `[0.05, 0.95]`.
    Line { intercept: f64, slope: f64 },
    /// `y = 0.5 + amplitude * sin(2 pi frequency x + phase)` for `x` in `[0.05, 0.95]`.
    Sine { amplitude: f64, frequency: f64, phase: f64 },
    /// Uniform discs of `radius` around each centre.
    Clusters { centers: Vec<(f64, f64)>, radius: f64 },
    /// Arc of a circle from angle `start` over `sweep` radians; the gap keeps the
    /// conditional mean of each coordinate from being constant.
    Ring {
        center: (f64, f64),
        radius: f64,
        start: f64,
        sweep: f64,
    },
    /// `cells x cells` board over the unit square; cells with even `row + col` are filled.
    Checkerboard { cells: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub family: PatternFamily,
    #[serde(flatten)]
    pub shape: Shape,
    /// Half-width of the band around the pattern where normal points live.
    pub noise: f64,
}

const CURVE_X: (f64, f64) = (0.05, 0.95);
const CURVE_SAMPLES: usize = 2000;

impl PatternSpec {
    pub fn line(intercept: f64, slope: f64, noise: f64) -> Self {
        PatternSpec {
            family: PatternFamily::LinearBand,
            shape: Shape::Line { intercept, slope },
            noise,
        }
    }

    pub fn sine(amplitude: f64, frequency: f64, phase: f64, noise: f64) -> Self {
        PatternSpec {
            family: PatternFamily::SineCurve,
            shape: Shape::Sine {
                amplitude,
                frequency,
                phase,
            },
            noise,
        }
    }

    pub fn clusters(centers: Vec<(f64, f64)>, radius: f64, noise: f64) -> Self {
        PatternSpec {
            family: PatternFamily::TwoClusters,
            shape: Shape::Clusters { centers, radius },
            noise,
        }
    }

    pub fn ring(center: (f64, f64), radius: f64, start: f64, sweep: f64, noise: f64) -> Self {
        PatternSpec {
            family: PatternFamily::Ring,
            shape: Shape::Ring {
                center,
                radius,
                start,
                sweep,
            },
            noise,
        }
    }

    pub fn checkerboard(cells: usize, margin: f64) -> Self {
        PatternSpec {
            family: PatternFamily::Checkerboard,
            shape: Shape::Checkerboard { cells },
            noise: margin,
        }
    }

    fn curve(&self, x: f64) -> Option<f64> {
        match &self.shape {
            Shape::Line { intercept, slope } => Some(intercept + slope * x),
            Shape::Sine {
                amplitude,
                frequency,
                phase,
            } => Some(0.5 + amplitude * (2.0 * PI * frequency * x + phase).sin()),
            _ => None,
        }
    }

    /// Euclidean distance from `p` to the pattern's core: the curve, the cluster
    /// centres' discs, the arc, or the filled cells.
    pub fn distance(&self, p: (f64, f64)) -> f64 {
        match &self.shape {
            Shape::Line { .. } => {
                let (a, b) = CURVE_X;
                let (ya, yb) = (self.curve(a).unwrap(), self.curve(b).unwrap());
                let (dx, dy) = (b - a, yb - ya);
                let t = (((p.0 - a) * dx + (p.1 - ya) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
                ((p.0 - a - t * dx).powi(2) + (p.1 - ya - t * dy).powi(2)).sqrt()
            }
            Shape::Sine { .. } => {
                let (a, b) = CURVE_X;
                (0..=CURVE_SAMPLES)
                    .map(|k| {
                        let x = a + (b - a) * k as f64 / CURVE_SAMPLES as f64;
                        let y = self.curve(x).unwrap();
                        ((p.0 - x).powi(2) + (p.1 - y).powi(2)).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
            }
            Shape::Clusters { centers, radius } => centers
                .iter()
                .map(|c| ((p.0 - c.0).powi(2) + (p.1 - c.1).powi(2)).sqrt() - radius)
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            Shape::Ring {
                center,
                radius,
                start,
                sweep,
            } => {
                let (dx, dy) = (p.0 - center.0, p.1 - center.1);
                let along = (dy.atan2(dx) - start).rem_euclid(2.0 * PI);
                if along <= *sweep {
                    ((dx * dx + dy * dy).sqrt() - radius).abs()
                } else {
                    [*start, start + sweep]
                        .iter()
                        .map(|a| {
                            let q = (center.0 + radius * a.cos(), center.1 + radius * a.sin());
                            ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
                        })
                        .fold(f64::INFINITY, f64::min)
                }
            }
            Shape::Checkerboard { cells } => {
                let k = *cells;
                let size = 1.0 / k as f64;
                let mut best = f64::INFINITY;
                for r in 0..k {
                    for c in 0..k {
                        if (r + c) % 2 != 0 {
                            continue;
                        }
                        let (x0, y0) = (c as f64 * size, r as f64 * size);
                        let dx = (x0 - p.0).max(0.0).max(p.0 - (x0 + size));
                        let dy = (y0 - p.1).max(0.0).max(p.1 - (y0 + size));
                        best = best.min((dx * dx + dy * dy).sqrt());
                    }
                }
                best
            }
        }
    }

    /// Minimum distance of an outlier to the pattern core.
    pub fn anomaly_gap(&self) -> f64 {
        ANOMALY_GAP * self.noise
    }

    /// Largest distance of a normal point to the core.
    pub fn normal_reach(&self) -> f64 {
        match self.shape {
            Shape::Checkerboard { .. } | Shape::Clusters { .. } => 0.0,
            _ => self.noise,
        }
    }

    /// One point on the pattern.
    pub fn sample_normal<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let w = self.noise;
        match &self.shape {
            Shape::Line { .. } | Shape::Sine { .. } => {
                let x = rng.random_range(CURVE_X.0..CURVE_X.1);
                let y = self.curve(x).unwrap() + rng.random_range(-w..w);
                (x, y)
            }
            Shape::Clusters { centers, radius } => {
                let c = centers[rng.random_range(0..centers.len())];
                let r = radius * rng.random::<f64>().sqrt();
                let a = rng.random_range(0.0..2.0 * PI);
                (c.0 + r * a.cos(), c.1 + r * a.sin())
            }
            Shape::Ring {
                center,
                radius,
                start,
                sweep,
            } => {
                let a = start + rng.random_range(0.0..*sweep);
                let r = radius + rng.random_range(-w..w);
                (center.0 + r * a.cos(), center.1 + r * a.sin())
            }
            Shape::Checkerboard { cells } => {
                let k = *cells;
                let size = 1.0 / k as f64;
                let filled: Vec<(usize, usize)> = (0..k)
                    .flat_map(|r| (0..k).map(move |c| (r, c)))
                    .filter(|(r, c)| (r + c) % 2 == 0)
                    .collect();
                let (r, c) = filled[rng.random_range(0..filled.len())];
                (
                    (c as f64 + rng.random::<f64>()) * size,
                    (r as f64 + rng.random::<f64>()) * size,
                )
            }
        }
    }
}

/// The 30 patterns: six parameterizations of each of the five families.
pub fn pattern_catalog() -> Vec<PatternSpec> {
    vec![
        PatternSpec::line(0.1, 0.8, 0.03),
        PatternSpec::line(0.9, -0.8, 0.03),
        PatternSpec::line(0.2, 0.6, 0.025),
        PatternSpec::line(0.8, -0.6, 0.025),
        PatternSpec::line(0.05, 0.9, 0.035),
        PatternSpec::line(0.95, -0.9, 0.035),
        PatternSpec::sine(0.35, 1.0, 0.0, 0.03),
        PatternSpec::sine(0.35, 1.0, PI, 0.03),
        PatternSpec::sine(0.3, 1.5, 0.0, 0.025),
        PatternSpec::sine(0.4, 0.5, 0.0, 0.03),
        PatternSpec::sine(0.3, 2.0, 0.5, 0.02),
        PatternSpec::sine(0.4, 0.75, PI / 2.0, 0.03),
        PatternSpec::clusters(vec![(0.2, 0.8), (0.8, 0.2)], 0.08, 0.03),
        PatternSpec::clusters(vec![(0.25, 0.25), (0.75, 0.75)], 0.08, 0.03),
        PatternSpec::clusters(vec![(0.2, 0.2), (0.5, 0.8), (0.8, 0.5)], 0.07, 0.03),
        PatternSpec::clusters(vec![(0.2, 0.5), (0.5, 0.2), (0.8, 0.8)], 0.07, 0.03),
        PatternSpec::clusters(vec![(0.2, 0.3), (0.4, 0.8), (0.6, 0.2), (0.8, 0.6)], 0.06, 0.03),
        PatternSpec::clusters(vec![(0.3, 0.7), (0.7, 0.3)], 0.1, 0.03),
        PatternSpec::ring((0.5, 0.5), 0.35, 0.25 * PI, 1.5 * PI, 0.03),
        PatternSpec::ring((0.5, 0.5), 0.3, 1.25 * PI, 1.5 * PI, 0.025),
        PatternSpec::ring((0.5, 0.5), 0.4, 0.0, PI, 0.03),
        PatternSpec::ring((0.5, 0.5), 0.35, 0.75 * PI, 1.25 * PI, 0.03),
        PatternSpec::ring((0.5, 0.55), 0.35, PI, PI, 0.03),
        PatternSpec::ring((0.5, 0.5), 0.3, 1.75 * PI, 1.5 * PI, 0.025),
        PatternSpec::checkerboard(2, 0.005),
        PatternSpec::checkerboard(2, 0.01),
        PatternSpec::checkerboard(2, 0.015),
        PatternSpec::checkerboard(4, 0.005),
        PatternSpec::checkerboard(4, 0.0075),
        PatternSpec::checkerboard(4, 0.01),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub seed: u64,
    pub n_instances: usize,
    pub contamination: f64,
    /// Total attribute count for Synth-C&S.
    pub dims: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: 0,
            n_instances: 1000,
            contamination: 0.05,
            dims: 10,
        }
    }
}

impl BenchConfig {
    pub fn with_seed(seed: u64) -> Self {
        BenchConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.contamination > 0.0 && self.contamination < 0.5) {
            return Err(Error::InvalidParam(format!(
                "contamination must lie in (0, 0.5), got {}",
                self.contamination
            )));
        }
        if self.n_instances < 10 {
            return Err(Error::InvalidParam("at least 10 instances are required".into()));
        }
        Ok(())
    }

    pub fn n_anomalies(&self) -> usize {
        ((self.contamination * self.n_instances as f64).round() as usize).max(1)
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Sidecar describing how a benchmark dataset was generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchMetadata {
    pub family: String,
    pub config: BenchConfig,
    pub patterns: Vec<PatternSpec>,
    /// Attribute pair carrying each pattern.
    pub subspaces: Vec<(usize, usize)>,
    /// For every anomaly (row index), the subspace whose pattern it breaks, if any.
    pub anomaly_subspace: Vec<(usize, Option<usize>)>,
    /// Synth-I: anomalies that conform to the pattern.
    #[serde(default)]
    pub accidental_inliers: Vec<usize>,
    /// Synth-I: cluster centres and the index of the anomalous cluster.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<ClusterInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub centers: Vec<(f64, f64)>,
    pub std: f64,
    pub anomalous: usize,
    pub anomalous_std: f64,
}

#[derive(Clone, Debug)]
pub struct Benchmark<T> {
    pub data: Dataset<T>,
    pub meta: BenchMetadata,
}

/// A pattern with the normal points already drawn, able to produce outliers from
/// the product of their marginals.
struct PatternDraw {
    spec: PatternSpec,
    normal: Vec<(f64, f64)>,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PatternDraw {
    fn new<R: Rng>(spec: PatternSpec, n: usize, rng: &mut R) -> Self {
        let normal: Vec<(f64, f64)> = (0..n).map(|_| spec.sample_normal(rng)).collect();
        let mut xs: Vec<f64> = normal.iter().map(|p| p.0).collect();
        let mut ys: Vec<f64> = normal.iter().map(|p| p.1).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        PatternDraw { spec, normal, xs, ys }
    }

    /// Draw from quantile stratum `k` of `m` of a sorted marginal.
    fn stratum<R: Rng>(sorted: &[f64], k: usize, m: usize, rng: &mut R) -> f64 {
        let q = (k as f64 + rng.random::<f64>()) / m as f64;
        sorted[((q * sorted.len() as f64) as usize).min(sorted.len() - 1)]
    }

    /// Any value of a sorted marginal.
    fn anywhere<R: Rng>(sorted: &[f64], rng: &mut R) -> f64 {
        sorted[rng.random_range(0..sorted.len())]
    }

    /// `m` off-pattern points whose coordinates are stratified samples of the
    /// normal marginals, paired by bipartite matching so every point is at least
    /// the anomaly gap away from the pattern. Values that find no partner are
    /// redrawn within their stratum, and after [`STRATIFIED_ROUNDS`] rounds from
    /// the whole marginal.
    fn outliers<R: Rng>(&self, m: usize, rng: &mut R) -> Result<Vec<(f64, f64)>> {
        let gap = self.spec.anomaly_gap();
        let mut xs: Vec<f64> = (0..m).map(|k| Self::stratum(&self.xs, k, m, rng)).collect();
        let mut ys: Vec<f64> = (0..m).map(|k| Self::stratum(&self.ys, k, m, rng)).collect();
        let off = |x: f64, y: f64| self.spec.distance((x, y)) >= gap;
        let mut ok: Vec<Vec<bool>> = xs.iter().map(|&x| ys.iter().map(|&y| off(x, y)).collect()).collect();
        for round in 0..MAX_MATCH_ROUNDS {
            let (x_of_y, free_x) = max_matching(&ok, rng);
            if free_x.is_empty() {
                let mut out: Vec<(f64, f64)> = x_of_y.iter().enumerate().map(|(j, i)| (xs[i.unwrap()], ys[j])).collect();
                out.shuffle(rng);
                return Ok(out);
            }
            let stratified = round < STRATIFIED_ROUNDS;
            for &i in &free_x {
                xs[i] = if stratified { Self::stratum(&self.xs, i, m, rng) } else { Self::anywhere(&self.xs, rng) };
                for j in 0..m {
                    ok[i][j] = off(xs[i], ys[j]);
                }
            }
            for j in (0..m).filter(|&j| x_of_y[j].is_none()) {
                ys[j] = if stratified { Self::stratum(&self.ys, j, m, rng) } else { Self::anywhere(&self.ys, rng) };
                for i in 0..m {
                    ok[i][j] = off(xs[i], ys[j]);
                }
            }
        }
        Err(Error::Generation(format!(
            "no outlier placement found after {MAX_MATCH_ROUNDS} rounds; the {:?} pattern covers its marginal product, try other parameters",
            self.spec.family
        )))
    }

    fn conforming<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        self.spec.sample_normal(rng)
    }
}

/// Maximum bipartite matching by augmenting paths, visiting rows in random order.
/// Returns the row matched to each column and the unmatched rows.
fn max_matching<R: Rng>(ok: &[Vec<bool>], rng: &mut R) -> (Vec<Option<usize>>, Vec<usize>) {
    fn augment(i: usize, ok: &[Vec<bool>], cols: &[usize], seen: &mut [bool], x_of_y: &mut [Option<usize>]) -> bool {
        for &j in cols {
            if ok[i][j] && !seen[j] {
                seen[j] = true;
                if x_of_y[j].is_none_or(|k| augment(k, ok, cols, seen, x_of_y)) {
                    x_of_y[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    let m = ok.len();
    let n_cols = ok.first().map_or(0, Vec::len);
    let mut rows: Vec<usize> = (0..m).collect();
    let mut cols: Vec<usize> = (0..n_cols).collect();
    rows.shuffle(rng);
    cols.shuffle(rng);
    let mut x_of_y = vec![None; n_cols];
    let mut free = Vec::new();
    for i in rows {
        let mut seen = vec![false; n_cols];
        if !augment(i, ok, &cols, &mut seen, &mut x_of_y) {
            free.push(i);
        }
    }
    (x_of_y, free)
}

fn assemble<T: Scalar>(names: Vec<String>, columns: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Dataset<T>> {
    let attributes = names.into_iter().enumerate().map(|(j, n)| AttributeMeta::numeric(n, j)).collect();
    let columns = columns
        .into_iter()
        .map(|c| Column::Numeric(c.into_iter().map(T::of).collect()))
        .collect();
    Ok(Dataset::new(attributes, columns, Some(labels))?.with_label_name("label"))
}

/// Rows are generated normal-first and then shuffled; returns the permutation
/// `new_position[old_row]`.
fn shuffle_rows<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pos = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        pos[old] = new;
    }
    pos
}

fn permute<T: Copy + Default>(v: &[T], pos: &[usize]) -> Vec<T> {
    let mut out = vec![T::default(); v.len()];
    for (old, &new) in pos.iter().enumerate() {
        out[new] = v[old];
    }
    out
}

/// Synth-C: a single 2D pattern with `round(contamination * n)` outliers.
pub fn gen_synth_c<T: Scalar>(cfg: &BenchConfig, pattern: &PatternSpec) -> Result<Benchmark<T>> {
    cfg.validate()?;
    let mut rng = cfg.rng();
    let n_anom = cfg.n_anomalies();
    let n_norm = cfg.n_instances - n_anom;
    let draw = PatternDraw::new(pattern.clone(), n_norm, &mut rng);
    let mut points = draw.normal.clone();
    points.extend(draw.outliers(n_anom, &mut rng)?);
    let mut labels = vec![false; n_norm];
    labels.extend(std::iter::repeat_n(true, n_anom));
    let pos = shuffle_rows(points.len(), &mut rng);
    let points = permute(&points, &pos);
    let labels = permute(&labels, &pos);
    let anomaly_subspace = (n_norm..cfg.n_instances).map(|old| (pos[old], Some(0))).collect();
    let data = assemble(
        vec!["x".into(), "y".into()],
        vec![points.iter().map(|p| p.0).collect(), points.iter().map(|p| p.1).collect()],
        labels,
    )?;
    Ok(Benchmark {
        data,
        meta: BenchMetadata {
            family: "synth-c".into(),
            config: *cfg,
            patterns: vec![pattern.clone()],
            subspaces: vec![(0, 1)],
            anomaly_subspace: sorted(anomaly_subspace),
            accidental_inliers: vec![],
            clusters: None,
        },
    })
}

fn sorted<T: Ord>(mut v: Vec<T>) -> Vec<T> {
    v.sort();
    v
}

/// Number of relevant subspaces in Synth-C&S.
pub const CS_SUBSPACES: usize = 5;

/// Synth-C&S: five independent patterns on attribute pairs `(0,1) ... (8,9)`,
/// outliers assigned round-robin to one subspace each, and `dims - 10` uniform
/// irrelevant attributes.
pub fn gen_synth_cs<T: Scalar>(cfg: &BenchConfig) -> Result<Benchmark<T>> {
    cfg.validate()?;
    if cfg.dims < 2 * CS_SUBSPACES {
        return Err(Error::InvalidParam(format!("dims must be at least 10, got {}", cfg.dims)));
    }
    let mut rng = cfg.rng();
    let catalog = pattern_catalog();
    let mut picks: Vec<usize> = (0..catalog.len()).collect();
    picks.shuffle(&mut rng);
    let n = cfg.n_instances;
    let n_anom = cfg.n_anomalies();
    let n_norm = n - n_anom;
    let draws: Vec<PatternDraw> = picks[..CS_SUBSPACES]
        .iter()
        .map(|&p| PatternDraw::new(catalog[p].clone(), n_norm, &mut rng))
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); cfg.dims];
    for i in 0..n_norm {
        for (s, d) in draws.iter().enumerate() {
            columns[2 * s].push(d.normal[i].0);
            columns[2 * s + 1].push(d.normal[i].1);
        }
    }
    let mut off: Vec<std::vec::IntoIter<(f64, f64)>> = Vec::with_capacity(CS_SUBSPACES);
    for (s, d) in draws.iter().enumerate() {
        let count = (s..n_anom).step_by(CS_SUBSPACES).count();
        off.push(d.outliers(count, &mut rng)?.into_iter());
    }
    let mut broken = Vec::with_capacity(n_anom);
    for a in 0..n_anom {
        let target = a % CS_SUBSPACES;
        for (s, d) in draws.iter().enumerate() {
            let p = if s == target { off[s].next().expect("one outlier per assignment") } else { d.conforming(&mut rng) };
            columns[2 * s].push(p.0);
            columns[2 * s + 1].push(p.1);
        }
        broken.push(target);
    }
    for col in columns.iter_mut().skip(2 * CS_SUBSPACES) {
        col.extend((0..n).map(|_| rng.random::<f64>()));
    }
    let mut labels = vec![false; n_norm];
    labels.extend(std::iter::repeat_n(true, n_anom));
    let pos = shuffle_rows(n, &mut rng);
    let columns: Vec<Vec<f64>> = columns.iter().map(|c| permute(c, &pos)).collect();
    let labels = permute(&labels, &pos);
    let names = (0..cfg.dims).map(|j| format!("x{j}")).collect();
    let anomaly_subspace = broken.iter().enumerate().map(|(a, &s)| (pos[n_norm + a], Some(s))).collect();
    Ok(Benchmark {
        data: assemble(names, columns, labels)?,
        meta: BenchMetadata {
            family: "synth-cs".into(),
            config: *cfg,
            patterns: draws.iter().map(|d| d.spec.clone()).collect(),
            subspaces: (0..CS_SUBSPACES).map(|s| (2 * s, 2 * s + 1)).collect(),
            anomaly_subspace: sorted(anomaly_subspace),
            accidental_inliers: vec![],
            clusters: None,
        },
    })
}

/// Synth-I: attributes `p0, p1` carry a pattern, `c0, c1` carry 3 to 5 Gaussian
/// clusters. One cluster holds only anomalies: 80% break the pattern, the rest
/// conform to it (accidental inliers).
pub fn gen_synth_i<T: Scalar>(cfg: &BenchConfig, pattern: &PatternSpec) -> Result<Benchmark<T>> {
    cfg.validate()?;
    let mut rng = cfg.rng();
    let n = cfg.n_instances;
    let n_anom = cfg.n_anomalies();
    let n_norm = n - n_anom;
    let k = rng.random_range(3..=5usize);
    let std = 0.04;
    let centers = cluster_centers(k, 0.25, &mut rng)?;
    let anomalous = rng.random_range(0..k);
    let normal_clusters: Vec<usize> = (0..k).filter(|&c| c != anomalous).collect();
    let gauss = Normal::new(0.0, std).expect("valid std");
    // the anomalous cluster is smaller; shrinking it by the same factor keeps its
    // marginal peak density equal to that of a normal cluster
    let per_cluster = n_norm as f64 / normal_clusters.len() as f64;
    let anomalous_std = (std * n_anom as f64 / per_cluster).clamp(0.004, std);
    let anomalous_gauss = Normal::new(0.0, anomalous_std).expect("valid std");

    let draw = PatternDraw::new(pattern.clone(), n_norm, &mut rng);
    let mut rows: Vec<[f64; 4]> = Vec::with_capacity(n);
    for i in 0..n_norm {
        let c = centers[normal_clusters[i % normal_clusters.len()]];
        let p = draw.normal[i];
        rows.push([p.0, p.1, c.0 + gauss.sample(&mut rng), c.1 + gauss.sample(&mut rng)]);
    }
    let n_outliers = ((SYNTH_I_OUTLIER_SHARE * n_anom as f64).round() as usize).min(n_anom);
    let c = centers[anomalous];
    let mut off = draw.outliers(n_outliers, &mut rng)?.into_iter();
    for a in 0..n_anom {
        let p = if a < n_outliers { off.next().expect("one outlier per slot") } else { draw.conforming(&mut rng) };
        rows.push([
            p.0,
            p.1,
            c.0 + anomalous_gauss.sample(&mut rng),
            c.1 + anomalous_gauss.sample(&mut rng),
        ]);
    }
    let mut labels = vec![false; n_norm];
    labels.extend(std::iter::repeat_n(true, n_anom));
    let pos = shuffle_rows(n, &mut rng);
    let rows = permute(&rows, &pos);
    let labels = permute(&labels, &pos);
    let columns = (0..4).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let anomaly_subspace = (0..n_anom)
        .map(|a| (pos[n_norm + a], if a < n_outliers { Some(0) } else { None }))
        .collect();
    let accidental_inliers = sorted((n_outliers..n_anom).map(|a| pos[n_norm + a]).collect());
    Ok(Benchmark {
        data: assemble(vec!["p0".into(), "p1".into(), "c0".into(), "c1".into()], columns, labels)?,
        meta: BenchMetadata {
            family: "synth-i".into(),
            config: *cfg,
            patterns: vec![pattern.clone()],
            subspaces: vec![(0, 1), (2, 3)],
            anomaly_subspace: sorted(anomaly_subspace),
            accidental_inliers,
            clusters: Some(ClusterInfo {
                centers,
                std,
                anomalous,
                anomalous_std,
            }),
        },
    })
}

/// `k` centres in `[0.15, 0.85]^2` at least `min_sep` apart.
fn cluster_centers<R: Rng>(k: usize, min_sep: f64, rng: &mut R) -> Result<Vec<(f64, f64)>> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(k);
    let mut tries = 0;
    while out.len() < k {
        tries += 1;
        if tries > MAX_CENTER_DRAWS {
            return Err(Error::Generation("could not place separated cluster centres".into()));
        }
        let c = (rng.random_range(0.15..0.85), rng.random_range(0.15..0.85));
        if out.iter().all(|o| ((o.0 - c.0).powi(2) + (o.1 - c.1).powi(2)).sqrt() >= min_sep) {
            out.push(c);
        }
    }
    Ok(out)
}

/// Appends `factor * M` attributes drawn i.i.d. from U[0, 1].
pub fn augment_hd<T: Scalar>(d: &Dataset<T>, factor: usize, seed: u64) -> Result<Dataset<T>> {
    if factor == 0 {
        return Ok(d.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = d.n_attributes();
    let extra = (0..factor * m)
        .map(|k| {
            let col = (0..d.n_rows()).map(|_| T::of(rng.random::<f64>())).collect();
            (AttributeMeta::numeric(format!("irrelevant{k}"), m + k), Column::Numeric(col))
        })
        .collect();
    d.append_columns(extra)
}

/// HBOS-style marginal score: sum over attributes of `-ln` of the normalized
/// equal-width histogram height (nominal attributes use relative frequencies).
pub fn marginal_histogram_scores<T: Scalar>(d: &Dataset<T>, bins: usize) -> Vec<f64> {
    let n = d.n_rows();
    let mut scores = vec![0.0; n];
    for j in 0..d.n_attributes() {
        let (bin_of, counts): (Vec<usize>, Vec<usize>) = match d.column(j) {
            Column::Numeric(v) => {
                let v: Vec<f64> = v.iter().map(|x| x.as_f64()).collect();
                let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let width = (hi - lo) / bins as f64;
                let b: Vec<usize> = v
                    .iter()
                    .map(|&x| if width > 0.0 { (((x - lo) / width) as usize).min(bins - 1) } else { 0 })
                    .collect();
                let mut c = vec![0; bins];
                b.iter().for_each(|&k| c[k] += 1);
                (b, c)
            }
            Column::Nominal(v) => {
                let k = d.attribute(j).categories.len();
                let mut c = vec![0; k];
                v.iter().for_each(|&x| c[x as usize] += 1);
                (v.iter().map(|&x| x as usize).collect(), c)
            }
        };
        let peak = *counts.iter().max().unwrap_or(&1) as f64;
        for (s, &b) in scores.iter_mut().zip(&bin_of) {
            *s -= (counts[b] as f64 / peak).ln();
        }
    }
    scores
}

/// AUC of the marginal-histogram probe; near 0.5 when anomalies hide from marginals.
pub fn marginal_probe_auc<T: Scalar>(d: &Dataset<T>, bins: usize) -> Result<f64> {
    let labels = d
        .labels()
        .ok_or_else(|| Error::InvalidParam("probe needs labels".into()))?;
    auc_roc(&marginal_histogram_scores(d, bins), labels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    SynthC,
    SynthCS,
    SynthI,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::SynthC => "synth-c",
            Family::SynthCS => "synth-cs",
            Family::SynthI => "synth-i",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "synth-c" | "synthc" => Ok(Family::SynthC),
            "synth-cs" | "synth-c&s" | "synthcs" => Ok(Family::SynthCS),
            "synth-i" | "synthi" => Ok(Family::SynthI),
            other => Err(Error::InvalidParam(format!("unknown benchmark family '{other}'"))),
        }
    }
}

/// Dimensionalities of the Synth-C&S suite; three datasets each.
pub const CS_DIMS: [usize; 10] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100];

/// Dataset `i` (0-based) of a suite: seed `base_seed + i`; Synth-C and Synth-I cycle
/// through the pattern catalog, Synth-C&S through [`CS_DIMS`] three at a time.
pub fn suite_member<T: Scalar>(family: Family, i: usize, base_seed: u64, base: &BenchConfig) -> Result<Benchmark<T>> {
    let catalog = pattern_catalog();
    let cfg = BenchConfig {
        seed: base_seed + i as u64,
        dims: CS_DIMS[(i / 3) % CS_DIMS.len()],
        ..*base
    };
    match family {
        Family::SynthC => gen_synth_c(&cfg, &catalog[i % catalog.len()]),
        Family::SynthCS => gen_synth_cs(&cfg),
        Family::SynthI => gen_synth_i(&cfg, &catalog[i % catalog.len()]),
    }
}

pub fn write_benchmark<T: Scalar>(b: &Benchmark<T>, csv_path: &Path) -> Result<PathBuf> {
    save_csv(&b.data, csv_path)?;
    let meta_path = csv_path.with_extension("json");
    let mut text = serde_json::to_string_pretty(&b.meta)?;
    text.push('\n');
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(meta_path)
}

/// Writes `count` datasets plus metadata sidecars; returns the CSV paths.
pub fn gen_suite(family: Family, count: usize, base_seed: u64, base: &BenchConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    use rayon::prelude::*;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let b = suite_member::<f64>(family, i, base_seed, base)?;
            let path = out_dir.join(format!("{}-{:02}.csv", family.name(), i + 1));
            write_benchmark(&b, &path)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_thirty_patterns() {
        let c = pattern_catalog();
        assert_eq!(c.len(), 30);
        for fam in [
            PatternFamily::LinearBand,
            PatternFamily::SineCurve,
            PatternFamily::TwoClusters,
            PatternFamily::Ring,
            PatternFamily::Checkerboard,
        ] {
            assert_eq!(c.iter().filter(|p| p.family == fam).count(), 6);
        }
    }

    #[test]
    fn normal_points_stay_in_unit_square_and_on_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in pattern_catalog() {
            for _ in 0..200 {
                let q = p.sample_normal(&mut rng);
                assert!((0.0..=1.0).contains(&q.0) && (0.0..=1.0).contains(&q.1), "{p:?} {q:?}");
                assert!(p.distance(q) <= p.normal_reach() + 1e-9, "{p:?} {q:?}");
            }
        }
    }

    #[test]
    fn two_cluster_swap_is_off_pattern() {
        let p = PatternSpec::clusters(vec![(0.2, 0.8), (0.8, 0.2)], 0.08, 0.03);
        assert!(p.distance((0.2, 0.2)) >= p.anomaly_gap());
        assert_eq!(p.distance((0.2, 0.8)), 0.0);
    }

    #[test]
    fn label_count_matches_contamination() {
        let b = gen_synth_c::<f64>(&BenchConfig::with_seed(5), &pattern_catalog()[0]).unwrap();
        let pos = b.data.labels().unwrap().iter().filter(|&&l| l).count();
        assert_eq!(pos, 50);
        assert_eq!(b.data.n_rows(), 1000);
    }

    #[test]
    fn augment_dimensions() {
        let d = Dataset::<f64>::from_numeric_columns(
            &["a", "b", "c", "d", "e"],
            vec![vec![0.5; 4]; 5],
            None,
        )
        .unwrap();
        assert_eq!(augment_hd(&d, 4, 1).unwrap().n_attributes(), 25);
        assert_eq!(augment_hd(&d, 0, 1).unwrap(), d);
    }

    #[test]
    fn synth_cs_dims() {
        let cfg = BenchConfig {
            seed: 1,
            dims: 10,
            ..Default::default()
        };
        assert_eq!(gen_synth_cs::<f64>(&cfg).unwrap().data.n_attributes(), 10);
        let cfg = BenchConfig { dims: 100, ..cfg };
        assert_eq!(gen_synth_cs::<f64>(&cfg).unwrap().data.n_attributes(), 100);
        let cfg = BenchConfig { dims: 8, ..cfg };
        assert!(gen_synth_cs::<f64>(&cfg).is_err());
    }

    #[test]
    fn covering_pattern_fails_generation() {
        // a band covering the whole square leaves no room for outliers
        let p = PatternSpec::line(0.5, 0.0, 0.5);
        let r = gen_synth_c::<f64>(&BenchConfig::with_seed(1), &p);
        assert!(matches!(r, Err(Error::Generation(_))));
    }
}
