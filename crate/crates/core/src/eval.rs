//! Ranking metrics for labelled anomaly scores and a suite runner producing
//! per-dataset reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{load_csv, normalize_minmax, Dataset, LoadOptions};
use crate::error::{Error, Result};
use crate::model::{AdMercs, Params};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalResult {
    pub auc: f64,
    pub ap: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

fn check<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParam("scores contain NaN".into()));
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass {
            positives: pos,
            negatives: neg,
        });
    }
    Ok((pos, neg))
}

/// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
/// (anomaly, normal) pairs ranked correctly, ties counting one half.
pub fn auc_roc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // sum of midranks of the positives
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        let midrank = (k + 1 + end) as f64 / 2.0;
        let positives = order[k..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += midrank * positives as f64;
        k = end;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Average precision with its tie diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApDetail {
    pub ap: f64,
    /// True when some tied score group holds both classes, making the value depend
    /// on input order.
    pub ties_cross_classes: bool,
}

pub fn average_precision_detail<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<ApDetail> {
    let (pos, _) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable: ties keep input order
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    let mut crosses = false;
    let mut k = 0;
    while k < order.len() && !crosses {
        let mut end = k + 1;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        let p = order[k..end].iter().filter(|&&i| labels[i]).count();
        crosses = p > 0 && p < end - k;
        k = end;
    }
    Ok(ApDetail {
        ap: sum / pos as f64,
        ties_cross_classes: crosses,
    })
}

/// `sum_k precision@k * (recall@k - recall@(k-1))` over descending scores.
///
/// Tied scores keep their input order; a warning is logged when a tie mixes classes.
pub fn average_precision<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64> {
    let d = average_precision_detail(scores, labels)?;
    if d.ties_cross_classes {
        log::warn!("average precision: tied scores span both classes; result depends on input order");
    }
    Ok(d.ap)
}

pub fn evaluate<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<EvalResult> {
    let (n_pos, n_neg) = check(scores, labels)?;
    Ok(EvalResult {
        auc: auc_roc(scores, labels)?,
        ap: average_precision(scores, labels)?,
        n_pos,
        n_neg,
    })
}

/// One row of a suite report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub params_hash: String,
    pub auc: Option<f64>,
    pub ap: Option<f64>,
    pub wall_time_ms: u128,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub rows: Vec<ReportRow>,
}

pub const AGGREGATE_ROW: &str = "MEAN";

impl SuiteReport {
    /// Means of AUC and AP over the datasets that succeeded.
    pub fn mean(&self) -> (Option<f64>, Option<f64>) {
        let avg = |xs: Vec<f64>| {
            if xs.is_empty() {
                None
            } else {
                Some(xs.iter().sum::<f64>() / xs.len() as f64)
            }
        };
        (
            avg(self.rows.iter().filter_map(|r| r.auc).collect()),
            avg(self.rows.iter().filter_map(|r| r.ap).collect()),
        )
    }

    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// CSV with header `dataset,params_hash,auc,ap,wall_time_ms,error` and a trailing
    /// aggregate row named [`AGGREGATE_ROW`].
    pub fn to_csv(&self) -> String {
        let fmt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        let mut s = String::from("dataset,params_hash,auc,ap,wall_time_ms,error\n");
        for r in &self.rows {
            let err = r
                .error
                .as_deref()
                .map(|e| format!("\"{}\"", e.replace('"', "'")))
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.dataset,
                r.params_hash,
                fmt(r.auc),
                fmt(r.ap),
                r.wall_time_ms,
                err
            );
        }
        let (auc, ap) = self.mean();
        let hash = self.rows.first().map(|r| r.params_hash.as_str()).unwrap_or("");
        let total: u128 = self.rows.iter().map(|r| r.wall_time_ms).sum();
        let failed = self.n_failed();
        let _ = writeln!(
            s,
            "{AGGREGATE_ROW},{hash},{},{},{total},{}",
            fmt(auc),
            fmt(ap),
            if failed > 0 { format!("{failed} failed") } else { String::new() }
        );
        s
    }
}

/// Settings of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentOptions {
    pub params: Params,
    pub label_column: String,
    pub normalize: bool,
}

impl ExperimentOptions {
    pub fn new(params: Params) -> Self {
        ExperimentOptions {
            params,
            label_column: "label".into(),
            normalize: false,
        }
    }
}

/// CSV files of a suite directory in name order.
pub fn suite_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn run_one(path: &Path, opts: &ExperimentOptions) -> Result<EvalResult> {
    let d: Dataset<f64> = load_csv(path, &LoadOptions::with_label(opts.label_column.clone()))?;
    let d = if opts.normalize { normalize_minmax(&d) } else { d };
    let labels = d
        .labels()
        .ok_or_else(|| Error::LabelColumn(opts.label_column.clone()))?
        .to_vec();
    let fitted = AdMercs::fit(&d, &opts.params)?;
    evaluate(&fitted.state.delta, &labels)
}

/// Fits and scores every dataset of a suite; failures become report rows instead of
/// aborting the run.
pub fn run_experiment(suite_dir: &Path, opts: &ExperimentOptions) -> Result<SuiteReport> {
    let files = suite_files(suite_dir)?;
    if files.is_empty() {
        return Err(Error::Empty(format!("no .csv files in {}", suite_dir.display())));
    }
    let hash = opts.params.hash();
    let rows = files
        .par_iter()
        .map(|path| {
            let start = Instant::now();
            let res = run_one(path, opts);
            let dataset = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let wall_time_ms = start.elapsed().as_millis();
            match res {
                Ok(r) => ReportRow {
                    dataset,
                    params_hash: hash.clone(),
                    auc: Some(r.auc),
                    ap: Some(r.ap),
                    wall_time_ms,
                    error: None,
                },
                Err(e) => ReportRow {
                    dataset,
                    params_hash: hash.clone(),
                    auc: None,
                    ap: None,
                    wall_time_ms,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SuiteReport { rows })
}
