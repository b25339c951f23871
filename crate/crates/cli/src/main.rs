use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use admercs::bench::{augment_hd, gen_synth_c, gen_synth_cs, gen_synth_i, pattern_catalog, suite_member, write_benchmark, BenchConfig, Family};
use admercs::data::{load_csv, normalize_minmax, read_schema, Column, LoadOptions};
use admercs::eval::{evaluate, run_experiment, ExperimentOptions, AGGREGATE_ROW};
use admercs::explain::{explain_instance, list_anomalous_contexts, DEFAULT_LAMBDA_THRESHOLD};
use admercs::{AdMercs, Dataset, Error, Instance, Params};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

const HD_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Parser, Debug)]
#[command(name = "admercs", version, about = "Tree-ensemble anomaly detection with explanations")]
struct Cli {
    /// Seed for every random choice (benchmark generation, irrelevant attributes).
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "ADMERCS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a detector and write the model file.
    Fit(FitArgs),
    /// Score a dataset with a saved model.
    Score(ScoreArgs),
    /// Explain why instances are anomalous.
    Explain(ExplainArgs),
    /// Generate a synthetic benchmark suite.
    GenBench(GenBenchArgs),
    /// Compute AUC and AP from scores and labels, or summarize a suite report.
    Eval(EvalArgs),
    /// Fit and evaluate every dataset of a suite directory.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Column holding ground-truth labels (1/anomaly = anomalous); excluded from the attributes.
    #[arg(long)]
    label: Option<String>,
    /// File of `name=numeric|nominal` lines forcing attribute kinds.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Min-max scale numeric attributes of this file to [0, 1].
    #[arg(long)]
    normalize: bool,
}

#[derive(Args, Debug, Default)]
struct ParamArgs {
    /// Named hyperparameter set: default, campos, campos-hd, hics, synth-c, synth-cs, synth-i.
    #[arg(long)]
    preset: Option<String>,
    /// File of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Minimum leaf size as a fraction of the training set.
    #[arg(long)]
    min_samples_leaf: Option<f64>,
    #[arg(long)]
    min_impurity_decrease: Option<f64>,
    /// Fraction of a context's members considered typical.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    gamma_delta: Option<f64>,
    #[arg(long)]
    gamma_lambda: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-instance training scores (CSV).
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Per-context scores (CSV).
    #[arg(long)]
    contexts: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ScoreMode {
    /// Rerun the score iteration, treating the data as the training set.
    Train,
    /// Score each row independently against the frozen context scores.
    New,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = ScoreMode::New)]
    mode: ScoreMode,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Row (0-based) to explain.
    #[arg(long, conflicts_with = "top", required_unless_present = "top")]
    instance: Option<usize>,
    /// Explain the N highest-scoring rows.
    #[arg(long)]
    top: Option<usize>,
    /// Explanations per instance.
    #[arg(long, default_value_t = 3)]
    per_instance: usize,
    /// Context score at which a context counts as anomalous.
    #[arg(long, default_value_t = DEFAULT_LAMBDA_THRESHOLD)]
    lambda_threshold: f64,
    /// Write JSON instead of text.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenBenchArgs {
    /// synth-c, synth-cs or synth-i.
    #[arg(long)]
    family: Family,
    #[arg(long, default_value_t = 30)]
    count: usize,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n_instances: usize,
    #[arg(long, default_value_t = 0.05)]
    contamination: f64,
    /// Synth-C&S dimensionality for every dataset; by default the suite cycles through 10..100.
    #[arg(long)]
    dims: Option<usize>,
    /// Append factor x M uniform irrelevant attributes to every dataset.
    #[arg(long, default_value_t = 0)]
    hd_factor: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// CSV with a score column.
    #[arg(long, requires = "labels", conflicts_with = "report")]
    scores: Option<PathBuf>,
    /// CSV with a label column; may be the scores file itself.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value = "delta")]
    score_column: String,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Suite report written by `experiment`.
    #[arg(long, required_unless_present = "scores")]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Directory of labeled CSV files.
    #[arg(long)]
    suite: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value = "label")]
    label: String,
    #[arg(long)]
    normalize: bool,
    /// Report CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ParamArgs {
    /// Preset, then config file, then flags.
    fn resolve(&self) -> Result<Params> {
        let mut entries: Vec<(String, String)> = Vec::new();
        let mut preset = None;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            for (ln, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| anyhow!("config {} line {}: expected key = value", path.display(), ln + 1))?;
                let (k, v) = (k.trim().to_string(), v.trim().to_string());
                if k == "preset" {
                    preset = Some(v);
                } else {
                    entries.push((k, v));
                }
            }
        }
        let name = self.preset.clone().or(preset).unwrap_or_else(|| "default".into());
        let mut p = Params::preset(&name).ok_or_else(|| Error::InvalidParam(format!("unknown preset '{name}'")))?;
        for (k, v) in &entries {
            p.set(k, v)?;
        }
        let flags = [
            ("max_depth", self.max_depth.map(|v| v.to_string())),
            ("min_samples_leaf", self.min_samples_leaf.map(|v| v.to_string())),
            ("min_impurity_decrease", self.min_impurity_decrease.map(|v| v.to_string())),
            ("rho", self.rho.map(|v| v.to_string())),
            ("gamma_delta", self.gamma_delta.map(|v| v.to_string())),
            ("gamma_lambda", self.gamma_lambda.map(|v| v.to_string())),
            ("iterations", self.iterations.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                p.set(k, &v)?;
            }
        }
        p.validate()?;
        Ok(p)
    }
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let mut opts = LoadOptions {
            label_column: self.label.clone(),
            ..Default::default()
        };
        if let Some(s) = &self.schema {
            opts.schema = read_schema(s)?;
        }
        let d = load_csv(&self.data, &opts)?;
        Ok(if self.normalize { normalize_minmax(&d) } else { d })
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn scores_csv(scores: &[f64], labels: Option<&[bool]>) -> String {
    let mut s = String::from(if labels.is_some() { "row,delta,label\n" } else { "row,delta\n" });
    for (i, d) in scores.iter().enumerate() {
        match labels {
            Some(l) => writeln!(s, "{i},{d},{}", u8::from(l[i])),
            None => writeln!(s, "{i},{d}"),
        }
        .expect("writing to a string");
    }
    s
}

fn metrics_suffix(scores: &[f64], labels: Option<&[bool]>) -> String {
    match labels.map(|l| evaluate(scores, l)) {
        Some(Ok(r)) => format!(" auc={:.6} ap={:.6}", r.auc, r.ap),
        _ => String::new(),
    }
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let params = a.params.resolve()?;
    let d = a.data.load()?;
    let fitted = AdMercs::fit(&d, &params)?;
    fitted.model.save(&a.out)?;
    let delta = &fitted.state.delta;
    if let Some(p) = &a.scores {
        write_output(Some(p), &scores_csv(delta, d.labels()))?;
    }
    if let Some(p) = &a.contexts {
        let mut s = String::from("context,tree,target,leaf,members,lambda\n");
        for c in 0..fitted.model.n_contexts() {
            let (t, leaf) = fitted.model.context(c);
            let tree = &fitted.model.trees()[t];
            writeln!(
                s,
                "{c},{t},{},{leaf},{},{}",
                fitted.model.attributes()[tree.target].name,
                tree.leaf_node(leaf).members.len(),
                fitted.model.lambda()[c]
            )?;
        }
        write_output(Some(p), &s)?;
    }
    println!(
        "fitted rows={} trees={} contexts={} iterations={} params_hash={}{}",
        d.n_rows(),
        fitted.model.trees().len(),
        fitted.model.n_contexts(),
        fitted.state.iterations,
        params.hash(),
        metrics_suffix(delta, d.labels())
    );
    Ok(())
}

/// The rows of `d` as a dataset with exactly the model's attributes, matched by name.
fn project(d: &Dataset, model: &AdMercs, rows: &[Instance]) -> Result<Dataset> {
    let schema = model.attributes();
    let columns = schema
        .iter()
        .enumerate()
        .map(|(j, meta)| {
            if meta.is_numeric() {
                Ok(Column::Numeric(rows.iter().map(|r| r[j].as_num().unwrap_or(f64::NAN)).collect()))
            } else {
                rows.iter()
                    .map(|r| r[j].as_cat().flatten())
                    .collect::<Option<Vec<u32>>>()
                    .map(Column::Nominal)
                    .ok_or_else(|| anyhow!("attribute '{}' has categories unseen in training; use --mode new", meta.name))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = d.labels().map(<[bool]>::to_vec);
    Ok(Dataset::new(schema.to_vec(), columns, labels)?)
}

fn score_rows(model: &AdMercs, d: &Dataset, mode: ScoreMode) -> Result<Vec<f64>> {
    let rows = d.instances_for(model.attributes())?;
    Ok(match mode {
        ScoreMode::New => model.score_instances(&rows)?,
        ScoreMode::Train => model.rescore(&project(d, model, &rows)?)?.delta,
    })
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let model = AdMercs::load(&a.model)?;
    let d = a.data.load()?;
    let scores = score_rows(&model, &d, a.mode)?;
    write_output(a.out.as_deref(), &scores_csv(&scores, d.labels()))?;
    if a.out.is_some() {
        println!("scored rows={}{}", scores.len(), metrics_suffix(&scores, d.labels()));
    }
    Ok(())
}

fn cmd_explain(a: &ExplainArgs) -> Result<()> {
    let model = AdMercs::load(&a.model)?;
    let d = a.data.load()?;
    let rows = d.instances_for(model.attributes())?;
    let scores = model.score_instances(&rows)?;
    let chosen: Vec<usize> = match (a.instance, a.top) {
        (Some(i), _) => {
            if i >= rows.len() {
                bail!(Error::InvalidParam(format!("instance {i} out of range (0..{})", rows.len())));
            }
            vec![i]
        }
        (None, Some(n)) => {
            let mut order: Vec<usize> = (0..rows.len()).collect();
            order.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]).then(x.cmp(&y)));
            order.truncate(n);
            order
        }
        (None, None) => unreachable!("clap requires one of them"),
    };
    let threshold = a.lambda_threshold;
    let explained = chosen
        .iter()
        .map(|&i| Ok((i, explain_instance(&model, &rows[i], a.per_instance, threshold)?)))
        .collect::<Result<Vec<_>>>()?;
    let contexts = list_anomalous_contexts(&model, threshold);
    let text = if a.json {
        let instances: Vec<serde_json::Value> = explained
            .iter()
            .map(|(i, ex)| serde_json::json!({ "instance": i, "score": scores[*i], "explanations": ex }))
            .collect();
        let mut s = serde_json::to_string_pretty(&serde_json::json!({
            "instances": instances,
            "anomalous_contexts": contexts,
        }))?;
        s.push('\n');
        s
    } else {
        let mut s = String::new();
        for (i, ex) in &explained {
            writeln!(s, "instance {i} (score {:.4})", scores[*i])?;
            if ex.is_empty() {
                writeln!(s, "  typical in every context")?;
            }
            for (k, e) in ex.iter().enumerate() {
                writeln!(s, "  {}. {}", k + 1, e.render(model.attributes(), &model.trees()[e.tree]))?;
            }
        }
        writeln!(s, "anomalous contexts (score >= {threshold}): {}", contexts.len())?;
        for c in &contexts {
            writeln!(s, "  {}", c.render())?;
        }
        s
    };
    write_output(a.out.as_deref(), &text)
}

fn cmd_gen_bench(a: &GenBenchArgs, seed: u64) -> Result<()> {
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let base = BenchConfig {
        seed,
        n_instances: a.n_instances,
        contamination: a.contamination,
        ..BenchConfig::default()
    };
    base.validate()?;
    let catalog = pattern_catalog();
    let paths = (0..a.count)
        .into_par_iter()
        .map(|i| -> Result<PathBuf> {
            let mut b = match a.dims {
                Some(dims) => {
                    let cfg = BenchConfig { seed: seed + i as u64, dims, ..base };
                    match a.family {
                        Family::SynthC => gen_synth_c::<f64>(&cfg, &catalog[i % catalog.len()])?,
                        Family::SynthCS => gen_synth_cs::<f64>(&cfg)?,
                        Family::SynthI => gen_synth_i::<f64>(&cfg, &catalog[i % catalog.len()])?,
                    }
                }
                None => suite_member(a.family, i, seed, &base)?,
            };
            if a.hd_factor > 0 {
                // offset keeps the irrelevant attributes independent of the generator stream
                b.data = augment_hd(&b.data, a.hd_factor, b.meta.config.seed.wrapping_add(HD_SEED_OFFSET))?;
            }
            let path = a.out_dir.join(format!("{}-{:02}.csv", a.family.name(), i + 1));
            write_benchmark(&b, &path)?;
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    println!("generated {} {} datasets in {}", paths.len(), a.family.name(), a.out_dir.display());
    Ok(())
}

/// Raw cells of one named column.
fn read_column(path: &Path, name: &str) -> Result<Vec<String>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let j = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Schema(format!("column '{name}' not found in {}", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        out.push(rec.get(j).unwrap_or("").to_string());
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> anyhow::Error {
    if e.is_io_error() {
        if let csv::ErrorKind::Io(source) = e.into_kind() {
            return Error::Io { path: path.to_path_buf(), source }.into();
        }
        unreachable!("checked above");
    }
    Error::Csv(e).into()
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    if let Some(report) = &a.report {
        let text = fs::read_to_string(report).with_context(|| format!("reading {}", report.display()))?;
        let mut auc = Vec::new();
        let mut ap = Vec::new();
        let mut failed = 0;
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.splitn(6, ',').collect();
            if f.len() < 5 {
                bail!(Error::InvalidParam(format!("malformed report line '{line}'")));
            }
            if f[0] == AGGREGATE_ROW {
                continue;
            }
            match (f[2].parse::<f64>(), f[3].parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    auc.push(x);
                    ap.push(y);
                }
                _ => failed += 1,
            }
        }
        if auc.is_empty() {
            bail!(Error::Empty("report has no evaluated datasets".into()));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!("datasets={} failed={failed} auc={:.6} ap={:.6}", auc.len(), mean(&auc), mean(&ap));
        return Ok(());
    }
    let scores_path = a.scores.as_ref().expect("clap enforces --scores or --report");
    let labels_path = a.labels.as_ref().expect("clap enforces --labels with --scores");
    let scores = read_column(scores_path, &a.score_column)?
        .iter()
        .enumerate()
        .map(|(r, c)| {
            c.parse::<f64>()
                .map_err(|_| Error::InvalidDataset(format!("row {}: score '{c}' is not a number", r + 2)))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let positives = LoadOptions::default().positive_tokens;
    let labels: Vec<bool> = read_column(labels_path, &a.label_column)?
        .iter()
        .map(|c| positives.iter().any(|p| p.eq_ignore_ascii_case(c)))
        .collect();
    let r = evaluate(&scores, &labels)?;
    println!("auc={:.6} ap={:.6} n_pos={} n_neg={}", r.auc, r.ap, r.n_pos, r.n_neg);
    Ok(())
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let opts = ExperimentOptions {
        params: a.params.resolve()?,
        label_column: a.label.clone(),
        normalize: a.normalize,
    };
    let report = run_experiment(&a.suite, &opts)?;
    write_output(a.out.as_deref(), &report.to_csv())?;
    let (auc, ap) = report.mean();
    let fmt = |x: Option<f64>| x.map_or("nan".to_string(), |v| format!("{v:.6}"));
    eprintln!(
        "experiment datasets={} failed={} auc={} ap={}",
        report.rows.len(),
        report.n_failed(),
        fmt(auc),
        fmt(ap)
    );
    Ok(())
}

/// Short machine-readable class of an error.
fn error_code(e: &anyhow::Error) -> &'static str {
    match e.downcast_ref::<Error>() {
        Some(Error::Io { .. }) => "io",
        Some(Error::Csv(_) | Error::RowWidth { .. } | Error::MissingCell { .. } | Error::Empty(_)) => "data",
        Some(Error::InvalidDataset(_) | Error::Degenerate) => "data",
        Some(Error::Schema(_) | Error::LabelColumn(_) | Error::KindMismatch { .. }) => "schema",
        Some(Error::SingleClass { .. } | Error::LengthMismatch(..)) => "eval",
        Some(Error::InvalidParam(_)) => "param",
        Some(Error::ModelFormat(_) | Error::ModelVersion { .. } | Error::Json(_)) => "model",
        Some(Error::Generation(_)) => "generation",
        None if e.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "error",
    }
}

fn fail(code: &str, message: &str) -> ExitCode {
    let one_line = message.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error[{code}]: {one_line}");
    ExitCode::from(if code == "usage" { 2 } else { 1 })
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Score(a) => cmd_score(a),
        Command::Explain(a) => cmd_explain(a),
        Command::GenBench(a) => cmd_gen_bench(a, cli.seed),
        Command::Eval(a) => cmd_eval(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.kind().to_string();
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or(&text).trim_start_matches("error: ");
            return fail("usage", first);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // causes already quoted by their parent's message are skipped
            let mut msg = String::new();
            for cause in e.chain().map(ToString::to_string) {
                if !msg.contains(&cause) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&cause);
                }
            }
            fail(error_code(&e), &msg)
        }
    }
}
