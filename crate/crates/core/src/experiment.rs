//! Benchmark harness: for every ratio × method × repetition, build the ratio
//! dataset, split, standardize, fit and score on the held-out part.
//!
//! All randomness is derived from the master seed. Data preparation depends
//! only on `(ratio, repetition)`, so every method sees the same split; the
//! fitting seed depends on `(ratio, method, repetition)`, so adding a method
//! never changes another method's rows.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_baseline, BaselineSpec, FittedSvm};
use crate::data::{self, Dataset, RatioSpec};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::metrics::{evaluate, MetricsReport};
use crate::mmsmote::{fit_mm_smote, predict_mm, Diagnostics, MmModel, MmParams, SyntheticCount};
use crate::seed;
use crate::svm::SmoParams;

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "MMSMOTE_WORKERS";

pub const CSV_HEADER: &str = "ratio,method,rep,seed,precision,recall,f1,gmean,train_ms,status";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: String,
        #[serde(default = "default_positive_value")]
        positive_value: String,
    },
    Blobs {
        n_majority: usize,
        n_minority: usize,
        separation: f64,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_label_column() -> String {
    "Class".into()
}
fn default_positive_value() -> String {
    "1".into()
}
fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PlainSvm,
    ClassWeightedSvm,
    RusSvm,
    SmoteSvm,
    MmSmote,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::PlainSvm,
        Method::ClassWeightedSvm,
        Method::RusSvm,
        Method::SmoteSvm,
        Method::MmSmote,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::PlainSvm => "plain_svm",
            Method::ClassWeightedSvm => "class_weighted_svm",
            Method::RusSvm => "rus_svm",
            Method::SmoteSvm => "smote_svm",
            Method::MmSmote => "mm_smote",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Fixed tag for seed derivation, independent of list position.
    fn seed_tag(&self) -> u64 {
        match self {
            Method::PlainSvm => 1,
            Method::ClassWeightedSvm => 2,
            Method::RusSvm => 3,
            Method::SmoteSvm => 4,
            Method::MmSmote => 5,
        }
    }
}

fn default_ratios() -> Vec<f64> {
    vec![2.0, 4.0, 6.0, 8.0, 10.0, 70.0]
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_one() -> usize {
    1
}
fn default_c() -> f64 {
    1.0
}
fn default_k() -> usize {
    5
}
fn default_tol() -> f64 {
    1e-3
}
fn default_max_passes() -> usize {
    10_000
}
fn default_test_fraction() -> f64 {
    0.3
}
fn default_n_clusters() -> usize {
    8
}
fn default_output() -> PathBuf {
    PathBuf::from("results.csv")
}

/// Benchmark configuration, read from JSON. Only `data` is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_one")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    /// `None` picks an RBF kernel from the training data of each run.
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_passes")]
    pub max_passes: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_n_clusters")]
    pub n_clusters: usize,
    /// Synthetic count for SMOTE and MM-SMOTE.
    #[serde(default = "default_synthetic")]
    pub synthetic: SyntheticCount,
    /// Majority rows per minority row kept by the undersampling baseline.
    #[serde(default = "default_rus_ratio")]
    pub rus_ratio: f64,
    /// Write wall-clock fit times into `train_ms`; otherwise the column is 0
    /// and output files are byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_synthetic() -> SyntheticCount {
    SyntheticCount::Auto
}
fn default_rus_ratio() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn with_data(data: DataSource) -> Self {
        ExperimentConfig {
            data,
            ratios: default_ratios(),
            methods: default_methods(),
            repetitions: 1,
            seed: 0,
            kernel: None,
            c: default_c(),
            k: default_k(),
            tol: default_tol(),
            max_passes: default_max_passes(),
            test_fraction: default_test_fraction(),
            n_clusters: default_n_clusters(),
            synthetic: SyntheticCount::Auto,
            rus_ratio: default_rus_ratio(),
            record_timing: false,
            output: default_output(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.ratios.is_empty() || self.ratios.iter().any(|r| !(*r >= 1.0 && r.is_finite())) {
            return bad(format!("ratios must be non-empty and >= 1, got {:?}", self.ratios));
        }
        if self.methods.is_empty() {
            return bad("methods must be non-empty".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        if !(self.c > 0.0) || !(self.tol > 0.0) || self.k == 0 || self.n_clusters == 0 {
            return bad("c, tol, k and n_clusters must be positive".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} not in (0, 1)", self.test_fraction));
        }
        if !(self.rus_ratio > 0.0) {
            return bad("rus_ratio must be > 0".into());
        }
        if let Some(k) = &self.kernel {
            k.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn smo(&self, seed: u64) -> SmoParams {
        SmoParams {
            tol: self.tol,
            max_passes: self.max_passes,
            seed,
        }
    }
}

pub fn load_source(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Csv {
            path,
            label_column,
            positive_value,
        } => data::load_csv(path, label_column, positive_value),
        DataSource::Blobs {
            n_majority,
            n_minority,
            separation,
            dim,
            seed,
        } => data::gen_gaussian_blobs(*n_majority, *n_minority, *separation, *dim, *seed),
    }
}

/// Standardized train/test split for one `(ratio, repetition)` cell.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub kernel: KernelSpec,
}

pub fn data_seed(master: u64, ratio: f64, rep: usize) -> u64 {
    seed::derive(master, &[ratio.to_bits(), rep as u64, 0xDA7A])
}

pub fn child_seed(master: u64, ratio: f64, method: Method, rep: usize) -> u64 {
    seed::derive(master, &[ratio.to_bits(), method.seed_tag(), rep as u64])
}

pub fn prepare(full: &Dataset, config: &ExperimentConfig, ratio: f64, rep: usize) -> Result<Prepared> {
    let s = data_seed(config.seed, ratio, rep);
    let spec = RatioSpec::new(ratio, config.n_clusters, seed::derive(s, &[0]))?;
    let shaped = data::make_ratio_dataset(full, &spec)?;
    let (train, test) = data::stratified_split(&shaped, config.test_fraction, seed::derive(s, &[1]))?;
    let (train, mut others, _) = data::standardize(&train, &[&test])?;
    let kernel = config
        .kernel
        .unwrap_or_else(|| KernelSpec::default_rbf(train.features()));
    Ok(Prepared {
        train,
        test: others.remove(0),
        kernel,
    })
}

#[derive(Debug, Clone)]
pub enum Fitted {
    Svm(FittedSvm),
    Mm(Box<MmModel>),
}

impl Fitted {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<i8>> {
        match self {
            Fitted::Svm(m) => m.predict(x),
            Fitted::Mm(m) => predict_mm(m, x),
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            Fitted::Svm(m) => m.model.converged,
            Fitted::Mm(m) => m.base.converged && m.model.converged,
        }
    }
}

pub fn fit_method(method: Method, prepared: &Prepared, config: &ExperimentConfig, seed: u64) -> Result<Fitted> {
    let smo = config.smo(seed);
    let baseline = match method {
        Method::MmSmote => {
            let params = MmParams {
                c: config.c,
                k: config.k,
                synthetic: config.synthetic,
                smo,
                seed,
            };
            return Ok(Fitted::Mm(Box::new(fit_mm_smote(&prepared.train, &prepared.kernel, &params)?)));
        }
        Method::PlainSvm => BaselineSpec::PlainSvm,
        Method::ClassWeightedSvm => BaselineSpec::ClassWeightedSvm,
        Method::RusSvm => BaselineSpec::RusSvm {
            target_ratio: config.rus_ratio,
        },
        Method::SmoteSvm => BaselineSpec::SmoteSvm {
            k: config.k,
            synthetic: config.synthetic,
        },
    };
    Ok(Fitted::Svm(fit_baseline(
        &prepared.train,
        &prepared.kernel,
        &baseline,
        config.c,
        &smo,
        seed,
    )?))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok,
    NotConverged,
    Failed(String),
}

impl RunStatus {
    fn label(&self) -> String {
        match self {
            RunStatus::Ok => "ok".into(),
            RunStatus::NotConverged => "not_converged".into(),
            RunStatus::Failed(msg) => {
                let clean: String = msg
                    .chars()
                    .map(|c| if c == ',' || c == '\n' || c == '"' { ' ' } else { c })
                    .collect();
                format!("error: {clean}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub ratio: f64,
    pub method: Method,
    pub rep: usize,
    pub seed: u64,
    pub metrics: Option<MetricsReport>,
    pub train_ms: u128,
    pub status: RunStatus,
    /// Oversampling diagnostics of MM-SMOTE runs.
    pub diagnostics: Option<Diagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanRow {
    pub ratio: f64,
    pub method: Method,
    pub metrics: Option<MetricsReport>,
    pub train_ms: u128,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub runs: Vec<RunRow>,
    pub means: Vec<MeanRow>,
}

impl ExperimentResults {
    pub fn mean(&self, ratio: f64, method: Method) -> Option<&MeanRow> {
        self.means
            .iter()
            .find(|m| m.ratio == ratio && m.method == method)
    }

    /// CSV with one row per run followed by the mean row of its
    /// `(ratio, method)` cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let metric_cols = |m: &Option<MetricsReport>| match m {
            Some(m) => format!("{:.6},{:.6},{:.6},{:.6}", m.precision, m.recall, m.f1, m.gmean),
            None => ",,,".into(),
        };
        for mean in &self.means {
            for run in self
                .runs
                .iter()
                .filter(|r| r.ratio == mean.ratio && r.method == mean.method)
            {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    run.ratio,
                    run.method.name(),
                    run.rep,
                    run.seed,
                    metric_cols(&run.metrics),
                    run.train_ms,
                    run.status.label()
                );
            }
            let status = if mean.n_runs == 0 {
                "no_successful_runs".to_string()
            } else {
                format!("mean_of_{}", mean.n_runs)
            };
            let _ = writeln!(
                out,
                "{},{},mean,,{},{},{}",
                mean.ratio,
                mean.method.name(),
                metric_cols(&mean.metrics),
                mean.train_ms,
                status
            );
        }
        out
    }
}

#[derive(Serialize)]
struct DiagnosticsEntry<'a> {
    ratio: f64,
    rep: usize,
    seed: u64,
    #[serde(flatten)]
    diagnostics: &'a Diagnostics,
}

impl ExperimentResults {
    /// JSON array with the diagnostics of every MM-SMOTE run, in CSV order.
    pub fn diagnostics_json(&self) -> Result<String> {
        let entries: Vec<DiagnosticsEntry<'_>> = self
            .runs
            .iter()
            .filter_map(|r| {
                r.diagnostics.as_ref().map(|d| DiagnosticsEntry {
                    ratio: r.ratio,
                    rep: r.rep,
                    seed: r.seed,
                    diagnostics: d,
                })
            })
            .collect();
        Ok(serde_json::to_string_pretty(&entries)?)
    }
}

/// `results.csv` → `results.diagnostics.json`.
pub fn diagnostics_path(output: &Path) -> PathBuf {
    output.with_extension("diagnostics.json")
}

fn run_cell(
    prepared: &Result<Prepared>,
    config: &ExperimentConfig,
    ratio: f64,
    method: Method,
    rep: usize,
) -> RunRow {
    let seed = child_seed(config.seed, ratio, method, rep);
    let mut row = RunRow {
        ratio,
        method,
        rep,
        seed,
        metrics: None,
        train_ms: 0,
        status: RunStatus::Ok,
        diagnostics: None,
    };
    let prepared = match prepared {
        Ok(p) => p,
        Err(e) => {
            row.status = RunStatus::Failed(e.to_string());
            return row;
        }
    };
    let started = Instant::now();
    let fitted = fit_method(method, prepared, config, seed);
    let elapsed = started.elapsed().as_millis();
    if config.record_timing {
        row.train_ms = elapsed;
    }
    let outcome = fitted.and_then(|f| {
        if let Fitted::Mm(m) = &f {
            row.diagnostics = Some(m.diagnostics.clone());
        }
        let pred = f.predict(prepared.test.features().view())?;
        Ok((evaluate(prepared.test.labels(), &pred)?, f.converged()))
    });
    match outcome {
        Ok((metrics, converged)) => {
            row.metrics = Some(metrics);
            if !converged {
                row.status = RunStatus::NotConverged;
            }
        }
        Err(e) => row.status = RunStatus::Failed(e.to_string()),
    }
    row
}

/// Runs every cell. Stage failures are recorded per row; only a data source
/// that cannot be loaded aborts the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let full = load_source(&config.data)?;
    full.require_both_classes()?;

    let body = || {
        let cells: Vec<(usize, usize)> = (0..config.ratios.len())
            .flat_map(|r| (0..config.repetitions).map(move |rep| (r, rep)))
            .collect();
        let prepared: Vec<Result<Prepared>> = cells
            .par_iter()
            .map(|&(r, rep)| prepare(&full, config, config.ratios[r], rep))
            .collect();

        let jobs: Vec<(usize, Method, usize)> = (0..config.ratios.len())
            .flat_map(|r| {
                config
                    .methods
                    .iter()
                    .flat_map(move |&m| (0..config.repetitions).map(move |rep| (r, m, rep)))
            })
            .collect();
        jobs.par_iter()
            .map(|&(r, method, rep)| {
                let p = &prepared[r * config.repetitions + rep];
                run_cell(p, config, config.ratios[r], method, rep)
            })
            .collect::<Vec<RunRow>>()
    };
    let runs = match worker_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(body),
        None => body(),
    };

    let mut means = Vec::new();
    for &ratio in &config.ratios {
        for &method in &config.methods {
            let ok: Vec<&RunRow> = runs
                .iter()
                .filter(|r| r.ratio == ratio && r.method == method && r.metrics.is_some())
                .collect();
            let n = ok.len();
            let metrics = (n > 0).then(|| {
                let avg = |f: fn(&MetricsReport) -> f64| {
                    ok.iter().map(|r| f(r.metrics.as_ref().unwrap())).sum::<f64>() / n as f64
                };
                MetricsReport {
                    precision: avg(|m| m.precision),
                    recall: avg(|m| m.recall),
                    f1: avg(|m| m.f1),
                    gmean: avg(|m| m.gmean),
                }
            });
            let train_ms = if n > 0 {
                ok.iter().map(|r| r.train_ms).sum::<u128>() / n as u128
            } else {
                0
            };
            means.push(MeanRow {
                ratio,
                method,
                metrics,
                train_ms,
                n_runs: n,
            });
        }
    }
    Ok(ExperimentResults { runs, means })
}

fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs the experiment and writes the CSV to `config.output`. When MM-SMOTE
/// is among the methods its diagnostics go to [`diagnostics_path`].
pub fn run_to_file(config: &ExperimentConfig) -> Result<ExperimentResults> {
    let results = run_experiment(config)?;
    std::fs::write(&config.output, results.to_csv()).map_err(|e| Error::io(&config.output, e))?;
    if config.methods.contains(&Method::MmSmote) {
        let path = diagnostics_path(&config.output);
        std::fs::write(&path, results.diagnostics_json()?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::with_data(DataSource::Blobs {
            n_majority: 300,
            n_minority: 30,
            separation: 1.5,
            dim: 2,
            seed: 1,
        });
        cfg.ratios = vec![2.0];
        cfg.methods = vec![Method::PlainSvm];
        cfg
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = ExperimentConfig::from_json(
            r#"{"data": {"type": "blobs", "n_majority": 10, "n_minority": 2, "separation": 1.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.ratios, default_ratios());
        assert_eq!(cfg.methods.len(), 5);
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.test_fraction, 0.3);
        assert!(ExperimentConfig::from_json(r#"{"data": {"type": "blobs"}}"#).is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"data": {"type": "csv", "path": "x.csv"}, "repetitions": 0}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"data": {"type": "csv", "path": "x.csv"}, "bogus": 1}"#
        )
        .is_err());
        let cfg = ExperimentConfig::from_json(
            r#"{"data": {"type": "csv", "path": "x.csv"}, "kernel": {"family": "rbf", "gamma": 0.5},
                "synthetic": {"fixed": 10}, "methods": ["mm_smote"]}"#,
        )
        .unwrap();
        assert_eq!(cfg.kernel, Some(KernelSpec::Rbf { gamma: 0.5 }));
        assert_eq!(cfg.synthetic, SyntheticCount::Fixed(10));
    }

    #[test]
    fn single_cell_gives_one_run_and_one_mean() {
        let res = run_experiment(&blobs_config()).unwrap();
        assert_eq!(res.runs.len(), 1);
        assert_eq!(res.means.len(), 1);
        let csv = res.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(res.runs[0].status, RunStatus::Ok);
    }

    #[test]
    fn seeds_ignore_method_list() {
        let a = child_seed(9, 4.0, Method::MmSmote, 2);
        assert_eq!(a, child_seed(9, 4.0, Method::MmSmote, 2));
        assert_ne!(a, child_seed(9, 4.0, Method::PlainSvm, 2));

        let mut cfg = blobs_config();
        let one = run_experiment(&cfg).unwrap();
        cfg.methods = vec![Method::MmSmote, Method::PlainSvm];
        let two = run_experiment(&cfg).unwrap();
        let plain = two.runs.iter().find(|r| r.method == Method::PlainSvm).unwrap();
        assert_eq!(plain, &one.runs[0]);
    }

    #[test]
    fn stage_errors_are_recorded() {
        let mut cfg = blobs_config();
        cfg.ratios = vec![50.0];
        let res = run_experiment(&cfg).unwrap();
        assert!(matches!(res.runs[0].status, RunStatus::Failed(_)));
        assert!(res.to_csv().contains("no_successful_runs"));
        assert!(!res.to_csv().lines().nth(1).unwrap().contains('"'));
    }

    #[test]
    fn failed_status_has_no_commas() {
        let s = RunStatus::Failed("a, b\nc".into()).label();
        assert!(!s.contains(',') && !s.contains('\n'));
    }

    #[test]
    fn mm_runs_carry_diagnostics() {
        let mut cfg = blobs_config();
        cfg.methods = vec![Method::PlainSvm, Method::MmSmote];
        let res = run_experiment(&cfg).unwrap();
        let mm = res.runs.iter().find(|r| r.method == Method::MmSmote).unwrap();
        let d = mm.diagnostics.as_ref().unwrap();
        assert_eq!(d.synthetic, d.synthetic_conservative + d.synthetic_aggressive);
        assert!(res.runs.iter().find(|r| r.method == Method::PlainSvm).unwrap().diagnostics.is_none());
        let json: serde_json::Value = serde_json::from_str(&res.diagnostics_json().unwrap()).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 1);
        assert_eq!(json[0]["seed"], mm.seed);
        assert!(json[0]["taxonomy"]["in_margin"].is_u64());
        assert_eq!(
            diagnostics_path(Path::new("out/results.csv")),
            PathBuf::from("out/results.diagnostics.json")
        );
    }
}
