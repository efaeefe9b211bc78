//! The method × training-fraction × seed grid.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{auc_score, f1_score, Averaging};
use crate::data::split::{split_dataset, SplitSpec};
use crate::detector::{Detector, Method};
use crate::error::{Error, Result};
use crate::graph::{Label, MultiRelationGraph};
use crate::model::{LayerConfig, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub train_fractions: Vec<f64>,
    /// Each seed drives both the split and the model.
    pub seeds: Vec<u64>,
    pub stratified: bool,
    /// Probability at or above which a node is predicted fraud.
    pub threshold: f64,
    pub layer: LayerConfig,
    pub train: TrainConfig,
    /// Wall-clock time is left out by default so repeated runs produce
    /// identical files.
    pub record_runtime: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: Method::ALL.to_vec(),
            train_fractions: vec![0.4, 0.6, 0.8],
            seeds: (0..5).collect(),
            stratified: true,
            threshold: 0.5,
            layer: LayerConfig::default(),
            train: TrainConfig::default(),
            record_runtime: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.train_fractions.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("methods, train_fractions and seeds must be non-empty".into()));
        }
        if let Some(f) = self.train_fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(Error::Config(format!("train fraction must lie in (0, 1), got {f}")));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        self.layer.validate()?;
        self.train.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub f1_macro: f64,
    pub f1_binary: f64,
    pub auc: f64,
}

/// One trained-and-evaluated cell member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub train_fraction: f64,
    pub seed: u64,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
    pub runtime_s: Option<f64>,
}

/// Mean and sample standard deviation over the successful seeds of one
/// (method, fraction) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub method: Method,
    pub train_fraction: f64,
    pub seed_count: usize,
    pub failed: usize,
    pub f1_macro_mean: Option<f64>,
    pub f1_macro_std: Option<f64>,
    pub f1_binary_mean: Option<f64>,
    pub f1_binary_std: Option<f64>,
    pub auc_mean: Option<f64>,
    pub auc_std: Option<f64>,
    pub runtime_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    pub cells: Vec<GridCell>,
}

/// Trains `method` on a `train_fraction` split drawn with `seed` and
/// scores the held-out nodes.
pub fn evaluate_run(
    g: &MultiRelationGraph,
    method: Method,
    train_fraction: f64,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<RunMetrics> {
    let split = SplitSpec {
        train_fraction,
        stratified: cfg.stratified,
        seed,
    };
    let (train_mask, test_mask) = split_dataset(g, &split)?;
    let (detector, _) = Detector::fit(g, method, &cfg.layer, &cfg.train, &train_mask, seed)?;
    let scores = detector.predict(g)?;

    let mut test_scores = Vec::new();
    let mut truth = Vec::new();
    for (v, &t) in test_mask.iter().enumerate() {
        if t {
            test_scores.push(scores[v]);
            truth.push(g.labels()[v] == Label::Fraud);
        }
    }
    let predicted: Vec<bool> = test_scores.iter().map(|&s| s >= cfg.threshold).collect();
    Ok(RunMetrics {
        f1_macro: f1_score(&predicted, &truth, Averaging::Macro)?,
        f1_binary: f1_score(&predicted, &truth, Averaging::BinaryPositive)?,
        auc: auc_score(&test_scores, &truth)?,
    })
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

fn cell(method: Method, train_fraction: f64, runs: &[&RunRecord]) -> GridCell {
    let ok: Vec<RunMetrics> = runs.iter().filter_map(|r| r.metrics).collect();
    let pick = |f: fn(&RunMetrics) -> f64| mean_std(&ok.iter().map(f).collect::<Vec<_>>());
    let (f1_macro_mean, f1_macro_std) = pick(|m| m.f1_macro);
    let (f1_binary_mean, f1_binary_std) = pick(|m| m.f1_binary);
    let (auc_mean, auc_std) = pick(|m| m.auc);
    let times: Option<Vec<f64>> = runs.iter().map(|r| r.runtime_s).collect();
    GridCell {
        method,
        train_fraction,
        seed_count: ok.len(),
        failed: runs.len() - ok.len(),
        f1_macro_mean,
        f1_macro_std,
        f1_binary_mean,
        f1_binary_std,
        auc_mean,
        auc_std,
        runtime_s: times.and_then(|t| mean_std(&t).0),
    }
}

/// Runs every (method, fraction, seed) combination, in parallel on the
/// current rayon pool, and aggregates per (method, fraction).
///
/// A run that fails is kept with its error message and excluded from
/// the cell statistics.
pub fn run_experiment(g: &MultiRelationGraph, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for &m in &cfg.methods {
        for &f in &cfg.train_fractions {
            for &s in &cfg.seeds {
                jobs.push((m, f, s));
            }
        }
    }
    jobs.sort_by(|a, b| a.0.name().cmp(b.0.name()).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    jobs.dedup();

    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(method, train_fraction, seed)| {
            let start = Instant::now();
            let outcome = evaluate_run(g, method, train_fraction, seed, cfg);
            let elapsed = start.elapsed().as_secs_f64();
            match &outcome {
                Ok(m) => log::info!(
                    "{method} @ {train_fraction} seed {seed}: auc {:.4} f1-macro {:.4}",
                    m.auc,
                    m.f1_macro
                ),
                Err(e) => log::warn!("{method} @ {train_fraction} seed {seed} failed: {e}"),
            }
            RunRecord {
                method,
                train_fraction,
                seed,
                error: outcome.as_ref().err().map(|e| e.to_string()),
                metrics: outcome.ok(),
                runtime_s: cfg.record_runtime.then_some(elapsed),
            }
        })
        .collect();

    let mut cells = Vec::new();
    let mut i = 0;
    while i < runs.len() {
        let key = (runs[i].method, runs[i].train_fraction);
        let group: Vec<&RunRecord> = runs[i..]
            .iter()
            .take_while(|r| (r.method, r.train_fraction) == key)
            .collect();
        i += group.len();
        cells.push(cell(key.0, key.1, &group));
    }
    Ok(ExperimentResult { runs, cells })
}

pub const GRID_COLUMNS: [&str; 10] = [
    "method",
    "train_fraction",
    "seed_count",
    "f1_macro_mean",
    "f1_macro_std",
    "f1_binary_mean",
    "f1_binary_std",
    "auc_mean",
    "auc_std",
    "runtime_s",
];

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

impl ExperimentResult {
    /// The aggregated grid as comma-separated text with a header row.
    pub fn grid_csv(&self) -> String {
        let mut out = GRID_COLUMNS.join(",");
        out.push('\n');
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                c.method,
                c.train_fraction,
                c.seed_count,
                opt(c.f1_macro_mean),
                opt(c.f1_macro_std),
                opt(c.f1_binary_mean),
                opt(c.f1_binary_std),
                opt(c.auc_mean),
                opt(c.auc_std),
                opt(c.runtime_s)
            )
            .expect("string write");
        }
        out
    }

    /// One row per run, failures included.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("method,train_fraction,seed,f1_macro,f1_binary,auc,runtime_s,error\n");
        for r in &self.runs {
            let m = r.metrics;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.method,
                r.train_fraction,
                r.seed,
                opt(m.map(|m| m.f1_macro)),
                opt(m.map(|m| m.f1_binary)),
                opt(m.map(|m| m.auc)),
                opt(r.runtime_s),
                r.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
            )
            .expect("string write");
        }
        out
    }

    pub fn cell(&self, method: Method, train_fraction: f64) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.train_fraction == train_fraction)
    }
}
