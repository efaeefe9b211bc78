//! Uniform interface over GraphConsis and the reference detectors, plus
//! JSON checkpoints.
//!
//! The two GNN baselines are the layered model with mechanisms switched
//! off: no context embeddings, no consistency filter and mean instead of
//! attention. Logistic regression sees raw features only.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{DiffGraph, Matrix, Parameter};
use crate::error::{Error, Result};
use crate::graph::{Label, MultiRelationGraph};
use crate::model::train::{masked_targets, sigmoid};
use crate::model::{predict_scores, train, LayerConfig, Mechanisms, ModelParams, TrainConfig};
use crate::rng::{stream, tag};

pub const CHECKPOINT_VERSION: u32 = 1;

/// The reference detectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    LogisticRegression,
    UniformSampleGnn,
    FullMeanGnn,
}

/// Every detector the experiment driver can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    GraphConsis,
    Baseline(BaselineKind),
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::GraphConsis,
        Method::Baseline(BaselineKind::LogisticRegression),
        Method::Baseline(BaselineKind::UniformSampleGnn),
        Method::Baseline(BaselineKind::FullMeanGnn),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::GraphConsis => "graphconsis",
            Method::Baseline(BaselineKind::LogisticRegression) => "lr",
            Method::Baseline(BaselineKind::UniformSampleGnn) => "uniform-sample-gnn",
            Method::Baseline(BaselineKind::FullMeanGnn) => "full-mean-gnn",
        }
    }

    /// Mechanism flags for the layered model, `None` for logistic regression.
    pub fn mechanisms(self) -> Option<Mechanisms> {
        match self {
            Method::GraphConsis => Some(Mechanisms::GRAPHCONSIS),
            Method::Baseline(BaselineKind::UniformSampleGnn) => Some(Mechanisms::UNIFORM_SAMPLE),
            Method::Baseline(BaselineKind::FullMeanGnn) => Some(Mechanisms::FULL_MEAN),
            Method::Baseline(BaselineKind::LogisticRegression) => None,
        }
    }

    /// `base` with this method's mechanisms.
    pub fn layer_config(self, base: &LayerConfig) -> LayerConfig {
        let mut cfg = base.clone();
        if let Some(m) = self.mechanisms() {
            cfg.mechanisms = m;
        }
        cfg
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .or(match s {
                "logistic-regression" => Some(Method::Baseline(BaselineKind::LogisticRegression)),
                _ => None,
            })
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown method `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `σ(X·w + b)` on raw features.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    /// `d × 1`
    pub weight: Parameter,
    /// `1 × 1`
    pub bias: Parameter,
}

impl LogisticModel {
    /// Uniform in `±1/√d`, deterministic in `seed`.
    pub fn init(d: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::EmptyFeatures);
        }
        let mut rng = stream(&[tag::INIT, seed, 1]);
        let bound = 1.0 / (d as f64).sqrt();
        let mut draw = |rows, cols| {
            Parameter::new(Matrix::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound)))
        };
        let weight = draw(d, 1);
        let bias = draw(1, 1);
        Ok(LogisticModel { weight, bias })
    }

    pub fn logits(&self, features: &Matrix) -> Result<Vec<f64>> {
        if features.ncols() != self.weight.value.nrows() {
            return Err(Error::shape(
                "logistic",
                format!("{} features for a {}-input model", features.ncols(), self.weight.value.nrows()),
            ));
        }
        let b = self.bias.value[[0, 0]];
        Ok(features.dot(&self.weight.value).column(0).iter().map(|z| z + b).collect())
    }

    pub fn predict(&self, features: &Matrix) -> Result<Vec<f64>> {
        Ok(self.logits(features)?.into_iter().map(sigmoid).collect())
    }
}

/// Logistic regression trained by full-batch Adam on the masked
/// binary cross-entropy. Returns the model and per-epoch losses.
pub fn train_logistic_regression(
    features: &Matrix,
    labels: &[Label],
    mask: &[bool],
    tc: &TrainConfig,
    seed: u64,
) -> Result<(LogisticModel, Vec<f64>)> {
    tc.validate()?;
    if features.nrows() != labels.len() {
        return Err(Error::FeatureRows {
            rows: features.nrows(),
            nodes: labels.len(),
        });
    }
    let (rows, targets) = masked_targets(labels, mask)?;
    let mut model = LogisticModel::init(features.ncols(), seed)?;
    let adam = tc.adam();
    let mut history = Vec::with_capacity(tc.epochs);

    let mut graph = DiffGraph::new();
    let x = graph.constant(features.clone());
    let w = graph.input(model.weight.value.clone());
    let b = graph.input(model.bias.value.clone());
    let z = graph.matmul(x, w)?;
    let z = graph.add_row(z, b)?;
    let loss = graph.bce_with_logits(z, rows, targets)?;

    for epoch in 0..tc.epochs {
        graph.set_input(w, model.weight.value.clone())?;
        graph.set_input(b, model.bias.value.clone())?;
        graph.evaluate()?;
        let value = graph.scalar(loss);
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss: value });
        }
        history.push(value);
        let grads = graph.backward(loss)?;
        model.weight.grad = grads.get(w);
        model.bias.grad = grads.get(b);
        match adam.step(&mut [&mut model.weight, &mut model.bias]) {
            Ok(()) => {}
            Err(Error::NonFiniteGradient { index }) => {
                log::warn!("epoch {epoch}: non-finite gradient in parameter {index}, update skipped");
            }
            Err(e) => return Err(e),
        }
    }
    Ok((model, history))
}

/// Uniform-sampling mean-aggregator GNN: the layered pipeline without
/// context embeddings, consistency filtering or attention.
pub fn train_uniform_sample_gnn(
    g: &MultiRelationGraph,
    cfg: &LayerConfig,
    mask: &[bool],
    tc: &TrainConfig,
    seed: u64,
) -> Result<(ModelParams, Vec<f64>)> {
    let cfg = Method::Baseline(BaselineKind::UniformSampleGnn).layer_config(cfg);
    train(g, &cfg, mask, tc, seed)
}

/// Full-neighborhood mean GNN over the merged relations.
pub fn train_full_mean_gnn(
    g: &MultiRelationGraph,
    cfg: &LayerConfig,
    mask: &[bool],
    tc: &TrainConfig,
    seed: u64,
) -> Result<(ModelParams, Vec<f64>)> {
    let cfg = Method::Baseline(BaselineKind::FullMeanGnn).layer_config(cfg);
    train(g, &cfg, mask, tc, seed)
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Gnn(ModelParams),
    Logistic(LogisticModel),
}

/// A trained detector with everything needed to score nodes again.
#[derive(Clone, Debug, PartialEq)]
pub struct Detector {
    pub method: Method,
    pub seed: u64,
    /// Layer configuration with the method's mechanisms applied.
    pub layer: LayerConfig,
    pub train: TrainConfig,
    pub model: TrainedModel,
}

impl Detector {
    /// Trains `method` on the masked nodes of `g`; returns the detector
    /// and its per-epoch loss.
    pub fn fit(
        g: &MultiRelationGraph,
        method: Method,
        layer: &LayerConfig,
        tc: &TrainConfig,
        mask: &[bool],
        seed: u64,
    ) -> Result<(Detector, Vec<f64>)> {
        let layer = method.layer_config(layer);
        let (model, history) = match method {
            Method::Baseline(BaselineKind::LogisticRegression) => {
                let (m, h) = train_logistic_regression(g.features(), g.labels(), mask, tc, seed)?;
                (TrainedModel::Logistic(m), h)
            }
            _ => {
                let (p, h) = train(g, &layer, mask, tc, seed)?;
                (TrainedModel::Gnn(p), h)
            }
        };
        let detector = Detector {
            method,
            seed,
            layer,
            train: tc.clone(),
            model,
        };
        Ok((detector, history))
    }

    /// Fraud probability for every node of `g`.
    pub fn predict(&self, g: &MultiRelationGraph) -> Result<Vec<f64>> {
        match &self.model {
            TrainedModel::Logistic(m) => m.predict(g.features()),
            TrainedModel::Gnn(p) => predict_scores(g, p, &self.layer, self.seed, self.train.predict_passes),
        }
    }

    fn arrays(&self) -> BTreeMap<String, Matrix> {
        match &self.model {
            TrainedModel::Gnn(p) => p.to_arrays(),
            TrainedModel::Logistic(m) => BTreeMap::from([
                ("weight".to_string(), m.weight.value.clone()),
                ("bias".to_string(), m.bias.value.clone()),
            ]),
        }
    }

    pub fn to_checkpoint(&self, g: &MultiRelationGraph) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            method: self.method,
            seed: self.seed,
            num_nodes: g.num_nodes(),
            feature_dim: g.feature_dim(),
            num_relations: g.num_relations(),
            layer: self.layer.clone(),
            train: self.train.clone(),
            arrays: self
                .arrays()
                .into_iter()
                .map(|(k, m)| (k, StoredArray::from(&m)))
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Detector> {
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {CHECKPOINT_VERSION})",
                ck.format_version
            )));
        }
        let arrays = ck
            .arrays
            .iter()
            .map(|(k, a)| Ok((k.clone(), a.to_matrix(k)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let model = match ck.method {
            Method::Baseline(BaselineKind::LogisticRegression) => {
                let get = |name: &str, shape: (usize, usize)| -> Result<Parameter> {
                    let m = arrays
                        .get(name)
                        .ok_or_else(|| Error::Checkpoint(format!("missing array `{name}`")))?;
                    if m.dim() != shape {
                        return Err(Error::Checkpoint(format!("`{name}` has shape {:?}, expected {shape:?}", m.dim())));
                    }
                    Ok(Parameter::new(m.clone()))
                };
                if arrays.len() != 2 {
                    return Err(Error::Checkpoint(format!("expected 2 arrays, found {}", arrays.len())));
                }
                TrainedModel::Logistic(LogisticModel {
                    weight: get("weight", (ck.feature_dim, 1))?,
                    bias: get("bias", (1, 1))?,
                })
            }
            _ => TrainedModel::Gnn(ModelParams::from_arrays(
                &ck.layer,
                ck.num_nodes,
                ck.feature_dim,
                ck.num_relations,
                &arrays,
            )?),
        };
        Ok(Detector {
            method: ck.method,
            seed: ck.seed,
            layer: ck.layer.clone(),
            train: ck.train.clone(),
            model,
        })
    }

    pub fn save(&self, g: &MultiRelationGraph, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_checkpoint(g))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Detector> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        Detector::from_checkpoint(&ck)
    }
}

/// Row-major array with its shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredArray {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Matrix> for StoredArray {
    fn from(m: &Matrix) -> Self {
        StoredArray {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.iter().copied().collect(),
        }
    }
}

impl StoredArray {
    fn to_matrix(&self, name: &str) -> Result<Matrix> {
        Matrix::from_shape_vec((self.rows, self.cols), self.data.clone()).map_err(|_| {
            Error::Checkpoint(format!(
                "`{name}` declares {}x{} but holds {} values",
                self.rows,
                self.cols,
                self.data.len()
            ))
        })
    }
}

/// On-disk form of a [`Detector`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub method: Method,
    pub seed: u64,
    pub num_nodes: usize,
    pub feature_dim: usize,
    pub num_relations: usize,
    pub layer: LayerConfig,
    pub train: TrainConfig,
    pub arrays: BTreeMap<String, StoredArray>,
}
