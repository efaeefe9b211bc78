//! Full-graph training and sampling-averaged prediction.

use serde::{Deserialize, Serialize};

use super::config::LayerConfig;
use super::forward::{model_forward, record_forward, SampleKey};
use super::params::ModelParams;
use crate::autodiff::{bce_with_logit, Adam};
use crate::error::{Error, Result};
use crate::graph::{Label, MultiRelationGraph};
use crate::rng::{mix, tag};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Sampling passes averaged by [`predict_scores`].
    pub predict_passes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = Adam::default();
        TrainConfig {
            epochs: 100,
            learning_rate: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_eps: adam.eps,
            predict_passes: 10,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> Adam {
        Adam {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.predict_passes == 0 {
            return Err(Error::Config("predict_passes must be at least 1".into()));
        }
        Ok(())
    }
}

/// Parameters for `g` under `cfg`, drawn deterministically from `seed`.
pub fn init_params(g: &MultiRelationGraph, cfg: &LayerConfig, seed: u64) -> Result<ModelParams> {
    ModelParams::init(cfg, g.num_nodes(), g.feature_dim(), g.num_relations(), seed)
}

/// Rows selected by `mask` with their 0/1 targets.
pub(crate) fn masked_targets(labels: &[Label], mask: &[bool]) -> Result<(Vec<usize>, Vec<f64>)> {
    if mask.len() != labels.len() {
        return Err(Error::Length(format!("mask of length {} for {} nodes", mask.len(), labels.len())));
    }
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (i, (&m, label)) in mask.iter().zip(labels).enumerate() {
        if !m {
            continue;
        }
        match label.class() {
            Some(c) => {
                rows.push(i);
                targets.push(f64::from(c));
            }
            None => return Err(Error::Config(format!("node {i} is in the training mask but unlabeled"))),
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok((rows, targets))
}

/// Mean binary cross-entropy with logits over the masked nodes.
pub fn compute_loss(logits: &[f64], labels: &[Label], mask: &[bool]) -> Result<f64> {
    if logits.len() != labels.len() {
        return Err(Error::Length(format!("{} logits for {} labels", logits.len(), labels.len())));
    }
    let (rows, targets) = masked_targets(labels, mask)?;
    let total: f64 = rows.iter().zip(&targets).map(|(&i, &y)| bce_with_logit(logits[i], y)).sum();
    Ok(total / rows.len() as f64)
}

/// Trains from freshly initialized parameters.
///
/// Every epoch draws new neighborhoods, runs the full graph forward,
/// backpropagates the masked loss and takes one Adam step. Returns the
/// final parameters and the loss of each epoch (measured before its
/// update).
pub fn train(
    g: &MultiRelationGraph,
    cfg: &LayerConfig,
    mask: &[bool],
    tc: &TrainConfig,
    seed: u64,
) -> Result<(ModelParams, Vec<f64>)> {
    let params = init_params(g, cfg, seed)?;
    train_from(g, cfg, mask, tc, seed, params)
}

/// Like [`train`] but starting from the given parameters.
pub fn train_from(
    g: &MultiRelationGraph,
    cfg: &LayerConfig,
    mask: &[bool],
    tc: &TrainConfig,
    seed: u64,
    mut params: ModelParams,
) -> Result<(ModelParams, Vec<f64>)> {
    cfg.validate()?;
    tc.validate()?;
    let (rows, targets) = masked_targets(g.labels(), mask)?;
    let adam = tc.adam();
    let mut history = Vec::with_capacity(tc.epochs);

    for epoch in 0..tc.epochs {
        let key = SampleKey {
            seed,
            pass: epoch as u64,
        };
        let mut fwd = record_forward(g, &params, cfg, key)?;
        let loss = fwd.graph.bce_with_logits(fwd.logits, rows.clone(), targets.clone())?;
        let value = fwd.graph.scalar(loss);
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss: value });
        }
        history.push(value);
        log::debug!("epoch {epoch}: loss {value:.6}");

        let grads = fwd.graph.backward(loss)?;
        let leaves = fwd.vars.in_order();
        let mut ps = params.parameters_mut();
        for (p, v) in ps.iter_mut().zip(leaves) {
            p.grad = grads.get(v);
        }
        match adam.step(&mut ps) {
            Ok(()) => {}
            Err(Error::NonFiniteGradient { index }) => {
                log::warn!("epoch {epoch}: non-finite gradient in parameter {index}, update skipped");
            }
            Err(e) => return Err(e),
        }
    }
    Ok((params, history))
}

/// Fraud probability of every node: the sigmoid of its logit averaged
/// over `passes` independent sampling passes.
pub fn predict_scores(
    g: &MultiRelationGraph,
    params: &ModelParams,
    cfg: &LayerConfig,
    seed: u64,
    passes: usize,
) -> Result<Vec<f64>> {
    if passes == 0 {
        return Err(Error::Config("at least one forward pass is needed".into()));
    }
    let mut scores = vec![0.0; g.num_nodes()];
    for pass in 0..passes {
        let key = SampleKey {
            seed: mix(&[tag::PREDICT, seed]),
            pass: pass as u64,
        };
        let out = model_forward(g, params, cfg, key)?;
        for (s, z) in scores.iter_mut().zip(&out.logits) {
            *s += sigmoid(*z);
        }
    }
    for s in &mut scores {
        *s /= passes as f64;
    }
    Ok(scores)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_at_zero_logits_is_ln2() {
        let labels = vec![Label::Fraud, Label::Benign, Label::Unknown, Label::Benign];
        let mask = vec![true, true, false, true];
        let loss = compute_loss(&[0.0; 4], &labels, &mask).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn saturated_logits_give_vanishing_loss() {
        let labels = vec![Label::Fraud, Label::Benign];
        let loss = compute_loss(&[40.0, -40.0], &labels, &[true, true]).unwrap();
        assert!(loss < 1e-15);
    }

    #[test]
    fn loss_errors() {
        let labels = vec![Label::Fraud, Label::Unknown];
        assert!(matches!(compute_loss(&[0.0, 0.0], &labels, &[false, false]), Err(Error::EmptyMask)));
        assert!(compute_loss(&[0.0, 0.0], &labels, &[true, true]).is_err());
        assert!(compute_loss(&[0.0], &labels, &[true, false]).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }
}
