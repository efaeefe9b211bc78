use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::{Aggregator, CombineMode, LayerConfig};
use crate::autodiff::{Matrix, Parameter};
use crate::error::{Error, Result};
use crate::rng::{stream, tag};

/// Standard deviation of the context and relation embedding initializer.
pub const EMBEDDING_INIT_STD: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    /// `R × w_in`, one row per relation. Present with relation attention.
    pub relation: Option<Parameter>,
    /// `2·w_in × 1`; the first `w_in` rows score the neighbor embedding,
    /// the rest score its relation embedding.
    pub attention: Option<Parameter>,
    /// Dense transform applied after combining center and aggregate.
    pub weight: Parameter,
    pub bias: Parameter,
}

/// Every trainable array of the layered model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// `|V| × d` per-node context embeddings, when enabled.
    pub context: Option<Parameter>,
    pub layers: Vec<LayerParams>,
    /// `w_L × 1`
    pub classifier: Parameter,
    /// `1 × 1`
    pub classifier_bias: Parameter,
}

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, fan_in: usize) -> Parameter {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Parameter::new(Matrix::from_shape_simple_fn((rows, cols), || {
        rng.random_range(-bound..=bound)
    }))
}

fn normal(rng: &mut impl Rng, rows: usize, cols: usize) -> Parameter {
    let dist = Normal::new(0.0, EMBEDDING_INIT_STD).expect("valid std");
    Parameter::new(Matrix::from_shape_simple_fn((rows, cols), || dist.sample(rng)))
}

/// Expected shapes for a graph with `num_nodes` nodes, feature width `d`
/// and `relations` relations, in the canonical parameter order.
pub fn parameter_shapes(
    cfg: &LayerConfig,
    num_nodes: usize,
    d: usize,
    relations: usize,
) -> Vec<(String, (usize, usize))> {
    let mut shapes = Vec::new();
    if cfg.mechanisms.context_embedding {
        shapes.push(("context".to_string(), (num_nodes, d)));
    }
    for (l, &width) in cfg.hidden_widths.iter().enumerate() {
        let w_in = cfg.input_width(l, d);
        if cfg.mechanisms.aggregator == Aggregator::RelationAttention {
            shapes.push((format!("layer{l}.relation"), (relations, w_in)));
            shapes.push((format!("layer{l}.attention"), (2 * w_in, 1)));
        }
        let combined = match cfg.combine {
            CombineMode::ConcatThenTransform => 2 * w_in,
            CombineMode::AddThenTransform => w_in,
        };
        shapes.push((format!("layer{l}.weight"), (combined, width)));
        shapes.push((format!("layer{l}.bias"), (1, width)));
    }
    shapes.push(("classifier.weight".to_string(), (cfg.output_width(), 1)));
    shapes.push(("classifier.bias".to_string(), (1, 1)));
    shapes
}

impl ModelParams {
    /// Dense weights ~ U(±1/√fan_in) (biases share their weight's bound),
    /// embeddings ~ N(0, 0.01²). Deterministic in `seed`.
    pub fn init(cfg: &LayerConfig, num_nodes: usize, d: usize, relations: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if d == 0 || relations == 0 {
            return Err(Error::Config("feature width and relation count must be positive".into()));
        }
        let mut rng = stream(&[tag::INIT, seed]);
        let context = cfg
            .mechanisms
            .context_embedding
            .then(|| normal(&mut rng, num_nodes, d));

        let mut layers = Vec::with_capacity(cfg.num_layers());
        for (l, &width) in cfg.hidden_widths.iter().enumerate() {
            let w_in = cfg.input_width(l, d);
            let (relation, attention) = match cfg.mechanisms.aggregator {
                Aggregator::RelationAttention => (
                    Some(normal(&mut rng, relations, w_in)),
                    Some(uniform(&mut rng, 2 * w_in, 1, 2 * w_in)),
                ),
                Aggregator::Mean => (None, None),
            };
            let combined = match cfg.combine {
                CombineMode::ConcatThenTransform => 2 * w_in,
                CombineMode::AddThenTransform => w_in,
            };
            layers.push(LayerParams {
                relation,
                attention,
                weight: uniform(&mut rng, combined, width, combined),
                bias: uniform(&mut rng, 1, width, combined),
            });
        }
        let last = cfg.output_width();
        Ok(ModelParams {
            context,
            layers,
            classifier: uniform(&mut rng, last, 1, last),
            classifier_bias: uniform(&mut rng, 1, 1, last),
        })
    }

    /// Parameters in canonical order, matching [`parameter_shapes`].
    pub fn named(&self) -> Vec<(String, &Parameter)> {
        let mut out = Vec::new();
        if let Some(c) = &self.context {
            out.push(("context".to_string(), c));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if let Some(t) = &layer.relation {
                out.push((format!("layer{l}.relation"), t));
            }
            if let Some(a) = &layer.attention {
                out.push((format!("layer{l}.attention"), a));
            }
            out.push((format!("layer{l}.weight"), &layer.weight));
            out.push((format!("layer{l}.bias"), &layer.bias));
        }
        out.push(("classifier.weight".to_string(), &self.classifier));
        out.push(("classifier.bias".to_string(), &self.classifier_bias));
        out
    }

    /// Mutable parameters in canonical order.
    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        if let Some(c) = self.context.as_mut() {
            out.push(c);
        }
        for layer in self.layers.iter_mut() {
            if let Some(t) = layer.relation.as_mut() {
                out.push(t);
            }
            if let Some(a) = layer.attention.as_mut() {
                out.push(a);
            }
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        out.push(&mut self.classifier);
        out.push(&mut self.classifier_bias);
        out
    }

    /// Raw arrays keyed by canonical name.
    pub fn to_arrays(&self) -> BTreeMap<String, Matrix> {
        self.named()
            .into_iter()
            .map(|(name, p)| (name, p.value.clone()))
            .collect()
    }

    /// Rebuilds parameters from named arrays, checking every shape.
    pub fn from_arrays(
        cfg: &LayerConfig,
        num_nodes: usize,
        d: usize,
        relations: usize,
        arrays: &BTreeMap<String, Matrix>,
    ) -> Result<Self> {
        cfg.validate()?;
        let expected = parameter_shapes(cfg, num_nodes, d, relations);
        if arrays.len() != expected.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} arrays, found {}",
                expected.len(),
                arrays.len()
            )));
        }
        let take = |name: &str| -> Result<Parameter> {
            let want = expected
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, s)| *s)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected array `{name}`")))?;
            let m = arrays
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing array `{name}`")))?;
            if (m.nrows(), m.ncols()) != want {
                return Err(Error::Checkpoint(format!(
                    "`{name}` has shape {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    want.0,
                    want.1
                )));
            }
            Ok(Parameter::new(m.clone()))
        };
        let context = if cfg.mechanisms.context_embedding {
            Some(take("context")?)
        } else {
            None
        };
        let attention = cfg.mechanisms.aggregator == Aggregator::RelationAttention;
        let layers = (0..cfg.num_layers())
            .map(|l| {
                Ok(LayerParams {
                    relation: attention.then(|| take(&format!("layer{l}.relation"))).transpose()?,
                    attention: attention.then(|| take(&format!("layer{l}.attention"))).transpose()?,
                    weight: take(&format!("layer{l}.weight"))?,
                    bias: take(&format!("layer{l}.bias"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelParams {
            context,
            layers,
            classifier: take("classifier.weight")?,
            classifier_bias: take("classifier.bias")?,
        })
    }

    /// Sets every value to zero.
    pub fn zero_all(&mut self) {
        for p in self.parameters_mut() {
            p.value.fill(0.0);
        }
    }
}
