//! Recording the layered forward pass into a [`DiffGraph`].

use ndarray::concatenate;
use ndarray::Axis;

use super::config::{Aggregator, CombineMode, LayerConfig};
use super::params::{LayerParams, ModelParams};
use super::sampling::{sample_layer, SampledNeighborhood};
use crate::autodiff::{DiffGraph, Matrix, Var};
use crate::error::{Error, Result};
use crate::graph::MultiRelationGraph;

/// Identifies one sampling pass: training epochs and prediction passes
/// each get their own `pass`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleKey {
    pub seed: u64,
    pub pass: u64,
}

#[derive(Clone, Debug)]
pub struct LayerVars {
    pub relation: Option<Var>,
    pub attention: Option<Var>,
    pub weight: Var,
    pub bias: Var,
}

impl LayerVars {
    fn bind(graph: &mut DiffGraph, p: &LayerParams) -> Self {
        LayerVars {
            relation: p.relation.as_ref().map(|t| graph.input(t.value.clone())),
            attention: p.attention.as_ref().map(|a| graph.input(a.value.clone())),
            weight: graph.input(p.weight.value.clone()),
            bias: graph.input(p.bias.value.clone()),
        }
    }
}

/// Graph leaves holding each model parameter.
#[derive(Clone, Debug)]
pub struct ParamVars {
    pub context: Option<Var>,
    pub layers: Vec<LayerVars>,
    pub classifier: Var,
    pub classifier_bias: Var,
}

impl ParamVars {
    pub fn bind(graph: &mut DiffGraph, params: &ModelParams) -> Self {
        ParamVars {
            context: params.context.as_ref().map(|c| graph.input(c.value.clone())),
            layers: params.layers.iter().map(|l| LayerVars::bind(graph, l)).collect(),
            classifier: graph.input(params.classifier.value.clone()),
            classifier_bias: graph.input(params.classifier_bias.value.clone()),
        }
    }

    /// Leaves in the canonical parameter order of [`ModelParams::named`].
    pub fn in_order(&self) -> Vec<Var> {
        let mut out = Vec::new();
        out.extend(self.context);
        for l in &self.layers {
            out.extend(l.relation);
            out.extend(l.attention);
            out.push(l.weight);
            out.push(l.bias);
        }
        out.push(self.classifier);
        out.push(self.classifier_bias);
        out
    }
}

/// A recorded forward pass with handles to everything tests and the
/// trainer need.
#[derive(Clone, Debug)]
pub struct Forward {
    pub graph: DiffGraph,
    pub vars: ParamVars,
    /// Layer-1 input: features, concatenated with context embeddings when enabled.
    pub input: Var,
    /// Output of each layer.
    pub layers: Vec<Var>,
    /// Attention weights (`ΣQ × 1`) of each layer, when attention is on.
    pub attention: Vec<Option<Var>>,
    pub samples: Vec<Vec<SampledNeighborhood>>,
    /// `|V| × 1`
    pub logits: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutput {
    /// `|V| × final width`
    pub embeddings: Matrix,
    pub logits: Vec<f64>,
}

fn check_params(g: &MultiRelationGraph, params: &ModelParams, cfg: &LayerConfig) -> Result<()> {
    cfg.validate()?;
    if params.layers.len() != cfg.num_layers() {
        return Err(Error::Config(format!(
            "{} parameter layers for a {}-layer config",
            params.layers.len(),
            cfg.num_layers()
        )));
    }
    if cfg.mechanisms.context_embedding != params.context.is_some() {
        return Err(Error::Config("context embeddings do not match the config".into()));
    }
    if let Some(c) = &params.context {
        if c.shape() != (g.num_nodes(), g.feature_dim()) {
            return Err(Error::shape(
                "context",
                format!(
                    "{:?} for a graph with {} nodes of width {}",
                    c.shape(),
                    g.num_nodes(),
                    g.feature_dim()
                ),
            ));
        }
    }
    Ok(())
}

/// Flattens neighborhoods into gather indices, relation tags and segment offsets.
fn flatten(samples: &[SampledNeighborhood]) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let total: usize = samples.iter().map(|s| s.samples.len()).sum();
    let mut index = Vec::with_capacity(total);
    let mut relation = Vec::with_capacity(total);
    let mut offsets = Vec::with_capacity(samples.len() + 1);
    offsets.push(0);
    for s in samples {
        for &(u, r) in &s.samples {
            index.push(u.index());
            relation.push(r.index());
        }
        offsets.push(index.len());
    }
    (index, relation, offsets)
}

/// Records one layer given its input and the neighborhoods drawn from it.
///
/// Returns the layer output and, with relation attention, the attention
/// weights of every sample.
pub fn record_layer(
    graph: &mut DiffGraph,
    h_prev: Var,
    vars: &LayerVars,
    cfg: &LayerConfig,
    samples: &[SampledNeighborhood],
) -> Result<(Var, Option<Var>)> {
    let n = graph.value(h_prev).nrows();
    let w_in = graph.value(h_prev).ncols();
    if samples.len() != n {
        return Err(Error::Length(format!("{} neighborhoods for {n} nodes", samples.len())));
    }
    let (index, relation, offsets) = flatten(samples);

    let (weights, attention) = match cfg.mechanisms.aggregator {
        Aggregator::RelationAttention => {
            let (a, t) = match (vars.attention, vars.relation) {
                (Some(a), Some(t)) => (a, t),
                _ => return Err(Error::Config("relation attention needs `a` and `t`".into())),
            };
            // {h_q ‖ t_r}·a == h_q·a[..w] + t_r·a[w..]; project before gathering.
            let a_h = graph.slice_rows(a, 0, w_in)?;
            let a_t = graph.slice_rows(a, w_in, graph.value(a).nrows())?;
            let node_score = graph.matmul(h_prev, a_h)?;
            let relation_score = graph.matmul(t, a_t)?;
            let per_node = graph.gather_rows(node_score, index.clone())?;
            let per_relation = graph.gather_rows(relation_score, relation)?;
            let logits = graph.add(per_node, per_relation)?;
            let activated = graph.leaky_relu(logits, cfg.leaky_slope)?;
            let alpha = graph.segment_softmax(activated, offsets.clone())?;
            (alpha, Some(alpha))
        }
        Aggregator::Mean => {
            let mut w = Matrix::zeros((index.len(), 1));
            for bounds in offsets.windows(2) {
                let k = (bounds[1] - bounds[0]) as f64;
                for i in bounds[0]..bounds[1] {
                    w[[i, 0]] = 1.0 / k;
                }
            }
            (graph.constant(w), None)
        }
    };

    let aggregate = graph.segment_weighted_sum(h_prev, weights, index, offsets)?;
    let combined = match cfg.combine {
        CombineMode::ConcatThenTransform => graph.concat_cols(&[h_prev, aggregate])?,
        CombineMode::AddThenTransform => graph.add(h_prev, aggregate)?,
    };
    let z = graph.matmul(combined, vars.weight)?;
    let z = graph.add_row(z, vars.bias)?;
    let out = graph.leaky_relu(z, cfg.leaky_slope)?;
    Ok((out, attention))
}

/// Records the full model: input embeddings, every layer (sampling each
/// from the previous layer's values) and the classifier head.
pub fn record_forward(
    g: &MultiRelationGraph,
    params: &ModelParams,
    cfg: &LayerConfig,
    key: SampleKey,
) -> Result<Forward> {
    check_params(g, params, cfg)?;
    let mut graph = DiffGraph::new();
    let vars = ParamVars::bind(&mut graph, params);
    let features = graph.constant(g.features().clone());
    let input = match vars.context {
        Some(c) => graph.concat_cols(&[features, c])?,
        None => features,
    };

    let mut h = input;
    let mut layers = Vec::with_capacity(cfg.num_layers());
    let mut attention = Vec::with_capacity(cfg.num_layers());
    let mut all_samples = Vec::with_capacity(cfg.num_layers());
    for (l, layer_vars) in vars.layers.iter().enumerate() {
        let samples = sample_layer(
            g,
            graph.value(h),
            cfg.mechanisms.sampling,
            cfg.samples_per_layer[l],
            cfg.epsilon,
            key.seed,
            key.pass,
            l,
        );
        let (out, alpha) = record_layer(&mut graph, h, layer_vars, cfg, &samples)?;
        layers.push(out);
        attention.push(alpha);
        all_samples.push(samples);
        h = out;
    }

    let logits = graph.matmul(h, vars.classifier)?;
    let logits = graph.add_row(logits, vars.classifier_bias)?;
    Ok(Forward {
        graph,
        vars,
        input,
        layers,
        attention,
        samples: all_samples,
        logits,
    })
}

/// Layer-1 input values: `x_v ‖ c_v` with context embeddings, else `x_v`.
pub fn input_embeddings(g: &MultiRelationGraph, params: &ModelParams) -> Matrix {
    match &params.context {
        Some(c) => concatenate(Axis(1), &[g.features().view(), c.value.view()]).expect("same row count"),
        None => g.features().clone(),
    }
}

/// Runs layer `layer` on `h_prev` with neighborhoods already drawn.
pub fn layer_forward_with_samples(
    h_prev: &Matrix,
    layer: usize,
    params: &ModelParams,
    cfg: &LayerConfig,
    samples: &[SampledNeighborhood],
) -> Result<Matrix> {
    cfg.validate()?;
    let p = params
        .layers
        .get(layer)
        .ok_or_else(|| Error::Config(format!("no layer {layer}")))?;
    let mut graph = DiffGraph::new();
    let h = graph.constant(h_prev.clone());
    let vars = LayerVars::bind(&mut graph, p);
    let (out, _) = record_layer(&mut graph, h, &vars, cfg, samples)?;
    Ok(graph.value(out).clone())
}

/// Samples neighborhoods from `h_prev` and runs layer `layer`.
pub fn layer_forward(
    g: &MultiRelationGraph,
    h_prev: &Matrix,
    layer: usize,
    params: &ModelParams,
    cfg: &LayerConfig,
    key: SampleKey,
) -> Result<(Matrix, Vec<SampledNeighborhood>)> {
    cfg.validate()?;
    if layer >= cfg.num_layers() {
        return Err(Error::Config(format!("no layer {layer}")));
    }
    if h_prev.nrows() != g.num_nodes() {
        return Err(Error::shape("layer_forward", format!("{} rows for {} nodes", h_prev.nrows(), g.num_nodes())));
    }
    let samples = sample_layer(
        g,
        h_prev,
        cfg.mechanisms.sampling,
        cfg.samples_per_layer[layer],
        cfg.epsilon,
        key.seed,
        key.pass,
        layer,
    );
    let out = layer_forward_with_samples(h_prev, layer, params, cfg, &samples)?;
    Ok((out, samples))
}

/// Final embeddings and one logit per node.
pub fn model_forward(
    g: &MultiRelationGraph,
    params: &ModelParams,
    cfg: &LayerConfig,
    key: SampleKey,
) -> Result<ModelOutput> {
    let fwd = record_forward(g, params, cfg, key)?;
    let last = *fwd.layers.last().expect("at least one layer");
    Ok(ModelOutput {
        embeddings: fwd.graph.value(last).clone(),
        logits: fwd.graph.value(fwd.logits).column(0).to_vec(),
    })
}
