use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the center embedding and the neighborhood aggregate are combined
/// before the layer's dense transform.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombineMode {
    #[default]
    ConcatThenTransform,
    AddThenTransform,
}

/// Which neighbors a layer looks at and with what probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Filter by consistency score, sample proportional to it.
    Consistency,
    /// Sample uniformly from the multi-relation neighbor multiset.
    Uniform,
    /// No sampling: every merged-relation neighbor, once.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregator {
    /// Softmax attention over `{h_q ‖ t_{r_q}} · a`.
    RelationAttention,
    /// Unweighted mean of the sampled embeddings.
    Mean,
}

/// The three switchable mechanisms. GraphConsis turns all of them on;
/// the GNN baselines are particular settings of these flags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mechanisms {
    pub context_embedding: bool,
    pub sampling: Sampling,
    pub aggregator: Aggregator,
}

impl Mechanisms {
    pub const GRAPHCONSIS: Mechanisms = Mechanisms {
        context_embedding: true,
        sampling: Sampling::Consistency,
        aggregator: Aggregator::RelationAttention,
    };
    pub const UNIFORM_SAMPLE: Mechanisms = Mechanisms {
        context_embedding: false,
        sampling: Sampling::Uniform,
        aggregator: Aggregator::Mean,
    };
    pub const FULL_MEAN: Mechanisms = Mechanisms {
        context_embedding: false,
        sampling: Sampling::Full,
        aggregator: Aggregator::Mean,
    };
}

impl Default for Mechanisms {
    fn default() -> Self {
        Mechanisms::GRAPHCONSIS
    }
}

/// Architecture of the layered model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayerConfig {
    /// Neighbors drawn per node at each layer (`Q_l`).
    pub samples_per_layer: Vec<usize>,
    /// Output width of each layer.
    pub hidden_widths: Vec<usize>,
    /// Consistency threshold; neighbors scoring below it are dropped.
    pub epsilon: f64,
    pub combine: CombineMode,
    /// Negative slope of every leaky-ReLU in the model.
    pub leaky_slope: f64,
    pub mechanisms: Mechanisms,
}

impl Default for LayerConfig {
    fn default() -> Self {
        LayerConfig {
            samples_per_layer: vec![10, 5],
            hidden_widths: vec![200, 100],
            epsilon: 0.01,
            combine: CombineMode::ConcatThenTransform,
            leaky_slope: 0.01,
            mechanisms: Mechanisms::GRAPHCONSIS,
        }
    }
}

impl LayerConfig {
    pub fn num_layers(&self) -> usize {
        self.hidden_widths.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.hidden_widths.is_empty() {
            return bad("at least one layer is required".into());
        }
        if self.samples_per_layer.len() != self.hidden_widths.len() {
            return bad(format!(
                "{} sample counts for {} layers",
                self.samples_per_layer.len(),
                self.hidden_widths.len()
            ));
        }
        if self.hidden_widths.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        if self.samples_per_layer.contains(&0) {
            return bad("samples per layer must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1), got {}", self.epsilon));
        }
        if !self.leaky_slope.is_finite() {
            return bad("leaky slope must be finite".into());
        }
        Ok(())
    }

    /// Width of the embeddings fed into layer `l` for a graph with
    /// feature dimension `d`.
    pub fn input_width(&self, l: usize, d: usize) -> usize {
        if l == 0 {
            if self.mechanisms.context_embedding {
                2 * d
            } else {
                d
            }
        } else {
            self.hidden_widths[l - 1]
        }
    }

    pub fn output_width(&self) -> usize {
        *self.hidden_widths.last().expect("validated config has layers")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = LayerConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.input_width(0, 100), 200);
        assert_eq!(cfg.input_width(1, 100), 200);
        assert_eq!(cfg.output_width(), 100);
    }

    #[test]
    fn rejects_invalid() {
        let mut cfg = LayerConfig::default();
        cfg.hidden_widths = vec![0, 100];
        assert!(cfg.validate().is_err());
        let mut cfg = LayerConfig::default();
        cfg.epsilon = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = LayerConfig::default();
        cfg.samples_per_layer = vec![10];
        assert!(cfg.validate().is_err());
        let mut cfg = LayerConfig::default();
        cfg.samples_per_layer = vec![0, 5];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn serde_names() {
        let json = serde_json::to_string(&Mechanisms::UNIFORM_SAMPLE).unwrap();
        assert_eq!(json, r#"{"context_embedding":false,"sampling":"uniform","aggregator":"mean"}"#);
        let cfg: LayerConfig = serde_json::from_str(r#"{"epsilon":0.05}"#).unwrap();
        assert_eq!(cfg.epsilon, 0.05);
        assert_eq!(cfg.hidden_widths, vec![200, 100]);
    }
}
