//! The layered consistency-aware model.
//!
//! Layer 1 sees `x_v ‖ c_v`, where `c_v` is a trainable per-node context
//! embedding. Each layer scores neighbors by embedding similarity, drops
//! those below `ε`, draws `Q` of the rest in proportion to their scores,
//! weights the draws with relation-aware attention and combines the
//! aggregate with the center embedding.

pub mod attention;
pub mod config;
pub mod forward;
pub mod params;
pub mod sampling;
pub mod train;

pub use attention::{aggregate_neighborhood, relation_attention_weights};
pub use config::{Aggregator, CombineMode, LayerConfig, Mechanisms, Sampling};
pub use forward::{
    input_embeddings, layer_forward, layer_forward_with_samples, model_forward, record_forward, Forward,
    ModelOutput, SampleKey,
};
pub use params::{parameter_shapes, LayerParams, ModelParams};
pub use sampling::{
    consistency_scores, filter_and_sample, full_neighborhood, sample_layer, uniform_sample, SampledNeighborhood,
};
pub use train::{compute_loss, init_params, predict_scores, train, train_from, TrainConfig};
