use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph must have at least one relation")]
    NoRelations,

    #[error("feature matrix has {rows} rows but the graph has {nodes} nodes")]
    FeatureRows { rows: usize, nodes: usize },

    #[error("feature dimension must be at least 1")]
    EmptyFeatures,

    #[error("{len} labels supplied for {nodes} nodes")]
    LabelCount { len: usize, nodes: usize },

    #[error("edge ({u}, {v}) in relation {relation} references a node outside 0..{nodes}")]
    EndpointOutOfRange {
        u: usize,
        v: usize,
        relation: usize,
        nodes: usize,
    },

    #[error("self-loop on node {node} in relation {relation}")]
    SelfLoop { node: usize, relation: usize },

    #[error("node {node} does not exist (graph has {nodes} nodes)")]
    UnknownNode { node: usize, nodes: usize },

    #[error("relation {relation} does not exist (graph has {relations} relations)")]
    UnknownRelation { relation: usize, relations: usize },

    #[error("relation {relation} has no edges")]
    EmptyRelation { relation: usize },

    #[error("edge ({u}, {v}) in relation {relation} has an unlabeled endpoint")]
    UnlabeledEndpoint { u: usize, v: usize, relation: usize },

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("softmax over an empty vector")]
    EmptySoftmax,

    #[error("loss must be a 1x1 scalar, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },

    #[error("non-finite gradient in parameter {index}; optimizer step skipped")]
    NonFiniteGradient { index: usize },

    #[error("non-finite loss {loss} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training mask selects no nodes")]
    EmptyMask,

    #[error("length mismatch: {0}")]
    Length(String),

    #[error("AUC needs both classes among the labels")]
    SingleClass,

    #[error("stratified split leaves class {class} absent from the {split} set")]
    SplitClassAbsent { class: u8, split: &'static str },

    #[error("relation {relation}: target degree {degree} is infeasible for {nodes} nodes")]
    InfeasibleDegree {
        relation: usize,
        degree: f64,
        nodes: usize,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
