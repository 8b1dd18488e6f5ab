//! Building blocks for studying depth and over-smoothing in graph neural
//! networks: normalized propagation operators over undirected graphs, their
//! closed-form infinite-depth limits, smoothness metrics over node
//! representations, and a small family of models (MLP, GCN, decoupled
//! propagation, adaptive gated propagation) trained with hand-derived
//! gradients that are validated by finite differences.
//!
//! Everything is plain `f64` on dense row-major matrices plus one CSR sparse
//! operator; the scale of interest is citation-network sized (thousands of
//! nodes), not web sized. All randomness flows through explicit seeds, so
//! every result in the crate is reproducible bit for bit.

pub mod dataset;
pub mod dense;
pub mod error;
pub mod graph;
pub mod models;
pub mod nn;
pub mod propagation;
pub mod smoothness;
pub mod spectral;
pub mod synth;
pub mod train;

mod seed;

pub use dataset::{load_dataset, save_dataset, DatasetBundle};
pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use graph::Graph;
pub use propagation::{normalize, OperatorKind, PropagationOperator};
pub use smoothness::{graph_smoothness, SmoothnessMode, SmoothnessResult};
pub use spectral::{LimitMatrix, SpectralReport};
pub use train::{
    make_split, multi_run, run_split, train, ModelKind, RunReport, Split, SplitKind, SplitSpec,
    TaskData, TrainConfig, TrainedModel,
};
