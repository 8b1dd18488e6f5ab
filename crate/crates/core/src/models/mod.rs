//! Model parameter bundles and their forward/backward passes.
//!
//! Four architectures, all ending in a row softmax trained with summed
//! cross-entropy:
//!
//! * `mlp`: two-layer perceptron with biases, graph-blind;
//! * `gcn`: stacked propagate-transform-relu layers, no biases;
//! * `decoupled`: the MLP followed by `k` parameter-free propagation steps,
//!   separating feature transformation from neighborhood aggregation;
//! * `dagnn`: the decoupled MLP keeps every intermediate hop, and a learned
//!   per-node gate over hop depths mixes them adaptively.
//!
//! Backward passes are hand-derived; `nn::gradcheck` validates them.

mod dagnn;
mod decoupled;
mod gcn;
mod mlp;

pub mod checkpoint;

pub use dagnn::{dagnn_backward, dagnn_forward, dagnn_forward_gated, DagnnCache, GateMode};
pub use decoupled::{decoupled_backward, decoupled_forward, DecoupledCache};
pub use gcn::{gcn_backward, gcn_forward, GcnCache};
pub use mlp::{mlp_backward, mlp_forward, MlpCache};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::nn::kernels::glorot_init;
use crate::nn::ParamTensors;
use crate::seed;

/// Two-layer MLP: `x -> relu(x W1 + b1) -> (W2, b2)`. Weights are Glorot
/// uniform, biases start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: DenseMatrix,
    pub b1: DenseMatrix,
    pub w2: DenseMatrix,
    pub b2: DenseMatrix,
}

impl MlpParams {
    pub fn new(input_dim: usize, hidden: usize, classes: usize, init_seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || classes == 0 {
            return Err(Error::InvalidArgument(
                "mlp dimensions must be positive".into(),
            ));
        }
        Ok(MlpParams {
            w1: glorot_init(input_dim, hidden, seed::mix(init_seed, 1)),
            b1: DenseMatrix::zeros(1, hidden),
            w2: glorot_init(hidden, classes, seed::mix(init_seed, 2)),
            b2: DenseMatrix::zeros(1, classes),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn classes(&self) -> usize {
        self.w2.cols()
    }
}

impl ParamTensors for MlpParams {
    fn tensor_names(&self) -> Vec<String> {
        vec!["w1".into(), "b1".into(), "w2".into(), "b2".into()]
    }
    fn tensors(&self) -> Vec<&DenseMatrix> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }
    fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

/// Stacked graph-convolution weights, one per layer, without biases.
/// A depth-1 stack maps straight from input to classes.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub weights: Vec<DenseMatrix>,
}

impl GcnParams {
    pub fn new(
        input_dim: usize,
        hidden: usize,
        classes: usize,
        depth: usize,
        init_seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || classes == 0 {
            return Err(Error::InvalidArgument(
                "gcn dimensions must be positive".into(),
            ));
        }
        if depth == 0 {
            return Err(Error::InvalidArgument("gcn depth must be at least 1".into()));
        }
        let mut weights = Vec::with_capacity(depth);
        for layer in 0..depth {
            let rows = if layer == 0 { input_dim } else { hidden };
            let cols = if layer == depth - 1 { classes } else { hidden };
            weights.push(glorot_init(rows, cols, seed::mix(init_seed, 10 + layer as u64)));
        }
        Ok(GcnParams { weights })
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn classes(&self) -> usize {
        self.weights.last().expect("at least one layer").cols()
    }
}

impl ParamTensors for GcnParams {
    fn tensor_names(&self) -> Vec<String> {
        (0..self.weights.len()).map(|i| format!("w{i}")).collect()
    }
    fn tensors(&self) -> Vec<&DenseMatrix> {
        self.weights.iter().collect()
    }
    fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        self.weights.iter_mut().collect()
    }
}

/// The adaptive-depth model: the MLP produces class scores, and `s` gates
/// how much each propagation depth contributes per node.
#[derive(Debug, Clone, PartialEq)]
pub struct DagnnParams {
    pub mlp: MlpParams,
    /// Gate projection, `classes x 1`.
    pub s: DenseMatrix,
}

impl DagnnParams {
    pub fn new(input_dim: usize, hidden: usize, classes: usize, init_seed: u64) -> Result<Self> {
        Ok(DagnnParams {
            mlp: MlpParams::new(input_dim, hidden, classes, init_seed)?,
            s: glorot_init(classes, 1, seed::mix(init_seed, 3)),
        })
    }

    pub fn classes(&self) -> usize {
        self.mlp.classes()
    }
}

impl ParamTensors for DagnnParams {
    fn tensor_names(&self) -> Vec<String> {
        vec!["w1".into(), "b1".into(), "w2".into(), "b2".into(), "s".into()]
    }
    fn tensors(&self) -> Vec<&DenseMatrix> {
        vec![&self.mlp.w1, &self.mlp.b1, &self.mlp.w2, &self.mlp.b2, &self.s]
    }
    fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        vec![
            &mut self.mlp.w1,
            &mut self.mlp.b1,
            &mut self.mlp.w2,
            &mut self.mlp.b2,
            &mut self.s,
        ]
    }
}

/// Total number of trainable scalars.
pub fn count_parameters(params: &impl ParamTensors) -> usize {
    params.tensors().iter().map(|t| t.len()).sum()
}
