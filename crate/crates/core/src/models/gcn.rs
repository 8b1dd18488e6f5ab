//! Graph convolution stack: every layer drops out its input, applies the
//! layer weights, propagates over the graph, and (except at the top) takes a
//! relu. Transform-then-propagate is algebraically the same as the reverse
//! order and cheaper whenever the layer shrinks the feature dimension.

use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::models::GcnParams;
use crate::nn::kernels::{dropout, dropout_backward, relu, relu_backward};
use crate::propagation::PropagationOperator;
use crate::seed;

#[derive(Debug, Clone)]
pub struct GcnCache {
    /// Per layer: the dropped-out input the weights saw.
    pub inputs_dropped: Vec<DenseMatrix>,
    /// Per layer: dropout mask for that input, if training.
    pub masks: Vec<Option<DenseMatrix>>,
    /// Per layer: pre-activation (after propagation, before relu).
    pub pre_acts: Vec<DenseMatrix>,
}

pub fn gcn_forward(
    params: &GcnParams,
    op: &PropagationOperator,
    x: &DenseMatrix,
    dropout_rate: f64,
    training: bool,
    dropout_seed: u64,
) -> Result<(DenseMatrix, GcnCache)> {
    let depth = params.depth();
    let mut cache = GcnCache {
        inputs_dropped: Vec::with_capacity(depth),
        masks: Vec::with_capacity(depth),
        pre_acts: Vec::with_capacity(depth),
    };
    let mut current = x.clone();
    for (layer, w) in params.weights.iter().enumerate() {
        let (dropped, mask) = dropout(
            &current,
            dropout_rate,
            seed::mix(dropout_seed, layer as u64),
            training,
        )?;
        let transformed = dropped.matmul(w)?;
        let pre = op.propagate(&transformed)?;
        cache.inputs_dropped.push(dropped);
        cache.masks.push(mask);
        if layer + 1 < depth {
            current = relu(&pre);
        } else {
            current = pre.clone();
        }
        cache.pre_acts.push(pre);
    }
    Ok((current, cache))
}

/// Gradients for every layer weight, canonical order `[w0, w1, ...]`.
pub fn gcn_backward(
    params: &GcnParams,
    op: &PropagationOperator,
    cache: &GcnCache,
    d_logits: &DenseMatrix,
) -> Result<Vec<DenseMatrix>> {
    let depth = params.depth();
    let mut grads = vec![DenseMatrix::zeros(0, 0); depth];
    let mut d_pre = d_logits.clone();
    for layer in (0..depth).rev() {
        let d_transformed = op.propagate_transpose(&d_pre)?;
        grads[layer] = cache.inputs_dropped[layer].matmul_tn(&d_transformed)?;
        if layer > 0 {
            let d_dropped = d_transformed.matmul_nt(&params.weights[layer])?;
            let d_input = dropout_backward(&d_dropped, cache.masks[layer].as_ref())?;
            d_pre = relu_backward(&d_input, &cache.pre_acts[layer - 1])?;
        }
    }
    Ok(grads)
}
