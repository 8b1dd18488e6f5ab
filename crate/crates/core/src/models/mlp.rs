//! Two-layer MLP forward/backward. Dropout precedes each linear layer in
//! training mode.

use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::models::MlpParams;
use crate::nn::kernels::{dropout, dropout_backward, relu, relu_backward};
use crate::seed;

/// Intermediates the backward pass needs.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub x_dropped: DenseMatrix,
    pub mask_in: Option<DenseMatrix>,
    pub pre1: DenseMatrix,
    pub h_dropped: DenseMatrix,
    pub mask_hidden: Option<DenseMatrix>,
}

/// Returns logits (pre-softmax) and the cache.
pub fn mlp_forward(
    params: &MlpParams,
    x: &DenseMatrix,
    dropout_rate: f64,
    training: bool,
    dropout_seed: u64,
) -> Result<(DenseMatrix, MlpCache)> {
    let (x_dropped, mask_in) = dropout(x, dropout_rate, seed::mix(dropout_seed, 1), training)?;
    let mut pre1 = x_dropped.matmul(&params.w1)?;
    pre1.add_row_broadcast(&params.b1)?;
    let h = relu(&pre1);
    let (h_dropped, mask_hidden) = dropout(&h, dropout_rate, seed::mix(dropout_seed, 2), training)?;
    let mut logits = h_dropped.matmul(&params.w2)?;
    logits.add_row_broadcast(&params.b2)?;
    Ok((
        logits,
        MlpCache {
            x_dropped,
            mask_in,
            pre1,
            h_dropped,
            mask_hidden,
        },
    ))
}

/// Gradients in canonical order `[w1, b1, w2, b2]` from the logits gradient.
pub fn mlp_backward(
    params: &MlpParams,
    cache: &MlpCache,
    d_logits: &DenseMatrix,
) -> Result<Vec<DenseMatrix>> {
    let d_w2 = cache.h_dropped.matmul_tn(d_logits)?;
    let d_b2 = d_logits.column_sums();
    let d_h_dropped = d_logits.matmul_nt(&params.w2)?;
    let d_h = dropout_backward(&d_h_dropped, cache.mask_hidden.as_ref())?;
    let d_pre1 = relu_backward(&d_h, &cache.pre1)?;
    let d_w1 = cache.x_dropped.matmul_tn(&d_pre1)?;
    let d_b1 = d_pre1.column_sums();
    Ok(vec![d_w1, d_b1, d_w2, d_b2])
}
