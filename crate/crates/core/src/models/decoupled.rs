//! Decoupled transform/propagate model: an MLP produces class scores, then
//! `k` parameter-free propagation steps smooth them over the graph. Because
//! no weights sit between propagation steps, depth can grow without adding
//! parameters or relu saturation.

use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::models::mlp::{mlp_backward, mlp_forward, MlpCache};
use crate::models::MlpParams;
use crate::propagation::PropagationOperator;

#[derive(Debug, Clone)]
pub struct DecoupledCache {
    pub mlp: MlpCache,
    pub k: usize,
}

/// Returns logits after `k` propagation steps and the cache. `k = 0` reduces
/// to the plain MLP.
pub fn decoupled_forward(
    params: &MlpParams,
    op: &PropagationOperator,
    x: &DenseMatrix,
    k: usize,
    dropout_rate: f64,
    training: bool,
    dropout_seed: u64,
) -> Result<(DenseMatrix, DecoupledCache)> {
    let (scores, mlp_cache) = mlp_forward(params, x, dropout_rate, training, dropout_seed)?;
    let mut h = scores;
    for _ in 0..k {
        h = op.propagate(&h)?;
    }
    Ok((h, DecoupledCache { mlp: mlp_cache, k }))
}

/// Gradients in the MLP's canonical order. The propagation steps contribute
/// `k` transposed applications of the operator.
pub fn decoupled_backward(
    params: &MlpParams,
    op: &PropagationOperator,
    cache: &DecoupledCache,
    d_logits: &DenseMatrix,
) -> Result<Vec<DenseMatrix>> {
    let mut g = d_logits.clone();
    for _ in 0..cache.k {
        g = op.propagate_transpose(&g)?;
    }
    mlp_backward(params, &cache.mlp, &g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::nn::gradcheck::finite_diff_check;
    use crate::nn::kernels::{
        cross_entropy, cross_entropy_softmax_backward, glorot_init, softmax_rows,
    };
    use crate::propagation::{normalize, OperatorKind};

    fn setup() -> (PropagationOperator, DenseMatrix) {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (1, 4)], 6)
            .unwrap();
        (normalize(&g, OperatorKind::Symmetric), glorot_init(6, 4, 51))
    }

    #[test]
    fn zero_steps_reduces_to_the_mlp() {
        let (op, x) = setup();
        let params = MlpParams::new(4, 5, 3, 1).unwrap();
        let (direct, _) = mlp_forward(&params, &x, 0.0, false, 0).unwrap();
        let (via_decoupled, _) = decoupled_forward(&params, &op, &x, 0, 0.0, false, 0).unwrap();
        assert_eq!(direct, via_decoupled);
    }

    #[test]
    fn propagation_matches_dense_power_oracle() {
        let (op, x) = setup();
        let params = MlpParams::new(4, 5, 3, 2).unwrap();
        let k = 7;
        let (logits, _) = decoupled_forward(&params, &op, &x, k, 0.0, false, 0).unwrap();

        // Oracle: materialize the dense k-th power and apply it once.
        let (scores, _) = mlp_forward(&params, &x, 0.0, false, 0).unwrap();
        let dense = op.to_dense();
        let mut power = DenseMatrix::identity(dense.rows());
        for _ in 0..k {
            power = power.matmul(&dense).unwrap();
        }
        let oracle = power.matmul(&scores).unwrap();
        assert!(logits.frobenius_distance(&oracle).unwrap() < 1e-10);
    }

    #[test]
    fn gradients_pass_finite_difference_check() {
        let (op, x) = setup();
        let labels = vec![0, 1, 2, 0, 1, 2];
        let mask = vec![0, 1, 4, 5];
        let mut params = MlpParams::new(4, 5, 3, 3).unwrap();
        let k = 5;
        let (logits, cache) = decoupled_forward(&params, &op, &x, k, 0.0, true, 0).unwrap();
        let probs = softmax_rows(&logits);
        let d_logits = cross_entropy_softmax_backward(&probs, &labels, &mask).unwrap();
        let grads = decoupled_backward(&params, &op, &cache, &d_logits).unwrap();

        let report = finite_diff_check(
            &mut params,
            &grads,
            |p| {
                let (logits, _) = decoupled_forward(p, &op, &x, k, 0.0, false, 0)?;
                let (loss, _) = cross_entropy(&softmax_rows(&logits), &labels, &mask)?;
                Ok(loss)
            },
            1e-5,
            30,
            0,
        )
        .unwrap();
        assert!(
            report.max_rel_error < 1e-5,
            "max rel error {} at {}[{}]",
            report.max_rel_error,
            report.worst_tensor,
            report.worst_index
        );
    }
}
