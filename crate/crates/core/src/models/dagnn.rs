//! Adaptive-depth propagation. The MLP's class scores are propagated
//! `k` times with every intermediate hop retained; a scalar gate per node
//! and hop, produced by a sigmoid over the learned projection `s`, decides
//! how much of each depth enters that node's final representation. Nodes can
//! therefore use large receptive fields where they help and ignore them
//! where they hurt.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::models::mlp::{mlp_backward, mlp_forward, MlpCache};
use crate::models::DagnnParams;
use crate::nn::kernels::sigmoid;
use crate::propagation::PropagationOperator;

/// How the hop gates are produced. `Learned` is the model; `HopZeroOnly` is
/// a diagnostic that forces all weight onto the unpropagated scores, which
/// must reproduce the plain MLP exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateMode {
    Learned,
    HopZeroOnly,
}

#[derive(Debug, Clone)]
pub struct DagnnCache {
    pub mlp: MlpCache,
    /// `hops[l]` is the scores after `l` propagation steps; `k + 1` entries.
    pub hops: Vec<DenseMatrix>,
    /// Pre-sigmoid gate scores, `n x (k+1)`.
    pub gate_pre: DenseMatrix,
    /// Gate values after the sigmoid (or the override), `n x (k+1)`.
    pub gates: DenseMatrix,
    pub mode: GateMode,
}

pub fn dagnn_forward(
    params: &DagnnParams,
    op: &PropagationOperator,
    x: &DenseMatrix,
    k: usize,
    dropout_rate: f64,
    training: bool,
    dropout_seed: u64,
) -> Result<(DenseMatrix, DagnnCache)> {
    dagnn_forward_gated(
        params,
        op,
        x,
        k,
        dropout_rate,
        training,
        dropout_seed,
        GateMode::Learned,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn dagnn_forward_gated(
    params: &DagnnParams,
    op: &PropagationOperator,
    x: &DenseMatrix,
    k: usize,
    dropout_rate: f64,
    training: bool,
    dropout_seed: u64,
    mode: GateMode,
) -> Result<(DenseMatrix, DagnnCache)> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "adaptive propagation needs k >= 1".into(),
        ));
    }
    if params.s.shape() != (params.classes(), 1) {
        return Err(Error::ShapeMismatch(format!(
            "gate projection has shape {:?}, expected ({}, 1)",
            params.s.shape(),
            params.classes()
        )));
    }
    let (scores, mlp_cache) = mlp_forward(&params.mlp, x, dropout_rate, training, dropout_seed)?;
    let n = scores.rows();
    let c = scores.cols();

    let mut hops = Vec::with_capacity(k + 1);
    hops.push(scores);
    for l in 1..=k {
        let next = op.propagate(&hops[l - 1])?;
        hops.push(next);
    }

    let mut gate_pre = DenseMatrix::zeros(n, k + 1);
    for (l, hop) in hops.iter().enumerate() {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, &v) in hop.row(i).iter().enumerate() {
                acc += v * params.s.get(j, 0);
            }
            gate_pre.set(i, l, acc);
        }
    }
    let gates = match mode {
        GateMode::Learned => sigmoid(&gate_pre),
        GateMode::HopZeroOnly => {
            let mut g = DenseMatrix::zeros(n, k + 1);
            for i in 0..n {
                g.set(i, 0, 1.0);
            }
            g
        }
    };

    let mut out = DenseMatrix::zeros(n, c);
    for (l, hop) in hops.iter().enumerate() {
        for i in 0..n {
            let g = gates.get(i, l);
            if g == 0.0 {
                continue;
            }
            let out_row = out.row_mut(i);
            for (o, &v) in out_row.iter_mut().zip(hop.row(i)) {
                *o += g * v;
            }
        }
    }

    Ok((
        out,
        DagnnCache {
            mlp: mlp_cache,
            hops,
            gate_pre,
            gates,
            mode,
        },
    ))
}

/// Gradients in canonical order `[w1, b1, w2, b2, s]`. With the gate
/// override active the gates are constants, so `s` receives zero gradient.
pub fn dagnn_backward(
    params: &DagnnParams,
    op: &PropagationOperator,
    cache: &DagnnCache,
    d_logits: &DenseMatrix,
) -> Result<Vec<DenseMatrix>> {
    let n = d_logits.rows();
    let c = d_logits.cols();
    let hop_count = cache.hops.len();

    // Mixing: out[i] = sum_l gates[i,l] * hops[l][i].
    let mut d_gates = DenseMatrix::zeros(n, hop_count);
    let mut d_hops: Vec<DenseMatrix> = (0..hop_count).map(|_| DenseMatrix::zeros(n, c)).collect();
    for (l, hop) in cache.hops.iter().enumerate() {
        for i in 0..n {
            let d_row = d_logits.row(i);
            let h_row = hop.row(i);
            let mut acc = 0.0;
            for (&d, &h) in d_row.iter().zip(h_row) {
                acc += d * h;
            }
            d_gates.set(i, l, acc);
            let g = cache.gates.get(i, l);
            if g != 0.0 {
                let target = d_hops[l].row_mut(i);
                for (t, &d) in target.iter_mut().zip(d_row) {
                    *t += g * d;
                }
            }
        }
    }

    let mut d_s = DenseMatrix::zeros(c, 1);
    if cache.mode == GateMode::Learned {
        // Through the sigmoid and the projection by s.
        for l in 0..hop_count {
            for i in 0..n {
                let g = cache.gates.get(i, l);
                let d_pre = d_gates.get(i, l) * g * (1.0 - g);
                if d_pre == 0.0 {
                    continue;
                }
                let h_row = cache.hops[l].row(i);
                for (j, &h) in h_row.iter().enumerate() {
                    d_s.set(j, 0, d_s.get(j, 0) + d_pre * h);
                }
                let target = d_hops[l].row_mut(i);
                for (j, t) in target.iter_mut().enumerate() {
                    *t += d_pre * params.s.get(j, 0);
                }
            }
        }
    }

    // Fold hop gradients back to the scores: hops[l] = W * hops[l-1].
    let mut g = d_hops.pop().expect("at least one hop");
    while let Some(lower) = d_hops.pop() {
        g = op.propagate_transpose(&g)?;
        g.add_scaled(&lower, 1.0)?;
    }

    let mut grads = mlp_backward(&params.mlp, &cache.mlp, &g)?;
    grads.push(d_s);
    Ok(grads)
}
