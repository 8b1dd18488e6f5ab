//! Forward kernels and their gradients. Cross-entropy is summed (not
//! averaged) over the labeled nodes, matching the loss the models report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

pub fn relu(x: &DenseMatrix) -> DenseMatrix {
    x.map(|v| v.max(0.0))
}

/// Gradient of relu at the stored pre-activation: passes `grad` where
/// `pre > 0`, zero elsewhere.
pub fn relu_backward(grad: &DenseMatrix, pre: &DenseMatrix) -> Result<DenseMatrix> {
    if grad.shape() != pre.shape() {
        return Err(Error::ShapeMismatch(format!(
            "relu gradient {:?} vs pre-activation {:?}",
            grad.shape(),
            pre.shape()
        )));
    }
    let mut out = grad.clone();
    for (o, &p) in out.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *o = 0.0;
        }
    }
    Ok(out)
}

pub fn sigmoid(x: &DenseMatrix) -> DenseMatrix {
    x.map(|v| 1.0 / (1.0 + (-v).exp()))
}

/// Row-wise softmax with the usual max shift, so arbitrarily large logits
/// stay finite.
pub fn softmax_rows(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Inverted dropout: keeps each entry with probability `1 - rate` and scales
/// survivors by `1/(1 - rate)`, so expectations match eval mode. Returns the
/// output and, in training mode, the mask of scale factors the backward pass
/// needs. Eval mode or `rate == 0` is the identity.
pub fn dropout(
    x: &DenseMatrix,
    rate: f64,
    seed: u64,
    training: bool,
) -> Result<(DenseMatrix, Option<DenseMatrix>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = DenseMatrix::zeros(x.rows(), x.cols());
    for v in mask.data_mut() {
        if rng.random::<f64>() >= rate {
            *v = keep_scale;
        }
    }
    let mut out = x.clone();
    out.hadamard_in_place(&mask)?;
    Ok((out, Some(mask)))
}

pub fn dropout_backward(grad: &DenseMatrix, mask: Option<&DenseMatrix>) -> Result<DenseMatrix> {
    match mask {
        None => Ok(grad.clone()),
        Some(m) => {
            let mut out = grad.clone();
            out.hadamard_in_place(m)?;
            Ok(out)
        }
    }
}

/// Summed cross-entropy over the masked rows of a probability matrix.
/// Probabilities at or below `1e-12` are clamped there; the second return
/// value counts how often that happened.
pub fn cross_entropy(
    probs: &DenseMatrix,
    labels: &[usize],
    mask: &[usize],
) -> Result<(f64, usize)> {
    validate_labeled(probs, labels, mask)?;
    let mut loss = 0.0;
    let mut clamped = 0;
    for &i in mask {
        let mut p = probs.get(i, labels[i]);
        if p <= 1e-12 {
            p = 1e-12;
            clamped += 1;
        }
        loss -= p.ln();
    }
    Ok((loss, clamped))
}

/// Gradient of summed cross-entropy composed with row softmax, taken with
/// respect to the logits: `probs - onehot` on masked rows, zero elsewhere.
pub fn cross_entropy_softmax_backward(
    probs: &DenseMatrix,
    labels: &[usize],
    mask: &[usize],
) -> Result<DenseMatrix> {
    validate_labeled(probs, labels, mask)?;
    let mut out = DenseMatrix::zeros(probs.rows(), probs.cols());
    for &i in mask {
        out.row_mut(i).copy_from_slice(probs.row(i));
        let l = labels[i];
        out.set(i, l, out.get(i, l) - 1.0);
    }
    Ok(out)
}

fn validate_labeled(probs: &DenseMatrix, labels: &[usize], mask: &[usize]) -> Result<()> {
    if labels.len() != probs.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            probs.rows()
        )));
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    for &i in mask {
        if i >= probs.rows() {
            return Err(Error::InvalidArgument(format!(
                "masked node {i} out of range for {} rows",
                probs.rows()
            )));
        }
        if labels[i] >= probs.cols() {
            return Err(Error::InvalidArgument(format!(
                "label {} of node {i} out of range for {} classes",
                labels[i],
                probs.cols()
            )));
        }
    }
    Ok(())
}

/// Glorot uniform initialization: entries drawn from
/// `[-sqrt(6/(rows+cols)), sqrt(6/(rows+cols))]`.
pub fn glorot_init(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DenseMatrix::zeros(rows, cols);
    for v in out.data_mut() {
        *v = (rng.random::<f64>() * 2.0 - 1.0) * bound;
    }
    out
}

/// Fraction of masked rows whose argmax matches the label. Ties go to the
/// lowest class index.
pub fn accuracy(probs: &DenseMatrix, labels: &[usize], mask: &[usize]) -> Result<f64> {
    validate_labeled(probs, labels, mask)?;
    let mut hits = 0usize;
    for &i in mask {
        let row = probs.row(i);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        if best == labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / mask.len() as f64)
}
