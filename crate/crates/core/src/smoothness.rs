//! Smoothness of node representations: how similar every node looks to the
//! rest of the graph. The pairwise distance is half the Euclidean distance
//! between unit-normalized rows, which lands in `[0, 1]` and ignores feature
//! scale; a node's smoothness value averages that distance to all other
//! nodes, and the graph-level value averages over nodes. Small values mean
//! the representation has collapsed toward a common direction, which is the
//! measurable symptom of over-smoothing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Exact mode is quadratic in the node count; sampled mode estimates the
/// graph value from a uniform sample of node pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessMode {
    Exact,
    Sampled { pairs: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothnessResult {
    pub mode: SmoothnessMode,
    /// Per-node smoothness values; exact mode only.
    pub per_node: Option<Vec<f64>>,
    pub graph_value: f64,
}

/// Nodes beyond which exact mode refuses to run; use sampling instead.
pub const EXACT_NODE_CAP: usize = 5000;

/// Smallest admissible sample size.
pub const MIN_SAMPLE_PAIRS: usize = 1000;

/// Distance between two representation rows: half the Euclidean distance of
/// the unit-normalized vectors. Zero rows normalize to zero.
pub fn pair_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "rows of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = norm(a);
    let nb = norm(b);
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let xa = if na > 0.0 { x / na } else { 0.0 };
        let yb = if nb > 0.0 { y / nb } else { 0.0 };
        let d = xa - yb;
        acc += d * d;
    }
    // Unit vectors are at most 2 apart; the min guards the last float ulp.
    Ok((0.5 * acc.sqrt()).min(1.0))
}

/// Mean distance from node `i` to every other node.
pub fn node_smoothness(x: &DenseMatrix, i: usize) -> Result<f64> {
    let n = x.rows();
    if i >= n {
        return Err(Error::InvalidArgument(format!(
            "node {i} out of range for {n} rows"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "smoothness needs at least two nodes".into(),
        ));
    }
    let normalized = normalize_rows(x);
    Ok(node_value(&normalized, i))
}

/// Graph-level smoothness; see the module docs for the exact/sampled split.
pub fn graph_smoothness(x: &DenseMatrix, mode: SmoothnessMode) -> Result<SmoothnessResult> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "smoothness needs at least two nodes".into(),
        ));
    }
    match mode {
        SmoothnessMode::Exact => {
            if n > EXACT_NODE_CAP {
                return Err(Error::InvalidArgument(format!(
                    "exact smoothness capped at {EXACT_NODE_CAP} nodes, got {n}; use sampled mode"
                )));
            }
            let normalized = normalize_rows(x);
            let per_node: Vec<f64> = (0..n).map(|i| node_value(&normalized, i)).collect();
            let graph_value = per_node.iter().sum::<f64>() / n as f64;
            Ok(SmoothnessResult {
                mode,
                per_node: Some(per_node),
                graph_value,
            })
        }
        SmoothnessMode::Sampled { pairs, seed } => {
            if pairs < MIN_SAMPLE_PAIRS {
                return Err(Error::TooFewPairs {
                    got: pairs,
                    min: MIN_SAMPLE_PAIRS,
                });
            }
            let normalized = normalize_rows(x);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut acc = 0.0;
            for _ in 0..pairs {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                acc += raw_distance(normalized.row(i), normalized.row(j));
            }
            Ok(SmoothnessResult {
                mode,
                per_node: None,
                graph_value: acc / pairs as f64,
            })
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize_rows(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let n = norm(row);
        if n > 0.0 {
            for v in row {
                *v /= n;
            }
        } else {
            for v in row {
                *v = 0.0;
            }
        }
    }
    out
}

/// Distance between two already unit-normalized rows.
fn raw_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    (0.5 * acc.sqrt()).min(1.0)
}

fn node_value(normalized: &DenseMatrix, i: usize) -> f64 {
    let n = normalized.rows();
    let mut acc = 0.0;
    for j in 0..n {
        if j != i {
            acc += raw_distance(normalized.row(i), normalized.row(j));
        }
    }
    acc / (n - 1) as f64
}
