//! Normalized propagation operators over the self-augmented adjacency.
//!
//! With `A` the adjacency, `I` the identity and `D` the diagonal degree
//! matrix of `A + I`, the two normalizations are
//!
//! * row-averaging: `D^-1 (A + I)`, each output row is the mean of the
//!   node's closed neighborhood;
//! * symmetric: `D^-1/2 (A + I) D^-1/2`, the usual GCN operator.
//!
//! Both are stored sparsely and applied row-wise, so one application costs
//! one pass over the edges.

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    RowAvg,
    Symmetric,
}

impl OperatorKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rowavg" | "row-avg" | "row_avg" => Ok(OperatorKind::RowAvg),
            "symmetric" | "sym" => Ok(OperatorKind::Symmetric),
            other => Err(Error::InvalidArgument(format!(
                "unknown operator kind {other:?}, expected rowavg or symmetric"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::RowAvg => "rowavg",
            OperatorKind::Symmetric => "symmetric",
        }
    }
}

/// A normalized adjacency with weights aligned to the graph's CSR layout.
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct PropagationOperator {
    kind: OperatorKind,
    graph: Graph,
    values: Vec<f64>,
}

/// Builds the normalized operator of the requested kind.
pub fn normalize(graph: &Graph, kind: OperatorKind) -> PropagationOperator {
    let n = graph.n();
    let mut values = Vec::with_capacity(2 * graph.m() + n);
    match kind {
        OperatorKind::RowAvg => {
            for i in 0..n {
                let w = 1.0 / graph.degree(i) as f64;
                values.extend(std::iter::repeat(w).take(graph.degree(i)));
            }
        }
        OperatorKind::Symmetric => {
            let inv_sqrt: Vec<f64> = graph
                .degrees()
                .iter()
                .map(|&d| 1.0 / (d as f64).sqrt())
                .collect();
            for i in 0..n {
                for &j in graph.neighbors(i) {
                    values.push(inv_sqrt[i] * inv_sqrt[j]);
                }
            }
        }
    }
    PropagationOperator {
        kind,
        graph: graph.clone(),
        values,
    }
}

impl PropagationOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Weight iterator for row `i`: `(neighbor, weight)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.graph
            .neighbors(i)
            .iter()
            .zip(&self.values[self.graph.row_range(i)])
            .map(|(&j, &w)| (j, w))
    }

    /// Applies the operator to a feature matrix: `out = W * x`.
    pub fn propagate(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.n();
        if x.rows() != n {
            return Err(Error::ShapeMismatch(format!(
                "operator over {n} nodes cannot propagate {} rows",
                x.rows()
            )));
        }
        let mut out = DenseMatrix::zeros(n, x.cols());
        for i in 0..n {
            let out_row = out.row_mut(i);
            for (j, w) in self.row(i) {
                for (o, &v) in out_row.iter_mut().zip(x.row(j)) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }

    /// Applies the transposed operator: `out = W^T * x`. Coincides with
    /// `propagate` for the symmetric kind up to summation order; needed for
    /// exact gradients under the row-averaging kind.
    pub fn propagate_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.n();
        if x.rows() != n {
            return Err(Error::ShapeMismatch(format!(
                "operator over {n} nodes cannot propagate {} rows",
                x.rows()
            )));
        }
        let mut out = DenseMatrix::zeros(n, x.cols());
        for i in 0..n {
            let x_row = x.row(i).to_vec();
            for (j, w) in self.row(i) {
                for (o, &v) in out.row_mut(j).iter_mut().zip(&x_row) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }

    /// `out = W * v` for a single vector.
    pub fn propagate_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if v.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "operator over {n} nodes cannot propagate a vector of length {}",
                v.len()
            )));
        }
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(j, w)| w * v[j]).sum();
        }
        Ok(out)
    }

    /// `out = v^T W` for a single vector, i.e. left multiplication.
    pub fn propagate_vec_left(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if v.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "operator over {n} nodes cannot left-propagate a vector of length {}",
                v.len()
            )));
        }
        let mut out = vec![0.0; n];
        for i in 0..n {
            for (j, w) in self.row(i) {
                out[j] += v[i] * w;
            }
        }
        Ok(out)
    }

    /// Materializes the operator as a dense matrix.
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.n();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for (j, w) in self.row(i) {
                out.set(i, j, w);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3() -> Graph {
        Graph::from_edges(&[(0, 1), (1, 2)], 3).unwrap()
    }

    #[test]
    fn row_avg_rows_sum_to_one() {
        let op = normalize(&p3(), OperatorKind::RowAvg);
        let dense = op.to_dense();
        for i in 0..3 {
            let sum: f64 = dense.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-15);
        }
        assert_eq!(dense.row(1), &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn symmetric_entry_is_inverse_sqrt_degree_product() {
        let op = normalize(&p3(), OperatorKind::Symmetric);
        let dense = op.to_dense();
        // degrees with self-loops are [2, 3, 2], so entry (0,1) = 1/sqrt(6).
        let expected = 1.0 / 6.0_f64.sqrt();
        assert!((dense.get(0, 1) - expected).abs() < 1e-15);
        assert!((dense.get(0, 1) - 0.408_248_290_463_863).abs() < 1e-12);
        assert_eq!(dense.get(0, 2), 0.0);
        assert!((dense.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_operator_is_symmetric() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)], 4).unwrap();
        let dense = normalize(&g, OperatorKind::Symmetric).to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(dense.get(i, j), dense.get(j, i));
            }
        }
    }

    #[test]
    fn propagate_indicator_on_p3_row_avg() {
        let op = normalize(&p3(), OperatorKind::RowAvg);
        let e0 = DenseMatrix::from_rows(&[vec![1.0], vec![0.0], vec![0.0]]).unwrap();
        let out = op.propagate(&e0).unwrap();
        assert!((out.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((out.get(1, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(out.get(2, 0), 0.0);
    }

    #[test]
    fn propagate_matches_dense_multiply() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)], 5).unwrap();
        for kind in [OperatorKind::RowAvg, OperatorKind::Symmetric] {
            let op = normalize(&g, kind);
            let x = DenseMatrix::from_vec(5, 3, (0..15).map(|v| v as f64 * 0.37 - 2.0).collect())
                .unwrap();
            let sparse = op.propagate(&x).unwrap();
            let dense = op.to_dense().matmul(&x).unwrap();
            assert!(sparse.frobenius_distance(&dense).unwrap() < 1e-14);
        }
    }

    #[test]
    fn propagate_transpose_matches_dense_transpose() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (1, 3)], 4).unwrap();
        for kind in [OperatorKind::RowAvg, OperatorKind::Symmetric] {
            let op = normalize(&g, kind);
            let x =
                DenseMatrix::from_vec(4, 2, (0..8).map(|v| (v as f64).sin()).collect()).unwrap();
            let sparse = op.propagate_transpose(&x).unwrap();
            let dense = op.to_dense().transpose().matmul(&x).unwrap();
            assert!(sparse.frobenius_distance(&dense).unwrap() < 1e-14);
        }
    }

    #[test]
    fn vector_forms_match_matrix_forms() {
        let g = Graph::from_edges(&[(0, 1), (1, 2)], 3).unwrap();
        let op = normalize(&g, OperatorKind::Symmetric);
        let v = vec![1.0, -2.0, 0.5];
        let x = DenseMatrix::from_vec(3, 1, v.clone()).unwrap();
        let right = op.propagate_vec(&v).unwrap();
        let right_m = op.propagate(&x).unwrap();
        let left = op.propagate_vec_left(&v).unwrap();
        let left_m = op.propagate_transpose(&x).unwrap();
        for i in 0..3 {
            assert!((right[i] - right_m.get(i, 0)).abs() < 1e-15);
            assert!((left[i] - left_m.get(i, 0)).abs() < 1e-15);
        }
    }

    #[test]
    fn propagate_rejects_wrong_row_count() {
        let op = normalize(&p3(), OperatorKind::RowAvg);
        let x = DenseMatrix::zeros(4, 2);
        assert!(matches!(
            op.propagate(&x),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(OperatorKind::parse("rowavg").unwrap(), OperatorKind::RowAvg);
        assert_eq!(
            OperatorKind::parse("symmetric").unwrap(),
            OperatorKind::Symmetric
        );
        assert!(OperatorKind::parse("other").is_err());
    }
}
