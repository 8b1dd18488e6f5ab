//! Infinite-depth behavior of the propagation operators.
//!
//! On a connected graph both normalizations have a simple dominant
//! eigenvalue 1, every other eigenvalue strictly inside the unit circle, and
//! a closed-form limit for `W^k` as `k` grows:
//!
//! * row-averaging: every row of the limit equals `d / sum(d)`, the degree
//!   distribution of the self-augmented graph;
//! * symmetric: entry `(i, j)` of the limit is `sqrt(d_i d_j) / sum(d)`.
//!
//! So deep stacks of propagation wash out all input information except the
//! degrees, which is the precise sense in which over-smoothing is built into
//! the operator rather than being a training artifact. This module computes
//! the limits, measures how fast repeated propagation approaches them, and
//! verifies the eigenstructure claims numerically.
//!
//! The two kinds are similar matrices (conjugation by `D^{1/2}`), hence they
//! share a real spectrum; eigenvalue estimates always run on the symmetric
//! form where Rayleigh-quotient error bounds apply.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::propagation::{normalize, OperatorKind, PropagationOperator};

/// Dense closed-form limit of `W^k` for one operator kind.
#[derive(Debug, Clone)]
pub struct LimitMatrix {
    kind: OperatorKind,
    dense: DenseMatrix,
}

impl LimitMatrix {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.dense.rows()
    }

    pub fn dense(&self) -> &DenseMatrix {
        &self.dense
    }
}

/// Limit of the row-averaging operator: all rows equal `d / sum(d)`.
pub fn limit_row_avg(g: &Graph) -> Result<LimitMatrix> {
    require_connected(g)?;
    let n = g.n();
    let total = g.degree_sum();
    let pi: Vec<f64> = g.degrees().iter().map(|&d| d as f64 / total).collect();
    let mut dense = DenseMatrix::zeros(n, n);
    for i in 0..n {
        dense.row_mut(i).copy_from_slice(&pi);
    }
    Ok(LimitMatrix {
        kind: OperatorKind::RowAvg,
        dense,
    })
}

/// Limit of the symmetric operator: entry `(i, j)` is `sqrt(d_i d_j) / sum(d)`.
pub fn limit_symmetric(g: &Graph) -> Result<LimitMatrix> {
    require_connected(g)?;
    let n = g.n();
    let total = g.degree_sum();
    let sqrt_d: Vec<f64> = g.degrees().iter().map(|&d| (d as f64).sqrt()).collect();
    let mut dense = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let row = dense.row_mut(i);
        for (j, r) in row.iter_mut().enumerate() {
            *r = sqrt_d[i] * sqrt_d[j] / total;
        }
    }
    Ok(LimitMatrix {
        kind: OperatorKind::Symmetric,
        dense,
    })
}

pub fn limit_of(g: &Graph, kind: OperatorKind) -> Result<LimitMatrix> {
    match kind {
        OperatorKind::RowAvg => limit_row_avg(g),
        OperatorKind::Symmetric => limit_symmetric(g),
    }
}

/// Frobenius distance of `W^k` to the limit, for `k = 1..`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub kind: OperatorKind,
    pub tol: f64,
    /// `residuals[k-1]` is the Frobenius norm of `W^k - limit`.
    pub residuals: Vec<f64>,
    /// Smallest `k` with residual below `tol`, when reached within `max_k`.
    pub k_converge: Option<usize>,
}

/// Raises the operator to growing powers and records the Frobenius distance
/// to the closed-form limit. Dense bookkeeping, so the node count is capped.
pub fn power_converge(
    op: &PropagationOperator,
    limit: &LimitMatrix,
    tol: f64,
    max_k: usize,
) -> Result<ConvergenceReport> {
    if op.kind() != limit.kind() {
        return Err(Error::InvalidArgument(format!(
            "operator kind {} does not match limit kind {}",
            op.kind().name(),
            limit.kind().name()
        )));
    }
    if op.n() != limit.n() {
        return Err(Error::ShapeMismatch(format!(
            "operator over {} nodes vs limit over {}",
            op.n(),
            limit.n()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if max_k == 0 {
        return Err(Error::InvalidArgument("max_k must be at least 1".into()));
    }
    if op.n() > 2000 {
        return Err(Error::InvalidArgument(format!(
            "dense power tracking capped at 2000 nodes, got {}",
            op.n()
        )));
    }
    require_connected(op.graph())?;

    let mut power = op.to_dense();
    let mut residuals = Vec::new();
    let mut k_converge = None;
    for k in 1..=max_k {
        if k > 1 {
            power = op.propagate(&power)?;
        }
        let r = power.frobenius_distance(limit.dense())?;
        residuals.push(r);
        if r < tol {
            k_converge = Some(k);
            break;
        }
    }
    Ok(ConvergenceReport {
        kind: op.kind(),
        tol,
        residuals,
        k_converge,
    })
}

/// Magnitude of the second-largest eigenvalue, the quantity that sets the
/// over-smoothing rate. Power iteration on the square of the symmetric
/// operator with its dominant eigenvector deflated away; squaring keeps the
/// iterate stable when the extreme eigenvalues come in a near `+/-` pair.
pub fn second_eigenvalue(op: &PropagationOperator) -> Result<f64> {
    require_connected(op.graph())?;
    let g = op.graph();
    let n = g.n();
    if n == 1 {
        return Ok(0.0);
    }
    let sym;
    let sym_op = if op.kind() == OperatorKind::Symmetric {
        op
    } else {
        sym = normalize(g, OperatorKind::Symmetric);
        &sym
    };

    let v: Vec<f64> = g.degrees().iter().map(|&d| (d as f64).sqrt()).collect();
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let deflated = |x: &[f64]| -> Result<Vec<f64>> {
        let mut y = sym_op.propagate_vec(x)?;
        let proj = dot(&v, x) / vv;
        for (yi, &vi) in y.iter_mut().zip(&v) {
            *yi -= proj * vi;
        }
        Ok(y)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x2e69_6765_6e32);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    normalize_vec(&mut x);

    const CAP: usize = 200_000;
    let mut last_resid = f64::INFINITY;
    for _ in 0..CAP {
        let bx = deflated(&x)?;
        let s2 = dot(&bx, &bx);
        if s2 < 1e-28 {
            return Ok(s2.sqrt());
        }
        let bbx = deflated(&bx)?;
        // Residual of (value, vector) = (s2, x) as an eigenpair of B^2; the
        // symmetric eigenvalue perturbation bound makes this a certificate.
        let mut resid = 0.0;
        for i in 0..n {
            let r = bbx[i] - s2 * x[i];
            resid += r * r;
        }
        resid = resid.sqrt();
        if resid <= 1e-8 + 1e-7 * s2 {
            return Ok(s2.sqrt());
        }
        last_resid = resid;
        let norm = dot(&bbx, &bbx).sqrt();
        if norm < 1e-150 {
            return Ok(0.0);
        }
        x = bbx;
        for xi in &mut x {
            *xi /= norm;
        }
    }
    Err(Error::IterationCap {
        cap: CAP,
        residual: last_resid,
    })
}

/// Residuals of the known eigenvalue-1 eigenpairs of both operators, plus
/// the spectral gap estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitEigenReport {
    /// `W_rowavg * ones = ones`.
    pub row_avg_right: f64,
    /// `d^T W_rowavg = d^T`.
    pub row_avg_left: f64,
    /// `W_sym * sqrt(d) = sqrt(d)`.
    pub symmetric_right: f64,
    /// `sqrt(d)^T W_sym = sqrt(d)^T`.
    pub symmetric_left: f64,
    /// `|lambda_2|`, shared by both kinds.
    pub lambda2_abs: f64,
}

/// Checks that the analytically known eigenvalue-1 eigenpairs really are
/// eigenpairs and that every remaining eigenvalue is strictly smaller in
/// magnitude. Residuals are Euclidean norms against unit-normalized
/// eigenvectors; anything above `1e-8` fails.
pub fn verify_unit_eigenpairs(g: &Graph) -> Result<UnitEigenReport> {
    require_connected(g)?;
    let n = g.n();
    let row_avg = normalize(g, OperatorKind::RowAvg);
    let sym = normalize(g, OperatorKind::Symmetric);

    let ones = vec![1.0 / (n as f64).sqrt(); n];
    let mut deg: Vec<f64> = g.degrees().iter().map(|&d| d as f64).collect();
    normalize_vec(&mut deg);
    let mut sqrt_d: Vec<f64> = g.degrees().iter().map(|&d| (d as f64).sqrt()).collect();
    normalize_vec(&mut sqrt_d);

    let report = UnitEigenReport {
        row_avg_right: residual_norm(&row_avg.propagate_vec(&ones)?, &ones),
        row_avg_left: residual_norm(&row_avg.propagate_vec_left(&deg)?, &deg),
        symmetric_right: residual_norm(&sym.propagate_vec(&sqrt_d)?, &sqrt_d),
        symmetric_left: residual_norm(&sym.propagate_vec_left(&sqrt_d)?, &sqrt_d),
        lambda2_abs: second_eigenvalue(&sym)?,
    };

    let checks = [
        ("row-averaging right eigenvector (ones)", report.row_avg_right),
        ("row-averaging left eigenvector (degrees)", report.row_avg_left),
        ("symmetric right eigenvector (sqrt degrees)", report.symmetric_right),
        ("symmetric left eigenvector (sqrt degrees)", report.symmetric_left),
    ];
    for (what, r) in checks {
        if r > 1e-8 {
            return Err(Error::VerificationFailed(format!(
                "{what} has residual {r:.3e}"
            )));
        }
    }
    if report.lambda2_abs >= 1.0 {
        return Err(Error::VerificationFailed(format!(
            "second eigenvalue magnitude {} is not strictly below 1",
            report.lambda2_abs
        )));
    }
    Ok(report)
}

/// Checks the eigenpair correspondence between the two normalizations: if
/// `(lambda, v)` is an eigenpair of the symmetric operator then
/// `(lambda, D^-1/2 v)` is an eigenpair of the row-averaging one. Runs a
/// dense eigendecomposition, so the node count is capped. Returns the worst
/// Euclidean residual over all eigenpairs of both operators.
pub fn verify_spectral_correspondence(g: &Graph) -> Result<f64> {
    require_connected(g)?;
    let n = g.n();
    if n > 200 {
        return Err(Error::InvalidArgument(format!(
            "dense eigendecomposition capped at 200 nodes, got {n}"
        )));
    }
    let sym = normalize(g, OperatorKind::Symmetric);
    let row_avg = normalize(g, OperatorKind::RowAvg);
    let (values, vectors) = jacobi_eigen(&sym.to_dense())?;
    let inv_sqrt_d: Vec<f64> = g
        .degrees()
        .iter()
        .map(|&d| 1.0 / (d as f64).sqrt())
        .collect();

    let mut worst = 0.0_f64;
    let mut worst_value = f64::NAN;
    for (idx, &lambda) in values.iter().enumerate() {
        let mut v: Vec<f64> = (0..n).map(|i| vectors.get(i, idx)).collect();
        normalize_vec(&mut v);
        let sym_out = sym.propagate_vec(&v)?;
        let r_sym = eigen_residual(&sym_out, &v, lambda);

        let mut u: Vec<f64> = v.iter().zip(&inv_sqrt_d).map(|(&vi, &s)| vi * s).collect();
        normalize_vec(&mut u);
        let row_out = row_avg.propagate_vec(&u)?;
        let r_row = eigen_residual(&row_out, &u, lambda);

        let r = r_sym.max(r_row);
        if r > worst {
            worst = r;
            worst_value = lambda;
        }
    }
    if worst > 1e-6 {
        return Err(Error::VerificationFailed(format!(
            "eigenpair for eigenvalue {worst_value:.6} has residual {worst:.3e}"
        )));
    }
    Ok(worst)
}

/// Everything this module can say about one operator on one graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub kind: OperatorKind,
    /// Residuals in the order row-avg right, row-avg left, symmetric right,
    /// symmetric left.
    pub eigenvalue_one_residuals: [f64; 4],
    pub lambda2_abs: f64,
    pub k_converge: Option<usize>,
}

pub fn spectral_report(
    g: &Graph,
    kind: OperatorKind,
    tol: f64,
    max_k: usize,
) -> Result<SpectralReport> {
    let unit = verify_unit_eigenpairs(g)?;
    let op = normalize(g, kind);
    let limit = limit_of(g, kind)?;
    let conv = power_converge(&op, &limit, tol, max_k)?;
    Ok(SpectralReport {
        kind,
        eigenvalue_one_residuals: [
            unit.row_avg_right,
            unit.row_avg_left,
            unit.symmetric_right,
            unit.symmetric_left,
        ],
        lambda2_abs: unit.lambda2_abs,
        k_converge: conv.k_converge,
    })
}

fn require_connected(g: &Graph) -> Result<()> {
    let components = g.component_count();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn normalize_vec(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v {
            *x /= norm;
        }
    }
}

/// `||out - v||` for a unit `v`; the eigenvalue-1 residual.
fn residual_norm(out: &[f64], v: &[f64]) -> f64 {
    out.iter()
        .zip(v)
        .map(|(&o, &x)| (o - x) * (o - x))
        .sum::<f64>()
        .sqrt()
}

/// `||out - lambda * v||` for a unit `v`.
fn eigen_residual(out: &[f64], v: &[f64], lambda: f64) -> f64 {
    out.iter()
        .zip(v)
        .map(|(&o, &x)| (o - lambda * x) * (o - lambda * x))
        .sum::<f64>()
        .sqrt()
}

/// Cyclic Jacobi eigendecomposition for a symmetric matrix. Returns
/// `(eigenvalues, eigenvectors)` with eigenvectors stored as columns, in no
/// particular order. Quadratic convergence makes a small sweep cap plenty at
/// the matrix sizes this crate allows.
fn jacobi_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (a.get(i, j) - a.get(j, i)).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    let mut a = a.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    const SWEEPS: usize = 60;
    for _ in 0..SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= 1e-13 * scale {
            let values = (0..n).map(|i| a.get(i, i)).collect();
            return Ok((values, v));
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    Err(Error::IterationCap {
        cap: SWEEPS,
        residual: off_diagonal_norm(&a),
    })
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let x = a.get(i, j);
                acc += x * x;
            }
        }
    }
    acc.sqrt()
}
