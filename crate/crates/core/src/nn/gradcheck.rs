//! Central finite-difference validation of analytic gradients. The check
//! perturbs a seeded sample of coordinates per tensor, so it stays cheap even
//! for wide input layers while still touching every tensor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::nn::ParamTensors;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// Compares `analytic` against central differences of `loss` at the current
/// parameters. `loss` must be a pure function of the parameters (fix all
/// seeds and disable dropout in the closure). Per tensor, up to
/// `samples_per_tensor` distinct coordinates are drawn with the given seed;
/// smaller tensors are checked exhaustively. Relative errors use
/// `max(|analytic|, |numeric|, 1e-8)` as the denominator.
pub fn finite_diff_check<P, F>(
    params: &mut P,
    analytic: &[DenseMatrix],
    mut loss: F,
    epsilon: f64,
    samples_per_tensor: usize,
    seed: u64,
) -> Result<GradCheck>
where
    P: ParamTensors,
    F: FnMut(&P) -> Result<f64>,
{
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if samples_per_tensor == 0 {
        return Err(Error::InvalidArgument(
            "samples_per_tensor must be positive".into(),
        ));
    }
    let names = params.tensor_names();
    let shapes: Vec<(usize, usize)> = params.tensors().iter().map(|t| t.shape()).collect();
    if analytic.len() != shapes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} analytic gradients for {} tensors",
            analytic.len(),
            shapes.len()
        )));
    }
    for (idx, g) in analytic.iter().enumerate() {
        if g.shape() != shapes[idx] {
            return Err(Error::ShapeMismatch(format!(
                "analytic gradient for {} has shape {:?}, tensor has {:?}",
                names[idx],
                g.shape(),
                shapes[idx]
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheck {
        max_rel_error: 0.0,
        coords_checked: 0,
        worst_tensor: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };

    for t_idx in 0..shapes.len() {
        let len = shapes[t_idx].0 * shapes[t_idx].1;
        let coords: Vec<usize> = if len <= samples_per_tensor {
            (0..len).collect()
        } else {
            rand::seq::index::sample(&mut rng, len, samples_per_tensor).into_vec()
        };
        for coord in coords {
            let original = params.tensors()[t_idx].data()[coord];

            params.tensors_mut()[t_idx].data_mut()[coord] = original + epsilon;
            let loss_plus = loss(&*params)?;
            params.tensors_mut()[t_idx].data_mut()[coord] = original - epsilon;
            let loss_minus = loss(&*params)?;
            params.tensors_mut()[t_idx].data_mut()[coord] = original;

            let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
            let ana = analytic[t_idx].data()[coord];
            let denom = ana.abs().max(numeric.abs()).max(1e-8);
            let rel = (ana - numeric).abs() / denom;
            report.coords_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_tensor = names[t_idx].clone();
                report.worst_index = coord;
                report.worst_analytic = ana;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct OneTensor(DenseMatrix);

    impl ParamTensors for OneTensor {
        fn tensor_names(&self) -> Vec<String> {
            vec!["theta".into()]
        }
        fn tensors(&self) -> Vec<&DenseMatrix> {
            vec![&self.0]
        }
        fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn quadratic_loss_checks_out() {
        // L(theta) = (theta - 3)^2, dL/dtheta = 2(theta - 3).
        let mut p = OneTensor(DenseMatrix::from_rows(&[vec![1.25]]).unwrap());
        let analytic =
            vec![DenseMatrix::from_rows(&[vec![2.0 * (1.25 - 3.0)]]).unwrap()];
        let report = finite_diff_check(
            &mut p,
            &analytic,
            |p| {
                let t = p.tensors()[0].get(0, 0);
                Ok((t - 3.0) * (t - 3.0))
            },
            1e-5,
            20,
            0,
        )
        .unwrap();
        assert_eq!(report.coords_checked, 1);
        assert!(report.max_rel_error < 1e-6, "rel {}", report.max_rel_error);
        // Parameters restored to their original value.
        assert_eq!(p.0.get(0, 0), 1.25);
    }

    #[test]
    fn flags_a_wrong_gradient() {
        let mut p = OneTensor(DenseMatrix::from_rows(&[vec![2.0]]).unwrap());
        let wrong = vec![DenseMatrix::from_rows(&[vec![100.0]]).unwrap()];
        let report = finite_diff_check(
            &mut p,
            &wrong,
            |p| {
                let t = p.tensors()[0].get(0, 0);
                Ok(t * t)
            },
            1e-5,
            20,
            0,
        )
        .unwrap();
        assert!(report.max_rel_error > 0.5);
        assert_eq!(report.worst_tensor, "theta");
    }

    #[test]
    fn sampling_respects_the_cap() {
        let mut p = OneTensor(DenseMatrix::zeros(10, 10));
        let analytic = vec![DenseMatrix::zeros(10, 10)];
        let report = finite_diff_check(
            &mut p,
            &analytic,
            |p| Ok(p.tensors()[0].data().iter().map(|v| v * v).sum()),
            1e-5,
            25,
            7,
        )
        .unwrap();
        assert_eq!(report.coords_checked, 25);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = OneTensor(DenseMatrix::zeros(2, 2));
        let analytic = vec![DenseMatrix::zeros(2, 3)];
        assert!(matches!(
            finite_diff_check(&mut p, &analytic, |_| Ok(0.0), 1e-5, 20, 0),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
