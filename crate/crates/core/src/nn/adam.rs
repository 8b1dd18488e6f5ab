//! Adam with bias correction and classic L2 weight decay (the decay is added
//! to the gradient before the moment updates, not applied after them).

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::nn::ParamTensors;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    cfg: AdamConfig,
    step: usize,
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
}

impl AdamState {
    pub fn new(cfg: AdamConfig, params: &impl ParamTensors) -> Self {
        let shapes: Vec<(usize, usize)> = params.tensors().iter().map(|t| t.shape()).collect();
        AdamState {
            cfg,
            step: 0,
            m: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    /// Applies one update. Gradients must align with the canonical tensor
    /// order; a non-finite gradient aborts before any tensor is touched.
    pub fn step(&mut self, params: &mut impl ParamTensors, grads: &[DenseMatrix]) -> Result<()> {
        let names = params.tensor_names();
        let mut tensors = params.tensors_mut();
        if grads.len() != tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} gradients for {} parameter tensors",
                grads.len(),
                tensors.len()
            )));
        }
        for (idx, g) in grads.iter().enumerate() {
            if g.shape() != tensors[idx].shape() {
                return Err(Error::ShapeMismatch(format!(
                    "gradient for {} has shape {:?}, tensor has {:?}",
                    names[idx],
                    g.shape(),
                    tensors[idx].shape()
                )));
            }
            if !g.all_finite() {
                return Err(Error::NonFinite {
                    context: format!("gradient for {}", names[idx]),
                });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        for idx in 0..grads.len() {
            let g = grads[idx].data();
            let p = tensors[idx].data_mut();
            let m = self.m[idx].data_mut();
            let v = self.v[idx].data_mut();
            for i in 0..p.len() {
                let geff = g[i] + self.cfg.weight_decay * p[i];
                m[i] = self.cfg.beta1 * m[i] + (1.0 - self.cfg.beta1) * geff;
                v[i] = self.cfg.beta2 * v[i] + (1.0 - self.cfg.beta2) * geff * geff;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.cfg.lr * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
            }
        }
        Ok(())
    }
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
    fn first_step_moves_by_almost_lr() {
        // With g = 1 the bias-corrected moments are exactly 1, so the first
        // update is lr / (1 + eps).
        let mut p = OneTensor(DenseMatrix::zeros(1, 1));
        let mut state = AdamState::new(AdamConfig::default(), &p);
        let g = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        state.step(&mut p, &[g]).unwrap();
        assert!((p.0.get(0, 0) + 0.01).abs() < 1e-7);
    }

    #[test]
    fn matches_reference_recurrence_over_several_steps() {
        let cfg = AdamConfig {
            lr: 0.1,
            weight_decay: 0.05,
            ..AdamConfig::default()
        };
        let mut p = OneTensor(DenseMatrix::from_rows(&[vec![0.7]]).unwrap());
        let mut state = AdamState::new(cfg.clone(), &p);

        let mut theta = 0.7;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=25 {
            // Gradient of 0.5 * (theta - 2)^2.
            let g_model = p.0.get(0, 0) - 2.0;
            state
                .step(&mut p, &[DenseMatrix::from_rows(&[vec![g_model]]).unwrap()])
                .unwrap();

            let g = (theta - 2.0) + cfg.weight_decay * theta;
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            let m_hat = m / (1.0 - cfg.beta1.powi(t));
            let v_hat = v / (1.0 - cfg.beta2.powi(t));
            theta -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
            assert!(
                (p.0.get(0, 0) - theta).abs() < 1e-12,
                "diverged at step {t}"
            );
        }
        // And it actually made progress toward the minimum.
        assert!((p.0.get(0, 0) - 0.7).abs() > 0.5);
    }

    #[test]
    fn non_finite_gradient_is_rejected_by_name() {
        let mut p = OneTensor(DenseMatrix::zeros(2, 2));
        let mut state = AdamState::new(AdamConfig::default(), &p);
        let mut g = DenseMatrix::zeros(2, 2);
        g.set(1, 1, f64::NAN);
        let err = state.step(&mut p, &[g]).unwrap_err();
        match err {
            Error::NonFinite { context } => assert!(context.contains("theta")),
            other => panic!("unexpected error {other:?}"),
        }
        // Nothing was applied.
        assert_eq!(p.0, DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn gradient_count_mismatch_is_rejected() {
        let mut p = OneTensor(DenseMatrix::zeros(1, 1));
        let mut state = AdamState::new(AdamConfig::default(), &p);
        assert!(matches!(
            state.step(&mut p, &[]),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
