//! Training primitives: activation and loss kernels, the Adam optimizer, and
//! a finite-difference gradient checker. Everything is deterministic given
//! the seeds threaded through the calls.

pub mod adam;
pub mod gradcheck;
pub mod kernels;

use crate::dense::DenseMatrix;

/// Uniform access to a model's parameter tensors. The three views must agree
/// on order; that order is the canonical one for gradients, optimizer state
/// and checkpoints.
pub trait ParamTensors {
    fn tensor_names(&self) -> Vec<String>;
    fn tensors(&self) -> Vec<&DenseMatrix>;
    fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix>;
}
