//! Fixed-topology MLPs with manual reverse-mode gradients, Adam, a
//! categorical policy head, finite-difference checking and checkpoints.
//!
//! Parameters of every network live in one flat `Vec<f64>` so optimizers,
//! gradient clipping and checkpoints work on plain slices.

mod adam;
mod categorical;
mod checkpoint;
pub mod gradcheck;
mod mlp;

pub use adam::{Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use categorical::Categorical;
pub use checkpoint::{Checkpoint, NamedModel, CHECKPOINT_VERSION};
pub use mlp::{Mlp, Trace};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("non-finite gradient at parameter {0}")]
    NonFiniteGradient(usize),
    #[error("invalid learning rate {0}")]
    InvalidLearningRate(f64),
    #[error("network needs at least an input and an output layer")]
    EmptyNetwork,
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    Io(String),
}

/// Euclidean norm over several gradient slices taken together.
pub fn global_norm(grads: &[&[f64]]) -> f64 {
    grads.iter().flat_map(|g| g.iter()).map(|v| v * v).sum::<f64>().sqrt()
}

/// Rescales all gradients jointly so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = grads.iter().flat_map(|g| g.iter()).map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_bounds_global_norm() {
        let mut a = vec![3.0, 4.0];
        let mut b = vec![12.0];
        let before = clip_global_norm(&mut [&mut a, &mut b], 0.5);
        assert_eq!(before, 13.0);
        assert!(global_norm(&[&a, &b]) <= 0.5 + 1e-12);
        assert!((a[0] / a[1] - 0.75).abs() < 1e-12);

        let mut small = vec![0.1, 0.1];
        clip_global_norm(&mut [&mut small], 0.5);
        assert_eq!(small, vec![0.1, 0.1]);
    }
}
