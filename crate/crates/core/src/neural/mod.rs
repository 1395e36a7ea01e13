//! Small differentiable building blocks: tensors, an LSTM layer, dense
//! stacks, an adaptive-moment optimizer and target-network blending.

mod lstm;
mod mlp;
mod optim;
mod params;
mod tensor;

pub use lstm::{Lstm, LstmCache, LstmInputGrads, LstmState};
pub use mlp::{Activation, Dense, Mlp, MlpCache};
pub use optim::{Adam, AdamConfig};
pub use params::{accumulate, soft_update, ParamSet};
pub use tensor::Tensor;

use rand::Rng;

use crate::num::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("cache does not belong to these parameters")]
    StaleCache,
    #[error("parameter bundles are not shape-congruent")]
    Incongruent,
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("tau {0} outside [0, 1]")]
    Tau(f64),
}

/// Tensor with entries drawn from `U(-bound, bound)`.
pub fn uniform<F: Scalar, R: Rng>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor<F> {
    Tensor::from_fn(shape, || F::lit(rng.random_range(-bound..=bound)))
}
