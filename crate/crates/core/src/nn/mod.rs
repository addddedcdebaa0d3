//! Small dense/recurrent network toolkit with exact reverse-mode gradients.

mod adam;
pub mod checkpoint;
pub mod fd;
mod layers;
mod loss;
mod params;
mod tensor;

use thiserror::Error;

pub use adam::{Adam, AdamConfig};
pub use layers::{
    dropout_backward, dropout_forward, glorot_limit, relu, relu_backward, sigmoid, softmax, BiLstm,
    BiLstmTrace, Dense, Gate, LstmCell, Mode, StepTrace,
};
pub use loss::{bce_loss, bce_with_logit, softmax_ce_loss, softmax_ce_with_grad, PROB_CLAMP};
pub use params::{Grads, ParamId, ParamStore};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("backward called without a recorded forward pass")]
    NoForwardRecorded,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Holds the trace of one training-mode forward pass until the matching
/// backward pass consumes it.
#[derive(Debug)]
pub struct Tape<T> {
    record: Option<T>,
}

impl<T> Default for Tape<T> {
    fn default() -> Self {
        Tape { record: None }
    }
}

impl<T> Tape<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, trace: T) {
        self.record = Some(trace);
    }

    pub fn is_recorded(&self) -> bool {
        self.record.is_some()
    }

    pub fn take(&mut self) -> Result<T, NnError> {
        self.record.take().ok_or(NnError::NoForwardRecorded)
    }
}
