//! The supervised Bi-LSTM classifier and the semi-supervised GAN.

mod backbone;
mod sgan;
mod supervised;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::NUM_FEATURES;
use crate::nn::NnError;

pub use backbone::{Backbone, BackboneTrace, Pass};
pub use sgan::{train_sgan, Generator, SganLosses, SganNet, SganTrace};
pub use supervised::{train_supervised, SupervisedNet, SupervisedTrace};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("no labeled samples to train the classifier on")]
    EmptyLabeledSet,
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Input geometry and width of the recurrent backbone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetShape {
    pub steps: usize,
    pub features: usize,
    /// Hidden units per direction.
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for NetShape {
    fn default() -> Self {
        NetShape { steps: 10, features: NUM_FEATURES, hidden: 10, dropout: 0.2 }
    }
}

impl NetShape {
    pub fn input_len(&self) -> usize {
        self.steps * self.features
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub labeled_fraction: f64,
    pub latent_dim: usize,
    pub generator_hidden: usize,
}

impl TrainConfig {
    /// Fully supervised: every training label visible.
    pub fn supervised() -> Self {
        TrainConfig { epochs: 15, labeled_fraction: 1.0, ..Self::sgan() }
    }

    pub fn sgan() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
            labeled_fraction: 0.3,
            latent_dim: 50,
            generator_hidden: 128,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.labeled_fraction > 0.0 && self.labeled_fraction <= 1.0) {
            return bad("labeled_fraction must lie in (0, 1]");
        }
        if self.latent_dim == 0 || self.generator_hidden == 0 {
            return bad("generator sizes must be positive");
        }
        Ok(())
    }

    pub(crate) fn adam(&self) -> crate::nn::AdamConfig {
        crate::nn::AdamConfig { lr: self.lr, ..Default::default() }
    }
}

/// Shuffled index batches covering `0..n` once.
pub(crate) fn shuffled_batches(n: usize, batch: usize, rng: &mut crate::seed::Rng) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch).map(<[usize]>::to_vec).collect()
}
