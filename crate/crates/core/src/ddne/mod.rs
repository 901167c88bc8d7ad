//! DDNE: a bidirectional GRU encoder over a node's adjacency history followed
//! by a multilayer decoder that predicts the node's next adjacency row.

mod checkpoint;
mod loss;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use loss::{loss_all, HistoricalLinkCounts, LossParts, TrainingData};
pub use model::{DdneModel, DenseLayer, GruParams, PredictionRow};
pub use train::{loss_and_gradients, train, train_on, Training};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcomp::DiffError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid hyperparameters: {0}")]
    Hyper(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("training data: {0}")]
    Data(String),
    #[error("training diverged at epoch {epoch} (learning rate {learning_rate:e})")]
    Divergence { epoch: usize, learning_rate: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// Plain minibatch gradient descent.
    #[default]
    Sgd,
    Adam,
}

/// Model shape and training settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdneHyper {
    /// Number of input snapshots N.
    pub history_length: usize,
    pub hidden_dim: usize,
    /// Hidden decoder widths; the output layer of width n is appended.
    pub decoder_hidden: Vec<usize>,
    /// Weight on squared error at existing links (> 1).
    pub alpha: f64,
    /// Weight of the embedding-proximity term.
    pub beta: f64,
    /// Weight of the L2 parameter penalty.
    pub reg_weight: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for DdneHyper {
    fn default() -> Self {
        Self {
            history_length: 2,
            hidden_dim: 64,
            decoder_hidden: vec![128],
            alpha: 2.0,
            beta: 0.1,
            reg_weight: 1e-4,
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 32,
            optimizer: Optimizer::Sgd,
            seed: 0,
        }
    }
}

impl DdneHyper {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: &str| Err(ModelError::Hyper(m.to_string()));
        if self.history_length < 2 {
            return fail("history_length must be at least 2");
        }
        if self.hidden_dim == 0 || self.decoder_hidden.contains(&0) {
            return fail("layer widths must be positive");
        }
        if self.alpha.is_nan() || self.alpha <= 1.0 {
            return fail("alpha must be greater than 1");
        }
        if [self.beta, self.reg_weight].iter().any(|w| w.is_nan() || *w < 0.0) {
            return fail("beta and reg_weight must be non-negative");
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        Ok(())
    }

    /// Embedding width `2 * hidden_dim * N`.
    pub fn embedding_dim(&self) -> usize {
        2 * self.hidden_dim * self.history_length
    }
}
