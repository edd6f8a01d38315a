//! Graph neural network mapping a flexible-duplex network to relaxed
//! powers and directions, trained without labels on the negated relaxed
//! sum-rate.
//!
//! Each layer aggregates in two stages: messages over interference edges
//! are pooled at their destination, then combined with the partner's state
//! across the desired edge. Every layer re-concatenates the raw vertex
//! feature. Two perceptron heads read the final embeddings: one per node
//! for power and one per pair for direction.

mod model;
mod params;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AutodiffError;

pub use model::{forward, loss, ForwardOutput};
pub use params::{
    init_params, load_model, model_from_json, model_to_json, save_model, HeadParams, LayerParams, ModelParams,
    CHECKPOINT_VERSION,
};
pub use train::{infer, loss_and_gradient, mean_loss, train, TrainOutcome};

#[derive(Debug, Error)]
pub enum FlexNetError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("checkpoint does not match the schema: {0}")]
    SchemaMismatch(String),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u64),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Set reduction applied to interference messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Sum,
    Max,
}

impl std::str::FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(Self::Sum),
            "max" => Ok(Self::Max),
            other => Err(format!("unknown pooling '{other}' (expected sum or max)")),
        }
    }
}

impl std::fmt::Display for Pooling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sum => "sum",
            Self::Max => "max",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub layers: usize,
    pub hidden: usize,
    pub temperature_power: f64,
    pub temperature_direction: f64,
    pub pooling: Pooling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.002,
            batch_size: 64,
            epochs: 50,
            seed: 0,
            layers: 3,
            hidden: 64,
            temperature_power: 0.1,
            temperature_direction: 0.1,
            pooling: Pooling::Sum,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), FlexNetError> {
        let bad = |msg: &str| Err(FlexNetError::InvalidConfig(msg.into()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch size and epochs must be positive");
        }
        if self.layers == 0 || self.hidden == 0 {
            return bad("layers and hidden width must be positive");
        }
        let temps = [self.temperature_power, self.temperature_direction];
        if temps.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad("temperatures must be positive");
        }
        Ok(())
    }
}
