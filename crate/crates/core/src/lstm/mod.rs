//! Stacked LSTM with a fully connected head, trained from scratch.

pub mod adam;
pub mod cell;
pub mod checkpoint;
pub mod config;
pub mod gradcheck;
pub mod model;
pub mod network;
pub mod params;
pub mod train;

pub use adam::AdamState;
pub use cell::lstm_cell_forward;
pub use checkpoint::{load_checkpoint, save_checkpoint, ModelKind, SavedModel};
pub use config::{HeadInput, ModelConfig};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use model::{forward, train_lstm, LstmModel};
pub use network::{mse, ForwardCache};
pub use params::{FcParams, Gate, LstmLayerParams, LstmParams};
pub use train::{
    train, train_with_hook, EarlyStopping, EpochRecord, SampleMatrix, StopReason, Trainable, TrainHistory,
    TrainOptions,
};

use crate::baselines::ArimaError;
use crate::data::DataError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("input window has {got} values, expected {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("non-finite value at timestep {timestep}")]
    NonFinite { timestep: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize, history: Box<TrainHistory> },
    #[error("training or validation set is empty")]
    EmptyTrainingSet,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Checkpoint(String),
    #[error("checkpoint format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Arima(#[from] ArimaError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
