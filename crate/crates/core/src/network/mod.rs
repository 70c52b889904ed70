//! Two-layer network: training, quantization, deployment onto crossbars and neurons,
//! and device-variation Monte Carlo.

mod deploy;
mod montecarlo;
mod quantize;
mod spec;
mod train;

pub use deploy::{deploy, hw_accuracy, infer, DeviceConstraints, HardwareConfig, HwLayer, Inference, Pipeline};
pub use montecarlo::{apply_variation, monte_carlo, McSummary, VariationModel};
pub use quantize::{quantize, quantize_activation, quantize_values, snap_to_floor};
pub use spec::{activation, argmax, load_checkpoint, save_checkpoint, Layer, NetworkSpec, QuantInfo, Response};
pub use train::{train, TrainOptions, TrainReport};

use crate::crossbar::CrossbarError;
use crate::mtj::MtjError;
use crate::neuron_axon::NeuronError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training diverged at epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("network must be quantized before deployment")]
    NotQuantized,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Crossbar(#[from] CrossbarError),
    #[error(transparent)]
    Mtj(#[from] MtjError),
    #[error(transparent)]
    Neuron(#[from] NeuronError),
}
