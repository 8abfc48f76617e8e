//! A small, deterministic neural-network engine: 1-D convolution, pooling,
//! dense layers, exact reverse-mode gradients, Adam and Xavier init.

pub mod checkpoint;
pub mod init;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod params;
pub mod stopping;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use init::{xavier_init, xavier_uniform};
pub use layers::{conv1d_forward, softmax, Layer, LayerSpec, Sequential, Trace};
pub use loss::{softmax_cross_entropy, softmax_rows};
pub use network::Network;
pub use optim::Adam;
pub use params::{Gradients, Param, ParamId, ParamStore};
pub use stopping::{early_stopping, EarlyStopping, StopDecision, MAX_EPOCHS};
pub use tensor::Tensor;
