//! Minimal tape-based neural network toolkit: dense tensors, reverse-mode
//! gradients, transformer encoder layers and optimizers.

mod graph;
mod layers;
mod optim;
mod params;
mod tensor;

pub use graph::{Graph, Var};
pub use layers::{Encoder, EncoderConfig, LayerNorm, Linear, Mlp};
pub use optim::{make_optimizer, Adafactor, Adam, Optimizer, OptimizerKind, WarmupLinear};
pub use params::{Grads, NamedTensor, ParamId, ParamStore, ParamsFile};
pub use tensor::{dot, Tensor};
