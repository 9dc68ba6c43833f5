//! A small layer toolkit with hand-written reverse-mode gradients.
//!
//! Tensors hold one item at a time: `[channels, time]` for 1-D layers and
//! `[channels, height, width]` for 2-D ones. Each `forward` returns a cache
//! that the matching `backward` consumes; backward accumulates parameter
//! gradients into the layer and returns the input gradient.

mod activation;
mod adam;
mod conv;
pub mod gradcheck;
mod layer;
mod param;
mod residual;
mod tensor;

pub use activation::{Dropout, DropoutCache, LeakyRelu, LeakyReluCache, Mode, Tanh, TanhCache};
pub use adam::{Adam, AdamConfig};
pub use conv::{Conv1d, Conv1dCache, Conv2d, Conv2dCache, ConvTranspose1d, ConvTranspose1dCache};
pub use layer::{Cache, Layer, LayerKind};
pub(crate) use param::join;
pub use param::{Module, Param};
pub use residual::{ResidualBlock, ResidualBlockCache, ResidualStack, ResidualStackCache};
pub use tensor::{Scalar, Tensor};
