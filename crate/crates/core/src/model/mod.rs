//! Generator with the over-smooth handler, the UV/V predictor and the
//! multi-resolution spectrogram discriminator.

mod discriminator;
mod generator;
mod split;
mod uv;

pub use discriminator::{Discriminator, DiscriminatorCache, DiscriminatorConfig, SubDiscriminator};
pub use generator::{Generator, INIT_STD, GeneratorCache, GeneratorConfig, GeneratorOutput, Prenet, PrenetCache, UpsampleStage};
pub use split::{neutral_fill, over_smooth_split, StreamPair};
pub use uv::{bce_with_logits, sigmoid, UvPredictor, UvPredictorCache, UvPredictorConfig};
