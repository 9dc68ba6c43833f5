//! Multi-band MelGAN vocoder toolkit with augmented adversarial training.
//!
//! The crate covers the spectral frontend ([`dsp`]), the PQMF sub-band
//! filterbank ([`pqmf`]), pitch and voicing analysis ([`pitch`]), the
//! discriminator-side augmentations ([`augment`]), a small reverse-mode layer
//! library ([`nn`]), the generator/discriminator/UV predictor ([`model`]) and
//! the training loop with its CLI-facing entry points ([`trainer`]).

pub mod augment;
pub mod dsp;
pub mod error;
pub mod io;
pub mod model;
pub mod nn;
pub mod pitch;
pub mod pqmf;
pub mod trainer;

pub use error::{Error, Result};
