//! Spectral analysis and synthesis: STFT/iSTFT, mel features, resampling and
//! the multi-resolution STFT loss.

mod loss;
mod mel;
mod resample;
mod stft;
mod waveform;
pub mod window;

pub use loss::{default_resolutions, multi_res_stft_loss, subband_resolutions, MultiResStftLoss, StftLoss};
pub use mel::{
    hz_to_mel, log_mel, mel_filterbank, mel_to_hz, project_log_mel, FeatureConfig, MelFilterbank, MelSpectrogram,
    LOG_FLOOR,
};
pub use resample::resample;
pub use stft::{
    istft, stft, ComplexSpectrogram, MagnitudeCache, PolarSpectrogram, Stft, StftConfig, WindowKind, MAG_POWER_FLOOR,
};
pub use waveform::{Waveform, SAMPLE_RATE};
