use super::stft::{Stft, StftConfig};
use super::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

/// Floor applied to mel energies before the natural log.
pub const LOG_FLOOR: f64 = 1e-5;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale, `n_mels` × `fft_size/2+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Vec<f64>,
    pub n_mels: usize,
    pub n_bins: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub sample_rate: u32,
    pub fft_size: usize,
    /// Band edges: filter `i` spans `edges[i]..edges[i + 2]` and peaks at `edges[i + 1]`.
    pub edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n_bins..(i + 1) * self.n_bins]
    }

    pub fn center_hz(&self, i: usize) -> f64 {
        self.edges_hz[i + 1]
    }
}

pub fn mel_filterbank(n_mels: usize, cfg: &StftConfig, sr: u32, fmin: f64, fmax: f64) -> Result<MelFilterbank> {
    if n_mels == 0 {
        return Err(Error::invalid("n_mels must be at least 1"));
    }
    if !(fmin >= 0.0 && fmin < fmax && fmax <= sr as f64 / 2.0) {
        return Err(Error::invalid(format!("band edges fmin={fmin} fmax={fmax} invalid for rate {sr}")));
    }
    let n_bins = cfg.n_bins();
    let (mlo, mhi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges_hz: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = sr as f64 / cfg.fft_size as f64;
    let mut weights = vec![0.0; n_mels * n_bins];
    for i in 0..n_mels {
        let (l, c, r) = (edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]);
        let row = &mut weights[i * n_bins..(i + 1) * n_bins];
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let up = (f - l) / (c - l);
            let down = (r - f) / (r - c);
            *w = up.min(down).max(0.0);
        }
        if row.iter().all(|&w| w <= 0.0) {
            return Err(Error::invalid(format!(
                "mel band {i} ({l:.1}-{r:.1} Hz) falls between FFT bins; use fewer mels or a larger FFT"
            )));
        }
    }
    Ok(MelFilterbank { weights, n_mels, n_bins, fmin, fmax, sample_rate: sr, fft_size: cfg.fft_size, edges_hz })
}

/// Natural-log mel spectrogram stored band-major (`n_mels` × `frames`).
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub data: Vec<f64>,
    pub n_mels: usize,
    pub frames: usize,
    pub config: StftConfig,
}

impl MelSpectrogram {
    pub fn new(data: Vec<f64>, n_mels: usize, frames: usize, config: StftConfig) -> Result<Self> {
        if data.len() != n_mels * frames {
            return Err(Error::shape(format!("mel data has {} values, expected {n_mels}x{frames}", data.len())));
        }
        Ok(Self { data, n_mels, frames, config })
    }

    pub fn get(&self, band: usize, frame: usize) -> f64 {
        self.data[band * self.frames + frame]
    }

    /// Frames `start..start + len` as a new spectrogram.
    pub fn slice_frames(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.frames {
            return Err(Error::invalid("frame slice out of range"));
        }
        let mut data = Vec::with_capacity(self.n_mels * len);
        for b in 0..self.n_mels {
            let row = &self.data[b * self.frames..(b + 1) * self.frames];
            data.extend_from_slice(&row[start..start + len]);
        }
        Ok(Self { data, n_mels: self.n_mels, frames: len, config: self.config })
    }
}

pub fn log_mel(x: &Waveform, cfg: &StftConfig, fb: &MelFilterbank) -> Result<MelSpectrogram> {
    if x.sample_rate != fb.sample_rate {
        return Err(Error::invalid(format!(
            "waveform rate {} does not match filterbank rate {}",
            x.sample_rate, fb.sample_rate
        )));
    }
    if cfg.fft_size != fb.fft_size {
        return Err(Error::invalid("filterbank was designed for a different FFT size"));
    }
    let st = Stft::new(*cfg)?;
    let (mags, _) = st.magnitude(&x.samples)?;
    Ok(project_log_mel(&mags, cfg, fb))
}

/// Mel projection of a frames × bins magnitude array. Reads magnitudes only.
pub fn project_log_mel(mags: &[f64], cfg: &StftConfig, fb: &MelFilterbank) -> MelSpectrogram {
    let bins = fb.n_bins;
    let frames = mags.len() / bins;
    let mut data = vec![0.0; fb.n_mels * frames];
    for b in 0..fb.n_mels {
        let row = fb.row(b);
        // skip the zero tails of the triangle
        let lo = row.iter().position(|&w| w > 0.0).unwrap_or(0);
        let hi = row.iter().rposition(|&w| w > 0.0).map_or(0, |i| i + 1);
        for t in 0..frames {
            let frame = &mags[t * bins..(t + 1) * bins];
            let e: f64 = (lo..hi).map(|k| row[k] * frame[k]).sum();
            data[b * frames + t] = e.max(LOG_FLOOR).ln();
        }
    }
    MelSpectrogram { data, n_mels: fb.n_mels, frames, config: *cfg }
}

/// The feature pipeline the vocoder is trained on: 24 kHz, 1024/256/1024 STFT,
/// 80 HTK mel bands over 0–12 kHz.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub stft: StftConfig,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { sample_rate: SAMPLE_RATE, stft: StftConfig::default(), n_mels: 80, fmin: 0.0, fmax: 12_000.0 }
    }
}

impl FeatureConfig {
    pub fn filterbank(&self) -> Result<MelFilterbank> {
        mel_filterbank(self.n_mels, &self.stft, self.sample_rate, self.fmin, self.fmax)
    }

    pub fn log_mel(&self, x: &Waveform) -> Result<MelSpectrogram> {
        log_mel(x, &self.stft, &self.filterbank()?)
    }

    /// Canonical text form, used in checkpoint digests.
    pub fn canonical(&self) -> String {
        format!(
            "feature.sample_rate={}\nfeature.fft_size={}\nfeature.hop={}\nfeature.win_length={}\nfeature.n_mels={}\nfeature.fmin={}\nfeature.fmax={}\n",
            self.sample_rate, self.stft.fft_size, self.stft.hop, self.stft.win_length, self.n_mels, self.fmin, self.fmax
        )
    }
}
