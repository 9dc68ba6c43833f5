use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::window::hann_periodic;
use super::Waveform;
use crate::error::{Error, Result};

/// Bins with power at or below this carry no magnitude gradient.
pub const MAG_POWER_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowKind {
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub win_length: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    /// 1024-point FFT, 256-sample hop, 1024-sample window.
    fn default() -> Self {
        Self { fft_size: 1024, hop: 256, win_length: 1024, window: WindowKind::Hann }
    }
}

impl StftConfig {
    pub fn new(fft_size: usize, hop: usize, win_length: usize) -> Result<Self> {
        let cfg = Self { fft_size, hop, win_length, window: WindowKind::Hann };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 || self.fft_size % 2 != 0 {
            return Err(Error::invalid(format!("fft_size {} must be even and >= 2", self.fft_size)));
        }
        if self.win_length == 0 || self.win_length > self.fft_size {
            return Err(Error::invalid("win_length must be in 1..=fft_size"));
        }
        if self.hop == 0 || self.hop > self.win_length {
            return Err(Error::invalid("hop must be in 1..=win_length"));
        }
        let w = self.window_samples();
        for n in 0..self.hop {
            let s: f64 = w.iter().skip(n).step_by(self.hop).map(|v| v * v).sum();
            if s < 1e-10 {
                return Err(Error::invalid(format!(
                    "window-square overlap-add vanishes at offset {n} (hop {} too large)",
                    self.hop
                )));
            }
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Reflect padding applied to each side of the signal.
    pub fn pad(&self) -> usize {
        self.win_length / 2
    }

    /// Number of frames for a signal of `len` samples under centered padding.
    pub fn frame_count(&self, len: usize) -> usize {
        (len + 2 * self.pad() - self.win_length) / self.hop + 1
    }

    pub fn window_samples(&self) -> Vec<f64> {
        match self.window {
            WindowKind::Hann => hann_periodic(self.win_length),
        }
    }
}

/// Frames × bins complex STFT.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub data: Vec<Complex64>,
    pub frames: usize,
    pub config: StftConfig,
    /// Length of the analyzed signal, so the inverse can restore it exactly.
    pub signal_len: usize,
}

impl ComplexSpectrogram {
    pub fn n_bins(&self) -> usize {
        self.config.n_bins()
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        let b = self.n_bins();
        &self.data[t * b..(t + 1) * b]
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm()).collect()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn to_polar(&self) -> PolarSpectrogram {
        PolarSpectrogram {
            magnitude: self.data.iter().map(|c| c.norm()).collect(),
            // + 0.0 folds a -0.0 angle into +0.0
            phase: self.data.iter().map(|c| c.arg() + 0.0).collect(),
            frames: self.frames,
            config: self.config,
            signal_len: self.signal_len,
        }
    }
}

/// Magnitude/phase view of a spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarSpectrogram {
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub frames: usize,
    pub config: StftConfig,
    pub signal_len: usize,
}

impl PolarSpectrogram {
    pub fn to_complex(&self) -> ComplexSpectrogram {
        ComplexSpectrogram {
            data: self
                .magnitude
                .iter()
                .zip(&self.phase)
                .map(|(&m, &p)| Complex64::from_polar(m, p))
                .collect(),
            frames: self.frames,
            config: self.config,
            signal_len: self.signal_len,
        }
    }
}

/// Planned STFT for one configuration. Cheap to clone; immutable once built.
#[derive(Clone)]
pub struct Stft {
    config: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("config", &self.config).finish()
    }
}

/// Cached per-frame spectra from [`Stft::magnitude`], consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct MagnitudeCache {
    spectra: Vec<Complex64>,
    mags: Vec<f64>,
    signal_len: usize,
}

impl Stft {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            config,
            window: config.window_samples(),
            forward: planner.plan_fft_forward(config.fft_size),
            inverse: planner.plan_fft_inverse(config.fft_size),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    fn frame_offset(&self) -> usize {
        (self.config.fft_size - self.config.win_length) / 2
    }

    /// Runs `f(t, spectrum)` on the full complex FFT of every windowed frame.
    fn for_each_frame(&self, x: &[f64], mut f: impl FnMut(usize, &[Complex64])) {
        let cfg = &self.config;
        let pad = cfg.pad() as isize;
        let frames = cfg.frame_count(x.len());
        let off = self.frame_offset();
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for t in 0..frames {
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            let start = (t * cfg.hop) as isize - pad;
            for (m, w) in self.window.iter().enumerate() {
                let idx = reflect_index(start + m as isize, x.len());
                buf[off + m] = Complex64::new(x[idx] * w, 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            f(t, &buf);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<ComplexSpectrogram> {
        if x.is_empty() {
            return Err(Error::invalid("stft of empty signal"));
        }
        let bins = self.config.n_bins();
        let frames = self.config.frame_count(x.len());
        let mut data = Vec::with_capacity(frames * bins);
        self.for_each_frame(x, |_, spec| data.extend_from_slice(&spec[..bins]));
        Ok(ComplexSpectrogram { data, frames, config: self.config, signal_len: x.len() })
    }

    /// Weighted overlap-add inverse with window-square normalization.
    pub fn inverse(&self, s: &ComplexSpectrogram) -> Result<Vec<f64>> {
        if s.config != self.config {
            return Err(Error::invalid("spectrogram config does not match the inverse STFT config"));
        }
        let cfg = &self.config;
        let bins = cfg.n_bins();
        if s.data.len() != s.frames * bins {
            return Err(Error::shape("spectrogram data does not match frames x bins"));
        }
        let n = cfg.fft_size;
        let pad = cfg.pad();
        let total = (s.frames.saturating_sub(1)) * cfg.hop + cfg.win_length;
        let mut acc = vec![0.0; total];
        let mut wsum = vec![0.0; total];
        let off = self.frame_offset();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let norm = 1.0 / n as f64;
        for t in 0..s.frames {
            let frame = s.frame(t);
            buf[..bins].copy_from_slice(frame);
            for k in bins..n {
                buf[k] = frame[n - k].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = t * cfg.hop;
            for (m, w) in self.window.iter().enumerate() {
                acc[start + m] += buf[off + m].re * norm * w;
                wsum[start + m] += w * w;
            }
        }
        let len = if s.signal_len > 0 { s.signal_len } else { total.saturating_sub(2 * pad) };
        Ok((0..len)
            .map(|i| {
                let j = i + pad;
                if j < total && wsum[j] > 1e-11 {
                    acc[j] / wsum[j]
                } else {
                    0.0
                }
            })
            .collect())
    }

    /// Magnitude spectrogram (frames × bins) plus what backward needs.
    pub fn magnitude(&self, x: &[f64]) -> Result<(Vec<f64>, MagnitudeCache)> {
        if x.is_empty() {
            return Err(Error::invalid("stft of empty signal"));
        }
        let bins = self.config.n_bins();
        let frames = self.config.frame_count(x.len());
        let mut spectra = Vec::with_capacity(frames * bins);
        self.for_each_frame(x, |_, spec| spectra.extend_from_slice(&spec[..bins]));
        let mags: Vec<f64> = spectra.iter().map(|c| c.norm()).collect();
        Ok((mags.clone(), MagnitudeCache { spectra, mags, signal_len: x.len() }))
    }

    /// Gradient of a scalar loss w.r.t. the input signal, given its gradient w.r.t. the
    /// magnitudes.
    pub fn magnitude_backward(&self, cache: &MagnitudeCache, grad_mag: &[f64]) -> Result<Vec<f64>> {
        if grad_mag.len() != cache.mags.len() {
            return Err(Error::shape("magnitude gradient does not match cached spectrogram"));
        }
        let cfg = &self.config;
        let n = cfg.fft_size;
        let bins = cfg.n_bins();
        let frames = cache.mags.len() / bins;
        let pad = cfg.pad() as isize;
        let off = self.frame_offset();
        let mut grad_x = vec![0.0; cache.signal_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        for t in 0..frames {
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            let mut any = false;
            for k in 0..bins {
                let i = t * bins + k;
                let s = cache.spectra[i];
                if s.norm_sqr() > MAG_POWER_FLOOR && grad_mag[i] != 0.0 {
                    buf[k] = s * (grad_mag[i] / cache.mags[i]);
                    any = true;
                }
            }
            if !any {
                continue;
            }
            // d|S_k|/d(wx_n) = Re(S_k e^{+i 2 pi k n / N}) / |S_k|, an unnormalized inverse DFT
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = (t * cfg.hop) as isize - pad;
            for (m, w) in self.window.iter().enumerate() {
                let idx = reflect_index(start + m as isize, cache.signal_len);
                grad_x[idx] += buf[off + m].re * w;
            }
        }
        Ok(grad_x)
    }
}

/// Maps an index in the reflect-padded signal back to the source signal
/// (numpy "reflect": the edge sample is not repeated).
pub(crate) fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as isize {
        j = period - j;
    }
    j as usize
}

pub fn stft(x: &Waveform, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    Stft::new(*cfg)?.forward(&x.samples)
}

pub fn istft(s: &ComplexSpectrogram, cfg: &StftConfig, sample_rate: u32) -> Result<Waveform> {
    let samples = Stft::new(*cfg)?.inverse(s)?;
    Ok(Waveform { samples, sample_rate })
}
