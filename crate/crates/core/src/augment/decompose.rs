//! Envelope/ratio decomposition standing in for a source-filter analysis.
//!
//! `sp` is a cepstrally smoothed power envelope per frame, `ap` is the ratio of
//! the raw power to that envelope, and the STFT phase is kept, so
//! `sp * ap == |S|^2` and resynthesis with unmodified `sp` returns the input.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::dsp::{PolarSpectrogram, Stft, StftConfig, Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::pitch::{track_pitch, F0Config, F0Contour};

/// Peak level inputs are normalized to before analysis.
pub const ANALYSIS_PEAK: f64 = 0.95;
/// Lower bound on the stored envelope.
pub const ENVELOPE_FLOOR: f64 = 1e-12;
/// Upper bound on the stored power/envelope ratio.
pub const MAX_RATIO: f64 = 1e3;
/// Lifter cutoff as a multiple of the pitch period: quefrency `1 / (LIFTER_FACTOR * f0)`.
const LIFTER_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicDecomposition {
    pub f0: F0Contour,
    /// Frames × bins smoothed power envelope.
    pub sp: Vec<f64>,
    /// Frames × bins ratio `|S|^2 / sp`, in `[0, MAX_RATIO]`.
    pub ap: Vec<f64>,
    /// Frames × bins STFT phase in radians.
    pub phase: Vec<f64>,
    pub frames: usize,
    pub config: StftConfig,
    pub signal_len: usize,
    pub sample_rate: u32,
}

impl HarmonicDecomposition {
    pub fn n_bins(&self) -> usize {
        self.config.n_bins()
    }

    /// `sp ⊙ ap`, i.e. the STFT power.
    pub fn power(&self) -> Vec<f64> {
        self.sp.iter().zip(&self.ap).map(|(s, a)| s * a).collect()
    }
}

pub(crate) struct Analysis {
    pub decomposition: HarmonicDecomposition,
    /// Per-frame normalized-difference minimum from the pitch tracker.
    pub aperiodicity: Vec<f64>,
}

struct Cepstrum {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Cepstrum {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    /// Liftered log-power envelope for one one-sided power frame.
    fn envelope(&self, power: &[f64], cutoff: usize, out: &mut [f64]) {
        let n = self.n;
        let bins = n / 2 + 1;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|k| {
                let kk = if k < bins { k } else { n - k };
                Complex64::new(power[kk].max(ENVELOPE_FLOOR).ln(), 0.0)
            })
            .collect();
        self.inverse.process(&mut buf);
        let cutoff = cutoff.clamp(1, n / 2);
        for (q, c) in buf.iter_mut().enumerate() {
            let keep = q < cutoff || q > n - cutoff;
            if keep {
                *c /= n as f64;
            } else {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        self.forward.process(&mut buf);
        for k in 0..bins {
            out[k] = buf[k].re.exp();
        }
    }
}

pub(crate) fn analyze(x: &Waveform) -> Result<Analysis> {
    if x.sample_rate != SAMPLE_RATE {
        return Err(Error::invalid(format!("harmonic analysis expects {SAMPLE_RATE} Hz audio")));
    }
    let f0_cfg = F0Config::default();
    if x.len() < f0_cfg.win_length {
        return Err(Error::invalid(format!(
            "harmonic analysis needs at least {} samples, got {}",
            f0_cfg.win_length,
            x.len()
        )));
    }
    let x = x.peak_normalized(ANALYSIS_PEAK);
    let config = StftConfig::default();
    let spec = Stft::new(config)?.forward(&x.samples)?;
    let track = track_pitch(&x, &f0_cfg)?;
    debug_assert_eq!(track.contour.values.len(), spec.frames);
    let bins = config.n_bins();
    let polar = spec.to_polar();
    let power: Vec<f64> = spec.powers();
    let cep = Cepstrum::new(config.fft_size);
    let sr = x.sample_rate as f64;
    let mut sp = vec![0.0; power.len()];
    for t in 0..spec.frames {
        let f0 = track.contour.values[t];
        let pitch = if f0 > 0.0 { f0 } else { f0_cfg.f0_min };
        let cutoff = (sr / (LIFTER_FACTOR * pitch)).round() as usize;
        cep.envelope(&power[t * bins..(t + 1) * bins], cutoff, &mut sp[t * bins..(t + 1) * bins]);
    }
    let mut ap = vec![0.0; power.len()];
    for ((s, a), &p) in sp.iter_mut().zip(ap.iter_mut()).zip(&power) {
        *s = s.max(ENVELOPE_FLOOR).max(p / MAX_RATIO);
        // p / (p / MAX_RATIO) can round one ulp past the bound
        *a = (p / *s).min(MAX_RATIO);
    }
    Ok(Analysis {
        decomposition: HarmonicDecomposition {
            f0: track.contour,
            sp,
            ap,
            phase: polar.phase,
            frames: spec.frames,
            config,
            signal_len: x.len(),
            sample_rate: x.sample_rate,
        },
        aperiodicity: track.aperiodicity,
    })
}

/// Peak-normalizes `x` to 0.95 and splits it into envelope, ratio and phase.
pub fn analyze_harmonics(x: &Waveform) -> Result<HarmonicDecomposition> {
    analyze(x).map(|a| a.decomposition)
}

/// Phase-preserving inverse: iSTFT of `sqrt(sp ⊙ ap)` with the retained phase.
pub fn synthesize_harmonics(d: &HarmonicDecomposition) -> Result<Waveform> {
    let cells = d.frames * d.n_bins();
    if d.sp.len() != cells || d.ap.len() != cells || d.phase.len() != cells {
        return Err(Error::invalid("decomposition arrays do not match frames x bins"));
    }
    if d.f0.values.len() != d.frames {
        return Err(Error::invalid("F0 contour does not match the frame count"));
    }
    let polar = PolarSpectrogram {
        magnitude: d.sp.iter().zip(&d.ap).map(|(s, a)| (s * a).sqrt()).collect(),
        phase: d.phase.clone(),
        frames: d.frames,
        config: d.config,
        signal_len: d.signal_len,
    };
    let samples = Stft::new(d.config)?.inverse(&polar.to_complex())?;
    Ok(Waveform { samples, sample_rate: d.sample_rate })
}
