//! F0 estimation with a normalized difference function, voiced/unvoiced masks
//! and the F0-RMSE metric.

use crate::dsp::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Config {
    pub f0_min: f64,
    pub f0_max: f64,
    /// Frame hop; matches the mel hop so contours align with mel frames.
    pub hop: usize,
    /// Analysis window; also the minimum input length.
    pub win_length: usize,
    /// Upper bound on the normalized difference minimum for a voiced frame.
    pub voicing_threshold: f64,
    pub sample_rate: u32,
}

impl Default for F0Config {
    fn default() -> Self {
        Self { f0_min: 50.0, f0_max: 600.0, hop: 256, win_length: 1024, voicing_threshold: 0.15, sample_rate: SAMPLE_RATE }
    }
}

impl F0Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max && self.f0_max <= self.sample_rate as f64 / 4.0) {
            return Err(Error::invalid(format!("invalid F0 range [{}, {}]", self.f0_min, self.f0_max)));
        }
        if !(self.voicing_threshold > 0.0 && self.voicing_threshold < 1.0) {
            return Err(Error::invalid("voicing threshold must lie in (0, 1)"));
        }
        if self.hop == 0 || self.win_length < 2 * self.max_lag() {
            return Err(Error::invalid("analysis window must span two periods of f0_min"));
        }
        Ok(())
    }

    fn min_lag(&self) -> usize {
        (self.sample_rate as f64 / self.f0_max).floor().max(2.0) as usize
    }

    fn max_lag(&self) -> usize {
        (self.sample_rate as f64 / self.f0_min).ceil() as usize
    }

    /// Frame count for `len` samples; identical to the centered STFT frame count.
    pub fn frame_count(&self, len: usize) -> usize {
        (len + 2 * (self.win_length / 2) - self.win_length) / self.hop + 1
    }
}

/// Per-frame F0 in Hz; 0 marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Contour {
    pub values: Vec<f64>,
    pub hop: usize,
    pub sample_rate: u32,
}

impl F0Contour {
    pub fn voiced(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|&v| v > 0.0)
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.voiced().count() as f64 / self.values.len() as f64
    }

    /// Median over voiced frames, `None` when nothing is voiced.
    pub fn voiced_median(&self) -> Option<f64> {
        let v: Vec<f64> = self.voiced().collect();
        median(&v)
    }
}

pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UvMask {
    /// `true` = voiced.
    pub flags: Vec<bool>,
    pub hop: usize,
}

impl UvMask {
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn all(frames: usize, voiced: bool, hop: usize) -> Self {
        Self { flags: vec![voiced; frames], hop }
    }
}

/// F0 track plus each frame's normalized difference minimum (0 = perfectly
/// periodic, ~1 = noise).
#[derive(Debug, Clone)]
pub(crate) struct PitchTrack {
    pub contour: F0Contour,
    pub aperiodicity: Vec<f64>,
}

pub fn estimate_f0(x: &Waveform, cfg: &F0Config) -> Result<F0Contour> {
    track_pitch(x, cfg).map(|t| t.contour)
}

pub(crate) fn track_pitch(x: &Waveform, cfg: &F0Config) -> Result<PitchTrack> {
    cfg.validate()?;
    if x.sample_rate != cfg.sample_rate {
        return Err(Error::invalid(format!("expected {} Hz audio, got {}", cfg.sample_rate, x.sample_rate)));
    }
    let w = cfg.win_length;
    if x.len() < w {
        return Err(Error::invalid(format!("need at least {w} samples for F0 analysis, got {}", x.len())));
    }
    let frames = cfg.frame_count(x.len());
    let max_lag = cfg.max_lag();
    let min_lag = cfg.min_lag();
    let span = w - max_lag;
    let sr = cfg.sample_rate as f64;
    let mut values = Vec::with_capacity(frames);
    let mut aperiodicity = Vec::with_capacity(frames);
    let mut diff = vec![0.0; max_lag + 1];
    let mut cmnd = vec![1.0; max_lag + 1];
    for t in 0..frames {
        // edge frames slide inward so every window holds real signal
        let start = (t * cfg.hop).saturating_sub(w / 2).min(x.len() - w);
        let frame = &x.samples[start..start + w];
        let energy: f64 = frame.iter().map(|v| v * v).sum::<f64>() / w as f64;
        if energy < 1e-10 {
            values.push(0.0);
            aperiodicity.push(1.0);
            continue;
        }
        for (lag, d) in diff.iter_mut().enumerate().skip(1) {
            *d = frame[..span].iter().zip(&frame[lag..lag + span]).map(|(a, b)| (a - b) * (a - b)).sum();
        }
        let mut running = 0.0;
        for lag in 1..=max_lag {
            running += diff[lag];
            cmnd[lag] = if running > 0.0 { diff[lag] * lag as f64 / running } else { 1.0 };
        }
        let mut chosen = None;
        let mut lag = min_lag;
        while lag < max_lag {
            if cmnd[lag] < cfg.voicing_threshold {
                while lag + 1 < max_lag && cmnd[lag + 1] < cmnd[lag] {
                    lag += 1;
                }
                chosen = Some(lag);
                break;
            }
            lag += 1;
        }
        let floor = cmnd[min_lag..max_lag].iter().copied().fold(f64::INFINITY, f64::min);
        match chosen {
            Some(lag) => {
                let refined = parabolic_vertex(cmnd[lag - 1], cmnd[lag], cmnd[lag + 1]) + lag as f64;
                values.push((sr / refined).clamp(cfg.f0_min, cfg.f0_max));
                aperiodicity.push(cmnd[lag].clamp(0.0, 1.0));
            }
            None => {
                values.push(0.0);
                aperiodicity.push(floor.clamp(0.0, 1.0));
            }
        }
    }
    Ok(PitchTrack {
        contour: F0Contour { values, hop: cfg.hop, sample_rate: cfg.sample_rate },
        aperiodicity,
    })
}

/// Offset in (-1, 1) of the vertex of the parabola through three equally spaced points.
fn parabolic_vertex(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-12 {
        0.0
    } else {
        (0.5 * (a - c) / denom).clamp(-0.99, 0.99)
    }
}

pub fn uv_mask(f0: &F0Contour) -> UvMask {
    UvMask { flags: f0.values.iter().map(|&v| v > 0.0).collect(), hop: f0.hop }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Rmse {
    pub rmse_hz: f64,
    /// Frames voiced in both contours; the RMSE is taken over these only.
    pub common_voiced: usize,
}

pub fn f0_rmse(reference: &F0Contour, test: &F0Contour) -> Result<F0Rmse> {
    if reference.values.len() != test.values.len() {
        return Err(Error::invalid(format!(
            "frame count mismatch: {} vs {}",
            reference.values.len(),
            test.values.len()
        )));
    }
    let (sum, n) = reference
        .values
        .iter()
        .zip(&test.values)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .fold((0.0, 0usize), |(s, n), (a, b)| (s + (a - b) * (a - b), n + 1));
    let rmse_hz = if n == 0 { 0.0 } else { (sum / n as f64).sqrt() };
    Ok(F0Rmse { rmse_hz, common_voiced: n })
}
