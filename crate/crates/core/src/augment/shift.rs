//! Harmonic shift: re-pitch and formant-warp through a harmonic-plus-noise
//! resynthesis.

use std::f64::consts::PI;

use rand::Rng;
use rustfft::num_complex::Complex64;

use super::decompose::{analyze, ANALYSIS_PEAK};
use super::HsParams;
use crate::dsp::{Stft, Waveform};
use crate::error::Result;
use crate::pitch::median;

/// Harmonics are synthesized up to this fraction of Nyquist.
const HARMONIC_CEILING: f64 = 0.95;
/// Minimum aperiodic share of a voiced frame's power.
const MIN_NOISE_FRACTION: f64 = 0.02;

/// Linear interpolation of `row` at fractional bin `pos`, clamped at the ends.
fn interp(row: &[f64], pos: f64) -> f64 {
    if pos <= 0.0 {
        return row[0];
    }
    let i = pos.floor() as usize;
    if i + 1 >= row.len() {
        return row[row.len() - 1];
    }
    let f = pos - i as f64;
    row[i] * (1.0 - f) + row[i + 1] * f
}

/// Shifts F0 to `pitch_median * (f0 / median_f0)^pitch_range_factor` and warps the
/// spectral envelope along frequency by `formant_ratio`. Unvoiced frames (and whole
/// inputs without voicing) come back as envelope-shaped noise. The result is
/// peak-normalized to 0.95.
pub fn harmonic_shift<R: Rng + ?Sized>(x: &Waveform, p: &HsParams, rng: &mut R) -> Result<Waveform> {
    let analysis = analyze(x)?;
    let d = &analysis.decomposition;
    let cfg = d.config;
    let bins = cfg.n_bins();
    let n_fft = cfg.fft_size as f64;
    let sr = d.sample_rate as f64;
    let bin_hz = sr / n_fft;
    let len = d.signal_len;
    let frames = d.frames;

    let power = d.power();
    // window-square sum of the periodic Hann, for Parseval on one frame
    let wsq: f64 = cfg.window_samples().iter().map(|w| w * w).sum();
    let frame_power: Vec<f64> = (0..frames)
        .map(|t| {
            let row = &power[t * bins..(t + 1) * bins];
            let two_sided: f64 = row.iter().enumerate().map(|(k, v)| if k == 0 || k == bins - 1 { *v } else { 2.0 * v }).sum();
            two_sided / n_fft / wsq
        })
        .collect();

    // envelope warp: new(f) = old(f / ratio)
    let mut warped = vec![0.0; d.sp.len()];
    for t in 0..frames {
        let src = &d.sp[t * bins..(t + 1) * bins];
        for k in 0..bins {
            warped[t * bins + k] = interp(src, k as f64 / p.formant_ratio);
        }
    }

    let voiced: Vec<f64> = d.f0.voiced().collect();
    let target: Vec<f64> = match median(&voiced) {
        Some(m0) => d
            .f0
            .values
            .iter()
            .map(|&f| if f > 0.0 { p.pitch_median * (f / m0).powf(p.pitch_range_factor) } else { 0.0 })
            .collect(),
        None => vec![0.0; frames],
    };
    let noise_fraction: Vec<f64> = (0..frames)
        .map(|t| if target[t] > 0.0 { analysis.aperiodicity[t].clamp(MIN_NOISE_FRACTION, 1.0) } else { 1.0 })
        .collect();

    let harmonic = synthesize_harmonic_part(&target, &warped, &frame_power, &noise_fraction, bins, bin_hz, cfg.hop, len, sr, rng);
    let noise = synthesize_noise_part(d, &warped, &frame_power, &noise_fraction, rng)?;
    let mut y = Waveform { samples: harmonic.iter().zip(&noise).map(|(a, b)| a + b).collect(), sample_rate: d.sample_rate };
    if y.peak() > 0.0 {
        y = y.peak_normalized(ANALYSIS_PEAK);
    }
    Ok(y)
}

#[allow(clippy::too_many_arguments)]
fn synthesize_harmonic_part<R: Rng + ?Sized>(
    target: &[f64],
    envelope: &[f64],
    frame_power: &[f64],
    noise_fraction: &[f64],
    bins: usize,
    bin_hz: f64,
    hop: usize,
    len: usize,
    sr: f64,
    rng: &mut R,
) -> Vec<f64> {
    let frames = target.len();
    let ceiling = HARMONIC_CEILING * sr / 2.0;
    // hold the nearest voiced F0 through unvoiced stretches so phases stay continuous
    let mut held = target.to_vec();
    let first = match target.iter().position(|&f| f > 0.0) {
        Some(i) => i,
        None => return vec![0.0; len],
    };
    for t in 0..frames {
        if held[t] <= 0.0 {
            held[t] = if t < first { target[first] } else { held[t - 1] };
        }
    }
    let min_f0 = held.iter().copied().fold(f64::INFINITY, f64::min);
    let n_harm = (ceiling / min_f0).floor().max(1.0) as usize;

    // per-frame amplitudes, energy-matched to the periodic share of the frame power
    let mut amps = vec![0.0; frames * n_harm];
    for t in 0..frames {
        if target[t] <= 0.0 {
            continue;
        }
        let row = &envelope[t * bins..(t + 1) * bins];
        let a = &mut amps[t * n_harm..(t + 1) * n_harm];
        let mut raw_power = 0.0;
        for (k, slot) in a.iter_mut().enumerate() {
            let f = (k + 1) as f64 * target[t];
            if f < ceiling {
                *slot = interp(row, f / bin_hz).sqrt();
                raw_power += *slot * *slot / 2.0;
            }
        }
        if raw_power > 0.0 {
            let gain = ((1.0 - noise_fraction[t]) * frame_power[t] / raw_power).sqrt();
            a.iter_mut().for_each(|v| *v *= gain);
        }
    }

    let mut phases: Vec<f64> = (0..n_harm).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let mut out = vec![0.0; len];
    for (n, y) in out.iter_mut().enumerate() {
        // frame t is centered on sample t * hop
        let pos = (n as f64 / hop as f64).min((frames - 1) as f64);
        let t0 = pos.floor() as usize;
        let t1 = (t0 + 1).min(frames - 1);
        let w = pos - t0 as f64;
        let f0 = held[t0] * (1.0 - w) + held[t1] * w;
        let mut acc = 0.0;
        for (k, phase) in phases.iter_mut().enumerate() {
            let amp = amps[t0 * n_harm + k] * (1.0 - w) + amps[t1 * n_harm + k] * w;
            if amp > 0.0 {
                acc += amp * phase.sin();
            }
            *phase += 2.0 * PI * (k + 1) as f64 * f0 / sr;
        }
        for phase in phases.iter_mut() {
            *phase %= 2.0 * PI;
        }
        *y = acc;
    }
    out
}

fn synthesize_noise_part<R: Rng + ?Sized>(
    d: &super::HarmonicDecomposition,
    envelope: &[f64],
    frame_power: &[f64],
    noise_fraction: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let cfg = d.config;
    let bins = cfg.n_bins();
    let n = cfg.fft_size as f64;
    let wsq: f64 = cfg.window_samples().iter().map(|w| w * w).sum();
    // steady-state window-square overlap sum that the inverse divides by
    let ola = wsq / cfg.hop as f64;
    let mut data = Vec::with_capacity(envelope.len());
    for t in 0..d.frames {
        let row = &envelope[t * bins..(t + 1) * bins];
        let shape: Vec<f64> = row.iter().map(|v| v.sqrt()).collect();
        let two_sided: f64 = shape
            .iter()
            .enumerate()
            .map(|(k, v)| if k == 0 || k == bins - 1 { v * v } else { 2.0 * v * v })
            .sum();
        // random-phase frames are uncorrelated: E[out^2] = two_sided / (N^2 * ola)
        let want = noise_fraction[t] * frame_power[t];
        let gain = if two_sided > 0.0 { (want * n * n * ola / two_sided).sqrt() } else { 0.0 };
        for &m in &shape {
            let phase = rng.gen_range(0.0..2.0 * PI);
            data.push(Complex64::from_polar(m * gain, phase));
        }
    }
    let spec = crate::dsp::ComplexSpectrogram { data, frames: d.frames, config: cfg, signal_len: d.signal_len };
    Stft::new(cfg)?.inverse(&spec)
}
