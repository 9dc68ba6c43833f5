#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvk_core::dsp::{Waveform, SAMPLE_RATE};

pub fn sine(freq: f64, secs: f64, amp: f64) -> Waveform {
    let n = (secs * SAMPLE_RATE as f64) as usize;
    Waveform::new((0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / SAMPLE_RATE as f64).sin()).collect(), SAMPLE_RATE)
        .unwrap()
}

pub fn white_noise(secs: f64, amp: f64, seed: u64) -> Waveform {
    let n = (secs * SAMPLE_RATE as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Waveform::new((0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect(), SAMPLE_RATE).unwrap()
}

/// Band-limited sawtooth built from its Fourier series.
pub fn sawtooth(f0: f64, secs: f64) -> Waveform {
    harmonic_tone(f0, secs, |k, _| 1.0 / k as f64)
}

/// Sum of harmonics `k * f0` below 11 kHz with amplitude `amp(k, freq)`.
pub fn harmonic_tone(f0: f64, secs: f64, amp: impl Fn(usize, f64) -> f64) -> Waveform {
    let n = (secs * SAMPLE_RATE as f64) as usize;
    let sr = SAMPLE_RATE as f64;
    let kmax = (11_000.0 / f0) as usize;
    let amps: Vec<f64> = (1..=kmax).map(|k| amp(k, k as f64 * f0)).collect();
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            amps.iter().enumerate().map(|(j, a)| a * (2.0 * PI * (j + 1) as f64 * f0 * t).sin()).sum::<f64>()
        })
        .collect();
    Waveform::new(samples, SAMPLE_RATE).unwrap().peak_normalized(0.9)
}

/// Harmonic tone whose spectral envelope is a single Gaussian bump at `peak_hz`.
pub fn formant_tone(f0: f64, secs: f64, peak_hz: f64, width_hz: f64) -> Waveform {
    harmonic_tone(f0, secs, |_, f| 0.02 + (-(f - peak_hz).powi(2) / (2.0 * width_hz * width_hz)).exp())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Formant location: power-weighted centre frequency of the analyzed envelope
/// between `lo` and `hi` Hz, over interior frames. Unlike an argmax it does not
/// snap to the harmonic grid when the pitch is high.
pub fn envelope_centroid(x: &Waveform, lo: f64, hi: f64) -> f64 {
    let d = rvk_core::augment::analyze_harmonics(x).unwrap();
    let bins = d.n_bins();
    let hz = d.sample_rate as f64 / d.config.fft_size as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..bins {
        let f = k as f64 * hz;
        if f < lo || f > hi {
            continue;
        }
        let w: f64 = (2..d.frames - 2).map(|t| d.sp[t * bins + k]).sum();
        num += w * f;
        den += w;
    }
    num / den
}
