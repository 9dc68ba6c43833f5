//! Kaiser-windowed sinc resampling to the model rate.

use std::f64::consts::PI;

use super::window::kaiser_at;
use super::Waveform;

const TAPS_PER_PHASE: usize = 32;
const KAISER_BETA: f64 = 8.6;
/// Cutoff as a fraction of the lower of the two Nyquist frequencies.
const ROLLOFF: f64 = 0.95;

/// Resamples `x` to `target_rate`. Identity when the rates already match.
pub fn resample(x: &Waveform, target_rate: u32) -> Waveform {
    if x.sample_rate == target_rate || x.is_empty() {
        return Waveform { samples: x.samples.clone(), sample_rate: target_rate };
    }
    let ratio = target_rate as f64 / x.sample_rate as f64;
    let cutoff = ROLLOFF * ratio.min(1.0);
    // kernel spans TAPS_PER_PHASE samples at the lower of the two rates
    let half_width = (TAPS_PER_PHASE / 2) as f64 / ratio.min(1.0);
    let out_len = ((x.len() as f64) * ratio).round() as usize;
    let n = x.len() as isize;
    let samples = (0..out_len)
        .map(|m| {
            let t = m as f64 / ratio;
            let lo = (t - half_width).ceil() as isize;
            let hi = (t + half_width).floor() as isize;
            let mut acc = 0.0;
            for k in lo.max(0)..=hi.min(n - 1) {
                let d = t - k as f64;
                acc += x.samples[k as usize] * cutoff * sinc(cutoff * d) * kaiser_at(d, half_width, KAISER_BETA);
            }
            acc
        })
        .collect();
    Waveform { samples, sample_rate: target_rate }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, secs: f64) -> Waveform {
        let n = (rate as f64 * secs) as usize;
        let s = (0..n).map(|i| (2.0 * PI * freq * i as f64 / rate as f64).sin()).collect();
        Waveform::new(s, rate).unwrap()
    }

    #[test]
    fn identity_when_rates_match() {
        let x = tone(440.0, 24_000, 0.1);
        assert_eq!(resample(&x, 24_000), x);
    }

    #[test]
    fn passband_tone_survives_upsampling() {
        let x = tone(1000.0, 16_000, 0.5);
        let y = resample(&x, 24_000);
        assert_eq!(y.len(), 12_000);
        let reference = tone(1000.0, 24_000, 0.5);
        let max_err = (200..11_800)
            .map(|i| (y.samples[i] - reference.samples[i]).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-2, "max_err = {max_err}");
    }

    #[test]
    fn stopband_tone_is_removed_when_downsampling() {
        // 15 kHz lies above the 12 kHz Nyquist of the target rate
        let x = tone(15_000.0, 48_000, 0.25);
        let y = resample(&x, 24_000);
        let rms = (y.samples[100..y.len() - 100].iter().map(|v| v * v).sum::<f64>()
            / (y.len() - 200) as f64)
            .sqrt();
        assert!(rms < 1e-2, "rms = {rms}");
    }
}
