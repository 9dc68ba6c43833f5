mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use rvk_core::dsp::{Waveform, SAMPLE_RATE};
use rvk_core::pqmf::*;

fn response(h: &[f64], f: f64) -> f64 {
    let w = 2.0 * PI * f / SAMPLE_RATE as f64;
    let (re, im) = h.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, &c)| {
        (re + c * (w * n as f64).cos(), im - c * (w * n as f64).sin())
    });
    (re * re + im * im).sqrt()
}

fn energy(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn snr_db(reference: &[f64], test: &[f64]) -> f64 {
    let err: f64 = reference.iter().zip(test).map(|(a, b)| (a - b).powi(2)).sum();
    10.0 * (energy(reference) / err).log10()
}

/// SNR of `y` against `x` delayed by `delay`, skipping filter warm-up at both ends.
fn delayed_snr(x: &[f64], y: &[f64], delay: usize, margin: usize) -> f64 {
    let n = x.len();
    snr_db(&x[margin..n - delay - margin], &y[margin + delay..n - margin])
}

#[test]
fn default_shapes_and_symmetry() {
    let bank = PqmfBank::default();
    assert_eq!(bank.analysis_filters.len(), 4);
    assert_eq!(bank.synthesis_filters.len(), 4);
    assert!(bank.analysis_filters.iter().all(|h| h.len() == 63));
    assert_eq!(bank.prototype.len(), 63);
    for n in 0..=bank.taps {
        assert_eq!(bank.prototype[n], bank.prototype[bank.taps - n]);
    }
}

#[test]
fn band_responses_peak_in_their_quarter() {
    // The edge bands are flat down to DC / up to Nyquist, so their maximum may sit
    // on the boundary; the -6 dB passband and its centre must lie inside.
    let bank = PqmfBank::default();
    let fs = SAMPLE_RATE as f64;
    let grid: Vec<f64> = (0..=1200).map(|i| i as f64 * 10.0).collect();
    for (k, h) in bank.analysis_filters.iter().enumerate() {
        let mag: Vec<f64> = grid.iter().map(|&f| response(h, f)).collect();
        let best = (0..grid.len()).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
        let (lo, hi) = (2.0 * k as f64 * fs / 16.0, (2.0 * k as f64 + 2.0) * fs / 16.0);
        assert!(grid[best] >= lo && grid[best] <= hi, "band {k} peaks at {} Hz", grid[best]);
        let pass: Vec<f64> = grid.iter().zip(&mag).filter(|(_, &m)| m >= 0.5 * mag[best]).map(|(&f, _)| f).collect();
        let (first, last) = (pass[0], *pass.last().unwrap());
        assert!(first >= lo - 250.0 && last <= hi + 250.0, "band {k} passband {first}..{last}");
        let centre = (first + last) / 2.0;
        assert!(centre > lo && centre < hi);
    }
}

fn band_energies(x: &Waveform) -> Vec<f64> {
    let s = analysis(x, &PqmfBank::default());
    s.bands.iter().map(|b| energy(&b[40..b.len() - 40])).collect()
}

#[test]
fn low_sine_lands_in_band_zero() {
    let e = band_energies(&common::sine(500.0, 1.0, 0.8));
    for k in 1..4 {
        assert!(10.0 * (e[0] / e[k]).log10() >= 30.0, "band {k}: {e:?}");
    }
}

#[test]
fn high_sine_lands_in_band_three() {
    let e = band_energies(&common::sine(10_000.0, 1.0, 0.8));
    for k in 0..3 {
        assert!(10.0 * (e[3] / e[k]).log10() >= 30.0, "band {k}: {e:?}");
    }
}

#[test]
fn zero_in_zero_out() {
    let bank = PqmfBank::default();
    let s = analysis(&Waveform::zeros(4096, SAMPLE_RATE), &bank);
    assert!(s.bands.iter().flatten().all(|&v| v == 0.0));
    let y = synthesis(&s, &bank).unwrap();
    assert!(y.samples.iter().all(|&v| v == 0.0));
}

#[test]
fn noise_round_trip_is_near_perfect() {
    let bank = PqmfBank::default();
    let x = common::white_noise(1.0, 0.5, 21);
    let y = synthesis(&analysis(&x, &bank), &bank).unwrap();
    assert_eq!(y.len(), x.len());
    let snr = delayed_snr(&x.samples, &y.samples, bank.taps, bank.taps);
    assert!(snr >= 30.0, "{snr} dB");
}

#[test]
fn impulse_round_trip_peaks_at_taps() {
    let bank = PqmfBank::default();
    let mut x = vec![0.0; 512];
    x[0] = 1.0;
    let y = synthesis(&analysis(&Waveform::new(x, SAMPLE_RATE).unwrap(), &bank), &bank).unwrap();
    let peak = (0..y.len()).max_by(|&a, &b| y.samples[a].abs().total_cmp(&y.samples[b].abs())).unwrap();
    assert_eq!(peak, bank.taps);
    assert!((y.samples[peak] - 1.0).abs() < 0.05, "{}", y.samples[peak]);
    let runner_up = y.samples.iter().enumerate().filter(|&(i, _)| i != peak).map(|(_, v)| v.abs()).fold(0.0, f64::max);
    assert!(runner_up < 0.1 * y.samples[peak].abs());
}

#[test]
fn aliasing_cancels_across_bands() {
    let bank = PqmfBank::default();
    let x = common::white_noise(0.5, 0.5, 4);
    let s = analysis(&x, &bank);
    let full = synthesis(&s, &bank).unwrap();
    let mut sum = vec![0.0; full.len()];
    for k in 0..4 {
        let mut only = s.clone();
        for (j, b) in only.bands.iter_mut().enumerate() {
            if j != k {
                b.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let part = synthesis(&only, &bank).unwrap();
        // a single band alone is far from the input
        assert!(delayed_snr(&x.samples, &part.samples, bank.taps, bank.taps) < 10.0);
        sum.iter_mut().zip(&part.samples).for_each(|(a, b)| *a += b);
    }
    assert!(common::max_abs_diff(&sum, &full.samples) < 1e-12);
    assert!(delayed_snr(&x.samples, &sum, bank.taps, bank.taps) >= 30.0);
}

#[test]
fn band_power_matches_input_power() {
    // Compare mean power per sample: each band runs at a quarter of the input rate.
    let bank = PqmfBank::default();
    for seed in 0..5 {
        let x = common::white_noise(1.0, 0.5, 100 + seed);
        let s = analysis(&x, &bank);
        let band_power: f64 = s.bands.iter().map(|b| energy(b) / b.len() as f64).sum();
        let input_power = energy(&x.samples) / x.len() as f64;
        let db = 10.0 * (band_power / input_power).log10();
        assert!(db.abs() <= 3.0, "{db} dB");
    }
}

#[test]
fn mismatched_bands_are_rejected() {
    let bank = PqmfBank::default();
    let bad = SubbandSignals { bands: vec![vec![0.0; 10]; 3], sample_rate: SAMPLE_RATE, pad: 0 };
    assert!(synthesis(&bad, &bank).is_err());
    let ragged = SubbandSignals {
        bands: vec![vec![0.0; 10], vec![0.0; 10], vec![0.0; 9], vec![0.0; 10]],
        sample_rate: SAMPLE_RATE,
        pad: 0,
    };
    assert!(synthesis(&ragged, &bank).is_err());
}

#[test]
fn aligned_variant_has_no_delay() {
    let bank = PqmfBank::default();
    let x = common::white_noise(0.5, 0.5, 8);
    let bands = bank.analysis_aligned(&x.samples);
    assert!(bands.iter().all(|b| b.len() == x.len() / 4));
    let y = bank.synthesis_aligned(&bands).unwrap();
    assert!(delayed_snr(&x.samples, &y, 0, bank.taps) >= 30.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn near_pr_for_any_noise(seed in 0u64..10_000, amp in 0.01f64..1.0) {
        let bank = PqmfBank::default();
        let x = common::white_noise(0.25, amp, seed);
        let y = synthesis(&analysis(&x, &bank), &bank).unwrap();
        prop_assert!(delayed_snr(&x.samples, &y.samples, bank.taps, bank.taps) >= 30.0);
    }
}
