//! Pseudo-QMF cosine-modulated filterbank for sub-band analysis/synthesis.
//!
//! Analysis filter `k` is `2 p[n] cos((2k+1) pi/(2N) (n - taps/2) + (-1)^k pi/4)` where
//! `p` is a Kaiser-windowed ideal lowpass. Synthesis filters are the time-reversed
//! analysis filters scaled by `N`, so a plain analysis/synthesis round trip is a
//! near-identity delayed by `taps` samples. The `*_aligned` variants shift both
//! stages by `taps/2` so the round trip has zero delay; the generator uses those.

use std::f64::consts::PI;

use crate::dsp::window::kaiser;
use crate::dsp::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PqmfBank {
    pub n_bands: usize,
    pub taps: usize,
    pub cutoff_ratio: f64,
    pub kaiser_beta: f64,
    pub prototype: Vec<f64>,
    pub analysis_filters: Vec<Vec<f64>>,
    pub synthesis_filters: Vec<Vec<f64>>,
}

impl Default for PqmfBank {
    /// Four bands, 62 taps, cutoff 0.142, Kaiser beta 9.
    fn default() -> Self {
        design_bank(4, 62, 0.142, 9.0).expect("default PQMF parameters are valid")
    }
}

/// Decimated sub-band signals, band 0 lowest.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandSignals {
    pub bands: Vec<Vec<f64>>,
    pub sample_rate: u32,
    /// Zeros appended to the input to make its length a multiple of the band count.
    pub pad: usize,
}

impl SubbandSignals {
    pub fn band_len(&self) -> usize {
        self.bands.first().map_or(0, Vec::len)
    }
}

pub fn design_bank(n_bands: usize, taps: usize, cutoff_ratio: f64, kaiser_beta: f64) -> Result<PqmfBank> {
    if n_bands < 2 {
        return Err(Error::invalid("PQMF needs at least two bands"));
    }
    if taps == 0 || taps % 2 != 0 {
        return Err(Error::invalid("PQMF taps must be even and positive"));
    }
    if !(cutoff_ratio > 0.0 && cutoff_ratio < 1.0 / n_bands as f64) {
        return Err(Error::invalid(format!("cutoff ratio {cutoff_ratio} must lie in (0, 1/{n_bands})")));
    }
    let wc = cutoff_ratio * PI;
    let half = taps as f64 / 2.0;
    let window = kaiser(taps + 1, kaiser_beta);
    let prototype: Vec<f64> = (0..=taps)
        .map(|n| {
            let c = n as f64 - half;
            let ideal = if n == taps / 2 { cutoff_ratio } else { (wc * c).sin() / (PI * c) };
            ideal * window[n]
        })
        .collect();
    let nb = n_bands as f64;
    let mut analysis_filters = Vec::with_capacity(n_bands);
    let mut synthesis_filters = Vec::with_capacity(n_bands);
    for k in 0..n_bands {
        let phase = if k % 2 == 0 { PI / 4.0 } else { -PI / 4.0 };
        let arg = |n: usize| (2 * k + 1) as f64 * PI / (2.0 * nb) * (n as f64 - half);
        analysis_filters.push((0..=taps).map(|n| 2.0 * prototype[n] * (arg(n) + phase).cos()).collect());
        synthesis_filters.push((0..=taps).map(|n| nb * 2.0 * prototype[n] * (arg(n) - phase).cos()).collect());
    }
    Ok(PqmfBank { n_bands, taps, cutoff_ratio, kaiser_beta, prototype, analysis_filters, synthesis_filters })
}

impl PqmfBank {
    /// Filter-and-decimate, reading the full convolution from index `offset`.
    fn analyze_at(&self, x: &[f64], offset: usize) -> (Vec<Vec<f64>>, usize) {
        let n = self.n_bands;
        let pad = (n - x.len() % n) % n;
        let len = x.len() + pad;
        let out_len = len / n;
        let bands = self
            .analysis_filters
            .iter()
            .map(|h| {
                (0..out_len)
                    .map(|m| {
                        let i = (m * n + offset) as isize;
                        let mut acc = 0.0;
                        for (j, &c) in h.iter().enumerate() {
                            let src = i - j as isize;
                            if src >= 0 && (src as usize) < x.len() {
                                acc += c * x[src as usize];
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        (bands, pad)
    }

    /// Upsample-filter-sum, reading the full convolution from index `offset`.
    fn synthesize_at(&self, bands: &[Vec<f64>], offset: usize) -> Result<Vec<f64>> {
        self.check_bands(bands)?;
        let n = self.n_bands;
        let band_len = bands[0].len();
        let out_len = band_len * n;
        let mut y = vec![0.0; out_len];
        for (g, b) in self.synthesis_filters.iter().zip(bands) {
            for (i, out) in y.iter_mut().enumerate() {
                let full = i + offset;
                // only taps landing on non-zero (upsampled) positions contribute
                let first = full % n;
                let mut acc = 0.0;
                let mut j = first;
                while j < g.len() && j <= full {
                    let m = (full - j) / n;
                    if m < band_len {
                        acc += g[j] * b[m];
                    }
                    j += n;
                }
                *out += acc;
            }
        }
        Ok(y)
    }

    /// Adjoint of [`Self::synthesize_at`]: maps a gradient on the output back onto the bands.
    fn synthesize_adjoint_at(&self, grad_out: &[f64], band_len: usize, offset: usize) -> Vec<Vec<f64>> {
        let n = self.n_bands;
        self.synthesis_filters
            .iter()
            .map(|g| {
                (0..band_len)
                    .map(|m| {
                        let mut acc = 0.0;
                        for (j, &c) in g.iter().enumerate() {
                            let full = m * n + j;
                            if full >= offset && full - offset < grad_out.len() {
                                acc += c * grad_out[full - offset];
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    fn check_bands(&self, bands: &[Vec<f64>]) -> Result<()> {
        if bands.len() != self.n_bands {
            return Err(Error::invalid(format!("expected {} bands, got {}", self.n_bands, bands.len())));
        }
        let len = bands[0].len();
        if bands.iter().any(|b| b.len() != len) {
            return Err(Error::invalid("sub-bands have unequal lengths"));
        }
        Ok(())
    }

    /// Zero-delay analysis (group delay of `taps/2` removed before decimation).
    pub fn analysis_aligned(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.analyze_at(x, self.taps / 2).0
    }

    /// Zero-delay synthesis; `synthesis_aligned(analysis_aligned(x)) ≈ x`.
    pub fn synthesis_aligned(&self, bands: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.synthesize_at(bands, self.taps / 2)
    }

    /// Gradient of [`Self::synthesis_aligned`] with respect to its bands.
    pub fn synthesis_aligned_backward(&self, grad_out: &[f64]) -> Result<Vec<Vec<f64>>> {
        if grad_out.len() % self.n_bands != 0 {
            return Err(Error::shape("output gradient length is not a multiple of the band count"));
        }
        Ok(self.synthesize_adjoint_at(grad_out, grad_out.len() / self.n_bands, self.taps / 2))
    }
}

/// Causal analysis: filter with each analysis filter then keep every `n_bands`-th sample.
pub fn analysis(x: &Waveform, bank: &PqmfBank) -> SubbandSignals {
    let (bands, pad) = bank.analyze_at(&x.samples, 0);
    SubbandSignals { bands, sample_rate: x.sample_rate, pad }
}

/// Causal synthesis; the output lags the analysis input by `taps` samples.
pub fn synthesis(bands: &SubbandSignals, bank: &PqmfBank) -> Result<Waveform> {
    let samples = bank.synthesize_at(&bands.bands, 0)?;
    Ok(Waveform { samples, sample_rate: bands.sample_rate })
}
