//! Multi-resolution STFT loss: spectral convergence plus log-magnitude L1,
//! averaged over resolutions.

use super::stft::{Stft, StftConfig, MAG_POWER_FLOOR};
use super::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StftLoss {
    pub spectral_convergence: f64,
    pub log_magnitude: f64,
    pub total: f64,
}

/// Default resolutions: fft {512, 1024, 2048}, hop {128, 256, 512}, win = fft.
pub fn default_resolutions() -> Vec<StftConfig> {
    [(512, 128), (1024, 256), (2048, 512)]
        .iter()
        .map(|&(n, h)| StftConfig::new(n, h, n).expect("static config"))
        .collect()
}

/// Resolutions for quarter-rate sub-band signals: fft {256, 512, 1024}.
pub fn subband_resolutions() -> Vec<StftConfig> {
    [(256, 64), (512, 128), (1024, 256)]
        .iter()
        .map(|&(n, h)| StftConfig::new(n, h, n).expect("static config"))
        .collect()
}

/// Planned multi-resolution loss that can also return the gradient with
/// respect to the estimate.
#[derive(Debug, Clone)]
pub struct MultiResStftLoss {
    stfts: Vec<Stft>,
}

impl MultiResStftLoss {
    pub fn new(resolutions: &[StftConfig]) -> Result<Self> {
        if resolutions.is_empty() {
            return Err(Error::invalid("at least one loss resolution is required"));
        }
        Ok(Self { stfts: resolutions.iter().map(|c| Stft::new(*c)).collect::<Result<_>>()? })
    }

    pub fn loss(&self, reference: &[f64], estimate: &[f64]) -> Result<StftLoss> {
        self.evaluate(reference, estimate, false).map(|(l, _)| l)
    }

    /// Loss and its gradient w.r.t. `estimate`.
    pub fn loss_and_grad(&self, reference: &[f64], estimate: &[f64]) -> Result<(StftLoss, Vec<f64>)> {
        self.evaluate(reference, estimate, true)
            .map(|(l, g)| (l, g.expect("gradient requested")))
    }

    fn evaluate(&self, reference: &[f64], estimate: &[f64], with_grad: bool) -> Result<(StftLoss, Option<Vec<f64>>)> {
        if reference.len() != estimate.len() {
            return Err(Error::invalid(format!(
                "length mismatch: {} vs {}",
                reference.len(),
                estimate.len()
            )));
        }
        let r = self.stfts.len() as f64;
        let log_floor = MAG_POWER_FLOOR.sqrt();
        let mut out = StftLoss::default();
        let mut grad = with_grad.then(|| vec![0.0; estimate.len()]);
        for st in &self.stfts {
            let (ref_mag, _) = st.magnitude(reference)?;
            let (est_mag, cache) = st.magnitude(estimate)?;
            let n = ref_mag.len() as f64;
            let ref_norm = ref_mag.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diff_norm = ref_mag.iter().zip(&est_mag).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let sc = if ref_norm > 0.0 { diff_norm / ref_norm } else if diff_norm > 0.0 { 1.0 } else { 0.0 };
            let log_diff: Vec<f64> = ref_mag
                .iter()
                .zip(&est_mag)
                .map(|(a, b)| a.max(log_floor).ln() - b.max(log_floor).ln())
                .collect();
            let mag = log_diff.iter().map(|d| d.abs()).sum::<f64>() / n;
            out.spectral_convergence += sc / r;
            out.log_magnitude += mag / r;
            if let Some(g) = grad.as_mut() {
                let sc_scale = if diff_norm > 0.0 && ref_norm > 0.0 { 1.0 / (diff_norm * ref_norm) } else { 0.0 };
                let gm: Vec<f64> = est_mag
                    .iter()
                    .zip(&ref_mag)
                    .zip(&log_diff)
                    .map(|((&e, &a), &d)| {
                        let g_sc = (e - a) * sc_scale;
                        let g_log = if e > log_floor && d != 0.0 { -d.signum() / (n * e) } else { 0.0 };
                        (g_sc + g_log) / r
                    })
                    .collect();
                for (acc, v) in g.iter_mut().zip(st.magnitude_backward(&cache, &gm)?) {
                    *acc += v;
                }
            }
        }
        out.total = out.spectral_convergence + out.log_magnitude;
        Ok((out, grad))
    }
}

/// Multi-resolution STFT loss between a reference `x` and an estimate `x_hat`.
/// The spectral-convergence denominator uses the reference.
pub fn multi_res_stft_loss(x: &Waveform, x_hat: &Waveform, resolutions: &[StftConfig]) -> Result<StftLoss> {
    MultiResStftLoss::new(resolutions)?.loss(&x.samples, &x_hat.samples)
}
