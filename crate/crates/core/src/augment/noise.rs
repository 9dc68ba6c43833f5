use rand::distributions::{Distribution, Open01};
use rand::Rng;

use super::decompose::{analyze_harmonics, synthesize_harmonics, HarmonicDecomposition};
use crate::dsp::{PolarSpectrogram, Stft, StftConfig, Waveform};
use crate::error::Result;

/// Adds `beta * U(0,1)` to every envelope cell with `sp >= alpha`; cells below
/// `alpha` are untouched. One draw per modified cell, frame-major order.
pub fn perturb_envelope<R: Rng + ?Sized>(d: &HarmonicDecomposition, alpha: f64, beta: f64, rng: &mut R) -> HarmonicDecomposition {
    let mut out = d.clone();
    for s in out.sp.iter_mut() {
        if *s >= alpha {
            let u: f64 = Open01.sample(rng);
            *s += beta * u;
        }
    }
    out
}

/// Harmonic noise: perturb the high-energy part of the envelope and resynthesize.
pub fn harmonic_noise<R: Rng + ?Sized>(x: &Waveform, alpha: f64, beta: f64, rng: &mut R) -> Result<Waveform> {
    let d = analyze_harmonics(x)?;
    synthesize_harmonics(&perturb_envelope(&d, alpha, beta, rng))
}

/// Adds `alpha * U(0,1)` to every phase cell. The magnitude array is carried over untouched.
pub fn perturb_phase<R: Rng + ?Sized>(s: &PolarSpectrogram, alpha: f64, rng: &mut R) -> PolarSpectrogram {
    let mut out = s.clone();
    for p in out.phase.iter_mut() {
        let u: f64 = Open01.sample(rng);
        *p += alpha * u;
    }
    out
}

/// STFT to polar form, back to complex, iSTFT. The unperturbed counterpart of
/// [`phase_noise`].
pub fn polar_resynthesis(x: &Waveform) -> Result<Waveform> {
    let st = Stft::new(StftConfig::default())?;
    let polar = st.forward(&x.samples)?.to_polar();
    resynthesize(&st, &polar, x)
}

/// Phase noise: perturb STFT phases, keep magnitudes, resynthesize.
///
/// Scrambled phases keep the energy but can raise the crest factor, so the
/// output is scaled down to the input's peak when it overshoots it.
pub fn phase_noise<R: Rng + ?Sized>(x: &Waveform, alpha: f64, rng: &mut R) -> Result<Waveform> {
    let st = Stft::new(StftConfig::default())?;
    let polar = st.forward(&x.samples)?.to_polar();
    resynthesize(&st, &perturb_phase(&polar, alpha, rng), x)
}

fn resynthesize(st: &Stft, polar: &PolarSpectrogram, x: &Waveform) -> Result<Waveform> {
    let mut samples = st.inverse(&polar.to_complex())?;
    let (limit, peak) = (x.peak(), samples.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    if peak > limit {
        let g = limit / peak;
        samples.iter_mut().for_each(|v| *v *= g);
    }
    Ok(Waveform { samples, sample_rate: x.sample_rate })
}
