//! Discriminator-side fake-sample generators: harmonic shift, harmonic noise and
//! phase noise, the decomposition they rely on, and parameter sampling.

mod decompose;
mod noise;
mod policy;
mod shift;

pub use decompose::{analyze_harmonics, synthesize_harmonics, HarmonicDecomposition, ANALYSIS_PEAK, ENVELOPE_FLOOR, MAX_RATIO};
pub use noise::{harmonic_noise, perturb_envelope, perturb_phase, phase_noise, polar_resynthesis};
pub use policy::{
    apply, sample_params, AugmentMethod, AugmentParams, AugmentPolicy, HnParams, HsParams, PnParams, HN_ALPHA_GRID,
    HN_BETA_GRID, HS_FORMANT_RANGE, HS_PITCH_MEDIAN_RANGE, HS_PITCH_RANGE_FACTOR_RANGE, PN_ALPHA_GRID,
};
pub use shift::harmonic_shift;
