use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{harmonic_noise, harmonic_shift, phase_noise};
use crate::dsp::Waveform;
use crate::error::{Error, Result};

pub const HS_FORMANT_RANGE: (f64, f64) = (0.9, 1.1);
pub const HS_PITCH_MEDIAN_RANGE: (f64, f64) = (100.0, 500.0);
pub const HS_PITCH_RANGE_FACTOR_RANGE: (f64, f64) = (0.8, 1.2);
pub const HN_ALPHA_GRID: [f64; 3] = [1e-4, 5e-4, 1e-3];
pub const HN_BETA_GRID: [f64; 4] = [1e-5, 3e-5, 5e-5, 8e-5];
/// 0.5 to 1.5 in steps of 0.1.
pub const PN_ALPHA_GRID: [f64; 11] = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugmentMethod {
    HarmonicShift,
    HarmonicNoise,
    PhaseNoise,
}

impl AugmentMethod {
    pub const ALL: [AugmentMethod; 3] = [Self::HarmonicShift, Self::HarmonicNoise, Self::PhaseNoise];

    pub fn tag(self) -> &'static str {
        match self {
            Self::HarmonicShift => "hs",
            Self::HarmonicNoise => "hn",
            Self::PhaseNoise => "pn",
        }
    }
}

impl FromStr for AugmentMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hs" => Ok(Self::HarmonicShift),
            "hn" => Ok(Self::HarmonicNoise),
            "pn" => Ok(Self::PhaseNoise),
            other => Err(Error::invalid(format!("unknown augmentation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsParams {
    pub formant_ratio: f64,
    pub pitch_median: f64,
    pub pitch_range_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HnParams {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnParams {
    pub alpha: f64,
}

/// One augmentation draw. Every method's parameters are sampled so the record is
/// complete; only `method`'s are used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub method: AugmentMethod,
    pub hs: HsParams,
    pub hn: HnParams,
    pub pn: PnParams,
    /// Seeds the noise/phase generator used while applying the augmentation.
    pub seed: u64,
}

impl fmt::Display for AugmentParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "method={} seed={}", self.method.tag(), self.seed)?;
        match self.method {
            AugmentMethod::HarmonicShift => write!(
                f,
                " formant_ratio={} pitch_median={} pitch_range_factor={}",
                self.hs.formant_ratio, self.hs.pitch_median, self.hs.pitch_range_factor
            ),
            AugmentMethod::HarmonicNoise => write!(f, " alpha={} beta={}", self.hn.alpha, self.hn.beta),
            AugmentMethod::PhaseNoise => write!(f, " alpha={}", self.pn.alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentPolicy {
    /// One fake per method per real sample.
    UseAll,
    /// One fake per real sample, method chosen uniformly.
    RandomPick,
    Single(AugmentMethod),
    Disabled,
}

impl AugmentPolicy {
    pub fn fakes_per_sample(self) -> usize {
        match self {
            Self::UseAll => 3,
            Self::RandomPick | Self::Single(_) => 1,
            Self::Disabled => 0,
        }
    }
}

impl FromStr for AugmentPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "use_all" => Ok(Self::UseAll),
            "random" | "random_pick" => Ok(Self::RandomPick),
            "none" | "off" => Ok(Self::Disabled),
            other => other.parse().map(Self::Single),
        }
    }
}

impl fmt::Display for AugmentPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UseAll => f.write_str("use_all"),
            Self::RandomPick => f.write_str("random_pick"),
            Self::Disabled => f.write_str("none"),
            Self::Single(m) => f.write_str(m.tag()),
        }
    }
}

fn draw<R: Rng + ?Sized>(method: AugmentMethod, rng: &mut R) -> AugmentParams {
    let hs = HsParams {
        formant_ratio: rng.gen_range(HS_FORMANT_RANGE.0..=HS_FORMANT_RANGE.1),
        pitch_median: rng.gen_range(HS_PITCH_MEDIAN_RANGE.0..=HS_PITCH_MEDIAN_RANGE.1),
        pitch_range_factor: rng.gen_range(HS_PITCH_RANGE_FACTOR_RANGE.0..=HS_PITCH_RANGE_FACTOR_RANGE.1),
    };
    let hn = HnParams {
        alpha: *HN_ALPHA_GRID.choose(rng).expect("non-empty grid"),
        beta: *HN_BETA_GRID.choose(rng).expect("non-empty grid"),
    };
    let pn = PnParams { alpha: *PN_ALPHA_GRID.choose(rng).expect("non-empty grid") };
    AugmentParams { method, hs, hn, pn, seed: rng.gen() }
}

/// Draws the augmentations one real sample receives under `policy`.
pub fn sample_params<R: Rng + ?Sized>(policy: AugmentPolicy, rng: &mut R) -> Vec<AugmentParams> {
    match policy {
        AugmentPolicy::UseAll => AugmentMethod::ALL.iter().map(|&m| draw(m, rng)).collect(),
        AugmentPolicy::RandomPick => {
            let m = *AugmentMethod::ALL.choose(rng).expect("non-empty");
            vec![draw(m, rng)]
        }
        AugmentPolicy::Single(m) => vec![draw(m, rng)],
        AugmentPolicy::Disabled => Vec::new(),
    }
}

/// Applies one augmentation, seeding its generator from `params.seed`.
pub fn apply(x: &Waveform, params: &AugmentParams) -> Result<Waveform> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    match params.method {
        AugmentMethod::HarmonicShift => harmonic_shift(x, &params.hs, &mut rng),
        AugmentMethod::HarmonicNoise => harmonic_noise(x, params.hn.alpha, params.hn.beta, &mut rng),
        AugmentMethod::PhaseNoise => phase_noise(x, params.pn.alpha, &mut rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_parsing() {
        assert_eq!("all".parse::<AugmentPolicy>().unwrap(), AugmentPolicy::UseAll);
        assert_eq!("random_pick".parse::<AugmentPolicy>().unwrap(), AugmentPolicy::RandomPick);
        assert_eq!("pn".parse::<AugmentPolicy>().unwrap(), AugmentPolicy::Single(AugmentMethod::PhaseNoise));
        assert_eq!("none".parse::<AugmentPolicy>().unwrap(), AugmentPolicy::Disabled);
        assert!("xx".parse::<AugmentPolicy>().is_err());
    }

    #[test]
    fn fake_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_params(AugmentPolicy::UseAll, &mut rng).len(), 3);
        assert_eq!(sample_params(AugmentPolicy::RandomPick, &mut rng).len(), 1);
        assert!(sample_params(AugmentPolicy::Disabled, &mut rng).is_empty());
        let methods: Vec<_> = sample_params(AugmentPolicy::UseAll, &mut rng).iter().map(|p| p.method).collect();
        assert_eq!(methods, AugmentMethod::ALL.to_vec());
    }

    #[test]
    fn display_records_only_the_active_method() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = sample_params(AugmentPolicy::Single(AugmentMethod::PhaseNoise), &mut rng)[0];
        let s = p.to_string();
        assert!(s.starts_with("method=pn"));
        assert!(!s.contains("beta"));
    }
}
