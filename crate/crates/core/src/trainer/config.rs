use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::augment::AugmentPolicy;
use crate::dsp::{default_resolutions, subband_resolutions, FeatureConfig, StftConfig, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::model::{DiscriminatorConfig, GeneratorConfig, UvPredictorConfig};

/// Architecture sizes. `Full` is the published configuration, `Toy` the reduced
/// widths used for desk-scale runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSize {
    Full,
    Toy,
}

impl FromStr for ModelSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "toy" => Ok(Self::Toy),
            other => Err(Error::invalid(format!("unknown model size '{other}' (full|toy)"))),
        }
    }
}

/// Everything that must agree between a checkpoint and the code loading it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub feature: FeatureConfig,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub uv: UvPredictorConfig,
}

impl ModelConfig {
    pub fn new(size: ModelSize) -> Self {
        match size {
            ModelSize::Full => Self {
                feature: FeatureConfig::default(),
                generator: GeneratorConfig::default(),
                discriminator: DiscriminatorConfig::default(),
                uv: UvPredictorConfig::default(),
            },
            ModelSize::Toy => Self {
                feature: FeatureConfig::default(),
                generator: GeneratorConfig::toy(),
                discriminator: DiscriminatorConfig::toy(),
                uv: UvPredictorConfig::toy(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.generator.hop() != self.feature.stft.hop {
            return Err(Error::invalid(format!(
                "generator produces {} samples per frame but the mel hop is {}",
                self.generator.hop(),
                self.feature.stft.hop
            )));
        }
        if self.generator.n_mels != self.feature.n_mels || self.uv.n_mels != self.feature.n_mels {
            return Err(Error::invalid("model mel band counts differ from the feature config"));
        }
        Ok(())
    }

    /// Text stored in checkpoints; its digest identifies the configuration.
    pub fn canonical(&self) -> String {
        format!(
            "{}{}{}{}",
            self.feature.canonical(),
            self.generator.canonical(),
            self.discriminator.canonical(),
            self.uv.canonical()
        )
    }

    pub fn from_canonical(text: &str) -> Result<Self> {
        let kv = parse_kv(text)?;
        let get = |k: &str| kv.get(k).map(String::as_str).ok_or_else(|| Error::invalid(format!("config is missing '{k}'")));
        let feature = FeatureConfig {
            sample_rate: num(get("feature.sample_rate")?)?,
            stft: StftConfig::new(num(get("feature.fft_size")?)?, num(get("feature.hop")?)?, num(get("feature.win_length")?)?)?,
            n_mels: num(get("feature.n_mels")?)?,
            fmin: num(get("feature.fmin")?)?,
            fmax: num(get("feature.fmax")?)?,
        };
        let generator = GeneratorConfig {
            n_mels: num(get("gen.n_mels")?)?,
            upsample_factors: list(get("gen.upsample_factors")?)?,
            channels: list(get("gen.channels")?)?,
            n_subbands: num(get("gen.n_subbands")?)?,
            prenet_layers: num(get("gen.prenet_layers")?)?,
            prenet_kernel: num(get("gen.prenet_kernel")?)?,
            dropout_rate: num(get("gen.dropout_rate")?)?,
            dropout_layer: num(get("gen.dropout_layer")?)?,
            dropout_at_inference: num(get("gen.dropout_at_inference")?)?,
            low_band_dims: num(get("gen.low_band_dims")?)?,
            high_band_dims: num(get("gen.high_band_dims")?)?,
            residual_dilations: list(get("gen.residual_dilations")?)?,
            output_kernel: num(get("gen.output_kernel")?)?,
            leaky_slope: num(get("gen.leaky_slope")?)?,
        };
        let (kh, kw) = get("disc.kernel")?
            .split_once('x')
            .ok_or_else(|| Error::invalid("disc.kernel must look like 3x3"))?;
        let discriminator = DiscriminatorConfig {
            resolutions: parse_resolutions(get("disc.resolutions")?)?,
            channels: list(get("disc.channels")?)?,
            kernel: (num(kh)?, num(kw)?),
            leaky_slope: num(get("disc.leaky_slope")?)?,
        };
        let uv = UvPredictorConfig {
            n_mels: num(get("uv.n_mels")?)?,
            hidden: list(get("uv.hidden")?)?,
            kernel: num(get("uv.kernel")?)?,
            leaky_slope: num(get("uv.leaky_slope")?)?,
        };
        let cfg = Self { feature, generator, discriminator, uv };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Training run configuration, read from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Feature cache; defaults to `<out_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub model: ModelSize,
    pub sample_rate: u32,
    pub segment_frames: usize,
    pub batch_size: usize,
    pub pretrain_steps: u64,
    pub total_steps: u64,
    pub lr_g: f64,
    pub lr_d: f64,
    pub augment: AugmentPolicy,
    /// Weight of the augmented-fake term in the discriminator loss.
    pub aug_weight: f64,
    pub lambda_adv: f64,
    pub seed: u64,
    pub checkpoint_interval: u64,
    pub fullband_resolutions: Vec<StftConfig>,
    pub subband_resolutions: Vec<StftConfig>,
    pub uv_steps: u64,
    pub uv_lr: f64,
    pub uv_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("runs/default"),
            cache_dir: None,
            model: ModelSize::Full,
            sample_rate: SAMPLE_RATE,
            segment_frames: 32,
            batch_size: 4,
            pretrain_steps: 2000,
            total_steps: 10000,
            lr_g: 1e-4,
            lr_d: 1e-4,
            augment: AugmentPolicy::UseAll,
            aug_weight: 1.0,
            lambda_adv: 2.5,
            seed: 0,
            checkpoint_interval: 1000,
            fullband_resolutions: default_resolutions(),
            subband_resolutions: subband_resolutions(),
            uv_steps: 300,
            uv_lr: 1e-3,
            uv_batch_size: 8,
        }
    }
}

const KEYS: &[&str] = &[
    "data_dir",
    "out_dir",
    "cache_dir",
    "model",
    "sample_rate",
    "segment_frames",
    "batch_size",
    "pretrain_steps",
    "total_steps",
    "lr_g",
    "lr_d",
    "augment",
    "aug_weight",
    "lambda_adv",
    "seed",
    "checkpoint_interval",
    "fullband_resolutions",
    "subband_resolutions",
    "uv_steps",
    "uv_lr",
    "uv_batch_size",
];

impl TrainConfig {
    /// Desk-scale preset: toy widths, batch 2, 16-frame segments.
    pub fn toy(data_dir: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            out_dir: out_dir.into(),
            model: ModelSize::Toy,
            segment_frames: 16,
            batch_size: 2,
            pretrain_steps: 200,
            total_steps: 500,
            lr_g: 1e-3,
            lr_d: 1e-4,
            checkpoint_interval: 100,
            ..Self::default()
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate != SAMPLE_RATE {
            return Err(Error::invalid(format!("sample_rate must be {SAMPLE_RATE}")));
        }
        if self.pretrain_steps > self.total_steps {
            return Err(Error::invalid("pretrain_steps exceeds total_steps"));
        }
        if self.segment_frames < 8 {
            return Err(Error::invalid("segment_frames must be at least 8"));
        }
        if self.batch_size == 0 || self.uv_batch_size == 0 {
            return Err(Error::invalid("batch sizes must be positive"));
        }
        if self.checkpoint_interval == 0 {
            return Err(Error::invalid("checkpoint_interval must be positive"));
        }
        for (name, v) in [("lr_g", self.lr_g), ("lr_d", self.lr_d), ("uv_lr", self.uv_lr)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be a positive number")));
            }
        }
        if !(self.aug_weight >= 0.0 && self.lambda_adv >= 0.0) {
            return Err(Error::invalid("aug_weight and lambda_adv must be non-negative"));
        }
        let longest = self.fullband_resolutions.iter().map(|c| c.win_length).max().unwrap_or(0);
        if self.segment_frames * FeatureConfig::default().stft.hop < longest {
            return Err(Error::invalid(format!("segments of {} frames are shorter than the {longest}-sample loss window", self.segment_frames)));
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_kv(text)?;
        let mut c = Self::default();
        for (k, v) in &kv {
            match k.as_str() {
                "data_dir" => c.data_dir = PathBuf::from(v),
                "out_dir" => c.out_dir = PathBuf::from(v),
                "cache_dir" => c.cache_dir = Some(PathBuf::from(v)),
                "model" => c.model = v.parse()?,
                "sample_rate" => c.sample_rate = num(v)?,
                "segment_frames" => c.segment_frames = num(v)?,
                "batch_size" => c.batch_size = num(v)?,
                "pretrain_steps" => c.pretrain_steps = num(v)?,
                "total_steps" => c.total_steps = num(v)?,
                "lr_g" => c.lr_g = num(v)?,
                "lr_d" => c.lr_d = num(v)?,
                "augment" => c.augment = v.parse()?,
                "aug_weight" => c.aug_weight = num(v)?,
                "lambda_adv" => c.lambda_adv = num(v)?,
                "seed" => c.seed = num(v)?,
                "checkpoint_interval" => c.checkpoint_interval = num(v)?,
                "fullband_resolutions" => c.fullband_resolutions = parse_resolutions(v)?,
                "subband_resolutions" => c.subband_resolutions = parse_resolutions(v)?,
                "uv_steps" => c.uv_steps = num(v)?,
                "uv_lr" => c.uv_lr = num(v)?,
                "uv_batch_size" => c.uv_batch_size = num(v)?,
                other => {
                    return Err(Error::invalid(format!("unknown config key '{other}' (known: {})", KEYS.join(", "))));
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let res = |v: &[StftConfig]| v.iter().map(|c| format!("{}/{}/{}", c.fft_size, c.hop, c.win_length)).collect::<Vec<_>>().join(",");
        let mut s = format!("data_dir = {}\nout_dir = {}\n", self.data_dir.display(), self.out_dir.display());
        if let Some(c) = &self.cache_dir {
            s += &format!("cache_dir = {}\n", c.display());
        }
        s += &format!(
            "model = {}\nsample_rate = {}\nsegment_frames = {}\nbatch_size = {}\npretrain_steps = {}\ntotal_steps = {}\nlr_g = {}\nlr_d = {}\naugment = {}\naug_weight = {}\nlambda_adv = {}\nseed = {}\ncheckpoint_interval = {}\nfullband_resolutions = {}\nsubband_resolutions = {}\nuv_steps = {}\nuv_lr = {}\nuv_batch_size = {}\n",
            match self.model {
                ModelSize::Full => "full",
                ModelSize::Toy => "toy",
            },
            self.sample_rate,
            self.segment_frames,
            self.batch_size,
            self.pretrain_steps,
            self.total_steps,
            self.lr_g,
            self.lr_d,
            self.augment,
            self.aug_weight,
            self.lambda_adv,
            self.seed,
            self.checkpoint_interval,
            res(&self.fullband_resolutions),
            res(&self.subband_resolutions),
            self.uv_steps,
            self.uv_lr,
            self.uv_batch_size
        );
        s
    }
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("line {}: expected key = value", i + 1)))?;
        let k = k.trim().to_string();
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::invalid(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(out)
}

fn num<T: FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::invalid(format!("cannot parse '{s}'")))
}

fn list(s: &str) -> Result<Vec<usize>> {
    s.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(num)
        .collect()
}

/// `fft/hop/win` triples separated by commas, e.g. `512/128/512,1024/256/1024`.
fn parse_resolutions(s: &str) -> Result<Vec<StftConfig>> {
    let out: Vec<StftConfig> = s
        .split(',')
        .map(|t| {
            let p: Vec<&str> = t.trim().split('/').collect();
            if p.len() != 3 {
                return Err(Error::invalid(format!("resolution '{t}' must be fft/hop/win")));
            }
            StftConfig::new(num(p[0])?, num(p[1])?, num(p[2])?)
        })
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::invalid("at least one resolution is required"));
    }
    Ok(out)
}
