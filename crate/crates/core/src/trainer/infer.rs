use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::data::TRAIN_PEAK;
use super::step::load_module;
use crate::dsp::{default_resolutions, FeatureConfig, MelSpectrogram, MultiResStftLoss, Waveform};
use crate::error::{Error, Result};
use crate::io::{load_tensor, read_wav_resampled, write_wav, Checkpoint};
use crate::model::{Generator, UvPredictor};
use crate::pitch::{estimate_f0, f0_rmse, F0Config};

/// A trained generator and voicing predictor, ready for mel-only inference.
#[derive(Debug, Clone)]
pub struct Vocoder {
    pub config: ModelConfig,
    pub gen: Generator<f32>,
    pub uv: UvPredictor<f32>,
}

impl Vocoder {
    /// Loads the inference half of a training checkpoint. The checkpoint must
    /// have been trained on `feature`.
    pub fn from_checkpoint(ck: &Checkpoint, feature: &FeatureConfig) -> Result<Self> {
        let config = ModelConfig::from_canonical(&ck.config)?;
        if config.feature != *feature {
            return Err(Error::invalid("checkpoint was trained with a different feature configuration"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut gen = Generator::new(config.generator.clone(), &mut rng)?;
        let mut uv = UvPredictor::new(config.uv.clone(), &mut rng)?;
        load_module(ck, "gen", &mut gen)?;
        load_module(ck, "uv", &mut uv)?;
        Ok(Self { config, gen, uv })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?, &FeatureConfig::default())
    }

    /// Mel → waveform with predicted voicing; `256 · frames` samples.
    pub fn synthesize(&self, mel: &MelSpectrogram) -> Result<Waveform> {
        let uv = self.uv.predict_mask(mel)?;
        // infer mode draws nothing, the generator only needs a source
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let samples = self.gen.infer(mel, &uv, &mut rng)?;
        Waveform::new(samples, self.config.feature.sample_rate)
    }

    /// Copy synthesis from a WAV (analyzed after peak normalization, as in
    /// training) or an RMTN mel tensor of shape `[n_mels, frames]`.
    pub fn copysyn(&self, input: &Path) -> Result<Waveform> {
        let feature = &self.config.feature;
        let is_tensor = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("rmtn"));
        let mel = if is_tensor {
            let t = load_tensor(input)?;
            if t.dims().len() != 2 || t.dims()[0] != feature.n_mels {
                return Err(Error::invalid(format!("mel tensor must be [{}, frames], got {:?}", feature.n_mels, t.dims())));
            }
            MelSpectrogram::new(t.data().iter().map(|&v| v as f64).collect(), t.dims()[0], t.dims()[1], feature.stft)?
        } else {
            let wave = read_wav_resampled(input)?.peak_normalized(TRAIN_PEAK);
            feature.log_mel(&wave)?
        };
        self.synthesize(&mel)
    }
}

/// Loads `ckpt`, resynthesizes `input` and writes the result to `output`.
pub fn copysyn(ckpt: &Path, input: &Path, output: &Path) -> Result<Waveform> {
    let wave = Vocoder::load(ckpt)?.copysyn(input)?;
    write_wav(output, &wave)?;
    Ok(wave)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairMetrics {
    pub name: String,
    pub f0_rmse_hz: f64,
    pub common_voiced: usize,
    pub stft_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub pairs: Vec<PairMetrics>,
    /// Files present in only one of the two directories.
    pub unpaired: Vec<String>,
    pub mean_f0_rmse_hz: f64,
    pub mean_stft_loss: f64,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,f0_rmse_hz,common_voiced,stft_loss\n");
        for p in &self.pairs {
            s += &format!("{},{},{},{}\n", p.name, p.f0_rmse_hz, p.common_voiced, p.stft_loss);
        }
        s
    }
}

fn wav_names(dir: &Path) -> Result<BTreeSet<String>> {
    Ok(fs::read_dir(dir)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect())
}

fn score_pair(reference: &Path, test: &Path, loss: &MultiResStftLoss) -> Result<(f64, usize, f64)> {
    let r = read_wav_resampled(reference)?;
    let t = read_wav_resampled(test)?;
    let n = r.len().min(t.len());
    let r = Waveform::new(r.samples[..n].to_vec(), r.sample_rate)?;
    let t = Waveform::new(t.samples[..n].to_vec(), t.sample_rate)?;
    let cfg = F0Config::default();
    let m = f0_rmse(&estimate_f0(&r, &cfg)?, &estimate_f0(&t, &cfg)?)?;
    let l = loss.loss(&r.samples, &t.samples)?;
    Ok((m.rmse_hz, m.common_voiced, l.total))
}

/// Pairs same-named WAVs of the two directories and scores each pair on
/// F0 RMSE and multi-resolution STFT loss. Unpaired or unreadable files are
/// listed and skipped.
pub fn evaluate(ref_dir: &Path, test_dir: &Path) -> Result<EvalReport> {
    let refs = wav_names(ref_dir)?;
    let tests = wav_names(test_dir)?;
    let mut unpaired: Vec<String> = refs.symmetric_difference(&tests).cloned().collect();
    let loss = MultiResStftLoss::new(&default_resolutions())?;
    let mut pairs = Vec::new();
    for name in refs.intersection(&tests) {
        let (rp, tp): (PathBuf, PathBuf) = (ref_dir.join(name), test_dir.join(name));
        match score_pair(&rp, &tp, &loss) {
            Ok((f0, common_voiced, stft_loss)) => pairs.push(PairMetrics { name: name.clone(), f0_rmse_hz: f0, common_voiced, stft_loss }),
            Err(e) => {
                log::warn!("skipping {name}: {e}");
                unpaired.push(name.clone());
            }
        }
    }
    for name in &unpaired {
        log::warn!("unpaired: {name}");
    }
    let mean = |f: fn(&PairMetrics) -> f64| if pairs.is_empty() { f64::NAN } else { pairs.iter().map(f).sum::<f64>() / pairs.len() as f64 };
    Ok(EvalReport { mean_f0_rmse_hz: mean(|p| p.f0_rmse_hz), mean_stft_loss: mean(|p| p.stft_loss), pairs, unpaired })
}
