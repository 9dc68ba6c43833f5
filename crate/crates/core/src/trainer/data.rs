use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::{FeatureConfig, MelSpectrogram, Waveform};
use crate::error::{Error, Result};
use crate::io::{load_tensor, read_wav_resampled, save_tensor, write_wav};
use crate::nn::Tensor;
use crate::pitch::{estimate_f0, uv_mask, F0Config, UvMask};

/// Peak level every training utterance is normalized to.
pub const TRAIN_PEAK: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub audio_path: PathBuf,
    pub duration_secs: f64,
    pub mel_path: PathBuf,
    pub f0_path: PathBuf,
    pub uv_path: PathBuf,
}

/// WAV files of a directory (sorted by path) with their cached features.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetIndex {
    pub entries: Vec<DatasetEntry>,
    pub feature: FeatureConfig,
}

/// A normalized utterance with frame-aligned features.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub name: String,
    pub wave: Waveform,
    pub mel: MelSpectrogram,
    pub f0: Vec<f64>,
    pub uv: UvMask,
}

impl Utterance {
    /// Loads audio at the model rate, peak-normalizes it and computes the
    /// log-mel, F0 and oracle voicing. Mel values are rounded to `f32`, the
    /// precision they are cached and trained at.
    pub fn from_wave(name: impl Into<String>, wave: &Waveform, feature: &FeatureConfig) -> Result<Self> {
        let wave = wave.peak_normalized(TRAIN_PEAK);
        let mut mel = feature.log_mel(&wave)?;
        mel.data.iter_mut().for_each(|v| *v = *v as f32 as f64);
        let f0cfg = F0Config { hop: feature.stft.hop, ..F0Config::default() };
        let f0 = estimate_f0(&wave, &f0cfg)?;
        let uv = uv_mask(&f0);
        if uv.len() != mel.frames {
            return Err(Error::Contract(format!("{} F0 frames vs {} mel frames", uv.len(), mel.frames)));
        }
        Ok(Self { name: name.into(), wave, mel, f0: f0.values, uv })
    }
}

fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::invalid(format!("cannot read data directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    out.sort();
    Ok(out)
}

fn row_tensor(v: &[f64]) -> Tensor<f32> {
    Tensor::from_vec(&[1, v.len()], v.iter().map(|&x| x as f32).collect()).expect("1 x n")
}

impl DatasetIndex {
    /// Indexes every WAV in `data_dir`, computing and caching features that
    /// are missing or stale. Unreadable files are skipped with a warning.
    pub fn build(data_dir: &Path, cache_dir: &Path, feature: &FeatureConfig) -> Result<Self> {
        fs::create_dir_all(cache_dir)?;
        let wavs = list_wavs(data_dir)?;
        let digest: String = crate::io::config_digest(&feature.canonical())[..4].iter().map(|b| format!("{b:02x}")).collect();
        let mut entries = Vec::new();
        for path in &wavs {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let cached = |kind: &str| cache_dir.join(format!("{stem}.{digest}.{kind}.rmtn"));
            let entry = DatasetEntry {
                audio_path: path.clone(),
                duration_secs: 0.0,
                mel_path: cached("mel"),
                f0_path: cached("f0"),
                uv_path: cached("uv"),
            };
            match Self::prepare(entry, feature) {
                Ok(e) => entries.push(e),
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        if entries.is_empty() {
            return Err(Error::invalid(format!("no readable WAV files in {}", data_dir.display())));
        }
        Ok(Self { entries, feature: feature.clone() })
    }

    fn prepare(mut entry: DatasetEntry, feature: &FeatureConfig) -> Result<DatasetEntry> {
        let wave = read_wav_resampled(&entry.audio_path)?;
        if wave.len() < feature.stft.win_length {
            return Err(Error::invalid("shorter than one analysis window"));
        }
        entry.duration_secs = wave.duration_secs();
        let frames = feature.stft.frame_count(wave.len());
        let fresh = [&entry.mel_path, &entry.f0_path, &entry.uv_path].iter().all(|p| p.exists())
            && load_tensor(&entry.mel_path).map(|t| t.dims() == [feature.n_mels, frames]).unwrap_or(false);
        if !fresh {
            let name = entry.audio_path.display().to_string();
            let u = Utterance::from_wave(name, &wave, feature)?;
            let mel = Tensor::from_vec(&[u.mel.n_mels, u.mel.frames], u.mel.data.iter().map(|&v| v as f32).collect())?;
            save_tensor(&entry.mel_path, &mel)?;
            save_tensor(&entry.f0_path, &row_tensor(&u.f0))?;
            let uv: Vec<f64> = u.uv.flags.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            save_tensor(&entry.uv_path, &row_tensor(&uv))?;
        }
        Ok(entry)
    }

    /// Loads audio and cached features of one entry.
    pub fn load(&self, i: usize) -> Result<Utterance> {
        let e = self.entries.get(i).ok_or_else(|| Error::invalid(format!("no dataset entry {i}")))?;
        let wave = read_wav_resampled(&e.audio_path)?.peak_normalized(TRAIN_PEAK);
        let mel_t = load_tensor(&e.mel_path)?;
        let f0_t = load_tensor(&e.f0_path)?;
        let uv_t = load_tensor(&e.uv_path)?;
        let frames = self.feature.stft.frame_count(wave.len());
        if mel_t.dims() != [self.feature.n_mels, frames] || f0_t.len() != frames || uv_t.len() != frames {
            return Err(Error::Contract(format!("cached features of {} do not match its audio", e.audio_path.display())));
        }
        let mel = MelSpectrogram::new(mel_t.data().iter().map(|&v| v as f64).collect(), self.feature.n_mels, frames, self.feature.stft)?;
        Ok(Utterance {
            name: e.audio_path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            wave,
            mel,
            f0: f0_t.data().iter().map(|&v| v as f64).collect(),
            uv: UvMask { flags: uv_t.data().iter().map(|&v| v > 0.5).collect(), hop: self.feature.stft.hop },
        })
    }

    pub fn load_all(&self) -> Result<Vec<Utterance>> {
        (0..self.entries.len()).map(|i| self.load(i)).collect()
    }

    pub fn total_secs(&self) -> f64 {
        self.entries.iter().map(|e| e.duration_secs).sum()
    }
}

/// A training crop: `frames` mel frames and the `hop · frames` samples they describe.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub wave: Vec<f64>,
    pub mel: MelSpectrogram,
    pub uv: UvMask,
}

/// Crops `frames` frames starting at `start`.
pub fn crop(u: &Utterance, start: usize, frames: usize) -> Result<Segment> {
    let hop = u.mel.config.hop;
    let end = (start + frames) * hop;
    if start + frames > u.mel.frames || end > u.wave.len() {
        return Err(Error::invalid(format!("crop {start}+{frames} exceeds utterance '{}'", u.name)));
    }
    Ok(Segment {
        wave: u.wave.samples[start * hop..end].to_vec(),
        mel: u.mel.slice_frames(start, frames)?,
        uv: UvMask { flags: u.uv.flags[start..start + frames].to_vec(), hop },
    })
}

/// Draws `batch` random crops (uniform utterance, uniform start).
pub fn sample_batch<R: Rng + ?Sized>(data: &[Utterance], frames: usize, batch: usize, rng: &mut R) -> Result<Vec<Segment>> {
    let usable: Vec<&Utterance> = data.iter().filter(|u| u.wave.len() >= (frames + 1) * u.mel.config.hop).collect();
    if usable.is_empty() {
        return Err(Error::invalid(format!("no utterance is long enough for {frames}-frame segments")));
    }
    (0..batch)
        .map(|_| {
            let u = usable[rng.gen_range(0..usable.len())];
            let max_start = u.wave.len() / u.mel.config.hop - frames;
            crop(u, rng.gen_range(0..=max_start), frames)
        })
        .collect()
}

/// Alternating harmonic tones and noise bursts with known voicing.
pub fn synth_utterance<R: Rng + ?Sized>(seconds: f64, sample_rate: u32, rng: &mut R) -> Waveform {
    let sr = sample_rate as f64;
    let n = (seconds * sr) as usize;
    let mut x = Vec::with_capacity(n);
    let mut voiced = rng.gen_bool(0.5);
    while x.len() < n {
        let len = ((rng.gen_range(0.25..0.6) * sr) as usize).min(n - x.len());
        let fade = (0.01 * sr) as usize;
        let gain = rng.gen_range(0.3..0.8);
        let env = |i: usize| {
            let a = (i as f64 / fade as f64).min(1.0);
            let b = ((len - i) as f64 / fade as f64).min(1.0);
            a.min(b)
        };
        if voiced {
            let f_start: f64 = rng.gen_range(100.0..300.0);
            let f_end = f_start * rng.gen_range(0.85..1.15);
            let n_harm = (6000.0 / f_start.max(f_end)) as usize;
            let tilt = rng.gen_range(0.6..1.2);
            let mut phase = 0.0;
            for i in 0..len {
                let f0 = f_start + (f_end - f_start) * i as f64 / len as f64;
                phase += 2.0 * PI * f0 / sr;
                let s: f64 = (1..=n_harm).map(|k| (k as f64 * phase).sin() / (k as f64).powf(tilt)).sum();
                x.push(0.4 * gain * env(i) * s);
            }
        } else {
            for i in 0..len {
                x.push(0.5 * gain * env(i) * rng.gen_range(-1.0..1.0));
            }
        }
        voiced = !voiced;
    }
    Waveform { samples: x, sample_rate }.peak_normalized(TRAIN_PEAK)
}

/// Writes `files` synthetic utterances of `seconds` each into `dir` as
/// `synth_000.wav`, ... and returns their paths.
pub fn synth_corpus(dir: &Path, files: usize, seconds: f64, seed: u64) -> Result<Vec<PathBuf>> {
    if files == 0 || seconds <= 0.0 {
        return Err(Error::invalid("corpus needs at least one file of positive length"));
    }
    fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..files)
        .map(|i| {
            let path = dir.join(format!("synth_{i:03}.wav"));
            write_wav(&path, &synth_utterance(seconds, crate::dsp::SAMPLE_RATE, &mut rng))?;
            Ok(path)
        })
        .collect()
}
