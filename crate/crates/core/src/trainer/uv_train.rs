use super::data::{sample_batch, Utterance};
use super::step::step_rng;
use crate::error::{Error, Result};
use crate::model::{bce_with_logits, UvPredictor, UvPredictorConfig};
use crate::nn::{Adam, AdamConfig, Module, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct UvTrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub segment_frames: usize,
    pub lr: f64,
    pub seed: u64,
    /// Share of utterances (by count, taken from the end) held out for scoring.
    pub holdout_fraction: f64,
}

impl Default for UvTrainConfig {
    fn default() -> Self {
        Self { steps: 300, batch_size: 8, segment_frames: 32, lr: 1e-3, seed: 0, holdout_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UvTrainReport {
    /// Mean BCE of the first batch before any update.
    pub initial_loss: f64,
    /// Mean BCE of the last batch.
    pub final_loss: f64,
    pub heldout_accuracy: f64,
    pub heldout_frames: usize,
}

/// Fraction of frames where the thresholded prediction matches the oracle mask.
pub fn frame_accuracy(model: &UvPredictor<f32>, data: &[Utterance]) -> Result<(f64, usize)> {
    let (mut hit, mut n) = (0usize, 0usize);
    for u in data {
        let pred = model.predict_mask(&u.mel)?;
        hit += pred.flags.iter().zip(&u.uv.flags).filter(|(a, b)| a == b).count();
        n += u.uv.len();
    }
    Ok((if n == 0 { 0.0 } else { hit as f64 / n as f64 }, n))
}

/// Trains the voicing predictor on mel inputs against oracle (pitch-tracker)
/// labels, holding out the last utterances for the accuracy report.
pub fn train_uv_predictor(data: &[Utterance], model_cfg: &UvPredictorConfig, cfg: &UvTrainConfig) -> Result<(UvPredictor<f32>, UvTrainReport)> {
    if data.is_empty() {
        return Err(Error::invalid("uv predictor training needs at least one utterance"));
    }
    let held = if data.len() >= 2 { ((data.len() as f64 * cfg.holdout_fraction).round() as usize).clamp(1, data.len() - 1) } else { 0 };
    let (train, heldout) = data.split_at(data.len() - held);
    let mut model = UvPredictor::<f32>::new(model_cfg.clone(), &mut step_rng(cfg.seed, u64::MAX))?;
    let mut opt = Adam::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let frames = cfg.segment_frames.min(train.iter().map(|u| u.mel.frames.saturating_sub(1)).max().unwrap_or(0));
    if frames == 0 {
        return Err(Error::invalid("utterances are too short for uv training"));
    }
    let (mut initial, mut last) = (f64::NAN, f64::NAN);
    for step in 1..=cfg.steps {
        let batch = sample_batch(train, frames, cfg.batch_size, &mut step_rng(cfg.seed, step))?;
        model.zero_grad();
        let mut loss = 0.0;
        for seg in &batch {
            let (logits, cache) = model.forward(&seg.mel)?;
            let z: Vec<f64> = logits.data().iter().map(|&v| v as f64).collect();
            let y: Vec<f64> = seg.uv.flags.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
            let (l, g) = bce_with_logits(&z, &y)?;
            loss += l / batch.len() as f64;
            let g = Tensor::from_vec(logits.dims(), g.iter().map(|v| (v / batch.len() as f64) as f32).collect())?;
            model.backward(&cache, &g)?;
        }
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { step, detail: format!("uv predictor loss {loss}") });
        }
        if step == 1 {
            initial = loss;
        }
        last = loss;
        opt.step(&mut model)?;
    }
    let scored = if heldout.is_empty() { train } else { heldout };
    let (acc, n) = frame_accuracy(&model, scored)?;
    Ok((model, UvTrainReport { initial_loss: initial, final_loss: last, heldout_accuracy: acc, heldout_frames: n }))
}
