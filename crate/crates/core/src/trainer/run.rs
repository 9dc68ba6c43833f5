use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::{ModelConfig, TrainConfig};
use super::data::{sample_batch, DatasetIndex};
use super::loss::{LossReport, CSV_HEADER};
use super::step::{step_rng, train_step, Phase, StepObjective, TrainState};
use super::uv_train::{train_uv_predictor, UvTrainConfig};
use crate::error::{Error, Result};
use crate::io::Checkpoint;

pub const LOSS_CSV: &str = "loss.csv";

pub fn checkpoint_path(out_dir: &Path, step: u64) -> PathBuf {
    out_dir.join(format!("ckpt_{step:08}.rmck"))
}

/// Checkpoint with the highest step in `out_dir`, if any.
pub fn latest_checkpoint(out_dir: &Path) -> Result<Option<PathBuf>> {
    if !out_dir.exists() {
        return Ok(None);
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for e in fs::read_dir(out_dir)? {
        let p = e?.path();
        let step = p
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("ckpt_")?.strip_suffix(".rmck")?.parse::<u64>().ok());
        if let Some(s) = step {
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, p));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

/// Reads a loss history written by [`train`].
pub fn read_loss_csv(path: &Path) -> Result<Vec<LossReport>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::invalid(format!("{} does not start with the loss header", path.display())));
    }
    lines.filter(|l| !l.trim().is_empty()).map(LossReport::parse_csv_row).collect()
}

/// Rewrites the history keeping only rows up to `step`, so a resumed run
/// continues the numbering without duplicates.
fn truncate_history(path: &Path, step: u64) -> Result<()> {
    let kept: Vec<LossReport> = if path.exists() { read_loss_csv(path)?.into_iter().filter(|r| r.step <= step).collect() } else { Vec::new() };
    let mut text = format!("{CSV_HEADER}\n");
    for r in kept {
        text += &r.csv_row();
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Runs (or resumes) a training run: feature indexing, UV predictor
/// training, STFT-loss pretraining, then adversarial training. Returns the
/// final checkpoint path.
pub fn train(cfg: &TrainConfig) -> Result<PathBuf> {
    train_with(cfg, |_| {})
}

/// [`train`] with a callback receiving every step's full report, including
/// fields the CSV does not carry.
pub fn train_with(cfg: &TrainConfig, mut on_step: impl FnMut(&LossReport)) -> Result<PathBuf> {
    cfg.validate()?;
    let model_cfg = ModelConfig::new(cfg.model);
    model_cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let index = DatasetIndex::build(&cfg.data_dir, &cfg.cache_dir(), &model_cfg.feature)?;
    let data = index.load_all()?;
    log::info!("indexed {} files ({:.1} s)", index.entries.len(), index.total_secs());

    let mut state = match latest_checkpoint(&cfg.out_dir)? {
        Some(p) => {
            let ck = Checkpoint::load(&p)?;
            if ck.config != model_cfg.canonical() {
                return Err(Error::invalid(format!("{} was written with a different model configuration", p.display())));
            }
            log::info!("resuming from {}", p.display());
            TrainState::from_checkpoint(&ck, cfg.lr_g, cfg.lr_d)?
        }
        None => {
            let mut s = TrainState::new(model_cfg.clone(), cfg.lr_g, cfg.lr_d, cfg.seed)?;
            let uv_cfg = UvTrainConfig {
                steps: cfg.uv_steps,
                batch_size: cfg.uv_batch_size,
                segment_frames: cfg.segment_frames,
                lr: cfg.uv_lr,
                seed: cfg.seed ^ 0x5555,
                ..UvTrainConfig::default()
            };
            if cfg.uv_steps > 0 {
                let (uv, rep) = train_uv_predictor(&data, &model_cfg.uv, &uv_cfg)?;
                log::info!("uv predictor: held-out accuracy {:.3} over {} frames", rep.heldout_accuracy, rep.heldout_frames);
                s.uv = uv;
            }
            s
        }
    };

    let csv_path = cfg.out_dir.join(LOSS_CSV);
    truncate_history(&csv_path, state.step)?;
    let mut csv = fs::OpenOptions::new().append(true).open(&csv_path)?;
    let obj = StepObjective::from_config(cfg)?;
    let mut last_path = checkpoint_path(&cfg.out_dir, state.step);
    if state.step == 0 || state.step >= cfg.total_steps {
        state.to_checkpoint().save(&last_path)?;
    }
    while state.step < cfg.total_steps {
        let step = state.step + 1;
        let mut rng = step_rng(cfg.seed, step);
        let batch = sample_batch(&data, cfg.segment_frames, cfg.batch_size, &mut rng)?;
        let phase = if step <= cfg.pretrain_steps { Phase::Pretrain } else { Phase::Adversarial };
        let rep = train_step(&mut state, &batch, &obj, phase, step, &mut rng)?;
        writeln!(csv, "{}", rep.csv_row())?;
        on_step(&rep);
        csv.flush()?;
        if step % 25 == 0 || step == 1 {
            log::info!("step {step} {phase:?}: {}", rep.csv_row());
        }
        if step % cfg.checkpoint_interval == 0 || step == cfg.total_steps {
            last_path = checkpoint_path(&cfg.out_dir, step);
            state.to_checkpoint().save(&last_path)?;
        }
    }
    Ok(last_path)
}
