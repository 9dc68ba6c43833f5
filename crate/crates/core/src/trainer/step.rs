use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, TrainConfig};
use super::data::Segment;
use super::loss::{discriminator_loss, generator_adv_loss_grad, LossReport};
use crate::augment::{apply, sample_params, AugmentPolicy};
use crate::dsp::{MultiResStftLoss, Waveform};
use crate::error::{Error, Result};
use crate::io::Checkpoint;
use crate::model::{Discriminator, Generator, UvPredictor};
use crate::nn::{Adam, AdamConfig, Mode, Module, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Generator only, STFT losses only.
    Pretrain,
    /// Discriminator update on real, generated and augmented audio, then a
    /// generator update on the adversarial and STFT losses.
    Adversarial,
}

/// Loss functions and weights shared by every step.
#[derive(Debug, Clone)]
pub struct StepObjective {
    pub fullband: MultiResStftLoss,
    pub subband: MultiResStftLoss,
    pub lambda_adv: f64,
    pub aug_weight: f64,
    pub policy: AugmentPolicy,
}

impl StepObjective {
    pub fn from_config(cfg: &TrainConfig) -> Result<Self> {
        Ok(Self {
            fullband: MultiResStftLoss::new(&cfg.fullband_resolutions)?,
            subband: MultiResStftLoss::new(&cfg.subband_resolutions)?,
            lambda_adv: cfg.lambda_adv,
            aug_weight: cfg.aug_weight,
            policy: cfg.augment,
        })
    }
}

/// Models, optimizers and the number of completed steps.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub config: ModelConfig,
    pub gen: Generator<f32>,
    pub disc: Discriminator<f32>,
    pub uv: UvPredictor<f32>,
    pub opt_g: Adam<f32>,
    pub opt_d: Adam<f32>,
    pub step: u64,
}

/// Generator for step `step` of a run seeded with `seed`; independent of
/// everything that happened in earlier steps.
pub fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}

/// Stream reserved for parameter initialization.
const INIT_STREAM: u64 = u64::MAX;

impl TrainState {
    pub fn new(config: ModelConfig, lr_g: f64, lr_d: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = step_rng(seed, INIT_STREAM);
        Ok(Self {
            gen: Generator::new(config.generator.clone(), &mut rng)?,
            disc: Discriminator::new(config.discriminator.clone(), &mut rng)?,
            uv: UvPredictor::new(config.uv.clone(), &mut rng)?,
            opt_g: Adam::new(AdamConfig { lr: lr_g, ..AdamConfig::default() }),
            opt_d: Adam::new(AdamConfig { lr: lr_d, ..AdamConfig::default() }),
            config,
            step: 0,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(self.config.canonical());
        ck.meta.insert("step".into(), self.step.to_string());
        ck.meta.insert("opt_g.step".into(), self.opt_g.step.to_string());
        ck.meta.insert("opt_d.step".into(), self.opt_d.step.to_string());
        push_module(&mut ck, "gen", &self.gen);
        push_module(&mut ck, "disc", &self.disc);
        push_module(&mut ck, "uv", &self.uv);
        push_moments(&mut ck, "opt_g", &self.gen, &self.opt_g);
        push_moments(&mut ck, "opt_d", &self.disc, &self.opt_d);
        ck
    }

    /// Rebuilds the state saved by [`Self::to_checkpoint`]; learning rates
    /// come from the caller's configuration.
    pub fn from_checkpoint(ck: &Checkpoint, lr_g: f64, lr_d: f64) -> Result<Self> {
        let config = ModelConfig::from_canonical(&ck.config)?;
        let mut s = Self::new(config, lr_g, lr_d, 0)?;
        let meta = |k: &str| -> Result<u64> {
            ck.meta
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::invalid(format!("checkpoint metadata '{k}' missing or malformed")))
        };
        s.step = meta("step")?;
        load_module(ck, "gen", &mut s.gen)?;
        load_module(ck, "disc", &mut s.disc)?;
        load_module(ck, "uv", &mut s.uv)?;
        s.opt_g.step = meta("opt_g.step")?;
        s.opt_d.step = meta("opt_d.step")?;
        load_moments(ck, "opt_g", &s.gen, &mut s.opt_g)?;
        load_moments(ck, "opt_d", &s.disc, &mut s.opt_d)?;
        Ok(s)
    }
}

fn push_module<M: Module<f32>>(ck: &mut Checkpoint, prefix: &str, m: &M) {
    for (name, t) in m.named_values() {
        ck.push(format!("{prefix}.{name}"), t);
    }
}

pub(crate) fn load_module<M: Module<f32>>(ck: &Checkpoint, prefix: &str, m: &mut M) -> Result<()> {
    let mut err = None;
    m.visit_mut("", &mut |name, p| {
        if err.is_some() {
            return;
        }
        let key = format!("{prefix}.{name}");
        match ck.require(&key) {
            Ok(t) if t.dims() == p.value().dims() => p.value_mut().data_mut().copy_from_slice(t.data()),
            Ok(t) => err = Some(Error::invalid(format!("checkpoint tensor '{key}' has dims {:?}, model expects {:?}", t.dims(), p.value().dims()))),
            Err(e) => err = Some(e),
        }
    });
    err.map_or(Ok(()), Err)
}

fn param_names<M: Module<f32>>(m: &M) -> Vec<String> {
    let mut names = Vec::new();
    m.visit("", &mut |n, _| names.push(n.to_string()));
    names
}

fn push_moments<M: Module<f32>>(ck: &mut Checkpoint, prefix: &str, m: &M, opt: &Adam<f32>) {
    for (i, name) in param_names(m).iter().enumerate().take(opt.m.len()) {
        ck.push(format!("{prefix}.m.{name}"), opt.m[i].clone());
        ck.push(format!("{prefix}.v.{name}"), opt.v[i].clone());
    }
}

fn load_moments<M: Module<f32>>(ck: &Checkpoint, prefix: &str, m: &M, opt: &mut Adam<f32>) -> Result<()> {
    let names = param_names(m);
    if ck.get(&format!("{prefix}.m.{}", names[0])).is_none() {
        // optimizer never stepped
        opt.m.clear();
        opt.v.clear();
        return Ok(());
    }
    opt.m = names.iter().map(|n| ck.require(&format!("{prefix}.m.{n}")).cloned()).collect::<Result<_>>()?;
    opt.v = names.iter().map(|n| ck.require(&format!("{prefix}.v.{n}")).cloned()).collect::<Result<_>>()?;
    Ok(())
}

fn scaled<S: Scalar>(maps: Vec<Tensor<S>>, k: f64) -> Vec<Tensor<S>> {
    maps.into_iter()
        .map(|mut t| {
            t.scale(S::from_f64_lossy(k));
            t
        })
        .collect()
}

/// One optimization step on `batch`. Losses in the report are batch means.
pub fn train_step<R: Rng>(
    state: &mut TrainState,
    batch: &[Segment],
    obj: &StepObjective,
    phase: Phase,
    step: u64,
    rng: &mut R,
) -> Result<LossReport> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let b = batch.len() as f64;
    let mut rep = LossReport { step, ..LossReport::default() };

    let mut generated = Vec::with_capacity(batch.len());
    for seg in batch {
        generated.push(state.gen.forward(&seg.mel, &seg.uv, Mode::Train, rng)?);
    }

    if phase == Phase::Adversarial {
        state.disc.zero_grad();
        for (seg, (out, _)) in batch.iter().zip(&generated) {
            let real = Waveform { samples: seg.wave.clone(), sample_rate: crate::dsp::SAMPLE_RATE };
            let fakes: Vec<Vec<f64>> = sample_params(obj.policy, rng)
                .iter()
                .map(|p| apply(&real, p).map(|w| w.samples))
                .collect::<Result<_>>()?;
            rep.augmented_per_sample = fakes.len();

            let (s_real, c_real) = state.disc.forward(&seg.wave)?;
            let (s_gen, c_gen) = state.disc.forward(&out.waveform)?;
            let mut s_aug = Vec::with_capacity(fakes.len());
            let mut c_aug = Vec::with_capacity(fakes.len());
            for f in &fakes {
                let (s, c) = state.disc.forward(f)?;
                s_aug.push(s);
                c_aug.push(c);
            }
            let dl = discriminator_loss(&s_real, &s_gen, &s_aug, obj.aug_weight)?;
            rep.d_real += dl.d_real / b;
            rep.d_fake_gen += dl.d_fake_gen / b;
            rep.d_fake_aug += dl.d_fake_aug / b;
            state.disc.backward(&c_real, &scaled(dl.grad_real, 1.0 / b))?;
            state.disc.backward(&c_gen, &scaled(dl.grad_gen, 1.0 / b))?;
            for (c, g) in c_aug.iter().zip(dl.grad_aug) {
                state.disc.backward(c, &scaled(g, 1.0 / b))?;
            }
        }
        rep.d_total = rep.d_real + rep.d_fake_gen + rep.d_fake_aug;
        if !rep.d_total.is_finite() {
            return Err(Error::TrainingDiverged { step, detail: format!("discriminator loss {}", rep.d_total) });
        }
        state.opt_d.step(&mut state.disc)?;
    }

    state.gen.zero_grad();
    let n_bands = state.gen.config.n_subbands as f64;
    for (seg, (out, cache)) in batch.iter().zip(&generated) {
        let (full, g_full) = obj.fullband.loss_and_grad(&seg.wave, &out.waveform)?;
        let real_bands = state.gen.pqmf().analysis_aligned(&seg.wave);
        let mut sub = 0.0;
        let mut g_sub = Vec::with_capacity(real_bands.len());
        for (rb, gb) in real_bands.iter().zip(&out.subbands) {
            let (l, g) = obj.subband.loss_and_grad(rb, gb)?;
            sub += l.total / n_bands;
            g_sub.push(g.into_iter().map(|v| 0.5 * v / (n_bands * b)).collect::<Vec<f64>>());
        }
        let mut g_wave: Vec<f64> = g_full.iter().map(|v| 0.5 * v / b).collect();
        rep.stft_fullband += full.total / b;
        rep.stft_subband += sub / b;
        if phase == Phase::Adversarial {
            let (scores, dc) = state.disc.forward(&out.waveform)?;
            let (adv, gs) = generator_adv_loss_grad(&scores);
            rep.g_adv += adv / b;
            let gx = state.disc.backward(&dc, &gs)?;
            g_wave.iter_mut().zip(gx).for_each(|(g, v)| *g += obj.lambda_adv * v / b);
        }
        state.gen.backward(cache, Some(&g_wave), Some(&g_sub))?;
    }
    if phase == Phase::Adversarial {
        // the generator pass left gradients in the discriminator
        state.disc.zero_grad();
    }
    rep.g_total = obj.lambda_adv * rep.g_adv + 0.5 * (rep.stft_fullband + rep.stft_subband);
    if !rep.is_finite() {
        return Err(Error::TrainingDiverged { step, detail: format!("non-finite loss: {}", rep.csv_row()) });
    }
    state.opt_g.step(&mut state.gen)?;
    state.step = step;
    Ok(rep)
}

/// Full-band STFT loss of the generator (infer mode) on fixed segments.
pub fn eval_fullband(gen: &Generator<f32>, segments: &[Segment], loss: &MultiResStftLoss) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut total = 0.0;
    for seg in segments {
        let y = gen.infer(&seg.mel, &seg.uv, &mut rng)?;
        total += loss.loss(&seg.wave, &y)?.total;
    }
    Ok(total / segments.len().max(1) as f64)
}
