use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use super::split::split_raw;
use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};
use crate::nn::{
    Conv1d, Conv1dCache, ConvTranspose1d, ConvTranspose1dCache, Dropout, DropoutCache, LeakyRelu, LeakyReluCache, Mode,
    Module, Param, ResidualStack, ResidualStackCache, Scalar, Tanh, TanhCache, Tensor,
};
use crate::pitch::UvMask;
use crate::pqmf::PqmfBank;

/// Standard deviation of the generator's initial convolution weights.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_mels: usize,
    pub upsample_factors: Vec<usize>,
    /// Prenet width followed by the width after each upsampling stage.
    pub channels: Vec<usize>,
    pub n_subbands: usize,
    pub prenet_layers: usize,
    pub prenet_kernel: usize,
    pub dropout_rate: f64,
    /// 1-based prenet layer of the aperiodic path followed by dropout.
    pub dropout_layer: usize,
    /// Keep dropout active in infer mode.
    pub dropout_at_inference: bool,
    pub low_band_dims: usize,
    pub high_band_dims: usize,
    pub residual_dilations: Vec<usize>,
    pub output_kernel: usize,
    pub leaky_slope: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_mels: 80,
            upsample_factors: vec![2, 2, 4, 4],
            channels: vec![384, 192, 128, 64, 32],
            n_subbands: 4,
            prenet_layers: 3,
            prenet_kernel: 3,
            dropout_rate: 0.5,
            dropout_layer: 2,
            dropout_at_inference: false,
            low_band_dims: 50,
            high_band_dims: 30,
            residual_dilations: vec![1, 3, 9],
            output_kernel: 7,
            leaky_slope: 0.2,
        }
    }
}

impl GeneratorConfig {
    /// Narrow variant used for gradient checks.
    pub fn tiny() -> Self {
        Self { channels: vec![16, 8, 8, 8, 8], ..Self::default() }
    }

    /// Reduced widths for desk-scale training runs.
    pub fn toy() -> Self {
        Self { channels: vec![64, 48, 32, 24, 16], ..Self::default() }
    }

    /// Output samples per mel frame.
    pub fn hop(&self) -> usize {
        self.upsample_factors.iter().product::<usize>() * self.n_subbands
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() != self.upsample_factors.len() + 1 {
            return Err(Error::invalid("need one channel width per upsampling stage plus the prenet width"));
        }
        if self.low_band_dims + self.high_band_dims != self.n_mels {
            return Err(Error::invalid(format!(
                "low ({}) + high ({}) bands must equal n_mels ({})",
                self.low_band_dims, self.high_band_dims, self.n_mels
            )));
        }
        if self.prenet_layers == 0 || !(1..=self.prenet_layers).contains(&self.dropout_layer) {
            return Err(Error::invalid("dropout layer must index an existing prenet layer"));
        }
        if self.prenet_kernel % 2 == 0 || self.output_kernel % 2 == 0 {
            return Err(Error::invalid("prenet and output kernels must be odd"));
        }
        if self.channels.contains(&0) || self.upsample_factors.contains(&0) || self.n_subbands == 0 {
            return Err(Error::invalid("channel widths, upsample factors and band count must be positive"));
        }
        Ok(())
    }

    pub fn canonical(&self) -> String {
        format!(
            "gen.n_mels={}\ngen.upsample_factors={:?}\ngen.channels={:?}\ngen.n_subbands={}\ngen.prenet_layers={}\ngen.prenet_kernel={}\ngen.dropout_rate={}\ngen.dropout_layer={}\ngen.dropout_at_inference={}\ngen.low_band_dims={}\ngen.high_band_dims={}\ngen.residual_dilations={:?}\ngen.output_kernel={}\ngen.leaky_slope={}\n",
            self.n_mels,
            self.upsample_factors,
            self.channels,
            self.n_subbands,
            self.prenet_layers,
            self.prenet_kernel,
            self.dropout_rate,
            self.dropout_layer,
            self.dropout_at_inference,
            self.low_band_dims,
            self.high_band_dims,
            self.residual_dilations,
            self.output_kernel,
            self.leaky_slope
        )
    }
}

/// Stack of same-length Conv1d layers with leaky ReLU between them (none
/// after the last), optionally followed at one layer by dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct Prenet<S> {
    pub convs: Vec<Conv1d<S>>,
    act: LeakyRelu,
    dropout: Option<(usize, Dropout)>,
}

#[derive(Debug, Clone)]
pub struct PrenetCache<S> {
    convs: Vec<Conv1dCache<S>>,
    acts: Vec<LeakyReluCache<S>>,
    dropout: Option<DropoutCache<S>>,
    /// Output of every layer (after activation and dropout).
    pub activations: Vec<Tensor<S>>,
}

impl<S: Scalar> Prenet<S> {
    fn new<R: Rng + ?Sized>(cfg: &GeneratorConfig, with_dropout: bool, rng: &mut R) -> Result<Self> {
        let width = cfg.channels[0];
        let convs = (0..cfg.prenet_layers)
            .map(|i| Conv1d::same(if i == 0 { cfg.n_mels } else { width }, width, cfg.prenet_kernel, 1, rng))
            .collect::<Result<_>>()?;
        let dropout = if with_dropout { Some((cfg.dropout_layer - 1, Dropout::new(cfg.dropout_rate)?)) } else { None };
        Ok(Self { convs, act: LeakyRelu::new(cfg.leaky_slope), dropout })
    }

    fn forward(&self, x: &Tensor<S>, mode: Mode, rng: &mut dyn RngCore) -> Result<(Tensor<S>, PrenetCache<S>)> {
        let last = self.convs.len() - 1;
        let mut cache = PrenetCache { convs: Vec::new(), acts: Vec::new(), dropout: None, activations: Vec::new() };
        let mut h = x.clone();
        for (i, conv) in self.convs.iter().enumerate() {
            let (y, c) = conv.forward(&h)?;
            cache.convs.push(c);
            h = y;
            if i < last {
                let (y, a) = self.act.forward(&h);
                cache.acts.push(a);
                h = y;
            }
            if let Some((at, d)) = &self.dropout {
                if *at == i {
                    let (y, dc) = d.forward(&h, mode, rng);
                    cache.dropout = Some(dc);
                    h = y;
                }
            }
            cache.activations.push(h.clone());
        }
        Ok((h, cache))
    }

    fn backward(&mut self, cache: &PrenetCache<S>, grad: &Tensor<S>) -> Result<Tensor<S>> {
        let last = self.convs.len() - 1;
        let mut g = grad.clone();
        for i in (0..self.convs.len()).rev() {
            if let (Some((at, d)), Some(dc)) = (&self.dropout, &cache.dropout) {
                if *at == i {
                    g = d.backward(dc, &g)?;
                }
            }
            if i < last {
                g = self.act.backward(&cache.acts[i], &g)?;
            }
            g = self.convs[i].backward(&cache.convs[i], &g)?;
        }
        Ok(g)
    }
}

impl<S: Scalar> Module<S> for Prenet<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<S>)) {
        for (i, c) in self.convs.iter().enumerate() {
            c.visit(&crate::nn::join(prefix, &i.to_string()), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        for (i, c) in self.convs.iter_mut().enumerate() {
            c.visit_mut(&crate::nn::join(prefix, &i.to_string()), f);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpsampleStage<S> {
    pub upsample: ConvTranspose1d<S>,
    pub residual: ResidualStack<S>,
}

#[derive(Debug, Clone)]
struct StageCache<S> {
    act: LeakyReluCache<S>,
    up: ConvTranspose1dCache<S>,
    res: ResidualStackCache<S>,
}

/// Over-smooth handler, dual prenets, upsampling trunk and sub-band output
/// merged by PQMF synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator<S> {
    pub config: GeneratorConfig,
    pub prenet_periodic: Prenet<S>,
    pub prenet_aperiodic: Prenet<S>,
    pub stages: Vec<UpsampleStage<S>>,
    pub output: Conv1d<S>,
    act: LeakyRelu,
    tanh: Tanh,
    pqmf: PqmfBank,
}

/// Everything the backward pass needs, plus the intermediate signals callers
/// inspect (prenet activations, sub-band outputs).
#[derive(Debug, Clone)]
pub struct GeneratorCache<S> {
    frames: usize,
    uv: Vec<bool>,
    pub periodic: PrenetCache<S>,
    pub aperiodic: PrenetCache<S>,
    stages: Vec<StageCache<S>>,
    out_act: LeakyReluCache<S>,
    out_conv: Conv1dCache<S>,
    out_tanh: TanhCache<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOutput {
    /// Full-band waveform, `hop · frames` samples.
    pub waveform: Vec<f64>,
    /// Pre-synthesis sub-band signals, each `hop / n_subbands · frames` samples.
    pub subbands: Vec<Vec<f64>>,
}

impl<S: Scalar> Generator<S> {
    pub fn new<R: Rng + ?Sized>(config: GeneratorConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let prenet_periodic = Prenet::new(&config, false, rng)?;
        let prenet_aperiodic = Prenet::new(&config, true, rng)?;
        let stages = config
            .upsample_factors
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                Ok(UpsampleStage {
                    upsample: ConvTranspose1d::new(config.channels[i], config.channels[i + 1], s, rng)?,
                    residual: ResidualStack::new(config.channels[i + 1], &config.residual_dilations, config.leaky_slope, rng)?,
                })
            })
            .collect::<Result<_>>()?;
        let last = *config.channels.last().expect("validated non-empty");
        let output = Conv1d::same(last, config.n_subbands, config.output_kernel, 1, rng)?;
        let pqmf = if config.n_subbands == 4 {
            PqmfBank::default()
        } else {
            crate::pqmf::design_bank(config.n_subbands, 62, 0.142, 9.0)?
        };
        let mut gen = Self {
            act: LeakyRelu::new(config.leaky_slope),
            tanh: Tanh::default(),
            config,
            prenet_periodic,
            prenet_aperiodic,
            stages,
            output,
            pqmf,
        };
        // multi-band MelGAN recipe: small normal weights, zero biases
        let normal = Normal::new(0.0, INIT_STD).expect("positive std");
        gen.visit_mut("", &mut |name, p| {
            let bias = name.ends_with("bias");
            for v in p.value_mut().data_mut() {
                *v = S::from_f64_lossy(if bias { 0.0 } else { normal.sample(rng) });
            }
        });
        Ok(gen)
    }

    pub fn pqmf(&self) -> &PqmfBank {
        &self.pqmf
    }

    /// Converts a log-mel into the `[n_mels, frames]` tensor the generator reads.
    pub fn mel_tensor(mel: &MelSpectrogram) -> Tensor<S> {
        Tensor::from_vec(&[mel.n_mels, mel.frames], mel.data.iter().map(|&v| S::from_f64_lossy(v)).collect())
            .expect("mel data is n_mels x frames")
    }

    pub fn forward(&self, mel: &MelSpectrogram, uv: &UvMask, mode: Mode, rng: &mut dyn RngCore) -> Result<(GeneratorOutput, GeneratorCache<S>)> {
        self.forward_tensor(&Self::mel_tensor(mel), uv, mode, rng)
    }

    /// Waveform only, for inference.
    pub fn infer(&self, mel: &MelSpectrogram, uv: &UvMask, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Ok(self.forward(mel, uv, Mode::Infer, rng)?.0.waveform)
    }

    pub fn forward_tensor(&self, mel: &Tensor<S>, uv: &UvMask, mode: Mode, rng: &mut dyn RngCore) -> Result<(GeneratorOutput, GeneratorCache<S>)> {
        let cfg = &self.config;
        if mel.rank() != 2 || mel.dims()[0] != cfg.n_mels || mel.dims()[1] == 0 {
            return Err(Error::shape(format!("generator expects [{}, T>0] mel, got {:?}", cfg.n_mels, mel.dims())));
        }
        let frames = mel.dims()[1];
        let data: Vec<f64> = mel.data().iter().map(|v| v.to_f64_lossy()).collect();
        let streams = split_raw(&data, cfg.n_mels, frames, uv, cfg.low_band_dims)?;
        let to_tensor = |v: &[f64]| {
            Tensor::from_vec(&[cfg.n_mels, frames], v.iter().map(|&x| S::from_f64_lossy(x)).collect())
                .expect("stream matches mel")
        };
        let drop_mode = if cfg.dropout_at_inference { Mode::Train } else { mode };
        let (hp, periodic) = self.prenet_periodic.forward(&to_tensor(&streams.periodic), mode, rng)?;
        let (mut h, aperiodic) = self.prenet_aperiodic.forward(&to_tensor(&streams.aperiodic), drop_mode, rng)?;
        h.add_assign(&hp)?;

        let mut stages = Vec::with_capacity(self.stages.len());
        for st in &self.stages {
            let (a, act) = self.act.forward(&h);
            let (u, up) = st.upsample.forward(&a)?;
            let (r, res) = st.residual.forward(&u)?;
            stages.push(StageCache { act, up, res });
            h = r;
        }
        let (a, out_act) = self.act.forward(&h);
        let (o, out_conv) = self.output.forward(&a)?;
        let (sb, out_tanh) = self.tanh.forward(&o);

        let band_len = sb.dims()[1];
        let subbands: Vec<Vec<f64>> =
            (0..cfg.n_subbands).map(|b| sb.row(b).iter().map(|v| v.to_f64_lossy()).collect()).collect();
        let waveform = self.pqmf.synthesis_aligned(&subbands)?;
        debug_assert_eq!(waveform.len(), band_len * cfg.n_subbands);
        let cache = GeneratorCache { frames, uv: uv.flags.clone(), periodic, aperiodic, stages, out_act, out_conv, out_tanh };
        Ok((GeneratorOutput { waveform, subbands }, cache))
    }

    /// Backpropagates gradients on the waveform and (optionally) on the
    /// sub-band outputs. Returns the gradient with respect to the mel input.
    pub fn backward(&mut self, cache: &GeneratorCache<S>, grad_waveform: Option<&[f64]>, grad_subbands: Option<&[Vec<f64>]>) -> Result<Tensor<S>> {
        let cfg = &self.config;
        let band_len = cache.frames * cfg.upsample_factors.iter().product::<usize>();
        let mut g_sub = vec![vec![0.0; band_len]; cfg.n_subbands];
        if let Some(gw) = grad_waveform {
            if gw.len() != band_len * cfg.n_subbands {
                return Err(Error::shape(format!("waveform gradient has {} samples, expected {}", gw.len(), band_len * cfg.n_subbands)));
            }
            g_sub = self.pqmf.synthesis_aligned_backward(gw)?;
        }
        if let Some(gs) = grad_subbands {
            if gs.len() != cfg.n_subbands || gs.iter().any(|b| b.len() != band_len) {
                return Err(Error::shape("sub-band gradient does not match the generator output"));
            }
            for (acc, g) in g_sub.iter_mut().zip(gs) {
                acc.iter_mut().zip(g).for_each(|(a, v)| *a += v);
            }
        }
        let g = Tensor::from_vec(&[cfg.n_subbands, band_len], g_sub.iter().flatten().map(|&v| S::from_f64_lossy(v)).collect())?;
        let g = self.tanh.backward(&cache.out_tanh, &g)?;
        let g = self.output.backward(&cache.out_conv, &g)?;
        let mut g = self.act.backward(&cache.out_act, &g)?;
        for (st, sc) in self.stages.iter_mut().zip(&cache.stages).rev() {
            g = st.residual.backward(&sc.res, &g)?;
            g = st.upsample.backward(&sc.up, &g)?;
            g = self.act.backward(&sc.act, &g)?;
        }
        let gp = self.prenet_periodic.backward(&cache.periodic, &g)?;
        let ga = self.prenet_aperiodic.backward(&cache.aperiodic, &g)?;
        // each mel cell fed exactly one stream
        let mut out = ga;
        let frames = cache.frames;
        for b in 0..cfg.n_mels {
            for t in 0..frames {
                let i = b * frames + t;
                out.data_mut()[i] = if cache.uv[t] && b < cfg.low_band_dims { gp.data()[i] } else { out.data()[i] };
            }
        }
        Ok(out)
    }
}

impl<S: Scalar> Module<S> for Generator<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<S>)) {
        use crate::nn::join;
        self.prenet_periodic.visit(&join(prefix, "prenet_periodic"), f);
        self.prenet_aperiodic.visit(&join(prefix, "prenet_aperiodic"), f);
        for (i, st) in self.stages.iter().enumerate() {
            let p = join(prefix, &format!("stage{i}"));
            st.upsample.visit(&join(&p, "upsample"), f);
            st.residual.visit(&join(&p, "residual"), f);
        }
        self.output.visit(&join(prefix, "output"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        use crate::nn::join;
        self.prenet_periodic.visit_mut(&join(prefix, "prenet_periodic"), f);
        self.prenet_aperiodic.visit_mut(&join(prefix, "prenet_aperiodic"), f);
        for (i, st) in self.stages.iter_mut().enumerate() {
            let p = join(prefix, &format!("stage{i}"));
            st.upsample.visit_mut(&join(&p, "upsample"), f);
            st.residual.visit_mut(&join(&p, "residual"), f);
        }
        self.output.visit_mut(&join(prefix, "output"), f);
    }
}
