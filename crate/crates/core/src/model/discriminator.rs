use rand::Rng;

use crate::dsp::{default_resolutions, MagnitudeCache, Stft, StftConfig};
use crate::error::{Error, Result};
use crate::nn::{join, Conv2d, Conv2dCache, LeakyRelu, LeakyReluCache, Module, Param, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorConfig {
    pub resolutions: Vec<StftConfig>,
    /// Output channels of each Conv2d; the last must be 1.
    pub channels: Vec<usize>,
    pub kernel: (usize, usize),
    pub leaky_slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self { resolutions: default_resolutions(), channels: vec![16, 32, 64, 64, 1], kernel: (3, 3), leaky_slope: 0.2 }
    }
}

impl DiscriminatorConfig {
    /// Reduced widths for desk-scale runs.
    pub fn toy() -> Self {
        Self { channels: vec![8, 16, 16, 16, 1], ..Self::default() }
    }

    pub fn canonical(&self) -> String {
        let res: Vec<String> =
            self.resolutions.iter().map(|c| format!("{}/{}/{}", c.fft_size, c.hop, c.win_length)).collect();
        format!(
            "disc.resolutions={}\ndisc.channels={:?}\ndisc.kernel={}x{}\ndisc.leaky_slope={}\n",
            res.join(","),
            self.channels,
            self.kernel.0,
            self.kernel.1,
            self.leaky_slope
        )
    }

    fn validate(&self) -> Result<()> {
        if self.resolutions.is_empty() {
            return Err(Error::invalid("discriminator needs at least one resolution"));
        }
        if self.channels.len() < 2 || self.channels.last() != Some(&1) {
            return Err(Error::invalid("discriminator channel ladder needs >= 2 layers ending in 1"));
        }
        if self.kernel.0 % 2 == 0 || self.kernel.1 % 2 == 0 {
            return Err(Error::invalid("discriminator kernel must be odd"));
        }
        Ok(())
    }
}

/// One resolution: linear magnitude `[1, frames, bins]` through a Conv2d
/// ladder that halves the frequency axis in its middle layers.
#[derive(Debug, Clone)]
pub struct SubDiscriminator<S> {
    stft: Stft,
    pub convs: Vec<Conv2d<S>>,
    act: LeakyRelu,
}

#[derive(Debug, Clone)]
struct SubCache<S> {
    mag: MagnitudeCache,
    convs: Vec<Conv2dCache<S>>,
    acts: Vec<LeakyReluCache<S>>,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorCache<S> {
    subs: Vec<SubCache<S>>,
}

impl<S: Scalar> SubDiscriminator<S> {
    fn new<R: Rng + ?Sized>(cfg: &DiscriminatorConfig, res: StftConfig, rng: &mut R) -> Result<Self> {
        let n = cfg.channels.len();
        let pad = (cfg.kernel.0 / 2, cfg.kernel.1 / 2);
        let mut convs = Vec::with_capacity(n);
        let mut in_ch = 1;
        for (i, &out) in cfg.channels.iter().enumerate() {
            let stride = if i == 0 || i == n - 1 { (1, 1) } else { (1, 2) };
            convs.push(Conv2d::new(in_ch, out, cfg.kernel, stride, pad, rng)?);
            in_ch = out;
        }
        Ok(Self { stft: Stft::new(res)?, convs, act: LeakyRelu::new(cfg.leaky_slope) })
    }

    fn magnitude_tensor(&self, x: &[f64]) -> Result<(Tensor<S>, MagnitudeCache)> {
        let (mag, cache) = self.stft.magnitude(x)?;
        let bins = self.stft.config().n_bins();
        let frames = mag.len() / bins;
        let t = Tensor::from_vec(&[1, frames, bins], mag.into_iter().map(S::from_f64_lossy).collect())?;
        Ok((t, cache))
    }

    fn apply(&self, x: &[f64]) -> Result<Tensor<S>> {
        let (mut h, _) = self.magnitude_tensor(x)?;
        let last = self.convs.len() - 1;
        for (i, c) in self.convs.iter().enumerate() {
            h = c.apply(&h)?;
            if i < last {
                h = self.act.apply(&h);
            }
        }
        Ok(h)
    }

    fn forward(&self, x: &[f64]) -> Result<(Tensor<S>, SubCache<S>)> {
        let (mut h, mag) = self.magnitude_tensor(x)?;
        let last = self.convs.len() - 1;
        let (mut convs, mut acts) = (Vec::new(), Vec::new());
        for (i, c) in self.convs.iter().enumerate() {
            let (y, cc) = c.forward(&h)?;
            convs.push(cc);
            h = y;
            if i < last {
                let (y, a) = self.act.forward(&h);
                acts.push(a);
                h = y;
            }
        }
        Ok((h, SubCache { mag, convs, acts }))
    }

    fn backward(&mut self, cache: &SubCache<S>, grad: &Tensor<S>) -> Result<Vec<f64>> {
        let last = self.convs.len() - 1;
        let mut g = grad.clone();
        for i in (0..self.convs.len()).rev() {
            if i < last {
                g = self.act.backward(&cache.acts[i], &g)?;
            }
            g = self.convs[i].backward(&cache.convs[i], &g)?;
        }
        let gm: Vec<f64> = g.data().iter().map(|v| v.to_f64_lossy()).collect();
        self.stft.magnitude_backward(&cache.mag, &gm)
    }
}

/// Multi-resolution spectrogram discriminator.
#[derive(Debug, Clone)]
pub struct Discriminator<S> {
    pub config: DiscriminatorConfig,
    pub subs: Vec<SubDiscriminator<S>>,
}

impl<S: Scalar> Discriminator<S> {
    pub fn new<R: Rng + ?Sized>(config: DiscriminatorConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let subs = config.resolutions.iter().map(|&r| SubDiscriminator::new(&config, r, rng)).collect::<Result<_>>()?;
        Ok(Self { config, subs })
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        let longest = self.config.resolutions.iter().map(|c| c.win_length).max().unwrap_or(0);
        if x.len() < longest {
            return Err(Error::invalid(format!("discriminator input of {} samples is shorter than the {longest}-sample window", x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("discriminator input contains non-finite samples"));
        }
        Ok(())
    }

    /// One score map `[1, frames, bins']` per resolution.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<Tensor<S>>> {
        self.check_len(x)?;
        self.subs.iter().map(|s| s.apply(x)).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<Tensor<S>>, DiscriminatorCache<S>)> {
        self.check_len(x)?;
        let mut maps = Vec::with_capacity(self.subs.len());
        let mut subs = Vec::with_capacity(self.subs.len());
        for s in &self.subs {
            let (m, c) = s.forward(x)?;
            maps.push(m);
            subs.push(c);
        }
        Ok((maps, DiscriminatorCache { subs }))
    }

    /// Accumulates parameter gradients and returns the gradient with respect
    /// to the input waveform.
    pub fn backward(&mut self, cache: &DiscriminatorCache<S>, grads: &[Tensor<S>]) -> Result<Vec<f64>> {
        if grads.len() != self.subs.len() || cache.subs.len() != self.subs.len() {
            return Err(Error::shape(format!("{} score gradients for {} resolutions", grads.len(), self.subs.len())));
        }
        let mut out: Option<Vec<f64>> = None;
        for ((s, c), g) in self.subs.iter_mut().zip(&cache.subs).zip(grads) {
            let gx = s.backward(c, g)?;
            match out.as_mut() {
                None => out = Some(gx),
                Some(acc) => acc.iter_mut().zip(gx).for_each(|(a, v)| *a += v),
            }
        }
        Ok(out.unwrap_or_default())
    }
}

impl<S: Scalar> Module<S> for Discriminator<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<S>)) {
        for (r, s) in self.subs.iter().enumerate() {
            for (i, c) in s.convs.iter().enumerate() {
                c.visit(&join(prefix, &format!("res{r}.conv{i}")), f);
            }
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        for (r, s) in self.subs.iter_mut().enumerate() {
            for (i, c) in s.convs.iter_mut().enumerate() {
                c.visit_mut(&join(prefix, &format!("res{r}.conv{i}")), f);
            }
        }
    }
}
