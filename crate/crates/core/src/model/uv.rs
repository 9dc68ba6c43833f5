use rand::Rng;

use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};
use crate::nn::{join, Conv1d, Conv1dCache, LeakyRelu, LeakyReluCache, Module, Param, Scalar, Tensor};
use crate::pitch::UvMask;

#[derive(Debug, Clone, PartialEq)]
pub struct UvPredictorConfig {
    pub n_mels: usize,
    pub hidden: Vec<usize>,
    pub kernel: usize,
    pub leaky_slope: f64,
}

impl Default for UvPredictorConfig {
    fn default() -> Self {
        Self { n_mels: 80, hidden: vec![256; 4], kernel: 5, leaky_slope: 0.2 }
    }
}

impl UvPredictorConfig {
    /// Reduced widths for desk-scale runs.
    pub fn toy() -> Self {
        Self { hidden: vec![32; 4], ..Self::default() }
    }

    pub fn canonical(&self) -> String {
        format!(
            "uv.n_mels={}\nuv.hidden={:?}\nuv.kernel={}\nuv.leaky_slope={}\n",
            self.n_mels, self.hidden, self.kernel, self.leaky_slope
        )
    }
}

/// Per-frame voicing classifier: Conv1d stack with leaky ReLU, a 1×1 logit
/// head and a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct UvPredictor<S> {
    pub config: UvPredictorConfig,
    pub layers: Vec<Conv1d<S>>,
    pub head: Conv1d<S>,
    act: LeakyRelu,
}

#[derive(Debug, Clone)]
pub struct UvPredictorCache<S> {
    convs: Vec<Conv1dCache<S>>,
    acts: Vec<LeakyReluCache<S>>,
    head: Conv1dCache<S>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy on logits and its gradient w.r.t. each logit.
pub fn bce_with_logits(logits: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != labels.len() || logits.is_empty() {
        return Err(Error::invalid(format!("{} logits vs {} labels", logits.len(), labels.len())));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let grad = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            // max(z,0) - z y + ln(1 + e^{-|z|})
            loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
            (sigmoid(z) - y) / n
        })
        .collect();
    Ok((loss / n, grad))
}

impl<S: Scalar> UvPredictor<S> {
    pub fn new<R: Rng + ?Sized>(config: UvPredictorConfig, rng: &mut R) -> Result<Self> {
        if config.hidden.is_empty() || config.kernel % 2 == 0 {
            return Err(Error::invalid("uv predictor needs at least one layer and an odd kernel"));
        }
        let mut layers = Vec::with_capacity(config.hidden.len());
        let mut width = config.n_mels;
        for &h in &config.hidden {
            layers.push(Conv1d::same(width, h, config.kernel, 1, rng)?);
            width = h;
        }
        let head = Conv1d::same(width, 1, 1, 1, rng)?;
        Ok(Self { act: LeakyRelu::new(config.leaky_slope), config, layers, head })
    }

    fn input(&self, mel: &MelSpectrogram) -> Result<Tensor<S>> {
        if mel.n_mels != self.config.n_mels {
            return Err(Error::invalid(format!("uv predictor expects {} mel bands, got {}", self.config.n_mels, mel.n_mels)));
        }
        if mel.frames == 0 {
            return Err(Error::invalid("empty mel spectrogram"));
        }
        Tensor::from_vec(&[mel.n_mels, mel.frames], mel.data.iter().map(|&v| S::from_f64_lossy(v)).collect())
    }

    /// Per-frame logits, `[1, frames]`.
    pub fn forward(&self, mel: &MelSpectrogram) -> Result<(Tensor<S>, UvPredictorCache<S>)> {
        let mut h = self.input(mel)?;
        let (mut convs, mut acts) = (Vec::new(), Vec::new());
        for conv in &self.layers {
            let (y, c) = conv.forward(&h)?;
            let (y, a) = self.act.forward(&y);
            convs.push(c);
            acts.push(a);
            h = y;
        }
        let (logits, head) = self.head.forward(&h)?;
        Ok((logits, UvPredictorCache { convs, acts, head }))
    }

    pub fn backward(&mut self, cache: &UvPredictorCache<S>, grad_logits: &Tensor<S>) -> Result<()> {
        let mut g = self.head.backward(&cache.head, grad_logits)?;
        for i in (0..self.layers.len()).rev() {
            g = self.act.backward(&cache.acts[i], &g)?;
            g = self.layers[i].backward(&cache.convs[i], &g)?;
        }
        Ok(())
    }

    /// Voicing probability per frame.
    pub fn probabilities(&self, mel: &MelSpectrogram) -> Result<Vec<f64>> {
        let mut h = self.input(mel)?;
        for conv in &self.layers {
            h = self.act.apply(&conv.apply(&h)?);
        }
        Ok(self.head.apply(&h)?.data().iter().map(|v| sigmoid(v.to_f64_lossy())).collect())
    }

    /// Voiced where the probability exceeds 0.5.
    pub fn predict_mask(&self, mel: &MelSpectrogram) -> Result<UvMask> {
        let flags = self.probabilities(mel)?.into_iter().map(|p| p > 0.5).collect();
        Ok(UvMask { flags, hop: mel.config.hop })
    }
}

impl<S: Scalar> Module<S> for UvPredictor<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<S>)) {
        for (i, c) in self.layers.iter().enumerate() {
            c.visit(&join(prefix, &format!("layer{i}")), f);
        }
        self.head.visit(&join(prefix, "head"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        for (i, c) in self.layers.iter_mut().enumerate() {
            c.visit_mut(&join(prefix, &format!("layer{i}")), f);
        }
        self.head.visit_mut(&join(prefix, "head"), f);
    }
}
