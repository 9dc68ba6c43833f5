use rand::{Rng, RngCore};

use super::param::next_id;
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Train mode enables dropout; infer mode makes it the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

fn check_cache<S: Scalar>(layer: u64, cache: u64, cached: &Tensor<S>, grad: &Tensor<S>, what: &str) -> Result<()> {
    if layer != cache {
        return Err(Error::Contract(format!("{what}: cache was produced by a different layer")));
    }
    if cached.dims() != grad.dims() {
        return Err(Error::shape(format!("{what}: grad {:?} vs activation {:?}", grad.dims(), cached.dims())));
    }
    Ok(())
}

/// `x` for `x > 0`, `slope * x` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakyRelu {
    pub slope: f64,
    id: u64,
}

#[derive(Debug, Clone)]
pub struct LeakyReluCache<S> {
    input: Tensor<S>,
    id: u64,
}

impl Default for LeakyRelu {
    fn default() -> Self {
        Self::new(0.2)
    }
}

impl LeakyRelu {
    pub fn new(slope: f64) -> Self {
        Self { slope, id: next_id() }
    }

    pub fn apply<S: Scalar>(&self, x: &Tensor<S>) -> Tensor<S> {
        let a = S::from_f64_lossy(self.slope);
        x.map(|v| if v > S::zero() { v } else { a * v })
    }

    pub fn forward<S: Scalar>(&self, x: &Tensor<S>) -> (Tensor<S>, LeakyReluCache<S>) {
        (self.apply(x), LeakyReluCache { input: x.clone(), id: self.id })
    }

    pub fn backward<S: Scalar>(&self, cache: &LeakyReluCache<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        check_cache(self.id, cache.id, &cache.input, grad_out, "leaky relu")?;
        let a = S::from_f64_lossy(self.slope);
        let mut g = grad_out.clone();
        for (gv, &x) in g.data_mut().iter_mut().zip(cache.input.data()) {
            if x <= S::zero() {
                *gv = *gv * a;
            }
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tanh {
    id: u64,
}

#[derive(Debug, Clone)]
pub struct TanhCache<S> {
    output: Tensor<S>,
    id: u64,
}

impl Default for Tanh {
    fn default() -> Self {
        Self { id: next_id() }
    }
}

impl Tanh {
    pub fn forward<S: Scalar>(&self, x: &Tensor<S>) -> (Tensor<S>, TanhCache<S>) {
        let y = x.map(S::tanh);
        (y.clone(), TanhCache { output: y, id: self.id })
    }

    pub fn backward<S: Scalar>(&self, cache: &TanhCache<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        check_cache(self.id, cache.id, &cache.output, grad_out, "tanh")?;
        let mut g = grad_out.clone();
        for (gv, &y) in g.data_mut().iter_mut().zip(cache.output.data()) {
            *gv = *gv * (S::one() - y * y);
        }
        Ok(g)
    }
}

/// Inverted dropout: kept activations are scaled by `1 / (1 - rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    id: u64,
}

#[derive(Debug, Clone)]
pub struct DropoutCache<S> {
    /// Per-element multiplier (0 or `1 / (1 - rate)`); `None` in infer mode.
    mask: Option<Tensor<S>>,
    dims: Vec<usize>,
    id: u64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { rate, id: next_id() })
    }

    pub fn forward<S: Scalar>(&self, x: &Tensor<S>, mode: Mode, rng: &mut dyn RngCore) -> (Tensor<S>, DropoutCache<S>) {
        if mode == Mode::Infer {
            return (x.clone(), DropoutCache { mask: None, dims: x.dims().to_vec(), id: self.id });
        }
        let keep = S::from_f64_lossy(1.0 / (1.0 - self.rate));
        let mask = Tensor::from_vec(
            x.dims(),
            (0..x.len()).map(|_| if rng.gen::<f64>() < self.rate { S::zero() } else { keep }).collect(),
        )
        .expect("mask matches input");
        let mut y = x.clone();
        for (v, &m) in y.data_mut().iter_mut().zip(mask.data()) {
            *v = *v * m;
        }
        (y, DropoutCache { mask: Some(mask), dims: x.dims().to_vec(), id: self.id })
    }

    pub fn backward<S: Scalar>(&self, cache: &DropoutCache<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        if self.id != cache.id {
            return Err(Error::Contract("dropout: cache was produced by a different layer".into()));
        }
        if grad_out.dims() != cache.dims.as_slice() {
            return Err(Error::shape(format!("dropout grad {:?} vs {:?}", grad_out.dims(), cache.dims)));
        }
        let mut g = grad_out.clone();
        if let Some(mask) = &cache.mask {
            for (v, &m) in g.data_mut().iter_mut().zip(mask.data()) {
                *v = *v * m;
            }
        }
        Ok(g)
    }
}
