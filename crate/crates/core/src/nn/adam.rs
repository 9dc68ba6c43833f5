use super::param::Module;
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam. Moments follow the module's parameter visit order and
/// are created on the first step.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<S> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor<S>>,
    pub v: Vec<Tensor<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0, m: Vec::new(), v: Vec::new() }
    }

    /// One update of every parameter of `module` from its accumulated gradients.
    pub fn step<M: Module<S> + ?Sized>(&mut self, module: &mut M) -> Result<()> {
        let mut dims = Vec::new();
        let mut grad_ok = true;
        module.visit("", &mut |_, p| {
            grad_ok &= p.grad.dims() == p.value().dims();
            dims.push(p.value().dims().to_vec());
        });
        if !grad_ok {
            return Err(Error::shape("gradient shape differs from its parameter"));
        }
        if self.m.is_empty() && self.step == 0 {
            self.m = dims.iter().map(|d| Tensor::zeros(d)).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != dims.len() || self.m.iter().zip(&dims).any(|(m, d)| m.dims() != d.as_slice()) {
            return Err(Error::shape("optimizer moments do not match the module's parameters"));
        }

        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let step_size = S::from_f64_lossy(c.lr / (1.0 - c.beta1.powi(t)));
        let inv_sqrt_bc2 = S::from_f64_lossy(1.0 / (1.0 - c.beta2.powi(t)).sqrt());
        let (b1, b2) = (S::from_f64_lossy(c.beta1), S::from_f64_lossy(c.beta2));
        let (one_b1, one_b2) = (S::from_f64_lossy(1.0 - c.beta1), S::from_f64_lossy(1.0 - c.beta2));
        let eps = S::from_f64_lossy(c.eps);
        let (ms, vs) = (&mut self.m, &mut self.v);
        let mut idx = 0;
        module.visit_mut("", &mut |_, p| {
            let (m, v) = (ms[idx].data_mut(), vs[idx].data_mut());
            idx += 1;
            let grad = p.grad.data().to_vec();
            for ((mv, vv), &g) in m.iter_mut().zip(v.iter_mut()).zip(&grad) {
                *mv = b1 * *mv + one_b1 * g;
                *vv = b2 * *vv + one_b2 * g * g;
            }
            for ((x, &mv), &vv) in p.value_mut().data_mut().iter_mut().zip(m.iter()).zip(v.iter()) {
                *x = *x - step_size * mv / (vv.sqrt() * inv_sqrt_bc2 + eps);
            }
        });
        Ok(())
    }
}
