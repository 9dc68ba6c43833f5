use rand::Rng;

use super::activation::{LeakyRelu, LeakyReluCache};
use super::conv::{Conv1d, Conv1dCache};
use super::param::{join, Module, Param};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// `x + conv1x1(lrelu(conv_k3_dilated(lrelu(x))))`, channel count preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock<S> {
    pub dilated: Conv1d<S>,
    pub pointwise: Conv1d<S>,
    act: LeakyRelu,
}

#[derive(Debug, Clone)]
pub struct ResidualBlockCache<S> {
    a1: LeakyReluCache<S>,
    c1: Conv1dCache<S>,
    a2: LeakyReluCache<S>,
    c2: Conv1dCache<S>,
}

impl<S: Scalar> ResidualBlock<S> {
    pub fn new<R: Rng + ?Sized>(channels: usize, dilation: usize, slope: f64, rng: &mut R) -> Result<Self> {
        Ok(Self {
            dilated: Conv1d::same(channels, channels, 3, dilation, rng)?,
            pointwise: Conv1d::same(channels, channels, 1, 1, rng)?,
            act: LeakyRelu::new(slope),
        })
    }

    pub fn apply(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let h = self.dilated.apply(&self.act.apply(x))?;
        let mut y = self.pointwise.apply(&self.act.apply(&h))?;
        y.add_assign(x)?;
        Ok(y)
    }

    pub fn forward(&self, x: &Tensor<S>) -> Result<(Tensor<S>, ResidualBlockCache<S>)> {
        let (h, a1) = self.act.forward(x);
        let (h, c1) = self.dilated.forward(&h)?;
        let (h, a2) = self.act.forward(&h);
        let (mut y, c2) = self.pointwise.forward(&h)?;
        y.add_assign(x)?;
        Ok((y, ResidualBlockCache { a1, c1, a2, c2 }))
    }

    pub fn backward(&mut self, cache: &ResidualBlockCache<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        let g = self.pointwise.backward(&cache.c2, grad_out)?;
        let g = self.act.backward(&cache.a2, &g)?;
        let g = self.dilated.backward(&cache.c1, &g)?;
        let mut g = self.act.backward(&cache.a1, &g)?;
        g.add_assign(grad_out)?;
        Ok(g)
    }
}

impl<S: Scalar> Module<S> for ResidualBlock<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<S>)) {
        self.dilated.visit(&join(prefix, "dilated"), f);
        self.pointwise.visit(&join(prefix, "pointwise"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        self.dilated.visit_mut(&join(prefix, "dilated"), f);
        self.pointwise.visit_mut(&join(prefix, "pointwise"), f);
    }
}

/// Residual blocks with growing dilation (1, 3, 9 in the generator).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStack<S> {
    pub blocks: Vec<ResidualBlock<S>>,
    pub channels: usize,
}

#[derive(Debug, Clone)]
pub struct ResidualStackCache<S> {
    blocks: Vec<ResidualBlockCache<S>>,
}

impl<S: Scalar> ResidualStack<S> {
    pub fn new<R: Rng + ?Sized>(channels: usize, dilations: &[usize], slope: f64, rng: &mut R) -> Result<Self> {
        if dilations.is_empty() {
            return Err(Error::invalid("residual stack needs at least one dilation"));
        }
        let blocks = dilations.iter().map(|&d| ResidualBlock::new(channels, d, slope, rng)).collect::<Result<_>>()?;
        Ok(Self { blocks, channels })
    }

    pub fn apply(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let mut h = x.clone();
        for b in &self.blocks {
            h = b.apply(&h)?;
        }
        Ok(h)
    }

    pub fn forward(&self, x: &Tensor<S>) -> Result<(Tensor<S>, ResidualStackCache<S>)> {
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(&h)?;
            caches.push(c);
            h = y;
        }
        Ok((h, ResidualStackCache { blocks: caches }))
    }

    pub fn backward(&mut self, cache: &ResidualStackCache<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        if cache.blocks.len() != self.blocks.len() {
            return Err(Error::Contract("residual stack: cache block count differs".into()));
        }
        let mut g = grad_out.clone();
        for (b, c) in self.blocks.iter_mut().zip(&cache.blocks).rev() {
            g = b.backward(c, &g)?;
        }
        Ok(g)
    }
}

impl<S: Scalar> Module<S> for ResidualStack<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<S>)) {
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&join(prefix, &format!("block{i}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("block{i}")), f);
        }
    }
}
