use rand::RngCore;

use super::activation::{Dropout, DropoutCache, LeakyRelu, LeakyReluCache, Mode, Tanh, TanhCache};
use super::conv::{Conv1d, Conv1dCache, Conv2d, Conv2dCache, ConvTranspose1d, ConvTranspose1dCache};
use super::param::{Module, Param};
use super::residual::{ResidualStack, ResidualStackCache};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv1d,
    ConvTranspose1d,
    Conv2d,
    LeakyRelu,
    Tanh,
    Dropout,
    ResidualStack,
}

impl LayerKind {
    pub const ALL: [LayerKind; 7] = [
        Self::Conv1d,
        Self::ConvTranspose1d,
        Self::Conv2d,
        Self::LeakyRelu,
        Self::Tanh,
        Self::Dropout,
        Self::ResidualStack,
    ];
}

/// Any single layer, for code that treats layers uniformly (gradient checks,
/// sequential stacks).
#[derive(Debug, Clone, PartialEq)]
pub enum Layer<S> {
    Conv1d(Conv1d<S>),
    ConvTranspose1d(ConvTranspose1d<S>),
    Conv2d(Conv2d<S>),
    LeakyRelu(LeakyRelu),
    Tanh(Tanh),
    Dropout(Dropout),
    ResidualStack(ResidualStack<S>),
}

#[derive(Debug, Clone)]
pub enum Cache<S> {
    Conv1d(Conv1dCache<S>),
    ConvTranspose1d(ConvTranspose1dCache<S>),
    Conv2d(Conv2dCache<S>),
    LeakyRelu(LeakyReluCache<S>),
    Tanh(TanhCache<S>),
    Dropout(DropoutCache<S>),
    ResidualStack(ResidualStackCache<S>),
}

impl<S: Scalar> Layer<S> {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv1d(_) => LayerKind::Conv1d,
            Layer::ConvTranspose1d(_) => LayerKind::ConvTranspose1d,
            Layer::Conv2d(_) => LayerKind::Conv2d,
            Layer::LeakyRelu(_) => LayerKind::LeakyRelu,
            Layer::Tanh(_) => LayerKind::Tanh,
            Layer::Dropout(_) => LayerKind::Dropout,
            Layer::ResidualStack(_) => LayerKind::ResidualStack,
        }
    }

    /// `rng` is only read by dropout in train mode.
    pub fn forward(&self, x: &Tensor<S>, mode: Mode, rng: &mut dyn RngCore) -> Result<(Tensor<S>, Cache<S>)> {
        Ok(match self {
            Layer::Conv1d(l) => l.forward(x).map(|(y, c)| (y, Cache::Conv1d(c)))?,
            Layer::ConvTranspose1d(l) => l.forward(x).map(|(y, c)| (y, Cache::ConvTranspose1d(c)))?,
            Layer::Conv2d(l) => l.forward(x).map(|(y, c)| (y, Cache::Conv2d(c)))?,
            Layer::LeakyRelu(l) => {
                let (y, c) = l.forward(x);
                (y, Cache::LeakyRelu(c))
            }
            Layer::Tanh(l) => {
                let (y, c) = l.forward(x);
                (y, Cache::Tanh(c))
            }
            Layer::Dropout(l) => {
                let (y, c) = l.forward(x, mode, rng);
                (y, Cache::Dropout(c))
            }
            Layer::ResidualStack(l) => l.forward(x).map(|(y, c)| (y, Cache::ResidualStack(c)))?,
        })
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &Cache<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        match (self, cache) {
            (Layer::Conv1d(l), Cache::Conv1d(c)) => l.backward(c, grad_out),
            (Layer::ConvTranspose1d(l), Cache::ConvTranspose1d(c)) => l.backward(c, grad_out),
            (Layer::Conv2d(l), Cache::Conv2d(c)) => l.backward(c, grad_out),
            (Layer::LeakyRelu(l), Cache::LeakyRelu(c)) => l.backward(c, grad_out),
            (Layer::Tanh(l), Cache::Tanh(c)) => l.backward(c, grad_out),
            (Layer::Dropout(l), Cache::Dropout(c)) => l.backward(c, grad_out),
            (Layer::ResidualStack(l), Cache::ResidualStack(c)) => l.backward(c, grad_out),
            (l, _) => Err(Error::Contract(format!("{:?} layer given a cache of another kind", l.kind()))),
        }
    }
}

impl<S: Scalar> Module<S> for Layer<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<S>)) {
        match self {
            Layer::Conv1d(l) => l.visit(prefix, f),
            Layer::ConvTranspose1d(l) => l.visit(prefix, f),
            Layer::Conv2d(l) => l.visit(prefix, f),
            Layer::ResidualStack(l) => l.visit(prefix, f),
            Layer::LeakyRelu(_) | Layer::Tanh(_) | Layer::Dropout(_) => {}
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        match self {
            Layer::Conv1d(l) => l.visit_mut(prefix, f),
            Layer::ConvTranspose1d(l) => l.visit_mut(prefix, f),
            Layer::Conv2d(l) => l.visit_mut(prefix, f),
            Layer::ResidualStack(l) => l.visit_mut(prefix, f),
            Layer::LeakyRelu(_) | Layer::Tanh(_) | Layer::Dropout(_) => {}
        }
    }
}
