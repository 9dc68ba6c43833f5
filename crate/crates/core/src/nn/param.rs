use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::{Scalar, Tensor};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Process-unique identifier tying a forward cache to the layer that made it.
pub(crate) fn next_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// A trainable tensor with its accumulated gradient.
///
/// Every mutable access to the value bumps `version`, which forward caches
/// record so that a backward pass against modified weights is refused.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<S> {
    value: Tensor<S>,
    pub grad: Tensor<S>,
    version: u64,
}

impl<S: Scalar> Param<S> {
    pub fn new(value: Tensor<S>) -> Self {
        let grad = value.zeros_like();
        Self { value, grad, version: 0 }
    }

    pub fn value(&self) -> &Tensor<S> {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Tensor<S> {
        self.version += 1;
        &mut self.value
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|g| *g = S::zero());
    }

    pub(crate) fn uniform<R: Rng + ?Sized>(dims: &[usize], bound: f64, rng: &mut R) -> Self {
        let len = dims.iter().product();
        let data = (0..len).map(|_| S::from_f64_lossy(rng.gen_range(-bound..=bound))).collect();
        Self::new(Tensor::from_vec(dims, data).expect("length matches dims"))
    }
}

/// Anything that owns named parameters.
///
/// `visit` must enumerate parameters in a fixed order; optimizer state and
/// checkpoints rely on it.
pub trait Module<S: Scalar> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<S>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<S>));

    fn zero_grad(&mut self) {
        self.visit_mut("", &mut |_, p| p.zero_grad());
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, p| n += p.value().len());
        n
    }

    /// Fresh copy of every named parameter value, in visit order.
    fn named_values(&self) -> Vec<(String, Tensor<S>)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, p| out.push((name.to_string(), p.value().clone())));
        out
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
