//! Central-difference gradient verification in double precision.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::activation::{Dropout, LeakyRelu, Mode, Tanh};
use super::conv::{Conv1d, Conv2d, ConvTranspose1d};
use super::layer::{Layer, LayerKind};
use super::residual::ResidualStack;
use super::param::Module;
use super::Tensor;
use crate::error::Result;

/// Denominator floor so entries whose true gradient is ~0 are judged on
/// absolute error instead of exploding the ratio.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Seeds the loss projection, the dropout mask and the entry subset.
    pub seed: u64,
    pub mode: Mode,
    /// Check every entry up to this many; above it check a random subset.
    pub exhaustive_limit: usize,
    pub subset: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { eps: 1e-5, seed: 0, mode: Mode::Train, exhaustive_limit: 2000, subset: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Fixed random projection `r` so that `L = <r, y>` exercises every output.
pub fn probe(dims: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let n = dims.iter().product();
    Tensor::from_vec(dims, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("sized from dims")
}

pub fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

enum Entry {
    Input(usize),
    Param(usize, usize),
}

/// Compares analytic gradients from `eval` with central differences.
///
/// `eval(module, x, want_grad)` must return the scalar loss and, when
/// `want_grad` is set, the input gradient, accumulating parameter gradients
/// into `module`. It must be deterministic for fixed inputs and parameters.
pub fn check_module<M: Module<f64>>(
    module: &mut M,
    input: &Tensor<f64>,
    opts: &GradCheckOptions,
    mut eval: impl FnMut(&mut M, &Tensor<f64>, bool) -> Result<(f64, Option<Tensor<f64>>)>,
) -> Result<GradCheckReport> {
    module.zero_grad();
    let (_, gx) = eval(module, input, true)?;
    let gx = gx.expect("input gradient requested");
    let mut param_grads: Vec<Vec<f64>> = Vec::new();
    module.visit("", &mut |_, p| param_grads.push(p.grad.data().to_vec()));

    let mut entries: Vec<Entry> = (0..input.len()).map(Entry::Input).collect();
    for (pi, g) in param_grads.iter().enumerate() {
        entries.extend((0..g.len()).map(|i| Entry::Param(pi, i)));
    }
    let chosen: Vec<usize> = if entries.len() <= opts.exhaustive_limit {
        (0..entries.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(17));
        let mut idx = sample(&mut rng, entries.len(), opts.subset.min(entries.len())).into_vec();
        idx.sort_unstable();
        idx
    };

    let mut x = input.clone();
    let mut worst: f64 = 0.0;
    for &e in &chosen {
        let (analytic, numeric) = match entries[e] {
            Entry::Input(i) => {
                let orig = x.data()[i];
                x.data_mut()[i] = orig + opts.eps;
                let (lp, _) = eval(module, &x, false)?;
                x.data_mut()[i] = orig - opts.eps;
                let (lm, _) = eval(module, &x, false)?;
                x.data_mut()[i] = orig;
                (gx.data()[i], (lp - lm) / (2.0 * opts.eps))
            }
            Entry::Param(pi, i) => {
                let orig = param_value(module, pi, i);
                set_param(module, pi, i, orig + opts.eps);
                let (lp, _) = eval(module, &x, false)?;
                set_param(module, pi, i, orig - opts.eps);
                let (lm, _) = eval(module, &x, false)?;
                set_param(module, pi, i, orig);
                (param_grads[pi][i], (lp - lm) / (2.0 * opts.eps))
            }
        };
        worst = worst.max(rel_err(analytic, numeric));
    }
    Ok(GradCheckReport { max_rel_err: worst, checked: chosen.len() })
}

fn param_value<M: Module<f64>>(module: &M, pi: usize, i: usize) -> f64 {
    let mut k = 0;
    let mut out = 0.0;
    module.visit("", &mut |_, p| {
        if k == pi {
            out = p.value().data()[i];
        }
        k += 1;
    });
    out
}

fn set_param<M: Module<f64>>(module: &mut M, pi: usize, i: usize, v: f64) {
    let mut k = 0;
    module.visit_mut("", &mut |_, p| {
        if k == pi {
            p.value_mut().data_mut()[i] = v;
        }
        k += 1;
    });
}

/// Gradient check of a single layer under `L = <r, layer(x)>`.
pub fn grad_check_with(layer: &mut Layer<f64>, input: &Tensor<f64>, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let out_dims = {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        layer.forward(input, opts.mode, &mut rng)?.0.dims().to_vec()
    };
    let r = probe(&out_dims, opts.seed);
    check_module(layer, input, opts, |l, x, want| {
        // reseeding freezes the dropout mask across evaluations
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let (y, cache) = l.forward(x, opts.mode, &mut rng)?;
        let loss = dot(&r, &y);
        let g = if want { Some(l.backward(&cache, &r)?) } else { None };
        Ok((loss, g))
    })
}

/// Maximum relative error between backward and central differences, with
/// default options and step `eps`.
pub fn grad_check(layer: &mut Layer<f64>, input: &Tensor<f64>, eps: f64) -> Result<f64> {
    grad_check_with(layer, input, &GradCheckOptions { eps, ..GradCheckOptions::default() }).map(|r| r.max_rel_err)
}

fn uniform(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = dims.iter().product();
    Tensor::from_vec(dims, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("length matches dims")
}

/// A small randomly configured layer of `kind` with a matching input, for
/// gradient-check sweeps.
pub fn seeded_layer(kind: LayerKind, seed: u64) -> Result<(Layer<f64>, Tensor<f64>)> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (c_in, c_out, t) = (r.gen_range(1..5), r.gen_range(1..5), r.gen_range(6..14));
    Ok(match kind {
        LayerKind::Conv1d => {
            let (k, s, d, p) = (r.gen_range(1..6), r.gen_range(1..3), r.gen_range(1..3), r.gen_range(0..3));
            (Layer::Conv1d(Conv1d::new(c_in, c_out, k, s, d, p, &mut r)?), uniform(&[c_in, t], &mut r))
        }
        LayerKind::ConvTranspose1d => {
            let s = r.gen_range(1..5);
            (Layer::ConvTranspose1d(ConvTranspose1d::new(c_in, c_out, s, &mut r)?), uniform(&[c_in, t], &mut r))
        }
        LayerKind::Conv2d => {
            let l = Conv2d::new(c_in, c_out, (3, 3), (1, 2), (1, 1), &mut r)?;
            let (h, w) = (r.gen_range(5..9), r.gen_range(5..9));
            (Layer::Conv2d(l), uniform(&[c_in, h, w], &mut r))
        }
        LayerKind::LeakyRelu => (Layer::LeakyRelu(LeakyRelu::new(0.2)), uniform(&[c_in, t], &mut r)),
        LayerKind::Tanh => (Layer::Tanh(Tanh::default()), uniform(&[c_in, t], &mut r)),
        LayerKind::Dropout => (Layer::Dropout(Dropout::new(0.5)?), uniform(&[c_in, t], &mut r)),
        LayerKind::ResidualStack => {
            let l = ResidualStack::new(c_in + 1, &[1, 3, 9], 0.2, &mut r)?;
            (Layer::ResidualStack(l), uniform(&[c_in + 1, t + 8], &mut r))
        }
    })
}
