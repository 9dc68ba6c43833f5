use rand::Rng;

use super::param::{join, next_id, Module, Param};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// `dst[q] += w * src[q - shift]` wherever both indices are in range.
#[inline]
fn axpy_shift<S: Scalar>(dst: &mut [S], src: &[S], w: S, shift: isize) {
    let (lo, hi) = overlap(dst.len(), src.len(), shift);
    if lo >= hi {
        return;
    }
    let s0 = (lo as isize - shift) as usize;
    for (d, &s) in dst[lo..hi].iter_mut().zip(&src[s0..s0 + (hi - lo)]) {
        *d = *d + w * s;
    }
}

/// `sum_q a[q] * b[q - shift]` over the valid range.
#[inline]
fn dot_shift<S: Scalar>(a: &[S], b: &[S], shift: isize) -> S {
    let (lo, hi) = overlap(a.len(), b.len(), shift);
    if lo >= hi {
        return S::zero();
    }
    let s0 = (lo as isize - shift) as usize;
    let mut acc = S::zero();
    for (&x, &y) in a[lo..hi].iter().zip(&b[s0..s0 + (hi - lo)]) {
        acc = acc + x * y;
    }
    acc
}

/// Range of `q` in `0..dst_len` with `0 <= q - shift < src_len`.
#[inline]
fn overlap(dst_len: usize, src_len: usize, shift: isize) -> (usize, usize) {
    let lo = shift.max(0) as usize;
    let hi = (src_len as isize + shift).clamp(0, dst_len as isize) as usize;
    (lo.min(dst_len), hi)
}

fn kaiming_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

fn check_versions(layer_id: u64, cache_id: u64, now: (u64, u64), then: (u64, u64), what: &str) -> Result<()> {
    if layer_id != cache_id {
        return Err(Error::Contract(format!("{what}: cache was produced by a different layer")));
    }
    if now != then {
        return Err(Error::Contract(format!("{what}: parameters changed since the forward pass (stale cache)")));
    }
    Ok(())
}

/// 1-D convolution over `[channels, time]` with zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<S> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
    /// `[out_ch, in_ch, kernel]`
    pub weight: Param<S>,
    /// `[out_ch]`
    pub bias: Param<S>,
    id: u64,
}

#[derive(Debug, Clone)]
pub struct Conv1dCache<S> {
    input: Tensor<S>,
    id: u64,
    versions: (u64, u64),
}

impl<S: Scalar> Conv1d<S> {
    pub fn new<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        dilation: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if in_ch == 0 || out_ch == 0 || kernel == 0 || stride == 0 || dilation == 0 {
            return Err(Error::invalid("conv1d sizes must be positive"));
        }
        let bound = kaiming_bound(in_ch * kernel);
        Ok(Self {
            in_ch,
            out_ch,
            kernel,
            stride,
            dilation,
            padding,
            weight: Param::uniform(&[out_ch, in_ch, kernel], bound, rng),
            bias: Param::uniform(&[out_ch], bound, rng),
            id: next_id(),
        })
    }

    /// Stride 1 with padding that keeps the length (odd kernels only).
    pub fn same<R: Rng + ?Sized>(in_ch: usize, out_ch: usize, kernel: usize, dilation: usize, rng: &mut R) -> Result<Self> {
        if kernel % 2 == 0 {
            return Err(Error::invalid("same-length conv1d needs an odd kernel"));
        }
        Self::new(in_ch, out_ch, kernel, 1, dilation, dilation * (kernel - 1) / 2, rng)
    }

    pub fn out_len(&self, t: usize) -> Option<usize> {
        let span = self.dilation * (self.kernel - 1) + 1;
        (t + 2 * self.padding).checked_sub(span).map(|n| n / self.stride + 1)
    }

    fn check_input(&self, x: &Tensor<S>) -> Result<(usize, usize)> {
        if x.rank() != 2 || x.dims()[0] != self.in_ch {
            return Err(Error::shape(format!("conv1d expects [{}, T], got {:?}", self.in_ch, x.dims())));
        }
        let t = x.dims()[1];
        let out = self.out_len(t).ok_or_else(|| Error::shape(format!("input length {t} shorter than kernel span")))?;
        Ok((t, out))
    }

    fn versions(&self) -> (u64, u64) {
        (self.weight.version(), self.bias.version())
    }

    pub fn forward(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Conv1dCache<S>)> {
        let y = self.apply(x)?;
        Ok((y, Conv1dCache { input: x.clone(), id: self.id, versions: self.versions() }))
    }

    /// Forward without keeping a cache.
    pub fn apply(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let (t_in, t_out) = self.check_input(x)?;
        let mut y = Tensor::zeros(&[self.out_ch, t_out]);
        let w = self.weight.value().data();
        let b = self.bias.value().data();
        let xd = x.data();
        let (k, s, d, p) = (self.kernel, self.stride, self.dilation as isize, self.padding as isize);
        for o in 0..self.out_ch {
            let row = y.row_mut(o);
            row.iter_mut().for_each(|v| *v = b[o]);
            for i in 0..self.in_ch {
                let xr = &xd[i * t_in..(i + 1) * t_in];
                for j in 0..k {
                    let wv = w[(o * self.in_ch + i) * k + j];
                    let off = j as isize * d - p;
                    if s == 1 {
                        axpy_shift(row, xr, wv, -off);
                    } else {
                        for (q, v) in row.iter_mut().enumerate() {
                            let n = (q * s) as isize + off;
                            if n >= 0 && (n as usize) < t_in {
                                *v = *v + wv * xr[n as usize];
                            }
                        }
                    }
                }
            }
        }
        Ok(y)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &Conv1dCache<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        check_versions(self.id, cache.id, self.versions(), cache.versions, "conv1d")?;
        let x = &cache.input;
        let (t_in, t_out) = self.check_input(x)?;
        if grad_out.dims() != [self.out_ch, t_out] {
            return Err(Error::shape(format!("conv1d grad {:?} vs output [{}, {t_out}]", grad_out.dims(), self.out_ch)));
        }
        let mut gx = Tensor::zeros(&[self.in_ch, t_in]);
        let (k, s, d, p) = (self.kernel, self.stride, self.dilation as isize, self.padding as isize);
        let w = self.weight.value().data().to_vec();
        let xd = x.data();
        let gw = self.weight.grad.data_mut();
        let gb = self.bias.grad.data_mut();
        for o in 0..self.out_ch {
            let g = grad_out.row(o);
            gb[o] = gb[o] + g.iter().copied().sum();
            for i in 0..self.in_ch {
                let xr = &xd[i * t_in..(i + 1) * t_in];
                let gxr = gx.row_mut(i);
                for j in 0..k {
                    let widx = (o * self.in_ch + i) * k + j;
                    let off = j as isize * d - p;
                    if s == 1 {
                        gw[widx] = gw[widx] + dot_shift(g, xr, -off);
                        axpy_shift(gxr, g, w[widx], off);
                    } else {
                        let mut acc = S::zero();
                        for (q, &gv) in g.iter().enumerate() {
                            let n = (q * s) as isize + off;
                            if n >= 0 && (n as usize) < t_in {
                                acc = acc + gv * xr[n as usize];
                                gxr[n as usize] = gxr[n as usize] + w[widx] * gv;
                            }
                        }
                        gw[widx] = gw[widx] + acc;
                    }
                }
            }
        }
        Ok(gx)
    }
}

impl<S: Scalar> Module<S> for Conv1d<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<S>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

/// Transposed 1-D convolution with kernel `2 * stride` and padding
/// `stride / 2 + stride % 2`, trimmed so the output is exactly `stride * T` long.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose1d<S> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub stride: usize,
    pub kernel: usize,
    pub padding: usize,
    /// `[in_ch, out_ch, kernel]`
    pub weight: Param<S>,
    /// `[out_ch]`
    pub bias: Param<S>,
    id: u64,
}

#[derive(Debug, Clone)]
pub struct ConvTranspose1dCache<S> {
    input: Tensor<S>,
    id: u64,
    versions: (u64, u64),
}

impl<S: Scalar> ConvTranspose1d<S> {
    pub fn new<R: Rng + ?Sized>(in_ch: usize, out_ch: usize, stride: usize, rng: &mut R) -> Result<Self> {
        if in_ch == 0 || out_ch == 0 || stride == 0 {
            return Err(Error::invalid("transposed conv sizes must be positive"));
        }
        let kernel = 2 * stride;
        let bound = kaiming_bound(out_ch * kernel);
        Ok(Self {
            in_ch,
            out_ch,
            stride,
            kernel,
            padding: stride / 2 + stride % 2,
            weight: Param::uniform(&[in_ch, out_ch, kernel], bound, rng),
            bias: Param::uniform(&[out_ch], bound, rng),
            id: next_id(),
        })
    }

    pub fn out_len(&self, t: usize) -> usize {
        self.stride * t
    }

    fn check_input(&self, x: &Tensor<S>) -> Result<usize> {
        if x.rank() != 2 || x.dims()[0] != self.in_ch || x.dims()[1] == 0 {
            return Err(Error::shape(format!("transposed conv expects [{}, T>0], got {:?}", self.in_ch, x.dims())));
        }
        Ok(x.dims()[1])
    }

    fn versions(&self) -> (u64, u64) {
        (self.weight.version(), self.bias.version())
    }

    /// Kernel tap `j` writes input sample `t` to output `t * s + j - p`, i.e. to
    /// phase `r` at position `t + shift` of that phase's sub-sequence.
    fn tap(&self, j: usize) -> (usize, isize) {
        let off = j as isize - self.padding as isize;
        let s = self.stride as isize;
        (off.rem_euclid(s) as usize, off.div_euclid(s))
    }

    pub fn forward(&self, x: &Tensor<S>) -> Result<(Tensor<S>, ConvTranspose1dCache<S>)> {
        let y = self.apply(x)?;
        Ok((y, ConvTranspose1dCache { input: x.clone(), id: self.id, versions: self.versions() }))
    }

    pub fn apply(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let t = self.check_input(x)?;
        let (s, k) = (self.stride, self.kernel);
        let w = self.weight.value().data();
        let b = self.bias.value().data();
        let mut y = Tensor::zeros(&[self.out_ch, s * t]);
        let mut phases = vec![S::zero(); s * t];
        for o in 0..self.out_ch {
            phases.iter_mut().for_each(|v| *v = S::zero());
            for i in 0..self.in_ch {
                let xr = x.row(i);
                for j in 0..k {
                    let (r, shift) = self.tap(j);
                    axpy_shift(&mut phases[r * t..(r + 1) * t], xr, w[(i * self.out_ch + o) * k + j], shift);
                }
            }
            let row = y.row_mut(o);
            for q in 0..t {
                for r in 0..s {
                    row[q * s + r] = phases[r * t + q] + b[o];
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, cache: &ConvTranspose1dCache<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        check_versions(self.id, cache.id, self.versions(), cache.versions, "conv-transpose1d")?;
        let x = &cache.input;
        let t = self.check_input(x)?;
        let (s, k) = (self.stride, self.kernel);
        if grad_out.dims() != [self.out_ch, s * t] {
            return Err(Error::shape(format!("transposed conv grad {:?} vs [{}, {}]", grad_out.dims(), self.out_ch, s * t)));
        }
        let taps: Vec<(usize, isize)> = (0..k).map(|j| self.tap(j)).collect();
        let w = self.weight.value().data().to_vec();
        let gw = self.weight.grad.data_mut();
        let gb = self.bias.grad.data_mut();
        let mut gx = Tensor::zeros(&[self.in_ch, t]);
        let mut phases = vec![S::zero(); s * t];
        for o in 0..self.out_ch {
            let g = grad_out.row(o);
            gb[o] = gb[o] + g.iter().copied().sum();
            for q in 0..t {
                for r in 0..s {
                    phases[r * t + q] = g[q * s + r];
                }
            }
            for i in 0..self.in_ch {
                let xr = x.row(i);
                let gxr = gx.row_mut(i);
                for (j, &(r, shift)) in taps.iter().enumerate() {
                    let widx = (i * self.out_ch + o) * k + j;
                    let gp = &phases[r * t..(r + 1) * t];
                    gw[widx] = gw[widx] + dot_shift(gp, xr, shift);
                    axpy_shift(gxr, gp, w[widx], -shift);
                }
            }
        }
        Ok(gx)
    }
}

impl<S: Scalar> Module<S> for ConvTranspose1d<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<S>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

/// 2-D convolution over `[channels, height, width]` with zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<S> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    /// `[out_ch, in_ch, kh, kw]`
    pub weight: Param<S>,
    /// `[out_ch]`
    pub bias: Param<S>,
    id: u64,
}

#[derive(Debug, Clone)]
pub struct Conv2dCache<S> {
    input: Tensor<S>,
    id: u64,
    versions: (u64, u64),
}

impl<S: Scalar> Conv2d<S> {
    pub fn new<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        rng: &mut R,
    ) -> Result<Self> {
        if in_ch == 0 || out_ch == 0 || kernel.0 == 0 || kernel.1 == 0 || stride.0 == 0 || stride.1 == 0 {
            return Err(Error::invalid("conv2d sizes must be positive"));
        }
        let bound = kaiming_bound(in_ch * kernel.0 * kernel.1);
        Ok(Self {
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
            weight: Param::uniform(&[out_ch, in_ch, kernel.0, kernel.1], bound, rng),
            bias: Param::uniform(&[out_ch], bound, rng),
            id: next_id(),
        })
    }

    pub fn out_dims(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let oh = (h + 2 * self.padding.0).checked_sub(self.kernel.0)? / self.stride.0 + 1;
        let ow = (w + 2 * self.padding.1).checked_sub(self.kernel.1)? / self.stride.1 + 1;
        Some((oh, ow))
    }

    fn check_input(&self, x: &Tensor<S>) -> Result<(usize, usize, usize, usize)> {
        if x.rank() != 3 || x.dims()[0] != self.in_ch {
            return Err(Error::shape(format!("conv2d expects [{}, H, W], got {:?}", self.in_ch, x.dims())));
        }
        let (h, w) = (x.dims()[1], x.dims()[2]);
        let (oh, ow) = self.out_dims(h, w).ok_or_else(|| Error::shape(format!("conv2d input {h}x{w} smaller than kernel")))?;
        Ok((h, w, oh, ow))
    }

    fn versions(&self) -> (u64, u64) {
        (self.weight.version(), self.bias.version())
    }

    pub fn forward(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Conv2dCache<S>)> {
        let y = self.apply(x)?;
        Ok((y, Conv2dCache { input: x.clone(), id: self.id, versions: self.versions() }))
    }

    pub fn apply(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let (h, w, oh, ow) = self.check_input(x)?;
        let (kh, kw) = self.kernel;
        let (sh, sw, ph0, pw) = (self.stride.0, self.stride.1, self.padding.0, self.padding.1);
        let wt = self.weight.value().data();
        let b = self.bias.value().data();
        let xp = split_phases(x.data(), w, sw);
        let mut y = Tensor::zeros(&[self.out_ch, oh, ow]);
        let yd = y.data_mut();
        for o in 0..self.out_ch {
            yd[o * oh * ow..(o + 1) * oh * ow].iter_mut().for_each(|v| *v = b[o]);
            for c in 0..self.in_ch {
                for a in 0..kh {
                    for ho in 0..oh {
                        let Some(hi) = tap_row(ho, a, h, sh, ph0) else { continue };
                        let yr = &mut yd[(o * oh + ho) * ow..(o * oh + ho + 1) * ow];
                        for bw in 0..kw {
                            let wv = wt[((o * self.in_ch + c) * kh + a) * kw + bw];
                            let (ph, base) = phase_of(bw as isize - pw as isize, sw);
                            axpy_shift(yr, &xp[(c * h + hi) * sw + ph], wv, -base);
                        }
                    }
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, cache: &Conv2dCache<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
        check_versions(self.id, cache.id, self.versions(), cache.versions, "conv2d")?;
        let x = &cache.input;
        let (h, w, oh, ow) = self.check_input(x)?;
        if grad_out.dims() != [self.out_ch, oh, ow] {
            return Err(Error::shape(format!("conv2d grad {:?} vs [{}, {oh}, {ow}]", grad_out.dims(), self.out_ch)));
        }
        let (kh, kw) = self.kernel;
        let (sh, sw, ph0, pw) = (self.stride.0, self.stride.1, self.padding.0, self.padding.1);
        let wt = self.weight.value().data().to_vec();
        let gw = self.weight.grad.data_mut();
        let gb = self.bias.grad.data_mut();
        let xp = split_phases(x.data(), w, sw);
        let mut gxp: Vec<Vec<S>> = xp.iter().map(|r| vec![S::zero(); r.len()]).collect();
        let gd = grad_out.data();
        for o in 0..self.out_ch {
            gb[o] = gb[o] + gd[o * oh * ow..(o + 1) * oh * ow].iter().copied().sum();
            for c in 0..self.in_ch {
                for a in 0..kh {
                    for ho in 0..oh {
                        let Some(hi) = tap_row(ho, a, h, sh, ph0) else { continue };
                        let gr = &gd[(o * oh + ho) * ow..(o * oh + ho + 1) * ow];
                        for bw in 0..kw {
                            let widx = ((o * self.in_ch + c) * kh + a) * kw + bw;
                            let (ph, base) = phase_of(bw as isize - pw as isize, sw);
                            let row = (c * h + hi) * sw + ph;
                            gw[widx] = gw[widx] + dot_shift(gr, &xp[row], -base);
                            axpy_shift(&mut gxp[row], gr, wt[widx], base);
                        }
                    }
                }
            }
        }
        let mut gx = Tensor::zeros(&[self.in_ch, h, w]);
        for (r, dst) in gx.data_mut().chunks_mut(w).enumerate() {
            for (i, v) in dst.iter_mut().enumerate() {
                *v = gxp[r * sw + i % sw][i / sw];
            }
        }
        Ok(gx)
    }
}

/// Splits every length-`w` row into `s` decimated phases: phase `p` holds
/// elements `p, p + s, p + 2s, ...`. Row `r`, phase `p` is entry `r * s + p`.
fn split_phases<S: Scalar>(x: &[S], w: usize, s: usize) -> Vec<Vec<S>> {
    let mut out = Vec::with_capacity(x.len() / w.max(1) * s);
    for row in x.chunks(w) {
        for p in 0..s {
            out.push(row.iter().skip(p).step_by(s).copied().collect());
        }
    }
    out
}

/// Input row read by output row `ho` at kernel row `a`, if inside the input.
fn tap_row(ho: usize, a: usize, h: usize, stride: usize, pad: usize) -> Option<usize> {
    let hi = (ho * stride + a) as isize - pad as isize;
    (hi >= 0 && (hi as usize) < h).then_some(hi as usize)
}

/// Input index `q * s + off` lies in phase `off mod s` at position `q + base`.
fn phase_of(off: isize, s: usize) -> (usize, isize) {
    let ph = off.rem_euclid(s as isize);
    (ph as usize, (off - ph) / s as isize)
}

impl<S: Scalar> Module<S> for Conv2d<S> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<S>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<S>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}
