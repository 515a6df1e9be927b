//! 2D convolution and transposed convolution via im2col + GEMM, with
//! explicit backward passes for both inputs and parameters.
//!
//! A transposed convolution is implemented as the adjoint of a plain
//! convolution: its forward pass is the convolution's backward-input
//! pass and vice versa, so the three GEMM kernels below cover all six
//! directions.

use super::linalg::{dot, gemm_acc, transpose};
use super::{Real, Scratch, Tensor};

/// Geometry of a plain convolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvSpec {
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvSpec {
    pub fn out_dim(&self, d: usize) -> usize {
        (d + 2 * self.pad - self.kernel) / self.stride + 1
    }

    /// Output size of the adjoint (transposed) direction.
    pub fn transposed_out_dim(&self, d: usize) -> usize {
        (d - 1) * self.stride + self.kernel - 2 * self.pad
    }

    fn weight_len(&self) -> usize {
        self.out_c * self.in_c * self.kernel * self.kernel
    }
}

/// Unfolds `x` into `col[in_c*k*k][oh*ow]`; out-of-bounds taps are zero.
fn im2col<T: Real>(x: &Tensor<T>, spec: &ConvSpec, oh: usize, ow: usize, col: &mut Vec<T>) {
    let k = spec.kernel;
    let rows = spec.in_c * k * k;
    let n = oh * ow;
    col.clear();
    col.resize(rows, T::zero());
    col.resize(rows * n, T::zero());
    for ci in 0..spec.in_c {
        let plane = &x.data[ci * x.h * x.w..(ci + 1) * x.h * x.w];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * n;
                let crow = &mut col[row..row + n];
                for oy in 0..oh {
                    let iy = (oy * spec.stride + ky) as isize - spec.pad as isize;
                    if iy < 0 || iy >= x.h as isize {
                        for v in &mut crow[oy * ow..(oy + 1) * ow] {
                            *v = T::zero();
                        }
                        continue;
                    }
                    let src = &plane[iy as usize * x.w..(iy as usize + 1) * x.w];
                    let dst = &mut crow[oy * ow..(oy + 1) * ow];
                    for ox in 0..ow {
                        let ix = (ox * spec.stride + kx) as isize - spec.pad as isize;
                        dst[ox] = if ix >= 0 && ix < x.w as isize {
                            src[ix as usize]
                        } else {
                            T::zero()
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds `col` back into an input-shaped map.
fn col2im<T: Real>(col: &[T], spec: &ConvSpec, oh: usize, ow: usize, x: &mut Tensor<T>) {
    let k = spec.kernel;
    let n = oh * ow;
    for v in &mut x.data {
        *v = T::zero();
    }
    for ci in 0..spec.in_c {
        let plane_off = ci * x.h * x.w;
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * n;
                let crow = &col[row..row + n];
                for oy in 0..oh {
                    let iy = (oy * spec.stride + ky) as isize - spec.pad as isize;
                    if iy < 0 || iy >= x.h as isize {
                        continue;
                    }
                    let base = plane_off + iy as usize * x.w;
                    let src = &crow[oy * ow..(oy + 1) * ow];
                    for ox in 0..ow {
                        let ix = (ox * spec.stride + kx) as isize - spec.pad as isize;
                        if ix >= 0 && ix < x.w as isize {
                            x.data[base + ix as usize] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

/// Raw convolution forward: `y[oc] = W[oc] . col + b[oc]`.
fn conv_forward_raw<T: Real>(
    x: &Tensor<T>,
    spec: &ConvSpec,
    weight: &[T],
    bias: Option<&[T]>,
    scratch: &mut Scratch<T>,
) -> Tensor<T> {
    debug_assert_eq!(x.c, spec.in_c);
    let (oh, ow) = (spec.out_dim(x.h), spec.out_dim(x.w));
    let n = oh * ow;
    im2col(x, spec, oh, ow, &mut scratch.col);
    let mut y = Tensor::zeros(spec.out_c, oh, ow);
    if let Some(b) = bias {
        for oc in 0..spec.out_c {
            y.data[oc * n..(oc + 1) * n].fill(b[oc]);
        }
    }
    let rows = spec.in_c * spec.kernel * spec.kernel;
    gemm_acc(spec.out_c, rows, n, weight, &scratch.col, &mut y.data);
    y
}

/// Raw convolution backward w.r.t. input: `dx = col2im(W^T . dy)`.
fn conv_backward_input_raw<T: Real>(
    dy: &Tensor<T>,
    spec: &ConvSpec,
    weight: &[T],
    in_h: usize,
    in_w: usize,
    scratch: &mut Scratch<T>,
) -> Tensor<T> {
    debug_assert_eq!(dy.c, spec.out_c);
    let (oh, ow) = (dy.h, dy.w);
    let n = oh * ow;
    let rows = spec.in_c * spec.kernel * spec.kernel;
    transpose(spec.out_c, rows, weight, &mut scratch.aux);
    scratch.col.clear();
    scratch.col.resize(rows * n, T::zero());
    gemm_acc(rows, spec.out_c, n, &scratch.aux, &dy.data, &mut scratch.col);
    let mut dx = Tensor::zeros(spec.in_c, in_h, in_w);
    col2im(&scratch.col, spec, oh, ow, &mut dx);
    dx
}

/// Raw convolution parameter gradients, accumulated into `dw`/`db`.
fn conv_backward_weight_raw<T: Real>(
    x: &Tensor<T>,
    dy: &Tensor<T>,
    spec: &ConvSpec,
    dw: &mut [T],
    db: Option<&mut [T]>,
    scratch: &mut Scratch<T>,
) {
    let (oh, ow) = (dy.h, dy.w);
    let n = oh * ow;
    let rows = spec.in_c * spec.kernel * spec.kernel;
    im2col(x, spec, oh, ow, &mut scratch.col);
    for oc in 0..spec.out_c {
        let dyrow = &dy.data[oc * n..(oc + 1) * n];
        let dwrow = &mut dw[oc * rows..(oc + 1) * rows];
        for r in 0..rows {
            dwrow[r] += dot(dyrow, &scratch.col[r * n..(r + 1) * n]);
        }
    }
    if let Some(db) = db {
        for oc in 0..spec.out_c {
            let mut s = T::zero();
            for &g in &dy.data[oc * n..(oc + 1) * n] {
                s += g;
            }
            db[oc] += s;
        }
    }
}

/// Convolution layer with bias.
#[derive(Clone, Debug)]
pub struct Conv2d<T> {
    pub spec: ConvSpec,
    /// `[out_c][in_c * k * k]` row-major.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(spec: ConvSpec) -> Self {
        Self {
            weight: vec![T::zero(); spec.weight_len()],
            bias: vec![T::zero(); spec.out_c],
            spec,
        }
    }

    pub fn forward(&self, x: &Tensor<T>, scratch: &mut Scratch<T>) -> Tensor<T> {
        conv_forward_raw(x, &self.spec, &self.weight, Some(&self.bias), scratch)
    }

    pub fn backward_input(
        &self,
        dy: &Tensor<T>,
        in_h: usize,
        in_w: usize,
        scratch: &mut Scratch<T>,
    ) -> Tensor<T> {
        conv_backward_input_raw(dy, &self.spec, &self.weight, in_h, in_w, scratch)
    }

    pub fn backward_weight(
        &self,
        x: &Tensor<T>,
        dy: &Tensor<T>,
        grads: &mut ConvGrads<T>,
        scratch: &mut Scratch<T>,
    ) {
        conv_backward_weight_raw(
            x,
            dy,
            &self.spec,
            &mut grads.weight,
            Some(&mut grads.bias),
            scratch,
        );
    }
}

/// Transposed convolution layer with bias on its (upsampled) output.
#[derive(Clone, Debug)]
pub struct Deconv2d<T> {
    /// Geometry of the *adjoint* convolution: `adj.in_c` is this layer's
    /// output channel count and `adj.out_c` its input channel count.
    pub adj: ConvSpec,
    /// Weight of the adjoint convolution, `[adj.out_c][adj.in_c * k * k]`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Deconv2d<T> {
    pub fn zeros(in_c: usize, out_c: usize, kernel: usize, stride: usize, pad: usize) -> Self {
        let adj = ConvSpec {
            in_c: out_c,
            out_c: in_c,
            kernel,
            stride,
            pad,
        };
        Self {
            weight: vec![T::zero(); adj.weight_len()],
            bias: vec![T::zero(); out_c],
            adj,
        }
    }

    pub fn in_c(&self) -> usize {
        self.adj.out_c
    }

    pub fn out_c(&self) -> usize {
        self.adj.in_c
    }

    pub fn out_dim(&self, d: usize) -> usize {
        self.adj.transposed_out_dim(d)
    }

    pub fn forward(&self, x: &Tensor<T>, scratch: &mut Scratch<T>) -> Tensor<T> {
        debug_assert_eq!(x.c, self.in_c());
        let (oh, ow) = (self.out_dim(x.h), self.out_dim(x.w));
        let mut y = conv_backward_input_raw(x, &self.adj, &self.weight, oh, ow, scratch);
        let n = oh * ow;
        for oc in 0..self.out_c() {
            let b = self.bias[oc];
            for v in &mut y.data[oc * n..(oc + 1) * n] {
                *v += b;
            }
        }
        y
    }

    pub fn backward_input(&self, dy: &Tensor<T>, scratch: &mut Scratch<T>) -> Tensor<T> {
        conv_forward_raw(dy, &self.adj, &self.weight, None, scratch)
    }

    pub fn backward_weight(
        &self,
        x: &Tensor<T>,
        dy: &Tensor<T>,
        grads: &mut ConvGrads<T>,
        scratch: &mut Scratch<T>,
    ) {
        // For y = adjoint(W) x: d<dy, y>/dW has the conv-gradient form
        // with dy on the conv-input side and x on the conv-output side.
        conv_backward_weight_raw(dy, x, &self.adj, &mut grads.weight, None, scratch);
        let n = dy.h * dy.w;
        for oc in 0..self.out_c() {
            let mut s = T::zero();
            for &g in &dy.data[oc * n..(oc + 1) * n] {
                s += g;
            }
            grads.bias[oc] += s;
        }
    }
}

/// Parameter gradients of one conv/deconv layer.
#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvGrads<T> {
    pub fn zeros_like_conv(layer: &Conv2d<T>) -> Self {
        Self {
            weight: vec![T::zero(); layer.weight.len()],
            bias: vec![T::zero(); layer.bias.len()],
        }
    }

    pub fn zeros_like_deconv(layer: &Deconv2d<T>) -> Self {
        Self {
            weight: vec![T::zero(); layer.weight.len()],
            bias: vec![T::zero(); layer.bias.len()],
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, &b) in self.weight.iter_mut().zip(&other.weight) {
            *a += b;
        }
        for (a, &b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }
}
