//! Minimal dense-tensor machinery: CHW feature maps, GEMM-backed
//! convolution and transposed convolution with explicit backward passes.
//!
//! Everything is generic over [`Real`] so the training path runs in f32
//! while gradient checks instantiate the same code in f64.

pub mod conv;
pub mod linalg;

use crate::image::ImageTensor;

/// Scalar type of the network stack, instantiated as f32 (training) or
/// f64 (numerical checks).
pub trait Real:
    num_traits::Float + num_traits::NumAssign + Send + Sync + std::fmt::Debug + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_f32(v: f32) -> Self;
    fn to_f32(self) -> f32;
}

impl Real for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f32(v: f32) -> Self {
        v
    }
    #[inline]
    fn to_f32(self) -> f32 {
        self
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    #[inline]
    fn to_f32(self) -> f32 {
        self as f32
    }
}

/// Channel-major (CHW) feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![T::zero(); c * h * w],
        }
    }

    pub fn from_image(img: &ImageTensor) -> Self {
        Self {
            c: img.channels(),
            h: img.height(),
            w: img.width(),
            data: img.data().iter().map(|&v| T::from_f32(v)).collect(),
        }
    }

    pub fn to_image(&self) -> ImageTensor {
        ImageTensor::from_vec(
            self.c,
            self.h,
            self.w,
            self.data.iter().map(|&v| v.to_f32()).collect(),
        )
        .expect("tensor dims are valid image dims")
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut T {
        &mut self.data[(c * self.h + y) * self.w + x]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Leaky rectifier, `y = x` for positive x and `slope * x` otherwise.
    pub fn leaky_relu(&mut self, slope: T) {
        for v in &mut self.data {
            if *v < T::zero() {
                *v *= slope;
            }
        }
    }

    /// Backward of [`Tensor::leaky_relu`]; `out` is the forward output
    /// (the sign of the pre-activation survives the positive slope).
    pub fn leaky_relu_backward(dy: &mut Tensor<T>, out: &Tensor<T>, slope: T) {
        debug_assert_eq!(dy.data.len(), out.data.len());
        for (g, &y) in dy.data.iter_mut().zip(&out.data) {
            if y < T::zero() {
                *g *= slope;
            }
        }
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Elementwise `self -= other`.
    pub fn sub_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
    }
}

/// Reusable im2col scratch to keep the hot loops allocation-free.
#[derive(Default)]
pub struct Scratch<T> {
    pub(crate) col: Vec<T>,
    pub(crate) aux: Vec<T>,
}

impl<T: Real> Scratch<T> {
    pub fn new() -> Self {
        Self {
            col: Vec::new(),
            aux: Vec::new(),
        }
    }
}
