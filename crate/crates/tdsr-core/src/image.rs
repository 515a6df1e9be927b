//! Planar image container shared by the degradation pipeline, both
//! networks and the metrics.

use crate::error::{Error, Result};

/// An image stored channel-major (CHW) with values nominally in `[0, 1]`.
///
/// Degradation and evaluation code keeps values clamped to `[0, 1]`;
/// raw network output may leave that range and is clamped only when a
/// metric or a renderer needs it.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        assert!(channels >= 1 && height >= 1 && width >= 1);
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn constant(channels: usize, height: usize, width: usize, value: f32) -> Self {
        let mut img = Self::zeros(channels, height, width);
        img.data.fill(value);
        img
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch {
                context: "ImageTensor::from_vec",
                expected: format!("{} values", channels * height * width),
                got: format!("{}", data.len()),
            });
        }
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::ImageTooSmall {
                height,
                width,
                min: 1,
            });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// One contiguous channel plane.
    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }

    pub fn clamped(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.clamp(0.0, 1.0);
        }
        out
    }

    /// Checks the unit-range invariant that degradation outputs and
    /// dataset images must uphold.
    pub fn validate_unit_range(&self) -> Result<()> {
        for &v in &self.data {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "pixel value {v} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
