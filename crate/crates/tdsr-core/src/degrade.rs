//! Degradation pipeline: bicubic rescaling, Gaussian blur, Gaussian
//! noise, and the pairing step that produces the network input together
//! with its clean reconstruction target.
//!
//! Every op is deterministic for fixed inputs (noise takes an explicit
//! seed) and keeps pixel values clamped to `[0, 1]`.

use crate::boxes::GroundTruth;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::nn::{Real, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// How an HR image is degraded into the LR network input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegradationSpec {
    pub scale_factor: usize,
    /// Gaussian blur applied before downscaling; `0` disables it.
    pub blur_sigma: f64,
    /// Gaussian noise applied before downscaling; `0` disables it.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn clean(scale_factor: usize) -> Self {
        Self {
            scale_factor,
            blur_sigma: 0.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if ![2, 4, 8].contains(&self.scale_factor) {
            return Err(Error::UnsupportedScaleFactor(self.scale_factor));
        }
        if !(self.blur_sigma.is_finite() && self.blur_sigma >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "blur sigma {} must be finite and >= 0",
                self.blur_sigma
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise sigma {} must be finite and >= 0",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Keys cubic kernel with a = -0.5 (the common bicubic convention).
fn keys_cubic(t: f64) -> f64 {
    let a = t.abs();
    if a < 1.0 {
        (1.5 * a - 2.5) * a * a + 1.0
    } else if a < 2.0 {
        ((-0.5 * a + 2.5) * a - 4.0) * a + 2.0
    } else {
        0.0
    }
}

/// Tap positions and normalized weights for one resampled axis.
/// When shrinking, the kernel is stretched by the scale ratio so it
/// acts as an anti-aliasing low-pass.
fn axis_weights(in_len: usize, out_len: usize) -> Vec<(usize, Vec<f64>)> {
    let ratio = in_len as f64 / out_len as f64;
    let stretch = ratio.max(1.0);
    let support = 2.0 * stretch;
    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let center = (j as f64 + 0.5) * ratio;
        let left = ((center - support).floor().max(0.0)) as usize;
        let right = ((center + support).ceil() as usize).min(in_len);
        let mut weights: Vec<f64> = (left..right)
            .map(|i| keys_cubic((i as f64 + 0.5 - center) / stretch))
            .collect();
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        out.push((left, weights));
    }
    out
}

/// Separable bicubic resampling of one plane; accumulation in f64.
fn resample_plane<T: Real>(
    src: &[T],
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<T> {
    let wx = axis_weights(in_w, out_w);
    let wy = axis_weights(in_h, out_h);
    // Horizontal pass.
    let mut mid = vec![0.0f64; in_h * out_w];
    for y in 0..in_h {
        let row = &src[y * in_w..(y + 1) * in_w];
        let dst = &mut mid[y * out_w..(y + 1) * out_w];
        for (x, (left, weights)) in wx.iter().enumerate() {
            let mut acc = 0.0;
            for (i, w) in weights.iter().enumerate() {
                acc += row[left + i].to_f64() * w;
            }
            dst[x] = acc;
        }
    }
    // Vertical pass.
    let mut out = vec![T::zero(); out_h * out_w];
    for (y, (top, weights)) in wy.iter().enumerate() {
        let dst = &mut out[y * out_w..(y + 1) * out_w];
        for x in 0..out_w {
            let mut acc = 0.0;
            for (i, w) in weights.iter().enumerate() {
                acc += mid[(top + i) * out_w + x] * w;
            }
            dst[x] = T::from_f64(acc);
        }
    }
    out
}

fn resample_image(img: &ImageTensor, out_h: usize, out_w: usize, clamp: bool) -> ImageTensor {
    let mut data = Vec::with_capacity(img.channels() * out_h * out_w);
    for c in 0..img.channels() {
        let plane = resample_plane(img.plane(c), img.height(), img.width(), out_h, out_w);
        data.extend(plane);
    }
    if clamp {
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
    }
    ImageTensor::from_vec(img.channels(), out_h, out_w, data).expect("sized by construction")
}

/// Anti-aliased bicubic downscale by an integer factor. The image
/// dimensions must already be divisible by the factor (see
/// [`crop_to_multiple`]).
pub fn downscale_bicubic(img: &ImageTensor, factor: usize) -> Result<ImageTensor> {
    if factor < 1 {
        return Err(Error::InvalidInput("factor must be >= 1".into()));
    }
    if img.height() % factor != 0 || img.width() % factor != 0 {
        return Err(Error::NotDivisible {
            height: img.height(),
            width: img.width(),
            factor,
        });
    }
    Ok(resample_image(
        img,
        img.height() / factor,
        img.width() / factor,
        true,
    ))
}

/// Bicubic upscale by an integer factor, clamped to `[0, 1]`.
pub fn upscale_bicubic(img: &ImageTensor, factor: usize) -> Result<ImageTensor> {
    if factor < 1 {
        return Err(Error::InvalidInput("factor must be >= 1".into()));
    }
    Ok(resample_image(
        img,
        img.height() * factor,
        img.width() * factor,
        true,
    ))
}

/// Unclamped bicubic upscale of a feature tensor; the global skip path
/// of the SR network.
pub(crate) fn upscale_bicubic_tensor<T: Real>(x: &Tensor<T>, factor: usize) -> Tensor<T> {
    let (oh, ow) = (x.h * factor, x.w * factor);
    let mut out = Tensor::zeros(x.c, oh, ow);
    for c in 0..x.c {
        let plane = resample_plane(&x.data[c * x.h * x.w..(c + 1) * x.h * x.w], x.h, x.w, oh, ow);
        out.data[c * oh * ow..(c + 1) * oh * ow].copy_from_slice(&plane);
    }
    out
}

/// Offsets and size of the centered crop to the largest multiple of
/// `factor`: `(top, left, new_h, new_w)`.
pub fn crop_offsets(
    height: usize,
    width: usize,
    factor: usize,
) -> Result<(usize, usize, usize, usize)> {
    if factor < 1 {
        return Err(Error::InvalidInput("factor must be >= 1".into()));
    }
    let nh = (height / factor) * factor;
    let nw = (width / factor) * factor;
    if nh == 0 || nw == 0 {
        return Err(Error::ImageTooSmall {
            height,
            width,
            min: factor,
        });
    }
    Ok(((height - nh) / 2, (width - nw) / 2, nh, nw))
}

/// Center crop to the largest dimensions divisible by `factor`.
pub fn crop_to_multiple(img: &ImageTensor, factor: usize) -> Result<ImageTensor> {
    let (top, left, nh, nw) = crop_offsets(img.height(), img.width(), factor)?;
    if nh == img.height() && nw == img.width() {
        return Ok(img.clone());
    }
    let mut out = ImageTensor::zeros(img.channels(), nh, nw);
    for c in 0..img.channels() {
        for y in 0..nh {
            for x in 0..nw {
                out.set(c, y, x, img.get(c, top + y, left + x));
            }
        }
    }
    Ok(out)
}

/// Separable Gaussian blur, kernel radius `ceil(3 sigma)`, reflect
/// padding, kernel normalized to sum 1. `sigma = 0` is the identity.
pub fn gaussian_blur(img: &ImageTensor, sigma: f64) -> Result<ImageTensor> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidInput(format!("blur sigma {sigma} invalid")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= sum;
    }

    let (h, w) = (img.height(), img.width());
    let reflect = |p: isize, n: usize| -> usize {
        let n = n as isize;
        let mut p = p;
        // Half-sample symmetric reflection, stable for any radius.
        loop {
            if p < 0 {
                p = -p - 1;
            } else if p >= n {
                p = 2 * n - 1 - p;
            } else {
                return p as usize;
            }
        }
    };

    let mut out = ImageTensor::zeros(img.channels(), h, w);
    let mut tmp = vec![0.0f64; h * w];
    for c in 0..img.channels() {
        let plane = img.plane(c);
        // Horizontal.
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, kw) in kernel.iter().enumerate() {
                    let sx = reflect(x as isize + i as isize - radius, w);
                    acc += plane[y * w + sx] as f64 * kw;
                }
                tmp[y * w + x] = acc;
            }
        }
        // Vertical.
        let out_plane = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, kw) in kernel.iter().enumerate() {
                    let sy = reflect(y as isize + i as isize - radius, h);
                    acc += tmp[sy * w + x] * kw;
                }
                out_plane[y * w + x] = (acc as f32).clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}

/// Adds i.i.d. zero-mean Gaussian noise per channel-pixel and clamps to
/// `[0, 1]`. Deterministic for a fixed seed.
pub fn add_gaussian_noise(img: &ImageTensor, sigma: f64, seed: u64) -> Result<ImageTensor> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidInput(format!("noise sigma {sigma} invalid")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = img.clone();
    for v in out.data_mut() {
        let n: f64 = StandardNormal.sample(&mut rng);
        *v = (*v as f64 + sigma * n).clamp(0.0, 1.0) as f32;
    }
    Ok(out)
}

/// Builds one training/evaluation pair from a clean HR image: the LR
/// network input after degradation and downscaling, the clean cropped
/// HR reconstruction target, and the ground truth adjusted to the crop.
/// Blur and noise are never applied to the reconstruction target.
pub fn make_pair(
    hr: &ImageTensor,
    gt: &GroundTruth,
    spec: &DegradationSpec,
) -> Result<(ImageTensor, ImageTensor, GroundTruth)> {
    spec.validate()?;
    let (top, left, nh, nw) = crop_offsets(hr.height(), hr.width(), spec.scale_factor)?;
    let target = crop_to_multiple(hr, spec.scale_factor)?;

    let mut boxes = Vec::new();
    let mut labels = Vec::new();
    for (b, &l) in gt.boxes.iter().zip(&gt.labels) {
        let shifted = crate::boxes::BBox {
            xmin: b.xmin - left as f64,
            ymin: b.ymin - top as f64,
            xmax: b.xmax - left as f64,
            ymax: b.ymax - top as f64,
        };
        if let Some(clipped) = shifted.clip(nw as f64, nh as f64) {
            boxes.push(clipped);
            labels.push(l);
        }
    }
    let gt_adjusted = GroundTruth { boxes, labels };

    let mut degraded = target.clone();
    if spec.blur_sigma > 0.0 {
        degraded = gaussian_blur(&degraded, spec.blur_sigma)?;
    }
    if spec.noise_sigma > 0.0 {
        degraded = add_gaussian_noise(&degraded, spec.noise_sigma, spec.seed)?;
    }
    let lr = downscale_bicubic(&degraded, spec.scale_factor)?;
    Ok((lr, target, gt_adjusted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::BBox;

    #[test]
    fn downscale_shapes() {
        let img = ImageTensor::constant(3, 300, 300, 0.5);
        let out = downscale_bicubic(&img, 4).unwrap();
        assert_eq!((out.height(), out.width()), (75, 75));
        let img = ImageTensor::constant(1, 296, 296, 0.1);
        let out = downscale_bicubic(&img, 8).unwrap();
        assert_eq!((out.height(), out.width()), (37, 37));
    }

    #[test]
    fn downscale_rejects_non_divisible() {
        let img = ImageTensor::constant(1, 300, 300, 0.5);
        assert!(matches!(
            downscale_bicubic(&img, 8),
            Err(Error::NotDivisible { .. })
        ));
    }

    #[test]
    fn downscale_preserves_constant() {
        for factor in [2usize, 4, 8] {
            let img = ImageTensor::constant(3, 64, 64, 0.5);
            let out = downscale_bicubic(&img, factor).unwrap();
            for &v in out.data() {
                assert!((v - 0.5).abs() < 1e-6, "factor {factor}: {v}");
            }
        }
    }

    #[test]
    fn upscale_preserves_constant() {
        let img = ImageTensor::constant(3, 16, 16, 0.25);
        let out = upscale_bicubic(&img, 4).unwrap();
        assert_eq!((out.height(), out.width()), (64, 64));
        for &v in out.data() {
            assert!((v - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn block_average_recovery() {
        // Replicating each pixel of a small image into f x f blocks and
        // downscaling recovers the original for block-constant content.
        let mut small = ImageTensor::zeros(1, 4, 4);
        for y in 0..4 {
            for x in 0..4 {
                small.set(0, y, x, ((y * 4 + x) as f32) / 20.0);
            }
        }
        let f = 4;
        let mut big = ImageTensor::zeros(1, 16, 16);
        for y in 0..16 {
            for x in 0..16 {
                big.set(0, y, x, small.get(0, y / f, x / f));
            }
        }
        let back = downscale_bicubic(&big, f).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                assert!(
                    (back.get(0, y, x) - small.get(0, y, x)).abs() < 0.02,
                    "at ({y},{x})"
                );
            }
        }
    }

    #[test]
    fn crop_examples() {
        let img = ImageTensor::constant(1, 300, 300, 0.5);
        let c = crop_to_multiple(&img, 8).unwrap();
        assert_eq!((c.height(), c.width()), (296, 296));
        let c = crop_to_multiple(&img, 4).unwrap();
        assert_eq!((c.height(), c.width()), (300, 300));
        let img = ImageTensor::constant(1, 301, 299, 0.5);
        let c = crop_to_multiple(&img, 4).unwrap();
        assert_eq!((c.height(), c.width()), (300, 296));
    }

    #[test]
    fn crop_rejects_too_small() {
        let img = ImageTensor::constant(1, 3, 3, 0.5);
        assert!(crop_to_multiple(&img, 4).is_err());
    }

    #[test]
    fn blur_identity_cases() {
        let mut img = ImageTensor::zeros(1, 8, 8);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = (i % 7) as f32 / 7.0;
        }
        let out = gaussian_blur(&img, 0.0).unwrap();
        assert_eq!(out, img);
        let flat = ImageTensor::constant(3, 8, 8, 0.3);
        let out = gaussian_blur(&flat, 1.0).unwrap();
        for &v in out.data() {
            assert!((v - 0.3).abs() < 1e-6);
        }
    }

    #[test]
    fn blur_impulse_matches_direct_kernel() {
        let sigma = 1.0f64;
        let radius = 3usize;
        let n = 31;
        let mut img = ImageTensor::zeros(1, n, n);
        img.set(0, 15, 15, 1.0);
        let out = gaussian_blur(&img, sigma).unwrap();
        // Direct 1D kernel, normalized.
        let k: Vec<f64> = (-(radius as isize)..=radius as isize)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let s: f64 = k.iter().sum();
        for dy in -(radius as isize)..=radius as isize {
            for dx in -(radius as isize)..=radius as isize {
                let want = k[(dy + radius as isize) as usize] / s
                    * k[(dx + radius as isize) as usize]
                    / s;
                let got = out.get(0, (15 + dy) as usize, (15 + dx) as usize) as f64;
                assert!((got - want).abs() < 1e-6, "offset ({dy},{dx})");
            }
        }
    }

    #[test]
    fn noise_zero_sigma_and_determinism() {
        let img = ImageTensor::constant(3, 16, 16, 0.5);
        assert_eq!(add_gaussian_noise(&img, 0.0, 1).unwrap(), img);
        let a = add_gaussian_noise(&img, 0.1, 42).unwrap();
        let b = add_gaussian_noise(&img, 0.1, 42).unwrap();
        assert_eq!(a, b);
        let c = add_gaussian_noise(&img, 0.1, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_mean_absolute_deviation_matches_folded_gaussian() {
        // For N(0, 0.1^2), E|X| = 0.1 * sqrt(2/pi) ~ 0.0798; clamping is
        // negligible around 0.5.
        let img = ImageTensor::constant(1, 256, 256, 0.5);
        let noisy = add_gaussian_noise(&img, 0.1, 7).unwrap();
        let mad: f64 = noisy
            .data()
            .iter()
            .map(|&v| (v as f64 - 0.5).abs())
            .sum::<f64>()
            / noisy.data().len() as f64;
        let expect = 0.1 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mad - expect).abs() < 0.002, "mad {mad} vs {expect}");
    }

    #[test]
    fn make_pair_clean_path() {
        let mut hr = ImageTensor::zeros(3, 64, 64);
        for (i, v) in hr.data_mut().iter_mut().enumerate() {
            *v = ((i * 37) % 100) as f32 / 100.0;
        }
        let gt = GroundTruth::new(vec![BBox::new(4.0, 4.0, 20.0, 20.0).unwrap()], vec![1]).unwrap();
        let spec = DegradationSpec::clean(4);
        let (lr, target, gt2) = make_pair(&hr, &gt, &spec).unwrap();
        assert_eq!((lr.height(), lr.width()), (16, 16));
        assert_eq!(target, hr);
        assert_eq!(lr, downscale_bicubic(&hr, 4).unwrap());
        assert_eq!(gt2.boxes, gt.boxes);
    }

    #[test]
    fn make_pair_target_stays_clean_under_blur_and_noise() {
        let mut hr = ImageTensor::zeros(3, 64, 64);
        for (i, v) in hr.data_mut().iter_mut().enumerate() {
            *v = ((i * 53) % 97) as f32 / 97.0;
        }
        let gt = GroundTruth::default();
        for spec in [
            DegradationSpec {
                scale_factor: 8,
                blur_sigma: 1.0,
                noise_sigma: 0.0,
                seed: 3,
            },
            DegradationSpec {
                scale_factor: 4,
                blur_sigma: 0.0,
                noise_sigma: 0.1,
                seed: 3,
            },
        ] {
            let (lr, target, _) = make_pair(&hr, &gt, &spec).unwrap();
            assert_eq!(target, crop_to_multiple(&hr, spec.scale_factor).unwrap());
            // The LR input must differ from the clean downscale.
            let clean_lr = downscale_bicubic(&target, spec.scale_factor).unwrap();
            assert_ne!(lr, clean_lr);
            lr.validate_unit_range().unwrap();
        }
    }

    #[test]
    fn make_pair_shifts_and_clips_boxes() {
        let hr = ImageTensor::constant(3, 301, 299, 0.5);
        // Crop to 296x296 removes (301-296)/2 = 2 rows on top, 1 col left.
        let gt = GroundTruth::new(
            vec![
                BBox::new(2.0, 3.0, 30.0, 31.0).unwrap(),
                BBox::new(0.0, 0.0, 0.5, 0.5).unwrap(), // fully outside after crop
            ],
            vec![1, 2],
        )
        .unwrap();
        let spec = DegradationSpec::clean(8);
        let (_, target, gt2) = make_pair(&hr, &gt, &spec).unwrap();
        assert_eq!((target.height(), target.width()), (296, 296));
        assert_eq!(gt2.len(), 1);
        assert_eq!(gt2.boxes[0], BBox::new(1.0, 1.0, 29.0, 29.0).unwrap());
    }

    #[test]
    fn determinism_of_full_pipeline() {
        let mut hr = ImageTensor::zeros(3, 48, 48);
        for (i, v) in hr.data_mut().iter_mut().enumerate() {
            *v = ((i * 11) % 64) as f32 / 64.0;
        }
        let spec = DegradationSpec {
            scale_factor: 4,
            blur_sigma: 0.7,
            noise_sigma: 0.05,
            seed: 99,
        };
        let gt = GroundTruth::default();
        let a = make_pair(&hr, &gt, &spec).unwrap();
        let b = make_pair(&hr, &gt, &spec).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
