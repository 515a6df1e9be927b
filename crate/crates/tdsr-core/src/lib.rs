//! Task-driven super-resolution at desk scale: a small back-projection
//! SR network fine-tuned against a frozen single-shot detector with a
//! compound reconstruction + detection objective, plus the degradation
//! pipelines, training schedules and PSNR/SSIM/mAP evaluation around it.

pub mod boxes;
pub mod degrade;
pub mod error;
pub mod image;
pub mod nn;

pub use boxes::{decode_box, encode_box, nms, BBox, ClassId, Detection, DetectionSet, GroundTruth};
pub use error::{Error, Result};
pub use image::ImageTensor;
