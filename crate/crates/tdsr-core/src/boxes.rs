//! Box geometry: IoU, the center-size offset encoding used by the
//! detector heads, and greedy non-maximum suppression.
//!
//! Boxes are continuous half-open intervals in image pixel coordinates;
//! IoU uses continuous areas (no +1 pixel convention).

use crate::error::{Error, Result};

/// Class index. `0` is reserved for background; object classes are `1..=C`.
pub type ClassId = usize;

/// Axis-aligned box, `xmin < xmax`, `ymin < ymax`, all coordinates finite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl BBox {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        let b = Self {
            xmin,
            ymin,
            xmax,
            ymax,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.xmin.is_finite()
            && self.ymin.is_finite()
            && self.xmax.is_finite()
            && self.ymax.is_finite();
        if !finite || self.xmin >= self.xmax || self.ymin >= self.ymax {
            return Err(Error::DegenerateBox {
                xmin: self.xmin,
                ymin: self.ymin,
                xmax: self.xmax,
                ymax: self.ymax,
            });
        }
        Ok(())
    }

    /// Center-size view: (cx, cy, w, h).
    pub fn center_size(&self) -> (f64, f64, f64, f64) {
        (
            0.5 * (self.xmin + self.xmax),
            0.5 * (self.ymin + self.ymax),
            self.xmax - self.xmin,
            self.ymax - self.ymin,
        )
    }

    pub fn from_center_size(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)
    }

    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    /// Clips to `[0, w] x [0, h]`. Returns `None` when nothing is left.
    pub fn clip(&self, width: f64, height: f64) -> Option<Self> {
        let xmin = self.xmin.max(0.0);
        let ymin = self.ymin.max(0.0);
        let xmax = self.xmax.min(width);
        let ymax = self.ymax.min(height);
        (xmin < xmax && ymin < ymax).then_some(Self {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    /// Intersection-over-union with `other`. Rejects degenerate boxes.
    pub fn iou(&self, other: &BBox) -> Result<f64> {
        self.validate()?;
        other.validate()?;
        Ok(iou_unchecked(self, other))
    }
}

/// IoU for boxes already known to be valid; hot-path form used by
/// matching, NMS and AP computation.
pub(crate) fn iou_unchecked(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.xmax.min(b.xmax) - a.xmin.max(b.xmin)).max(0.0);
    let iy = (a.ymax.min(b.ymax) - a.ymin.max(b.ymin)).max(0.0);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Class-labelled ground-truth boxes for one image.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    pub boxes: Vec<BBox>,
    pub labels: Vec<ClassId>,
}

impl GroundTruth {
    pub fn new(boxes: Vec<BBox>, labels: Vec<ClassId>) -> Result<Self> {
        if boxes.len() != labels.len() {
            return Err(Error::ShapeMismatch {
                context: "GroundTruth::new",
                expected: format!("{} labels", boxes.len()),
                got: format!("{}", labels.len()),
            });
        }
        Ok(Self { boxes, labels })
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Checks box validity and that labels lie in `1..=num_classes`.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.boxes.len() != self.labels.len() {
            return Err(Error::ShapeMismatch {
                context: "GroundTruth::validate",
                expected: format!("{} labels", self.boxes.len()),
                got: format!("{}", self.labels.len()),
            });
        }
        for b in &self.boxes {
            b.validate()?;
        }
        for &l in &self.labels {
            if l == 0 || l > num_classes {
                return Err(Error::InvalidLabel {
                    label: l,
                    num_classes,
                });
            }
        }
        Ok(())
    }
}

/// A scored, class-labelled box produced by the detector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub label: ClassId,
    pub score: f64,
}

/// Detections for one image, kept sorted by descending score after NMS.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectionSet {
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }
}

/// Offsets of a ground-truth box relative to an anchor, in the order
/// `(tcx, tcy, tw, th)`.
pub type BoxOffsets = [f64; 4];

/// Center-size encoding of `gt` against `anchor` with SSD-style
/// variance scaling.
pub fn encode_box(gt: &BBox, anchor: &BBox, variances: (f64, f64)) -> Result<BoxOffsets> {
    gt.validate()?;
    anchor.validate()?;
    if !(variances.0 > 0.0 && variances.1 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "variances must be positive, got {variances:?}"
        )));
    }
    let (gcx, gcy, gw, gh) = gt.center_size();
    let (acx, acy, aw, ah) = anchor.center_size();
    Ok([
        (gcx - acx) / (variances.0 * aw),
        (gcy - acy) / (variances.0 * ah),
        (gw / aw).ln() / variances.1,
        (gh / ah).ln() / variances.1,
    ])
}

/// Inverse of [`encode_box`]. Fails when the result is not a valid box
/// (offsets overflowing to a non-finite extent).
pub fn decode_box(offsets: &BoxOffsets, anchor: &BBox, variances: (f64, f64)) -> Result<BBox> {
    anchor.validate()?;
    let (acx, acy, aw, ah) = anchor.center_size();
    let cx = acx + offsets[0] * variances.0 * aw;
    let cy = acy + offsets[1] * variances.0 * ah;
    let w = aw * (offsets[2] * variances.1).exp();
    let h = ah * (offsets[3] * variances.1).exp();
    BBox::from_center_size(cx, cy, w, h)
}

/// Greedy score-descending NMS with hard suppression at `iou_threshold`.
/// With `per_class` set, only detections of the same class suppress each
/// other. The result is sorted by descending score.
pub fn nms(dets: &DetectionSet, iou_threshold: f64, per_class: bool) -> Result<DetectionSet> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "nms iou threshold {iou_threshold} outside (0, 1]"
        )));
    }
    for d in &dets.detections {
        d.bbox.validate()?;
    }
    let mut order: Vec<usize> = (0..dets.detections.len()).collect();
    order.sort_by(|&a, &b| {
        dets.detections[b]
            .score
            .partial_cmp(&dets.detections[a].score)
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut kept: Vec<Detection> = Vec::new();
    for &i in &order {
        let cand = &dets.detections[i];
        let suppressed = kept.iter().any(|k| {
            (!per_class || k.label == cand.label)
                && iou_unchecked(&k.bbox, &cand.bbox) > iou_threshold
        });
        if !suppressed {
            kept.push(*cand);
        }
    }
    Ok(DetectionSet { detections: kept })
}
