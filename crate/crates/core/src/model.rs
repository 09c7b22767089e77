//! Domain types: boxes, class distributions, detections, ground truth, frames.

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, Extent, ProbMask, Window};

/// Tolerance on the sum of a class probability vector.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

/// Box as (x, y, w, h) in pixels: `x` is the left edge, `y` the top edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite box ({x}, {y}, {w}, {h})")));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox(format!("non-positive size {w}x{h}")));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    /// Intersection with the image; fails when nothing is left.
    pub fn clip(&self, extent: Extent) -> Result<BBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = (self.x + self.w).min(extent.cols as f64);
        let y1 = (self.y + self.h).min(extent.rows as f64);
        BBox::new(x0, y0, x1 - x0, y1 - y0)
            .map_err(|_| Error::InvalidBox(format!("box {:?} lies outside the image", self.to_array())))
    }

    /// Smallest pixel window containing the box.
    pub fn outer_window(&self) -> Window {
        let c0 = self.x.floor() as i64;
        let r0 = self.y.floor() as i64;
        let c1 = (self.x + self.w).ceil() as i64;
        let r1 = (self.y + self.h).ceil() as i64;
        Window::new(r0, c0, (r1 - r0) as usize, (c1 - c0) as usize)
    }

    pub fn mean(boxes: &[BBox]) -> Option<BBox> {
        if boxes.is_empty() {
            return None;
        }
        let n = boxes.len() as f64;
        let sum = boxes.iter().fold([0.0; 4], |mut acc, b| {
            for (a, v) in acc.iter_mut().zip(b.to_array()) {
                *a += v;
            }
            acc
        });
        Some(BBox {
            x: sum[0] / n,
            y: sum[1] / n,
            w: sum[2] / n,
            h: sum[3] / n,
        })
    }
}

/// Categorical distribution over the affordance classes (plus an optional
/// trailing background slot).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbVector(Vec<f64>);

impl ClassProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidProbs("empty probability vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbs(format!("entry {p} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidProbs(format!("entries sum to {sum}")));
        }
        Ok(Self(probs))
    }

    pub fn one_hot(len: usize, index: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::ClassMismatch {
                index,
                classes: len,
            });
        }
        let mut v = vec![0.0; len];
        v[index] = 1.0;
        Ok(Self(v))
    }

    pub fn uniform(len: usize) -> Result<Self> {
        Self::new(vec![1.0 / len as f64; len])
    }

    /// Numerically stable softmax.
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        Self::new(exps.into_iter().map(|e| e / z).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, class: usize) -> Option<f64> {
        self.0.get(class).copied()
    }

    /// Index of the largest entry; the first one wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.0[self.argmax()]
    }
}

/// One stochastic forward-pass output.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub class_probs: ClassProbVector,
    pub mask: ProbMask,
    pub sample_index: usize,
}

impl Detection {
    /// The heatmap footprint must overlap the box's pixel window.
    pub fn new(bbox: BBox, class_probs: ClassProbVector, mask: ProbMask, sample_index: usize) -> Result<Self> {
        let footprint = mask.window();
        if !footprint.is_empty() && footprint.intersect(&bbox.outer_window()).is_empty() {
            return Err(Error::InvalidMask(format!(
                "heatmap footprint {footprint:?} does not overlap box {:?}",
                bbox.to_array()
            )));
        }
        Ok(Self {
            bbox,
            class_probs,
            mask,
            sample_index,
        })
    }

    pub fn confidence(&self) -> f64 {
        self.class_probs.max()
    }

    pub fn label(&self) -> usize {
        self.class_probs.argmax()
    }
}

/// Annotated instance: box, discrete class and image-frame binary mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthInstance {
    pub bbox: BBox,
    pub class_id: usize,
    pub mask: BinaryMask,
    pub frame_id: String,
}

impl GroundTruthInstance {
    pub fn new(bbox: BBox, class_id: usize, mask: BinaryMask, frame_id: impl Into<String>) -> Result<Self> {
        if mask.count() == 0 {
            return Err(Error::InvalidGroundTruth("mask has no foreground pixel".into()));
        }
        Ok(Self {
            bbox,
            class_id,
            mask,
            frame_id: frame_id.into(),
        })
    }
}

/// Class vocabulary shared by a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSpace {
    pub names: Vec<String>,
    pub background: bool,
}

impl ClassSpace {
    pub fn new(names: Vec<String>, background: bool) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Schema("class list is empty".into()));
        }
        Ok(Self { names, background })
    }

    pub fn n_classes(&self) -> usize {
        self.names.len()
    }

    /// Length of every class probability vector.
    pub fn prob_len(&self) -> usize {
        self.names.len() + self.background as usize
    }

    pub fn background_index(&self) -> Option<usize> {
        self.background.then_some(self.names.len())
    }
}

/// One image: its stochastic passes and optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_id: String,
    pub extent: Extent,
    /// Detections grouped by pass; `passes[m]` holds sample index `m`.
    pub passes: Vec<Vec<Detection>>,
    pub ground_truth: Vec<GroundTruthInstance>,
}

impl Frame {
    pub fn new(
        frame_id: impl Into<String>,
        extent: Extent,
        passes: Vec<Vec<Detection>>,
        ground_truth: Vec<GroundTruthInstance>,
    ) -> Result<Self> {
        let frame_id = frame_id.into();
        for (m, pass) in passes.iter().enumerate() {
            for d in pass {
                if d.sample_index != m {
                    return Err(Error::Schema(format!(
                        "frame {frame_id}: detection with sample index {} stored in pass {m}",
                        d.sample_index
                    )));
                }
                if d.mask.window().clip(extent).is_empty() && !d.mask.window().is_empty() {
                    return Err(Error::InvalidMask(format!(
                        "frame {frame_id}: heatmap footprint lies outside the image"
                    )));
                }
            }
        }
        for gt in &ground_truth {
            if gt.mask.extent() != extent {
                return Err(Error::InvalidGroundTruth(format!(
                    "frame {frame_id}: mask {}x{} does not match image {}x{}",
                    gt.mask.rows(),
                    gt.mask.cols(),
                    extent.rows,
                    extent.cols
                )));
            }
        }
        Ok(Self {
            frame_id,
            extent,
            passes,
            ground_truth,
        })
    }

    pub fn n_passes(&self) -> usize {
        self.passes.len()
    }

    /// All detections pooled across passes, in pass order.
    pub fn detections(&self) -> Vec<Detection> {
        self.passes.iter().flatten().cloned().collect()
    }
}

/// A collection of frames sharing one class vocabulary and image size.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub classes: ClassSpace,
    pub extent: Extent,
    pub frames: Vec<Frame>,
}

impl Dataset {
    pub fn new(classes: ClassSpace, extent: Extent, frames: Vec<Frame>) -> Result<Self> {
        let len = classes.prob_len();
        for frame in &frames {
            if frame.extent != extent {
                return Err(Error::Schema(format!(
                    "frame {} has extent {:?}, dataset declares {:?}",
                    frame.frame_id, frame.extent, extent
                )));
            }
            for d in frame.passes.iter().flatten() {
                if d.class_probs.len() != len {
                    return Err(Error::Schema(format!(
                        "frame {}: class probability vector of length {} (expected {len})",
                        frame.frame_id,
                        d.class_probs.len()
                    )));
                }
            }
            for gt in &frame.ground_truth {
                if gt.class_id >= classes.n_classes() {
                    return Err(Error::ClassMismatch {
                        index: gt.class_id,
                        classes: classes.n_classes(),
                    });
                }
            }
        }
        Ok(Self {
            classes,
            extent,
            frames,
        })
    }
}
