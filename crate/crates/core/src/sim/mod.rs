//! Synthetic scenes and stochastic detection passes.
//!
//! Stands in for a sampled network: every pass perturbs the ground truth with
//! box jitter, logit noise, boundary blur and pixel flips. The sampling regime
//! decides how the noise of different passes is correlated.

mod masks;
mod noise;
mod passes;
mod scene;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Extent;
use crate::model::{ClassSpace, Dataset};

pub use masks::{gen_dropout_masks, gen_masksembles, masksembles_min_len, masksembles_multiplicity, SamplingMask};
pub use passes::simulate_passes;
pub use scene::gen_scene;

/// Affordance vocabulary used when a config does not name its classes.
pub const DEFAULT_CLASSES: [&str; 9] = [
    "contain", "cut", "display", "engine", "grasp", "hit", "pound", "support", "w-grasp",
];

/// How the noise of the `M` passes is coupled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Shared plus fresh noise, mixed by `correlation`.
    #[default]
    McDropout,
    /// Noise is a sum of latent components gated by Masksembles masks.
    MaskEnsembles,
    /// Independent noise per pass.
    DeepEnsembles,
    /// Fresh noise plus a per-pass systematic bias drawn once per dataset.
    SnapshotEnsembles,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation of the box jitter, in pixels.
    pub bbox_sigma: f64,
    /// Standard deviation of the additive class-logit noise.
    pub logit_sigma: f64,
    /// Probability that a heatmap pixel is inverted (`p → 1 − p`).
    pub mask_flip_rate: f64,
    /// Probability that a pass misses an instance.
    pub miss_rate: f64,
    /// Gaussian blur of the ground-truth mask, in pixels (0 = hard edges).
    pub mask_blur: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            bbox_sigma: 1.0,
            logit_sigma: 1.0,
            mask_flip_rate: 0.02,
            miss_rate: 0.05,
            mask_blur: 1.0,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            bbox_sigma: 0.0,
            logit_sigma: 0.0,
            mask_flip_rate: 0.0,
            miss_rate: 0.0,
            mask_blur: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    /// `[rows, cols]`.
    pub image_extent: [usize; 2],
    pub n_frames: usize,
    /// Inclusive `[min, max]` instance count per frame.
    pub instances_per_frame: [usize; 2],
    /// Inclusive `[min, max]` object side length in pixels.
    pub object_size: [usize; 2],
    /// Placement is retried while a new instance overlaps an existing one
    /// above this mask IoU.
    pub max_instance_iou: f64,
    pub classes: Vec<String>,
    pub background: bool,
    /// Number of stochastic passes `M`.
    pub passes: usize,
    pub regime: Regime,
    pub noise: NoiseConfig,
    /// Inter-pass noise correlation in [0, 1].
    pub correlation: f64,
    /// Logit given to the true class before noise.
    pub logit_scale: f64,
    pub masksembles_scale: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            image_extent: [96, 128],
            n_frames: 10,
            instances_per_frame: [1, 4],
            object_size: [12, 40],
            max_instance_iou: 0.25,
            classes: DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect(),
            background: false,
            passes: 8,
            regime: Regime::default(),
            noise: NoiseConfig::default(),
            correlation: 0.5,
            logit_scale: 4.0,
            masksembles_scale: 2.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let [rows, cols] = self.image_extent;
        Extent::new(rows, cols)?;
        if self.passes == 0 {
            return bad("passes must be at least 1".into());
        }
        if self.classes.is_empty() {
            return bad("at least one class is required".into());
        }
        let [lo, hi] = self.instances_per_frame;
        if lo > hi {
            return bad(format!("instances_per_frame [{lo}, {hi}] is not a range"));
        }
        let [smin, smax] = self.object_size;
        if smin < 2 || smin > smax || smax > rows.min(cols) {
            return bad(format!(
                "object_size [{smin}, {smax}] must satisfy 2 <= min <= max <= {}",
                rows.min(cols)
            ));
        }
        let n = &self.noise;
        for (name, v) in [("mask_flip_rate", n.mask_flip_rate), ("miss_rate", n.miss_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} must lie in [0, 1]"));
            }
        }
        for (name, v) in [
            ("bbox_sigma", n.bbox_sigma),
            ("logit_sigma", n.logit_sigma),
            ("mask_blur", n.mask_blur),
            ("logit_scale", self.logit_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return bad(format!("correlation = {} must lie in [0, 1]", self.correlation));
        }
        if !(0.0..=1.0).contains(&self.max_instance_iou) {
            return bad(format!("max_instance_iou = {} must lie in [0, 1]", self.max_instance_iou));
        }
        if !(self.masksembles_scale >= 1.0 && self.masksembles_scale.is_finite()) {
            return bad(format!("masksembles_scale = {} must be >= 1", self.masksembles_scale));
        }
        if self.regime == Regime::MaskEnsembles {
            masksembles_min_len(self.passes, self.masksembles_scale)?;
        }
        Ok(())
    }

    pub fn extent(&self) -> Extent {
        Extent {
            rows: self.image_extent[0],
            cols: self.image_extent[1],
        }
    }

    pub fn class_space(&self) -> Result<ClassSpace> {
        ClassSpace::new(self.classes.clone(), self.background)
    }
}

/// Deterministic per-stream seed from a base seed and a path of indices.
pub(crate) fn derive_seed(base: u64, path: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(splitmix(base), |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Ground truth plus `M` passes for every frame.
pub fn simulate_dataset(cfg: &SimConfig) -> Result<Dataset> {
    cfg.validate()?;
    let frames = (0..cfg.n_frames)
        .map(|f| {
            let mut frame = gen_scene(cfg, f)?;
            frame.passes = simulate_passes(&frame, cfg, f)?;
            Ok(frame)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(cfg.class_space()?, cfg.extent(), frames)
}
