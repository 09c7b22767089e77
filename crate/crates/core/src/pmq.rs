//! Probabilistic Mask Quality.
//!
//! Each ground-truth/observation pair is scored by the geometric mean of a
//! label quality (probability given to the true class) and a spatial quality
//! `exp(−(L_FG + L_BG))`. Pairs are matched per frame with an optimal
//! assignment, and the dataset score divides the summed pair scores of the
//! true positives by `TP + FP + FN`.

use serde::{Deserialize, Serialize};

use crate::assignment::{maximize, WeightMatrix};
use crate::error::{Error, Result};
use crate::fusion::Observation;
use crate::mask::{clamp_prob, BinaryMask, Extent, Grid, DEFAULT_EPSILON};
use crate::model::{ClassProbVector, GroundTruthInstance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PmqConfig {
    /// Probability clamp inside the log losses.
    pub epsilon: f64,
    /// A pixel counts as detected when its probability exceeds this.
    pub detection_floor: f64,
    /// A match counts as a true positive only above this pPMQ.
    pub validity_floor: f64,
}

impl Default for PmqConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            detection_floor: 1e-3,
            validity_floor: 1e-12,
        }
    }
}

pub fn q_label(gt_class: usize, probs: &ClassProbVector) -> Result<f64> {
    probs.get(gt_class).ok_or(Error::ClassMismatch {
        index: gt_class,
        classes: probs.len(),
    })
}

fn check_pair(gt: &BinaryMask, obs: &Grid) -> Result<usize> {
    if gt.rows() != obs.rows() || gt.cols() != obs.cols() {
        return Err(Error::InvalidMask(format!(
            "ground truth {}x{} and observation {}x{} differ in extent",
            gt.rows(),
            gt.cols(),
            obs.rows(),
            obs.cols()
        )));
    }
    match gt.count() {
        0 => Err(Error::InvalidGroundTruth("mask has no foreground pixel".into())),
        n => Ok(n),
    }
}

/// Mean negative log probability over the ground-truth pixels.
pub fn fg_loss(gt: &BinaryMask, obs: &Grid, epsilon: f64) -> Result<f64> {
    let n = check_pair(gt, obs)?;
    let sum: f64 = gt
        .bits()
        .iter()
        .zip(obs.values())
        .filter(|(g, _)| **g)
        .map(|(_, &p)| -clamp_prob(p, epsilon).ln())
        .sum();
    Ok(sum / n as f64)
}

/// Negative log of `1 − p` summed over detected pixels outside the ground
/// truth, normalized by the ground-truth area.
pub fn bg_loss(gt: &BinaryMask, obs: &Grid, epsilon: f64, detection_floor: f64) -> Result<f64> {
    let n = check_pair(gt, obs)?;
    let sum: f64 = gt
        .bits()
        .iter()
        .zip(obs.values())
        .filter(|(g, &p)| !**g && p > detection_floor)
        .map(|(_, &p)| -(1.0 - clamp_prob(p, epsilon)).ln())
        .sum();
    Ok(sum / n as f64)
}

/// Spatial quality of a full-image probability grid against a binary mask.
pub fn spatial_quality(gt: &BinaryMask, obs: &Grid, cfg: &PmqConfig) -> Result<f64> {
    let fg = fg_loss(gt, obs, cfg.epsilon)?;
    let bg = bg_loss(gt, obs, cfg.epsilon, cfg.detection_floor)?;
    Ok((-(fg + bg)).exp())
}

fn observation_grid(obs: &Observation, extent: Extent) -> Grid {
    obs.mask.placed(Default::default()).to_full_image(extent)
}

pub fn q_spatial(gt: &GroundTruthInstance, obs: &Observation, cfg: &PmqConfig) -> Result<f64> {
    spatial_quality(&gt.mask, &observation_grid(obs, gt.mask.extent()), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairQuality {
    pub gt_index: usize,
    pub obs_index: usize,
    pub q_label: f64,
    pub q_spatial: f64,
    pub ppmq: f64,
}

/// All pair qualities of one frame, indexed `[gt][obs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix {
    pub n_gt: usize,
    pub n_obs: usize,
    pub pairs: Vec<PairQuality>,
}

impl PairMatrix {
    pub fn get(&self, gt: usize, obs: usize) -> &PairQuality {
        &self.pairs[gt * self.n_obs + obs]
    }

    pub fn ppmq(&self) -> WeightMatrix {
        WeightMatrix::new(self.n_gt, self.n_obs, self.pairs.iter().map(|p| p.ppmq).collect())
    }
}

pub fn pair_ppmq(q_label: f64, q_spatial: f64) -> f64 {
    (q_label * q_spatial).sqrt()
}

pub fn pairwise_pmq(gts: &[GroundTruthInstance], observations: &[Observation], cfg: &PmqConfig) -> Result<PairMatrix> {
    let grids: Vec<Grid> = match gts.first() {
        Some(gt) => {
            let extent = gt.mask.extent();
            observations.iter().map(|o| observation_grid(o, extent)).collect()
        }
        None => Vec::new(),
    };
    let mut pairs = Vec::with_capacity(gts.len() * observations.len());
    for (gi, gt) in gts.iter().enumerate() {
        for (oi, (obs, grid)) in observations.iter().zip(&grids).enumerate() {
            let ql = q_label(gt.class_id, &obs.class_probs)?;
            let qs = spatial_quality(&gt.mask, grid, cfg)?;
            pairs.push(PairQuality {
                gt_index: gi,
                obs_index: oi,
                q_label: ql,
                q_spatial: qs,
                ppmq: pair_ppmq(ql, qs),
            });
        }
    }
    Ok(PairMatrix {
        n_gt: gts.len(),
        n_obs: observations.len(),
        pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub gt_index: usize,
    pub obs_index: usize,
    pub ppmq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAssignment {
    pub matches: Vec<Match>,
    pub n_tp: usize,
    pub n_fp: usize,
    pub n_fn: usize,
}

impl FrameAssignment {
    pub fn q(&self) -> Vec<f64> {
        self.matches.iter().map(|m| m.ppmq).collect()
    }

    pub fn matched_obs(&self, gt_index: usize) -> Option<usize> {
        self.matches.iter().find(|m| m.gt_index == gt_index).map(|m| m.obs_index)
    }

    pub fn matched_gt(&self, obs_index: usize) -> Option<usize> {
        self.matches.iter().find(|m| m.obs_index == obs_index).map(|m| m.gt_index)
    }
}

/// Optimal one-to-one matching of ground truth (rows) to observations
/// (columns). Matches at or below `validity_floor` are dropped, leaving a
/// false negative and a false positive.
pub fn assign_hungarian(ppmq: &WeightMatrix, validity_floor: f64) -> FrameAssignment {
    let matches: Vec<Match> = maximize(ppmq)
        .into_iter()
        .enumerate()
        .filter_map(|(gt, obs)| obs.map(|o| (gt, o)))
        .map(|(gt, obs)| Match {
            gt_index: gt,
            obs_index: obs,
            ppmq: ppmq.get(gt, obs),
        })
        .filter(|m| m.ppmq > validity_floor)
        .collect();
    let n_tp = matches.len();
    FrameAssignment {
        matches,
        n_tp,
        n_fp: ppmq.cols() - n_tp,
        n_fn: ppmq.rows() - n_tp,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmqResult {
    pub pmq: f64,
    pub mean_ppmq_over_tp: f64,
    pub frames: Vec<FrameAssignment>,
    pub n_tp: usize,
    pub n_fp: usize,
    pub n_fn: usize,
    pub n_frames: usize,
}

pub fn aggregate_pmq(frames: &[FrameAssignment]) -> Result<PmqResult> {
    if frames.is_empty() {
        return Err(Error::UndefinedMetric("PMQ over zero frames".into()));
    }
    let n_tp: usize = frames.iter().map(|f| f.n_tp).sum();
    let n_fp: usize = frames.iter().map(|f| f.n_fp).sum();
    let n_fn: usize = frames.iter().map(|f| f.n_fn).sum();
    let denom = n_tp + n_fp + n_fn;
    if denom == 0 {
        return Err(Error::UndefinedMetric(
            "PMQ with no ground truth and no observations".into(),
        ));
    }
    let total: f64 = frames.iter().flat_map(|f| f.matches.iter().map(|m| m.ppmq)).sum();
    Ok(PmqResult {
        pmq: total / denom as f64,
        mean_ppmq_over_tp: if n_tp == 0 { 0.0 } else { total / n_tp as f64 },
        frames: frames.to_vec(),
        n_tp,
        n_fp,
        n_fn,
        n_frames: frames.len(),
    })
}
