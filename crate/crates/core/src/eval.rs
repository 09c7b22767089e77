//! Dataset-level evaluation of fused observations against ground truth.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::calibration::{
    brier, ece, semantic_ause, spatial_ause, spatial_brier, CalibSample, SparsificationConfig, SparsificationCurve,
};
use crate::error::{Error, Result};
use crate::fusion::Observation;
use crate::io::{ClassMetrics, Counts, SemanticMetrics, SpatialMetrics};
use crate::mask::Resampling;
use crate::model::{Dataset, Frame};
use crate::pmq::{aggregate_pmq, assign_hungarian, pairwise_pmq, PairMatrix, PmqConfig, PmqResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub pmq: PmqConfig,
    /// Equal-width reliability bins for ECE.
    pub n_bins: usize,
    pub sparsification: SparsificationConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            pmq: PmqConfig::default(),
            n_bins: 10,
            sparsification: SparsificationConfig::default(),
        }
    }
}

/// Observations of one frame, keyed by frame id.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservations {
    pub frame_id: String,
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub pmq: PmqResult,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub semantic: SemanticMetrics,
    pub spatial: SpatialMetrics,
    pub counts: Counts,
    pub semantic_samples: Vec<CalibSample>,
    pub spatial_samples: Vec<CalibSample>,
    pub semantic_curve: Option<SparsificationCurve>,
    pub spatial_curve: Option<SparsificationCurve>,
}

/// Pairs every ground-truth frame with its observations, sorted by frame id.
fn align<'a>(dataset: &'a Dataset, observed: &'a [FrameObservations]) -> Result<Vec<(&'a Frame, &'a [Observation])>> {
    let gt_ids: BTreeSet<&str> = dataset.frames.iter().map(|f| f.frame_id.as_str()).collect();
    let obs_ids: BTreeSet<&str> = observed.iter().map(|f| f.frame_id.as_str()).collect();
    if gt_ids.len() != dataset.frames.len() || obs_ids.len() != observed.len() {
        return Err(Error::Schema("duplicate frame_id".into()));
    }
    let missing_obs: Vec<String> = gt_ids.difference(&obs_ids).map(|s| s.to_string()).collect();
    let missing_gt: Vec<String> = obs_ids.difference(&gt_ids).map(|s| s.to_string()).collect();
    if !missing_obs.is_empty() || !missing_gt.is_empty() {
        return Err(Error::Alignment { missing_obs, missing_gt });
    }
    let by_id: BTreeMap<&str, &[Observation]> = observed
        .iter()
        .map(|f| (f.frame_id.as_str(), f.observations.as_slice()))
        .collect();
    let mut frames: Vec<&Frame> = dataset.frames.iter().collect();
    frames.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
    Ok(frames.into_iter().map(|f| (f, by_id[f.frame_id.as_str()])).collect())
}

#[derive(Default)]
struct ClassTally {
    tp: usize,
    fp: usize,
    fn_: usize,
    q_sum: f64,
    q_label_sum: f64,
    q_spatial_sum: f64,
}

fn mean(sum: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| sum / n as f64)
}

/// Calibration samples of the pixels in a matched observation's footprint.
fn pixel_samples(frame: &Frame, gt_mask: &crate::mask::BinaryMask, obs: &Observation, out: &mut Vec<CalibSample>) {
    let heat = obs.mask.placed(Resampling::default());
    let window = obs.uncertainty.window().clip(frame.extent);
    for (r, c) in window.pixels() {
        let p = heat.at(r, c);
        let fg = gt_mask.at(r, c);
        out.push(CalibSample {
            confidence: p.max(1.0 - p),
            correct: (p > 0.5) == fg,
            error: spatial_brier(p, fg),
            variance: obs.uncertainty.spatial_total_at(r, c),
        });
    }
}

/// PMQ, per-class PMQ, and semantic/spatial calibration over a dataset.
///
/// Fails on misaligned frame ids and when PMQ is undefined (no ground truth
/// and no observations). Calibration metrics that cannot be computed from
/// the matches are reported as `None`.
pub fn evaluate(dataset: &Dataset, observed: &[FrameObservations], cfg: &EvalConfig) -> Result<Evaluation> {
    let frames = align(dataset, observed)?;
    let classes = &dataset.classes;
    let class_name = |c: usize| -> String {
        classes.names.get(c).cloned().unwrap_or_else(|| "background".to_string())
    };
    let mut tallies: BTreeMap<String, ClassTally> = classes.names.iter().map(|n| (n.clone(), ClassTally::default())).collect();

    let mut assignments = Vec::with_capacity(frames.len());
    let mut semantic_samples = Vec::new();
    let mut spatial_samples = Vec::new();
    let mut n_unmatched = 0;
    for (frame, observations) in &frames {
        let pairs: PairMatrix = pairwise_pmq(&frame.ground_truth, observations, &cfg.pmq)?;
        let assignment = assign_hungarian(&pairs.ppmq(), cfg.pmq.validity_floor);
        for (gi, gt) in frame.ground_truth.iter().enumerate() {
            let tally = tallies.entry(class_name(gt.class_id)).or_default();
            match assignment.matched_obs(gi) {
                Some(oi) => {
                    let pq = pairs.get(gi, oi);
                    tally.tp += 1;
                    tally.q_sum += pq.ppmq;
                    tally.q_label_sum += pq.q_label;
                    tally.q_spatial_sum += pq.q_spatial;
                    let obs = &observations[oi];
                    semantic_samples.push(CalibSample {
                        confidence: obs.confidence(),
                        correct: obs.label() == gt.class_id,
                        error: brier(&obs.class_probs, gt.class_id)?,
                        variance: obs.uncertainty.semantic_total(),
                    });
                    pixel_samples(frame, &gt.mask, obs, &mut spatial_samples);
                }
                None => tally.fn_ += 1,
            }
        }
        for (oi, obs) in observations.iter().enumerate() {
            if assignment.matched_gt(oi).is_none() {
                n_unmatched += 1;
                tallies.entry(class_name(obs.label())).or_default().fp += 1;
            }
        }
        assignments.push(assignment);
    }
    let pmq = aggregate_pmq(&assignments)?;

    let per_class = tallies
        .into_iter()
        .map(|(name, t)| {
            let denom = t.tp + t.fp + t.fn_;
            let metrics = ClassMetrics {
                pmq: mean(t.q_sum, denom),
                mean_q_label: mean(t.q_label_sum, t.tp),
                mean_q_spatial: mean(t.q_spatial_sum, t.tp),
                tp: t.tp,
                fp: t.fp,
                fn_: t.fn_,
            };
            (name, metrics)
        })
        .collect();

    let semantic_curve = semantic_ause(&semantic_samples, &cfg.sparsification).ok();
    let spatial_curve = spatial_ause(&spatial_samples, &cfg.sparsification).ok();
    let semantic = SemanticMetrics {
        ece: ece(&semantic_samples, cfg.n_bins).ok(),
        ause: semantic_curve.as_ref().map(|c| c.ause),
        brier_mean: mean(semantic_samples.iter().map(|s| s.error).sum(), semantic_samples.len()),
        n_samples: semantic_samples.len(),
        n_unmatched,
    };
    let spatial = SpatialMetrics {
        ece: ece(&spatial_samples, cfg.n_bins).ok(),
        ause: spatial_curve.as_ref().map(|c| c.ause),
        n_pixels: spatial_samples.len(),
    };
    let counts = Counts {
        tp: pmq.n_tp,
        fp: pmq.n_fp,
        fn_: pmq.n_fn,
        frames: pmq.n_frames,
    };
    Ok(Evaluation {
        pmq,
        per_class,
        semantic,
        spatial,
        counts,
        semantic_samples,
        spatial_samples,
        semantic_curve,
        spatial_curve,
    })
}
