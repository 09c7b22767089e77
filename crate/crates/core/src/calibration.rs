//! Calibration metrics: expected calibration error, Brier score and
//! sparsification curves (AUSE).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClassProbVector;

/// One scored prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibSample {
    /// Predicted probability of the predicted outcome, in [0, 1].
    pub confidence: f64,
    pub correct: bool,
    /// True error of the prediction (Brier score).
    pub error: f64,
    /// Estimated variance of the prediction.
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub accuracy: f64,
    pub confidence: f64,
}

/// Equal-width bins over [0, 1]; the last bin includes 1.0.
pub fn bin_index(confidence: f64, n_bins: usize) -> usize {
    ((confidence * n_bins as f64).floor() as usize).min(n_bins - 1)
}

pub fn reliability_bins(samples: &[(f64, bool)], n_bins: usize) -> Result<Vec<ReliabilityBin>> {
    if n_bins == 0 {
        return Err(Error::InvalidConfig("ECE needs at least one bin".into()));
    }
    if samples.is_empty() {
        return Err(Error::UndefinedMetric("ECE over an empty sample set".into()));
    }
    let mut count = vec![0usize; n_bins];
    let mut hits = vec![0usize; n_bins];
    let mut conf = vec![0.0; n_bins];
    for &(c, correct) in samples {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidProbs(format!("confidence {c} outside [0, 1]")));
        }
        let b = bin_index(c, n_bins);
        count[b] += 1;
        hits[b] += correct as usize;
        conf[b] += c;
    }
    Ok((0..n_bins)
        .map(|b| {
            let n = count[b].max(1) as f64;
            ReliabilityBin {
                lower: b as f64 / n_bins as f64,
                upper: (b + 1) as f64 / n_bins as f64,
                count: count[b],
                accuracy: hits[b] as f64 / n,
                confidence: conf[b] / n,
            }
        })
        .collect())
}

/// Bin-weighted mean of `|accuracy − confidence|`.
pub fn ece_pairs(samples: &[(f64, bool)], n_bins: usize) -> Result<f64> {
    let bins = reliability_bins(samples, n_bins)?;
    let total = samples.len() as f64;
    Ok(bins
        .iter()
        .map(|b| b.count as f64 / total * (b.accuracy - b.confidence).abs())
        .sum())
}

pub fn ece(samples: &[CalibSample], n_bins: usize) -> Result<f64> {
    let pairs: Vec<(f64, bool)> = samples.iter().map(|s| (s.confidence, s.correct)).collect();
    ece_pairs(&pairs, n_bins)
}

/// Multiclass Brier score of one prediction: `Σ_c (p_c − 1[c = gt])²`.
pub fn brier(probs: &ClassProbVector, gt_class: usize) -> Result<f64> {
    if gt_class >= probs.len() {
        return Err(Error::ClassMismatch {
            index: gt_class,
            classes: probs.len(),
        });
    }
    Ok(probs
        .as_slice()
        .iter()
        .enumerate()
        .map(|(c, &p)| {
            let target = if c == gt_class { 1.0 } else { 0.0 };
            (p - target) * (p - target)
        })
        .sum())
}

/// Brier score of a single foreground probability.
pub fn spatial_brier(pixel_prob: f64, pixel_gt: bool) -> f64 {
    if pixel_gt {
        (pixel_prob - 1.0).powi(2)
    } else {
        pixel_prob * pixel_prob
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparsificationConfig {
    pub n_steps: usize,
    pub max_fraction: f64,
}

impl Default for SparsificationConfig {
    fn default() -> Self {
        Self {
            n_steps: 100,
            max_fraction: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsificationCurve {
    pub fractions: Vec<f64>,
    pub model: Vec<f64>,
    pub oracle: Vec<f64>,
    pub ause: f64,
}

/// Indices sorted by descending key, ties by ascending index.
fn removal_order(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]));
    order
}

/// Mean error after removing the first `removed` entries of `order`, for
/// every requested removal count.
fn remaining_means(errors: &[f64], order: &[usize], counts: &[usize]) -> Vec<f64> {
    // suffix[i] = sum of errors of order[i..].
    let mut suffix = vec![0.0; order.len() + 1];
    for i in (0..order.len()).rev() {
        suffix[i] = suffix[i + 1] + errors[order[i]];
    }
    counts
        .iter()
        .map(|&removed| suffix[removed] / (order.len() - removed) as f64)
        .collect()
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum()
}

/// Sparsification curves and their normalized area difference.
///
/// At fraction `f` the `⌈f·N⌉` items ranked highest by variance (model) or
/// by true error (oracle) are removed, at most `N − 1` of them.
pub fn sparsification(errors: &[f64], variances: &[f64], cfg: &SparsificationConfig) -> Result<SparsificationCurve> {
    let n = errors.len();
    if n == 0 || variances.len() != n {
        return Err(Error::UndefinedMetric(format!(
            "sparsification needs equal-length non-empty inputs (got {} errors, {} variances)",
            n,
            variances.len()
        )));
    }
    if cfg.n_steps < 2 || !(cfg.max_fraction > 0.0 && cfg.max_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "sparsification needs n_steps >= 2 and max_fraction in (0, 1), got {} and {}",
            cfg.n_steps, cfg.max_fraction
        )));
    }
    if errors.iter().chain(variances).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::UndefinedMetric("errors and variances must be finite and non-negative".into()));
    }
    let base = errors.iter().sum::<f64>() / n as f64;
    if base <= 0.0 {
        return Err(Error::UndefinedMetric("mean error is zero; curves cannot be normalized".into()));
    }

    let fractions: Vec<f64> = (0..cfg.n_steps)
        .map(|i| cfg.max_fraction * i as f64 / (cfg.n_steps - 1) as f64)
        .collect();
    let counts: Vec<usize> = fractions
        .iter()
        .map(|f| ((f * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n - 1))
        .collect();
    // counts[0] is 0, so each curve is divided by its own unpruned mean. This
    // equals `base` up to summation order and pins both curves to 1 at f = 0.
    let normalize = |v: Vec<f64>| -> Vec<f64> {
        let first = v[0];
        v.into_iter().map(|x| x / first).collect()
    };
    let model = normalize(remaining_means(errors, &removal_order(variances), &counts));
    let oracle = normalize(remaining_means(errors, &removal_order(errors), &counts));
    let gap: Vec<f64> = model.iter().zip(&oracle).map(|(m, o)| m - o).collect();
    let ause = trapezoid(&fractions, &gap) / cfg.max_fraction;
    Ok(SparsificationCurve {
        fractions,
        model,
        oracle,
        ause,
    })
}

fn ause_of(samples: &[CalibSample], cfg: &SparsificationConfig, what: &str) -> Result<SparsificationCurve> {
    if samples.len() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "{what} AUSE needs at least two samples, got {}",
            samples.len()
        )));
    }
    let errors: Vec<f64> = samples.iter().map(|s| s.error).collect();
    let variances: Vec<f64> = samples.iter().map(|s| s.variance).collect();
    sparsification(&errors, &variances, cfg)
}

/// AUSE over matched detections (Brier error vs. semantic variance).
pub fn semantic_ause(samples: &[CalibSample], cfg: &SparsificationConfig) -> Result<SparsificationCurve> {
    ause_of(samples, cfg, "semantic")
}

/// AUSE over pixels carrying an estimated variance.
pub fn spatial_ause(samples: &[CalibSample], cfg: &SparsificationConfig) -> Result<SparsificationCurve> {
    ause_of(samples, cfg, "spatial")
}
