use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::calibration::SparsificationCurve;
use crate::clustering::ClusteringConfig;
use crate::eval::EvalConfig;
use crate::fusion::FusionConfig;
use crate::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassMetrics {
    /// `None` when the class has no ground truth and no observation.
    pub pmq: Option<f64>,
    /// Means over the class's true positives.
    pub mean_q_label: Option<f64>,
    pub mean_q_spatial: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticMetrics {
    pub ece: Option<f64>,
    pub ause: Option<f64>,
    pub brier_mean: Option<f64>,
    /// Matched observations used for the semantic metrics.
    pub n_samples: usize,
    /// Observations left out because they have no ground-truth match.
    pub n_unmatched: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialMetrics {
    pub ece: Option<f64>,
    pub ause: Option<f64>,
    pub n_pixels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub frames: usize,
}

/// Every setting that influences the reported numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigEcho {
    pub classes: Vec<String>,
    pub background: bool,
    pub image_extent: [usize; 2],
    pub clustering: ClusteringConfig,
    pub fusion: FusionConfig,
    pub eval: EvalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<SimConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub version: u32,
    pub pmq: f64,
    /// Mean pPMQ over true positives; `None` without any.
    pub mean_ppmq: Option<f64>,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub semantic: SemanticMetrics,
    pub spatial: SpatialMetrics,
    pub counts: Counts,
    pub config_echo: ConfigEcho,
}

/// `fraction,model,oracle` rows with six decimals.
pub fn curve_csv(curve: &SparsificationCurve) -> String {
    let mut out = String::from("fraction,model,oracle\n");
    for ((f, m), o) in curve.fractions.iter().zip(&curve.model).zip(&curve.oracle) {
        writeln!(out, "{f:.6},{m:.6},{o:.6}").expect("writing to a String");
    }
    out
}
