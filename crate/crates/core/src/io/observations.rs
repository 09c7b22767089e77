use serde::{Deserialize, Serialize};

use super::dataset::MaskRecord;
use super::{round_all, round_sig, FORMAT_VERSION};
use crate::clustering::ClusteringConfig;
use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, Observation, UncertaintyMaps};
use crate::mask::{Grid, PlacedGrid, Window};
use crate::model::{BBox, ClassProbVector};

/// Spatial maps share one footprint; semantic values are covariance traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyRecord {
    pub origin: [i64; 2],
    pub rows: usize,
    pub cols: usize,
    pub spatial_epistemic: Vec<f64>,
    pub spatial_aleatoric: Vec<f64>,
    pub semantic_epistemic: f64,
    pub semantic_aleatoric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRecord {
    pub bbox: [f64; 4],
    pub class_probs: Vec<f64>,
    pub label: usize,
    /// Number of clustered detections.
    pub k: usize,
    pub mask: MaskRecord,
    pub uncertainty: UncertaintyRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameObservationsRecord {
    pub frame_id: String,
    pub n_passes: usize,
    pub observations: Vec<ObservationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationsFile {
    pub version: u32,
    pub classes: Vec<String>,
    #[serde(default)]
    pub background: bool,
    pub image_extent: [usize; 2],
    pub clustering: ClusteringConfig,
    pub fusion: FusionConfig,
    pub frames: Vec<FrameObservationsRecord>,
}

impl ObservationRecord {
    pub fn from_observation(obs: &Observation) -> Self {
        let u = &obs.uncertainty;
        let w = u.window();
        Self {
            bbox: obs.bbox.to_array().map(round_sig),
            class_probs: round_all(obs.class_probs.as_slice()),
            label: obs.label(),
            k: obs.k,
            mask: MaskRecord::from_mask(&obs.mask),
            uncertainty: UncertaintyRecord {
                origin: [w.row, w.col],
                rows: w.rows,
                cols: w.cols,
                spatial_epistemic: round_all(u.spatial_epistemic.grid.values()),
                spatial_aleatoric: round_all(u.spatial_aleatoric.grid.values()),
                semantic_epistemic: round_sig(u.semantic_epistemic),
                semantic_aleatoric: round_sig(u.semantic_aleatoric),
            },
        }
    }

    pub fn to_observation(&self) -> Result<Observation> {
        let u = &self.uncertainty;
        let window = Window::new(u.origin[0], u.origin[1], u.rows, u.cols);
        let map = |values: &[f64], name: &str| -> Result<PlacedGrid> {
            if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Schema(format!("{name} holds a negative or non-finite variance")));
            }
            Ok(PlacedGrid {
                window,
                grid: Grid::from_vec(u.rows, u.cols, values.to_vec())?,
            })
        };
        let class_probs = ClassProbVector::new(self.class_probs.clone())?;
        if self.k == 0 {
            return Err(Error::Schema("observation with k = 0".into()));
        }
        Ok(Observation {
            bbox: BBox::from_array(self.bbox)?,
            class_probs,
            mask: self.mask.to_mask()?,
            k: self.k,
            uncertainty: UncertaintyMaps {
                spatial_epistemic: map(&u.spatial_epistemic, "spatial_epistemic")?,
                spatial_aleatoric: map(&u.spatial_aleatoric, "spatial_aleatoric")?,
                semantic_epistemic: u.semantic_epistemic,
                semantic_aleatoric: u.semantic_aleatoric,
            },
        })
    }
}

impl FrameObservationsRecord {
    pub fn new(frame_id: impl Into<String>, n_passes: usize, observations: &[Observation]) -> Self {
        Self {
            frame_id: frame_id.into(),
            n_passes,
            observations: observations.iter().map(ObservationRecord::from_observation).collect(),
        }
    }

    pub fn to_observations(&self, prob_len: usize) -> Result<Vec<Observation>> {
        self.observations
            .iter()
            .enumerate()
            .map(|(i, o)| {
                if o.class_probs.len() != prob_len {
                    return Err(Error::Schema(format!(
                        "frame {} observation {i}: class_probs has {} entries, expected {prob_len}",
                        self.frame_id,
                        o.class_probs.len()
                    )));
                }
                o.to_observation()
            })
            .collect()
    }
}

impl ObservationsFile {
    pub fn check_version(&self) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Schema(format!("unsupported observations version {}", self.version)));
        }
        Ok(())
    }
}
