use serde::{Deserialize, Serialize};

use super::rle::{self, Rle};
use super::{round_all, round_sig, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::mask::{Extent, Grid, ProbMask};
use crate::model::{BBox, ClassProbVector, ClassSpace, Dataset, Detection, Frame, GroundTruthInstance};
use crate::sim::SimConfig;

/// Dense heatmap as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskRecord {
    /// `[row, col]` of the footprint's top-left pixel.
    pub origin: [i64; 2],
    pub rows: usize,
    pub cols: usize,
    /// Row-major probabilities.
    pub values: Vec<f64>,
    /// Image-frame `[rows, cols]` covered by the grid when it differs from the
    /// grid resolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub footprint: Option<[usize; 2]>,
}

impl MaskRecord {
    pub fn from_mask(mask: &ProbMask) -> Self {
        let (rows, cols) = mask.resolution();
        let (origin_r, origin_c) = mask.origin();
        Self {
            origin: [origin_r, origin_c],
            rows,
            cols,
            values: round_all(mask.grid().values()),
            footprint: (!mask.is_identity_placement()).then(|| [mask.footprint().0, mask.footprint().1]),
        }
    }

    pub fn to_mask(&self) -> Result<ProbMask> {
        let grid = Grid::from_vec(self.rows, self.cols, self.values.clone())?;
        let origin = (self.origin[0], self.origin[1]);
        match self.footprint {
            Some([fr, fc]) => ProbMask::with_footprint(origin, (fr, fc), grid),
            None => ProbMask::new(origin, grid),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    /// `[x, y, w, h]`.
    pub bbox: [f64; 4],
    pub class_probs: Vec<f64>,
    pub mask: MaskRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthRecord {
    pub bbox: [f64; 4],
    pub class_id: usize,
    pub mask_rle: Rle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub frame_id: String,
    #[serde(default)]
    pub ground_truth: Vec<GroundTruthRecord>,
    /// `passes[m]` lists the detections of pass `m`.
    #[serde(default)]
    pub passes: Vec<Vec<DetectionRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub version: u32,
    pub classes: Vec<String>,
    #[serde(default)]
    pub background: bool,
    /// `[rows, cols]`.
    pub image_extent: [usize; 2],
    /// Simulator settings, when the dataset was generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<SimConfig>,
    pub frames: Vec<FrameRecord>,
}

fn round_box(b: BBox) -> [f64; 4] {
    b.to_array().map(round_sig)
}

impl DatasetFile {
    pub fn from_dataset(dataset: &Dataset, generator: Option<&SimConfig>) -> Self {
        let frames = dataset
            .frames
            .iter()
            .map(|f| FrameRecord {
                frame_id: f.frame_id.clone(),
                ground_truth: f
                    .ground_truth
                    .iter()
                    .map(|g| GroundTruthRecord {
                        bbox: round_box(g.bbox),
                        class_id: g.class_id,
                        mask_rle: rle::encode(&g.mask),
                    })
                    .collect(),
                passes: f
                    .passes
                    .iter()
                    .map(|pass| {
                        pass.iter()
                            .map(|d| DetectionRecord {
                                bbox: round_box(d.bbox),
                                class_probs: round_all(d.class_probs.as_slice()),
                                mask: MaskRecord::from_mask(&d.mask),
                            })
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        Self {
            version: FORMAT_VERSION,
            classes: dataset.classes.names.clone(),
            background: dataset.classes.background,
            image_extent: [dataset.extent.rows, dataset.extent.cols],
            generator: generator.cloned(),
            frames,
        }
    }

    pub fn to_dataset(&self) -> Result<Dataset> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Schema(format!("unsupported dataset version {}", self.version)));
        }
        let classes = ClassSpace::new(self.classes.clone(), self.background)?;
        let extent = Extent::new(self.image_extent[0], self.image_extent[1])?;
        let frames = self
            .frames
            .iter()
            .map(|f| frame_from_record(f, extent, &classes))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(classes, extent, frames)
    }
}

fn frame_from_record(f: &FrameRecord, extent: Extent, classes: &ClassSpace) -> Result<Frame> {
    let context = |e: Error| Error::Schema(format!("frame {}: {e}", f.frame_id));
    let ground_truth = f
        .ground_truth
        .iter()
        .map(|g| {
            let mask = rle::decode(&g.mask_rle)?;
            if mask.extent() != extent {
                return Err(Error::InvalidGroundTruth(format!(
                    "RLE size {:?} differs from image extent",
                    g.mask_rle.size
                )));
            }
            let bbox = BBox::from_array(g.bbox)?;
            GroundTruthInstance::new(bbox, g.class_id, mask, f.frame_id.clone())
        })
        .collect::<Result<Vec<_>>>()
        .map_err(context)?;
    let passes = f
        .passes
        .iter()
        .enumerate()
        .map(|(m, pass)| {
            pass.iter()
                .map(|d| {
                    if d.class_probs.len() != classes.prob_len() {
                        return Err(Error::Schema(format!(
                            "pass {m}: class_probs has {} entries, expected {}",
                            d.class_probs.len(),
                            classes.prob_len()
                        )));
                    }
                    let bbox = BBox::from_array(d.bbox)?;
                    Detection::new(bbox, ClassProbVector::new(d.class_probs.clone())?, d.mask.to_mask()?, m)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()
        .map_err(context)?;
    Frame::new(f.frame_id.clone(), extent, passes, ground_truth)
}
