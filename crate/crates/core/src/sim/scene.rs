use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, SimConfig};
use crate::error::Result;
use crate::mask::BinaryMask;
use crate::model::{BBox, Frame, GroundTruthInstance};

const SCENE: u64 = 0x5C;
const PLACEMENT_ATTEMPTS: usize = 64;

pub(crate) fn frame_id(index: usize) -> String {
    format!("frame_{index:05}")
}

fn shape_mask(rows: usize, cols: usize, top: usize, left: usize, h: usize, w: usize, ellipse: bool) -> BinaryMask {
    let cy = top as f64 + h as f64 / 2.0;
    let cx = left as f64 + w as f64 / 2.0;
    let (ry, rx) = (h as f64 / 2.0, w as f64 / 2.0);
    BinaryMask::from_fn(rows, cols, |r, c| {
        let inside_box = r >= top && r < top + h && c >= left && c < left + w;
        if !inside_box {
            return false;
        }
        if !ellipse {
            return true;
        }
        let dy = (r as f64 + 0.5 - cy) / ry;
        let dx = (c as f64 + 0.5 - cx) / rx;
        dy * dy + dx * dx <= 1.0
    })
}

/// Ground truth for frame `index`: rectangles and ellipses with random classes.
/// Passes are left empty.
pub fn gen_scene(cfg: &SimConfig, index: usize) -> Result<Frame> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[SCENE, index as u64]));
    let extent = cfg.extent();
    let id = frame_id(index);
    let [lo, hi] = cfg.instances_per_frame;
    let [smin, smax] = cfg.object_size;
    let target = rng.gen_range(lo..=hi);

    let mut instances: Vec<GroundTruthInstance> = Vec::with_capacity(target);
    while instances.len() < target {
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let h = rng.gen_range(smin..=smax);
            let w = rng.gen_range(smin..=smax);
            let top = rng.gen_range(0..=extent.rows - h);
            let left = rng.gen_range(0..=extent.cols - w);
            let ellipse = rng.gen_bool(0.5);
            let class_id = rng.gen_range(0..cfg.classes.len());
            let mask = shape_mask(extent.rows, extent.cols, top, left, h, w, ellipse);
            if instances.iter().any(|g| g.mask.iou(&mask) > cfg.max_instance_iou) {
                continue;
            }
            placed = Some((mask, class_id));
            break;
        }
        let Some((mask, class_id)) = placed else {
            // Scene is too crowded for another instance.
            break;
        };
        let win = mask.bounding_window().expect("shapes are at least 2x2");
        let bbox = BBox::new(win.col as f64, win.row as f64, win.cols as f64, win.rows as f64)?;
        instances.push(GroundTruthInstance::new(bbox, class_id, mask, id.clone())?);
    }
    Frame::new(id, extent, Vec::new(), instances)
}
