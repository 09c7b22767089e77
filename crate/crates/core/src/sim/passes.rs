use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::noise::PassNoise;
use super::{derive_seed, gen_masksembles, masksembles_min_len, Regime, SimConfig};
use crate::error::Result;
use crate::mask::{Grid, PlacedGrid, ProbMask, Window};
use crate::model::{BBox, ClassProbVector, Detection, Frame, GroundTruthInstance};

const PASS_NOISE: u64 = 0x9A;
const MASKS: u64 = 0x3E;
const BIAS: u64 = 0xB1;

/// Ground-truth mask convolved with a Gaussian of width `sigma` on `window`.
fn soft_mask(gt: &GroundTruthInstance, window: Window, sigma: f64) -> PlacedGrid {
    let mut hard = PlacedGrid::zeros(window);
    for (r, c) in window.pixels() {
        if gt.mask.at(r, c) {
            hard.grid.set((r - window.row) as usize, (c - window.col) as usize, 1.0);
        }
    }
    if sigma <= 0.0 {
        return hard;
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.into_iter().map(|k| k / norm).collect();
    let (rows, cols) = (window.rows as i64, window.cols as i64);
    let blur = |src: &Grid, horizontal: bool| {
        Grid::from_fn(window.rows, window.cols, |r, c| {
            let mut acc = 0.0;
            for (ki, d) in (-radius..=radius).enumerate() {
                let (rr, cc) = if horizontal { (r as i64, c as i64 + d) } else { (r as i64 + d, c as i64) };
                if rr >= 0 && rr < rows && cc >= 0 && cc < cols {
                    acc += kernel[ki] * src.get(rr as usize, cc as usize);
                }
            }
            acc.clamp(0.0, 1.0)
        })
    };
    let grid = blur(&blur(&hard.grid, true), false);
    PlacedGrid { window, grid }
}

fn expand(window: Window, margin: usize) -> Window {
    let m = margin as i64;
    Window::new(window.row - m, window.col - m, window.rows + 2 * margin, window.cols + 2 * margin)
}

/// Per-dataset structure shared by all instances: Masksembles masks and
/// snapshot biases.
struct RegimeState {
    masks: Vec<super::SamplingMask>,
    bias: Vec<Vec<f64>>,
}

fn regime_state(cfg: &SimConfig, prob_len: usize) -> Result<RegimeState> {
    let masks = match cfg.regime {
        Regime::MaskEnsembles => {
            let len = masksembles_min_len(cfg.passes, cfg.masksembles_scale)?;
            gen_masksembles(len, cfg.passes, cfg.masksembles_scale, derive_seed(cfg.seed, &[MASKS]))?
        }
        _ => Vec::new(),
    };
    let bias = match cfg.regime {
        Regime::SnapshotEnsembles => (0..cfg.passes as u64)
            .map(|m| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[BIAS, m]));
                (0..4 + prob_len).map(|_| StandardNormal.sample(&mut rng)).collect()
            })
            .collect(),
        _ => Vec::new(),
    };
    Ok(RegimeState { masks, bias })
}

/// `M` passes of detections for a frame with ground truth. Instances are
/// processed in ground-truth order; `passes[m]` lists the detections of pass
/// `m`.
pub fn simulate_passes(frame: &Frame, cfg: &SimConfig, index: usize) -> Result<Vec<Vec<Detection>>> {
    cfg.validate()?;
    let classes = cfg.class_space()?;
    let prob_len = classes.prob_len();
    let state = regime_state(cfg, prob_len)?;
    let noise_cfg = cfg.noise;
    let mut passes: Vec<Vec<Detection>> = vec![Vec::new(); cfg.passes];

    for (inst, gt) in frame.ground_truth.iter().enumerate() {
        let path = [PASS_NOISE, index as u64, inst as u64];
        let mut noise = PassNoise::new(
            cfg.regime,
            cfg.correlation,
            (cfg.seed, &path),
            cfg.passes,
            &state.masks,
            &state.bias,
        );
        let miss = noise.uniforms(1);
        let jitter = noise.normals(4, 0);
        let logit_noise = noise.normals(prob_len, 4);

        let margin = (4.0 * noise_cfg.bbox_sigma).ceil() as usize + (3.0 * noise_cfg.mask_blur).ceil() as usize + 2;
        let field = expand(gt.bbox.outer_window(), margin);
        let soft = soft_mask(gt, field, noise_cfg.mask_blur);
        let flips = noise.uniforms(field.area());

        for m in 0..cfg.passes {
            if miss[m][0] < noise_cfg.miss_rate {
                continue;
            }
            let j: Vec<f64> = jitter[m].iter().map(|v| v * noise_cfg.bbox_sigma).collect();
            let raw = BBox::new(
                gt.bbox.x + j[0],
                gt.bbox.y + j[1],
                (gt.bbox.w + j[2]).max(1.0),
                (gt.bbox.h + j[3]).max(1.0),
            )?;
            let Ok(bbox) = raw.clip(frame.extent) else {
                continue;
            };
            let footprint = bbox.outer_window().clip(frame.extent);
            let shift = (j[1].round() as i64, j[0].round() as i64);
            let values = Grid::from_fn(footprint.rows, footprint.cols, |lr, lc| {
                let r = footprint.row + lr as i64 - shift.0;
                let c = footprint.col + lc as i64 - shift.1;
                let base = soft.at(r, c);
                let flipped = field.contains(r, c)
                    && flips[m][((r - field.row) as usize) * field.cols + (c - field.col) as usize]
                        < noise_cfg.mask_flip_rate;
                if flipped {
                    1.0 - base
                } else {
                    base
                }
            });
            let mask = ProbMask::new((footprint.row, footprint.col), values)?;

            let logits: Vec<f64> = (0..prob_len)
                .map(|c| {
                    let target = if c == gt.class_id { cfg.logit_scale } else { 0.0 };
                    target + noise_cfg.logit_sigma * logit_noise[m][c]
                })
                .collect();
            let class_probs = ClassProbVector::from_logits(&logits)?;
            passes[m].push(Detection::new(bbox, class_probs, mask, m)?);
        }
    }
    Ok(passes)
}
