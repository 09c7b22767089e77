//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use affuq::assignment::WeightMatrix;
use affuq::fusion::{Observation, UncertaintyMaps};
use affuq::mask::{BinaryMask, Grid, PlacedGrid, ProbMask};
use affuq::model::{BBox, ClassProbVector};
use affuq::uncertainty::SampleMatrix;
use rand::Rng;

/// Best total weight over all injective row-to-column assignments, found by
/// enumerating permutations of the larger side.
pub fn brute_force_max(w: &WeightMatrix) -> f64 {
    fn go(w: &WeightMatrix, row: usize, used: &mut Vec<bool>, best: &mut f64, acc: f64) {
        if row == w.rows() {
            *best = best.max(acc);
            return;
        }
        // Leaving a row unassigned is allowed when there are more rows than columns.
        go(w, row + 1, used, best, acc);
        for c in 0..w.cols() {
            if !used[c] {
                used[c] = true;
                go(w, row + 1, used, best, acc + w.get(row, c));
                used[c] = false;
            }
        }
    }
    let mut best = 0.0;
    go(w, 0, &mut vec![false; w.cols()], &mut best, 0.0);
    best
}

/// Total weight of an assignment returned by the solver; panics if it is not
/// one-to-one.
pub fn assignment_total(w: &WeightMatrix, assignment: &[Option<usize>]) -> f64 {
    let mut seen = vec![false; w.cols()];
    let mut total = 0.0;
    for (r, c) in assignment.iter().enumerate() {
        if let Some(c) = *c {
            assert!(!seen[c], "column {c} assigned twice");
            seen[c] = true;
            total += w.get(r, c);
        }
    }
    total
}

/// `(1/k) Σ diag(p_m) − p̄ p̄ᵀ` computed directly from the rows.
pub fn mixture_oracle(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / k).collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let diag = if i == j { rows.iter().map(|r| r[i]).sum::<f64>() / k } else { 0.0 };
                    diag - mean[i] * mean[j]
                })
                .collect()
        })
        .collect()
}

pub fn random_simplex_rows(rng: &mut impl Rng, k: usize, d: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| {
            let raw: Vec<f64> = (0..d).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        })
        .collect()
}

pub fn sample_matrix(rows: &[Vec<f64>]) -> SampleMatrix {
    SampleMatrix::new_categorical(rows).unwrap()
}

/// Observation with a full-image heatmap and no uncertainty.
pub fn observation(probs: Vec<f64>, heat: Grid) -> Observation {
    let (rows, cols) = (heat.rows(), heat.cols());
    let mask = ProbMask::new((0, 0), heat).unwrap();
    let window = mask.window();
    Observation {
        bbox: BBox::new(0.0, 0.0, cols as f64, rows as f64).unwrap(),
        class_probs: ClassProbVector::new(probs).unwrap(),
        mask,
        k: 1,
        uncertainty: UncertaintyMaps {
            spatial_epistemic: PlacedGrid::zeros(window),
            spatial_aleatoric: PlacedGrid::zeros(window),
            semantic_epistemic: 0.0,
            semantic_aleatoric: 0.0,
        },
    }
}

pub fn rect_mask(rows: usize, cols: usize, top: usize, left: usize, h: usize, w: usize) -> BinaryMask {
    BinaryMask::from_fn(rows, cols, |r, c| r >= top && r < top + h && c >= left && c < left + w)
}

pub fn indicator(mask: &BinaryMask, inside: f64, outside: f64) -> Grid {
    Grid::from_fn(mask.rows(), mask.cols(), |r, c| if mask.get(r, c) { inside } else { outside })
}
