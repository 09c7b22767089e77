//! Uncompressed COCO run-length encoding of binary masks.
//!
//! Pixels are scanned in column-major order and `counts` alternates run
//! lengths of background and foreground, always starting with background
//! (possibly a zero-length run).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rle {
    /// `[rows, cols]`.
    pub size: [usize; 2],
    pub counts: Vec<usize>,
}

pub fn encode(mask: &BinaryMask) -> Rle {
    let (rows, cols) = (mask.rows(), mask.cols());
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0usize;
    for c in 0..cols {
        for r in 0..rows {
            let bit = mask.get(r, c);
            if bit != current {
                counts.push(run);
                run = 0;
                current = bit;
            }
            run += 1;
        }
    }
    counts.push(run);
    Rle {
        size: [rows, cols],
        counts,
    }
}

pub fn decode(rle: &Rle) -> Result<BinaryMask> {
    let [rows, cols] = rle.size;
    let total: usize = rle.counts.iter().sum();
    if total != rows * cols {
        return Err(Error::InvalidMask(format!(
            "RLE counts cover {total} pixels, size {rows}x{cols} needs {}",
            rows * cols
        )));
    }
    let mut mask = BinaryMask::empty(rows, cols);
    let mut pos = 0usize;
    for (i, &run) in rle.counts.iter().enumerate() {
        if i % 2 == 1 {
            for p in pos..pos + run {
                mask.set(p % rows, p / rows, true);
            }
        }
        pos += run;
    }
    Ok(mask)
}
