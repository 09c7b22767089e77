//! Binary sampling masks for MC-Dropout and Masksembles.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMask {
    bits: Vec<bool>,
    active_count: usize,
}

impl SamplingMask {
    pub fn new(bits: Vec<bool>) -> Self {
        let active_count = bits.iter().filter(|&&b| b).count();
        Self { bits, active_count }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.active_count
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn overlap(&self, other: &SamplingMask) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| **a && **b).count()
    }
}

/// `m` i.i.d. Bernoulli masks keeping each unit with probability `1 − rate`.
pub fn gen_dropout_masks(len: usize, rate: f64, m: usize, seed: u64) -> Result<Vec<SamplingMask>> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidConfig(format!("dropout rate {rate} must lie in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..m)
        .map(|_| SamplingMask::new((0..len).map(|_| rng.gen::<f64>() >= rate).collect()))
        .collect())
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of masks sharing each active unit for `m` masks at scale `s`.
///
/// Each mask then keeps a fraction `t/m ≈ s/(s + m − 1)` of the units, so
/// `s = 1` gives disjoint masks and large `s` approaches identical masks.
pub fn masksembles_multiplicity(m: usize, scale: f64) -> usize {
    let t = (m as f64 * scale / (scale + m as f64 - 1.0)).round() as usize;
    t.clamp(1, m)
}

fn combinations(m: usize, t: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, t: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == t {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            if m - i < t - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, m, t, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, t, &mut Vec::with_capacity(t), &mut out);
    out
}

/// Smallest mask length for which [`gen_masksembles`] is feasible.
pub fn masksembles_min_len(m: usize, scale: f64) -> Result<usize> {
    if m == 0 {
        return Err(Error::InvalidConfig("Masksembles needs at least one mask".into()));
    }
    binomial(m, masksembles_multiplicity(m, scale))
        .ok_or_else(|| Error::InfeasibleConfig(format!("too many mask combinations for {m} masks")))
}

/// `m` structured masks of equal cardinality and equal pairwise overlap.
///
/// Units are dealt in blocks: every block assigns one unit to each `t`-subset
/// of the masks (`t` from [`masksembles_multiplicity`]). A mask therefore
/// holds `r·C(m−1, t−1)` units and any two masks share exactly
/// `r·C(m−2, t−2)`, where `r = ⌊len / C(m, t)⌋`. Leftover units stay inactive
/// in every mask. Unit positions are shuffled by `seed`.
pub fn gen_masksembles(len: usize, m: usize, scale: f64, seed: u64) -> Result<Vec<SamplingMask>> {
    if !(scale >= 1.0) || !scale.is_finite() {
        return Err(Error::InvalidConfig(format!("Masksembles scale {scale} must be >= 1")));
    }
    let blocks = masksembles_min_len(m, scale)?;
    let repeats = len / blocks;
    if repeats == 0 {
        return Err(Error::InfeasibleConfig(format!(
            "{len} units cannot host {m} equal-overlap masks at scale {scale} (need at least {blocks})"
        )));
    }
    let subsets = combinations(m, masksembles_multiplicity(m, scale));
    let mut positions: Vec<usize> = (0..len).collect();
    positions.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut bits = vec![vec![false; len]; m];
    let mut next = positions.into_iter();
    for _ in 0..repeats {
        for subset in &subsets {
            let unit = next.next().expect("len >= repeats * C(m, t)");
            for &mask in subset {
                bits[mask][unit] = true;
            }
        }
    }
    Ok(bits.into_iter().map(SamplingMask::new).collect())
}
