//! Correlated noise streams for the `M` passes of one instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{derive_seed, Regime, SamplingMask};

const SHARED: u64 = 1;
const FRESH: u64 = 2;

/// Per-instance noise source. Every draw advances all streams by the same
/// amount regardless of regime, so outputs depend only on the seed path.
pub(crate) struct PassNoise<'a> {
    regime: Regime,
    correlation: f64,
    shared: ChaCha8Rng,
    fresh: Vec<ChaCha8Rng>,
    masks: &'a [SamplingMask],
    bias: &'a [Vec<f64>],
}

impl<'a> PassNoise<'a> {
    pub(crate) fn new(
        regime: Regime,
        correlation: f64,
        seed_path: (u64, &[u64]),
        passes: usize,
        masks: &'a [SamplingMask],
        bias: &'a [Vec<f64>],
    ) -> Self {
        let (seed, path) = seed_path;
        let stream = |tag: u64, m: u64| {
            let mut p = path.to_vec();
            p.extend([tag, m]);
            ChaCha8Rng::seed_from_u64(derive_seed(seed, &p))
        };
        let correlation = match regime {
            Regime::DeepEnsembles => 0.0,
            Regime::MaskEnsembles => mask_correlation(masks),
            Regime::McDropout | Regime::SnapshotEnsembles => correlation,
        };
        Self {
            regime,
            correlation,
            shared: stream(SHARED, 0),
            fresh: (0..passes as u64).map(|m| stream(FRESH, m)).collect(),
            masks,
            bias,
        }
    }

    /// Standard normal noise `[pass][i]` with unit marginal variance.
    /// `channel` offsets into the per-pass snapshot bias.
    pub(crate) fn normals(&mut self, n: usize, channel: usize) -> Vec<Vec<f64>> {
        let latent_len = self.masks.first().map_or(0, SamplingMask::len);
        let shared: Vec<f64> = (0..n).map(|_| self.shared.sample(StandardNormal)).collect();
        let latent: Vec<Vec<f64>> = match self.regime {
            Regime::MaskEnsembles => (0..n)
                .map(|_| (0..latent_len).map(|_| self.shared.sample(StandardNormal)).collect())
                .collect(),
            _ => Vec::new(),
        };
        let rho = self.correlation;
        self.fresh
            .iter_mut()
            .enumerate()
            .map(|(m, rng)| {
                (0..n)
                    .map(|i| {
                        let fresh: f64 = rng.sample(StandardNormal);
                        match self.regime {
                            Regime::DeepEnsembles => fresh,
                            Regime::McDropout => rho.sqrt() * shared[i] + (1.0 - rho).sqrt() * fresh,
                            Regime::SnapshotEnsembles => {
                                let b = &self.bias[m];
                                rho.sqrt() * b[(channel + i) % b.len()] + (1.0 - rho).sqrt() * fresh
                            }
                            Regime::MaskEnsembles => {
                                let mask = &self.masks[m];
                                let sum: f64 = mask.active().map(|j| latent[i][j]).sum();
                                sum / (mask.active_count() as f64).sqrt()
                            }
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Uniform noise `[pass][i]` on [0, 1). With probability `correlation`
    /// a pass reuses the shared draw, otherwise it uses its own.
    pub(crate) fn uniforms(&mut self, n: usize) -> Vec<Vec<f64>> {
        let shared: Vec<f64> = (0..n).map(|_| self.shared.gen()).collect();
        let rho = match self.regime {
            // A fixed bias has no meaning for event draws; passes stay independent.
            Regime::SnapshotEnsembles => 0.0,
            _ => self.correlation,
        };
        self.fresh
            .iter_mut()
            .map(|rng| {
                (0..n)
                    .map(|i| {
                        let coin: f64 = rng.gen();
                        let fresh: f64 = rng.gen();
                        if coin < rho {
                            shared[i]
                        } else {
                            fresh
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Mean pairwise overlap fraction of a mask set (1 for a single mask).
fn mask_correlation(masks: &[SamplingMask]) -> f64 {
    if masks.len() < 2 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..masks.len() {
        for j in i + 1..masks.len() {
            total += masks[i].overlap(&masks[j]) as f64 / masks[i].active_count().max(1) as f64;
            pairs += 1;
        }
    }
    total / pairs as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::gen_masksembles;

    fn sample_corr(draws: &[Vec<f64>]) -> f64 {
        // Correlation between pass 0 and pass 1 across draws.
        let n = draws[0].len() as f64;
        let (a, b) = (&draws[0], &draws[1]);
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
        let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n;
        let vb = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n;
        cov / (va * vb).sqrt()
    }

    #[test]
    fn mc_dropout_correlation_is_respected() {
        let mut noise = PassNoise::new(Regime::McDropout, 0.81, (5, &[1]), 2, &[], &[]);
        let draws = noise.normals(20_000, 0);
        let r = sample_corr(&draws);
        assert!((r - 0.81).abs() < 0.02, "{r}");
        let var = draws[0].iter().map(|x| x * x).sum::<f64>() / 20_000.0;
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn full_correlation_gives_identical_passes() {
        let mut noise = PassNoise::new(Regime::McDropout, 1.0, (5, &[2]), 3, &[], &[]);
        let n = noise.normals(10, 0);
        let u = noise.uniforms(10);
        assert_eq!(n[0], n[2]);
        assert_eq!(u[0], u[1]);
    }

    #[test]
    fn deep_ensembles_are_independent() {
        let mut noise = PassNoise::new(Regime::DeepEnsembles, 0.9, (5, &[3]), 2, &[], &[]);
        let r = sample_corr(&noise.normals(20_000, 0));
        assert!(r.abs() < 0.03, "{r}");
    }

    #[test]
    fn mask_ensembles_follow_overlap() {
        let masks = gen_masksembles(24, 4, 2.0, 0).unwrap();
        let expected = mask_correlation(&masks);
        assert!((expected - 4.0 / 12.0).abs() < 1e-12);
        let mut noise = PassNoise::new(Regime::MaskEnsembles, 0.0, (5, &[4]), 4, &masks, &[]);
        let r = sample_corr(&noise.normals(20_000, 0));
        assert!((r - expected).abs() < 0.03, "{r}");
    }

    #[test]
    fn uniform_marginals_stay_uniform() {
        let mut noise = PassNoise::new(Regime::McDropout, 0.5, (9, &[1]), 2, &[], &[]);
        let u = noise.uniforms(20_000);
        let below = u[1].iter().filter(|&&x| x < 0.1).count() as f64 / 20_000.0;
        assert!((below - 0.1).abs() < 0.01);
    }
}
