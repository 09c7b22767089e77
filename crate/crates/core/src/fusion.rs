//! Averaging of clustered detections into observations, with spatial and
//! semantic uncertainty split into epistemic and aleatoric parts.

use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_bsas, ClusteringConfig, ObservationCluster};
use crate::error::{Error, Result};
use crate::mask::{Grid, PlacedGrid, ProbMask, Resampling, Window};
use crate::model::{BBox, ClassProbVector, ClassSpace, Frame};
use crate::uncertainty::{aleatoric_cov, epistemic_cov, SampleMatrix, SquareMatrix};

/// Divisor used when averaging a cluster.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denominator {
    /// Average over the `k` detections present in the cluster.
    #[default]
    Members,
    /// Average over all passes; missing passes count as zero heatmaps (and
    /// as background when the class space has a background slot).
    Passes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub denominator: Denominator,
    pub resampling: Resampling,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            denominator: Denominator::Members,
            resampling: Resampling::Bilinear,
        }
    }
}

/// Context needed to pad absent passes under [`Denominator::Passes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassContext {
    pub passes: usize,
    pub background: Option<usize>,
}

impl PassContext {
    pub fn members_only() -> Self {
        Self {
            passes: 0,
            background: None,
        }
    }

    pub fn for_frame(frame: &Frame, classes: &ClassSpace) -> Self {
        Self {
            passes: frame.n_passes(),
            background: classes.background_index(),
        }
    }
}

/// Uncertainty summary of one observation. Spatial maps live on the
/// observation footprint; semantic values are covariance traces.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMaps {
    pub spatial_epistemic: PlacedGrid,
    pub spatial_aleatoric: PlacedGrid,
    pub semantic_epistemic: f64,
    pub semantic_aleatoric: f64,
}

impl UncertaintyMaps {
    pub fn window(&self) -> Window {
        self.spatial_epistemic.window
    }

    /// Total spatial variance at an image-frame pixel.
    pub fn spatial_total_at(&self, row: i64, col: i64) -> f64 {
        self.spatial_epistemic.at(row, col) + self.spatial_aleatoric.at(row, col)
    }

    pub fn semantic_total(&self) -> f64 {
        self.semantic_epistemic + self.semantic_aleatoric
    }
}

/// Bayesian average of a cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub bbox: BBox,
    pub class_probs: ClassProbVector,
    /// Mean heatmap placed one cell per pixel on the union footprint.
    pub mask: ProbMask,
    pub k: usize,
    pub uncertainty: UncertaintyMaps,
}

impl Observation {
    pub fn label(&self) -> usize {
        self.class_probs.argmax()
    }

    pub fn confidence(&self) -> f64 {
        self.class_probs.max()
    }
}

fn effective_rows(cluster: &ObservationCluster, cfg: &FusionConfig, ctx: PassContext) -> Result<usize> {
    let k = cluster.k();
    match cfg.denominator {
        Denominator::Members => Ok(k),
        Denominator::Passes => {
            if k > ctx.passes {
                return Err(Error::Consistency {
                    k,
                    passes: ctx.passes,
                });
            }
            Ok(ctx.passes)
        }
    }
}

/// Union of the member footprints.
pub fn cluster_footprint(cluster: &ObservationCluster) -> Window {
    cluster
        .members()
        .iter()
        .fold(Window::EMPTY, |acc, d| acc.union(&d.mask.window()))
}

/// Class-probability rows entering the semantic statistics.
pub fn semantic_samples(cluster: &ObservationCluster, cfg: &FusionConfig, ctx: PassContext) -> Result<SampleMatrix> {
    let mut rows: Vec<Vec<f64>> = cluster
        .members()
        .iter()
        .map(|d| d.class_probs.as_slice().to_vec())
        .collect();
    if let (Denominator::Passes, Some(bg)) = (cfg.denominator, ctx.background) {
        let n = effective_rows(cluster, cfg, ctx)?;
        let len = rows[0].len();
        let mut absent = vec![0.0; len];
        absent[bg] = 1.0;
        rows.resize(n, absent);
    }
    SampleMatrix::new_categorical(&rows)
}

/// Full semantic covariance matrices `(epistemic, aleatoric)`.
pub fn semantic_covariances(
    cluster: &ObservationCluster,
    cfg: &FusionConfig,
    ctx: PassContext,
) -> Result<(SquareMatrix, SquareMatrix)> {
    let samples = semantic_samples(cluster, cfg, ctx)?;
    Ok((epistemic_cov(&samples), aleatoric_cov(&samples)))
}

/// Traces of the semantic covariances `(epistemic, aleatoric)`.
pub fn semantic_uncertainty(cluster: &ObservationCluster, cfg: &FusionConfig, ctx: PassContext) -> Result<(f64, f64)> {
    let (e, a) = semantic_covariances(cluster, cfg, ctx)?;
    Ok((e.trace(), a.trace()))
}

struct SpatialMoments {
    mean: PlacedGrid,
    epistemic: PlacedGrid,
    aleatoric: PlacedGrid,
}

fn spatial_moments(cluster: &ObservationCluster, cfg: &FusionConfig, ctx: PassContext) -> Result<SpatialMoments> {
    let n = effective_rows(cluster, cfg, ctx)? as f64;
    let window = cluster_footprint(cluster);
    let members: Vec<PlacedGrid> = cluster
        .members()
        .iter()
        .map(|d| d.mask.place(window, cfg.resampling))
        .collect();
    // Absent passes contribute p = 0: no aleatoric term, deviation −p̄.
    let absent = n - members.len() as f64;
    let size = window.area();
    let mut mean = vec![0.0; size];
    let mut epistemic = vec![0.0; size];
    let mut aleatoric = vec![0.0; size];
    for i in 0..size {
        let mu = members.iter().map(|m| m.grid.values()[i]).sum::<f64>() / n;
        let mut dev = absent * mu * mu;
        let mut ale = 0.0;
        for m in &members {
            let p = m.grid.values()[i];
            dev += (p - mu) * (p - mu);
            ale += p * (1.0 - p);
        }
        mean[i] = mu.clamp(0.0, 1.0);
        epistemic[i] = dev / n;
        aleatoric[i] = ale / n;
    }
    let wrap = |values| -> Result<PlacedGrid> {
        Ok(PlacedGrid {
            window,
            grid: Grid::from_vec(window.rows, window.cols, values)?,
        })
    };
    Ok(SpatialMoments {
        mean: wrap(mean)?,
        epistemic: wrap(epistemic)?,
        aleatoric: wrap(aleatoric)?,
    })
}

/// Per-pixel `(epistemic, aleatoric)` maps on the cluster footprint.
pub fn spatial_uncertainty(
    cluster: &ObservationCluster,
    cfg: &FusionConfig,
    ctx: PassContext,
) -> Result<(PlacedGrid, PlacedGrid)> {
    let m = spatial_moments(cluster, cfg, ctx)?;
    Ok((m.epistemic, m.aleatoric))
}

fn mean_class_probs(cluster: &ObservationCluster, cfg: &FusionConfig, ctx: PassContext) -> Result<ClassProbVector> {
    let samples = semantic_samples(cluster, cfg, ctx)?;
    let mut mean = samples.mean();
    // Re-normalize away floating-point drift from the sum.
    let s: f64 = mean.iter().sum();
    mean.iter_mut().for_each(|p| *p = (*p / s).clamp(0.0, 1.0));
    ClassProbVector::new(mean)
}

/// Average a cluster into an observation.
pub fn fuse(cluster: &ObservationCluster, cfg: &FusionConfig, ctx: PassContext) -> Result<Observation> {
    let boxes: Vec<BBox> = cluster.members().iter().map(|d| d.bbox).collect();
    let bbox = BBox::mean(&boxes).expect("clusters are non-empty");
    let class_probs = mean_class_probs(cluster, cfg, ctx)?;
    let moments = spatial_moments(cluster, cfg, ctx)?;
    let (semantic_epistemic, semantic_aleatoric) = semantic_uncertainty(cluster, cfg, ctx)?;
    Ok(Observation {
        bbox,
        class_probs,
        mask: ProbMask::from_placed(moments.mean)?,
        k: cluster.k(),
        uncertainty: UncertaintyMaps {
            spatial_epistemic: moments.epistemic,
            spatial_aleatoric: moments.aleatoric,
            semantic_epistemic: semantic_epistemic.max(0.0),
            semantic_aleatoric: semantic_aleatoric.max(0.0),
        },
    })
}

/// Cluster and fuse every detection of a frame.
pub fn fuse_frame(
    frame: &Frame,
    classes: &ClassSpace,
    clustering: &ClusteringConfig,
    fusion: &FusionConfig,
) -> Result<Vec<Observation>> {
    let ctx = PassContext::for_frame(frame, classes);
    cluster_bsas(&frame.detections(), clustering)?
        .iter()
        .map(|c| fuse(c, fusion, ctx))
        .collect()
}
