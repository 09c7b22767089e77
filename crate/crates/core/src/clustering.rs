//! Sequential (BSAS) grouping of pooled detections into observation clusters.
//!
//! Detections are visited once, in a configurable order. Each one joins the
//! same-label cluster with the highest mask IoU if that IoU exceeds the
//! threshold, and opens a new cluster otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{placed_iou, PlacedGrid, Resampling, DEFAULT_BIN_THRESHOLD};
use crate::model::Detection;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VisitOrder {
    /// Descending max class probability, input order on ties.
    #[default]
    ByConfidenceDesc,
    ByInputOrder,
}

/// What a candidate detection is compared against when scoring a cluster.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linkage {
    /// Pixel-wise running mean of member heatmaps.
    #[default]
    Representative,
    /// The member that opened the cluster.
    FirstMember,
    /// Best IoU against any single member.
    MaxMember,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub iou_threshold: f64,
    pub bin_threshold: f64,
    pub ordering: VisitOrder,
    pub linkage: Linkage,
    pub resampling: Resampling,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            bin_threshold: DEFAULT_BIN_THRESHOLD,
            ordering: VisitOrder::default(),
            linkage: Linkage::default(),
            resampling: Resampling::default(),
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("iou_threshold", self.iou_threshold), ("bin_threshold", self.bin_threshold)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Detections grouped as one observation. Never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationCluster {
    members: Vec<Detection>,
    class_id: usize,
}

impl ObservationCluster {
    pub fn new(members: Vec<Detection>) -> Result<Self> {
        let class_id = members
            .first()
            .ok_or_else(|| Error::Consistency { k: 0, passes: 0 })?
            .label();
        if members.iter().any(|d| d.label() != class_id) {
            return Err(Error::Schema("cluster members disagree on the argmax class".into()));
        }
        Ok(Self { members, class_id })
    }

    pub fn members(&self) -> &[Detection] {
        &self.members
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterStats {
    pub k: usize,
    pub support_ratio: f64,
}

/// Fraction of passes that contributed to a cluster of `k` members.
pub fn support(k: usize, passes: usize) -> Result<ClusterStats> {
    if k == 0 || k > passes {
        return Err(Error::Consistency { k, passes });
    }
    Ok(ClusterStats {
        k,
        support_ratio: k as f64 / passes as f64,
    })
}

pub fn cluster_stats(cluster: &ObservationCluster, passes: usize) -> Result<ClusterStats> {
    support(cluster.k(), passes)
}

struct Building {
    class_id: usize,
    members: Vec<usize>,
    /// Sum of member heatmaps on the union footprint.
    sum: PlacedGrid,
}

impl Building {
    fn representative(&self) -> PlacedGrid {
        let n = self.members.len() as f64;
        let mut rep = self.sum.clone();
        rep.grid.values_mut().iter_mut().for_each(|v| *v /= n);
        rep
    }

    fn absorb(&mut self, index: usize, placed: &PlacedGrid) {
        let window = self.sum.window.union(&placed.window);
        let mut sum = self.sum.reframe(window);
        for (r, c) in placed.window.pixels() {
            let lr = (r - window.row) as usize;
            let lc = (c - window.col) as usize;
            sum.grid.set(lr, lc, sum.grid.get(lr, lc) + placed.at(r, c));
        }
        self.sum = sum;
        self.members.push(index);
    }
}

/// Visit order as indices into `detections`.
pub fn visit_order(detections: &[Detection], ordering: VisitOrder) -> Vec<usize> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    if ordering == VisitOrder::ByConfidenceDesc {
        order.sort_by(|&a, &b| {
            detections[b]
                .confidence()
                .total_cmp(&detections[a].confidence())
        });
    }
    order
}

/// Partition pooled detections of one frame into observation clusters.
///
/// Clusters come back in creation order and keep their members in the order
/// they were admitted.
pub fn cluster_bsas(detections: &[Detection], cfg: &ClusteringConfig) -> Result<Vec<ObservationCluster>> {
    cfg.validate()?;
    let placed: Vec<PlacedGrid> = detections.iter().map(|d| d.mask.placed(cfg.resampling)).collect();
    let mut clusters: Vec<Building> = Vec::new();

    for index in visit_order(detections, cfg.ordering) {
        let label = detections[index].label();
        let mut best: Option<(usize, f64)> = None;
        for (ci, cluster) in clusters.iter().enumerate() {
            if cluster.class_id != label {
                continue;
            }
            let affinity = match cfg.linkage {
                Linkage::Representative => {
                    placed_iou(&placed[index], &cluster.representative(), cfg.bin_threshold)
                }
                Linkage::FirstMember => {
                    placed_iou(&placed[index], &placed[cluster.members[0]], cfg.bin_threshold)
                }
                Linkage::MaxMember => cluster
                    .members
                    .iter()
                    .map(|&m| placed_iou(&placed[index], &placed[m], cfg.bin_threshold))
                    .fold(0.0, f64::max),
            };
            if affinity > cfg.iou_threshold && best.is_none_or(|(_, b)| affinity > b) {
                best = Some((ci, affinity));
            }
        }
        match best {
            Some((ci, _)) => clusters[ci].absorb(index, &placed[index]),
            None => clusters.push(Building {
                class_id: label,
                members: vec![index],
                sum: placed[index].clone(),
            }),
        }
    }

    clusters
        .into_iter()
        .map(|b| ObservationCluster::new(b.members.iter().map(|&i| detections[i].clone()).collect()))
        .collect()
}
