//! File-level steps shared by the command-line tool: simulate, fuse, and
//! evaluate. Every step goes through the on-disk records, so chaining them in
//! memory gives the same numbers as running them one file at a time.

use serde::{Deserialize, Serialize};

use crate::clustering::ClusteringConfig;
use crate::error::Result;
use crate::eval::{evaluate, EvalConfig, Evaluation, FrameObservations};
use crate::fusion::{fuse_frame, FusionConfig};
use crate::io::{
    round_sig, ClassMetrics, ConfigEcho, DatasetFile, FrameObservationsRecord, MetricsReport, ObservationsFile,
    SemanticMetrics, SpatialMetrics, FORMAT_VERSION,
};
use crate::sim::{simulate_dataset, SimConfig};

/// Settings for a full simulate, fuse and evaluate run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub simulate: SimConfig,
    pub clustering: ClusteringConfig,
    pub fusion: FusionConfig,
    pub eval: EvalConfig,
}

pub fn simulate_file(cfg: &SimConfig) -> Result<DatasetFile> {
    Ok(DatasetFile::from_dataset(&simulate_dataset(cfg)?, Some(cfg)))
}

/// Cluster and fuse every frame. Frames are written in frame-id order.
pub fn fuse_file(dataset: &DatasetFile, clustering: &ClusteringConfig, fusion: &FusionConfig) -> Result<ObservationsFile> {
    clustering.validate()?;
    let data = dataset.to_dataset()?;
    let mut frames = data
        .frames
        .iter()
        .map(|f| {
            let obs = fuse_frame(f, &data.classes, clustering, fusion)?;
            Ok(FrameObservationsRecord::new(f.frame_id.clone(), f.n_passes(), &obs))
        })
        .collect::<Result<Vec<_>>>()?;
    frames.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
    Ok(ObservationsFile {
        version: FORMAT_VERSION,
        classes: dataset.classes.clone(),
        background: dataset.background,
        image_extent: dataset.image_extent,
        clustering: *clustering,
        fusion: *fusion,
        frames,
    })
}

fn round_opt(x: Option<f64>) -> Option<f64> {
    x.map(round_sig)
}

fn build_report(eval: &Evaluation, echo: ConfigEcho) -> MetricsReport {
    MetricsReport {
        version: FORMAT_VERSION,
        pmq: round_sig(eval.pmq.pmq),
        mean_ppmq: (eval.pmq.n_tp > 0).then(|| round_sig(eval.pmq.mean_ppmq_over_tp)),
        per_class: eval
            .per_class
            .iter()
            .map(|(name, m)| {
                let m = ClassMetrics {
                    pmq: round_opt(m.pmq),
                    mean_q_label: round_opt(m.mean_q_label),
                    mean_q_spatial: round_opt(m.mean_q_spatial),
                    ..m.clone()
                };
                (name.clone(), m)
            })
            .collect(),
        semantic: SemanticMetrics {
            ece: round_opt(eval.semantic.ece),
            ause: round_opt(eval.semantic.ause),
            brier_mean: round_opt(eval.semantic.brier_mean),
            ..eval.semantic.clone()
        },
        spatial: SpatialMetrics {
            ece: round_opt(eval.spatial.ece),
            ause: round_opt(eval.spatial.ause),
            ..eval.spatial.clone()
        },
        counts: eval.counts,
        config_echo: echo,
    }
}

/// Evaluate an observations file against the dataset it was fused from.
pub fn evaluate_files(
    dataset: &DatasetFile,
    observations: &ObservationsFile,
    cfg: &EvalConfig,
) -> Result<(MetricsReport, Evaluation)> {
    observations.check_version()?;
    let data = dataset.to_dataset()?;
    let prob_len = data.classes.prob_len();
    let observed = observations
        .frames
        .iter()
        .map(|f| {
            Ok(FrameObservations {
                frame_id: f.frame_id.clone(),
                observations: f.to_observations(prob_len)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let eval = evaluate(&data, &observed, cfg)?;
    let echo = ConfigEcho {
        classes: dataset.classes.clone(),
        background: dataset.background,
        image_extent: dataset.image_extent,
        clustering: observations.clustering,
        fusion: observations.fusion,
        eval: *cfg,
        generator: dataset.generator.clone(),
    };
    Ok((build_report(&eval, echo), eval))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub dataset: DatasetFile,
    pub observations: ObservationsFile,
    pub report: MetricsReport,
    pub evaluation: Evaluation,
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let dataset = simulate_file(&cfg.simulate)?;
    let observations = fuse_file(&dataset, &cfg.clustering, &cfg.fusion)?;
    let (report, evaluation) = evaluate_files(&dataset, &observations, &cfg.eval)?;
    Ok(PipelineOutput {
        dataset,
        observations,
        report,
        evaluation,
    })
}
