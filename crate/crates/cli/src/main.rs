use std::path::{Path, PathBuf};
use std::process::ExitCode;

use affuq::clustering::ClusteringConfig;
use affuq::eval::{EvalConfig, Evaluation};
use affuq::fusion::{Denominator, FusionConfig};
use affuq::io::{self, curve_csv, DatasetFile, ObservationsFile};
use affuq::pipeline::{evaluate_files, fuse_file, run_pipeline, simulate_file, PipelineConfig};
use affuq::sim::SimConfig;
use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

const SEED_ENV: &str = "AFFUQ_SEED";

#[derive(Parser)]
#[command(name = "affuq", version, about = "Fuse stochastic segmentation passes and score their uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AvgDenominator {
    /// Average over the detections in each cluster.
    #[value(name = "k")]
    Members,
    /// Average over all passes.
    #[value(name = "M")]
    Passes,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with ground truth and M passes per frame.
    Simulate {
        /// Simulator config (TOML, or JSON by extension). Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed and the AFFUQ_SEED variable.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cluster the passes of each frame and fuse them into observations.
    Fuse {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou_thresh: f64,
        #[arg(long, value_enum, default_value = "k")]
        avg_denominator: AvgDenominator,
    },
    /// Score observations against ground truth.
    Eval {
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Directory for the sparsification curve CSVs.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Simulate, fuse and evaluate in one go.
    Pipeline {
        /// Config with optional [simulate], [clustering], [fusion] and [eval] sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write dataset.json and observations.json next to the report.
        #[arg(long)]
        keep_intermediates: bool,
        #[arg(long)]
        curves: Option<PathBuf>,
    },
}

/// Flag, then environment, then whatever the config file holds.
fn resolve_seed(flag: Option<u64>, file_seed: u64) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(file_seed),
    }
}

fn write_curves(dir: &Path, eval: &Evaluation) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, curve) in [
        ("semantic_sparsification.csv", &eval.semantic_curve),
        ("spatial_sparsification.csv", &eval.spatial_curve),
    ] {
        match curve {
            Some(c) => io::write_text(&dir.join(name), &curve_csv(c))?,
            None => eprintln!("warning: {name} not written, the curve is undefined for this data"),
        }
    }
    Ok(())
}

fn print_dataset_summary(file: &DatasetFile, seed: u64) {
    let gt: usize = file.frames.iter().map(|f| f.ground_truth.len()).sum();
    let detections: usize = file.frames.iter().flat_map(|f| &f.passes).map(Vec::len).sum();
    println!("seed {seed}");
    println!("frames {} ground_truth {gt} detections {detections}", file.frames.len());
}

fn print_report_summary(report: &io::MetricsReport) {
    println!(
        "pmq {:.6} tp {} fp {} fn {} frames {}",
        report.pmq, report.counts.tp, report.counts.fp, report.counts.fn_, report.counts.frames
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let mut cfg: SimConfig = match &config {
                Some(path) => io::read_config(path)?,
                None => SimConfig::default(),
            };
            cfg.seed = resolve_seed(seed, cfg.seed)?;
            let file = simulate_file(&cfg)?;
            io::write_text(&out, &io::to_json_compact(&file))?;
            print_dataset_summary(&file, cfg.seed);
        }
        Command::Fuse {
            input,
            out,
            iou_thresh,
            avg_denominator,
        } => {
            let dataset: DatasetFile = io::read_json(&input)?;
            let clustering = ClusteringConfig {
                iou_threshold: iou_thresh,
                ..Default::default()
            };
            let fusion = FusionConfig {
                denominator: match avg_denominator {
                    AvgDenominator::Members => Denominator::Members,
                    AvgDenominator::Passes => Denominator::Passes,
                },
                ..Default::default()
            };
            let obs = fuse_file(&dataset, &clustering, &fusion)?;
            io::write_text(&out, &io::to_json_compact(&obs))?;
            for f in &obs.frames {
                println!("{} {}", f.frame_id, f.observations.len());
            }
        }
        Command::Eval { obs, gt, report, curves } => {
            let observations: ObservationsFile = io::read_json(&obs)?;
            let dataset: DatasetFile = io::read_json(&gt)?;
            let (metrics, eval) = evaluate_files(&dataset, &observations, &EvalConfig::default())?;
            io::write_text(&report, &io::to_json_pretty(&metrics))?;
            if let Some(dir) = curves {
                write_curves(&dir, &eval)?;
            }
            print_report_summary(&metrics);
        }
        Command::Pipeline {
            config,
            report,
            seed,
            keep_intermediates,
            curves,
        } => {
            let mut cfg: PipelineConfig = match &config {
                Some(path) => io::read_config(path)?,
                None => PipelineConfig::default(),
            };
            cfg.simulate.seed = resolve_seed(seed, cfg.simulate.seed)?;
            let out = run_pipeline(&cfg)?;
            io::write_text(&report, &io::to_json_pretty(&out.report))?;
            if keep_intermediates {
                let dir = report.parent().unwrap_or(Path::new("."));
                io::write_text(&dir.join("dataset.json"), &io::to_json_compact(&out.dataset))?;
                io::write_text(&dir.join("observations.json"), &io::to_json_compact(&out.observations))?;
            }
            if let Some(dir) = curves {
                write_curves(&dir, &out.evaluation)?;
            }
            print_dataset_summary(&out.dataset, cfg.simulate.seed);
            print_report_summary(&out.report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
