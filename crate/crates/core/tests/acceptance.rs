//! Acceptance checks. Runs as a plain binary so every criterion prints a
//! result line; exits non-zero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use affuq::assignment::{maximize, WeightMatrix};
use affuq::calibration::{ece, ece_pairs, sparsification, CalibSample, SparsificationConfig};
use affuq::clustering::{cluster_bsas, ClusteringConfig};
use affuq::fusion::{fuse_frame, FusionConfig, Observation};
use affuq::io::{from_json_str, rle, to_json_compact, to_json_pretty, DatasetFile};
use affuq::mask::BinaryMask;
use affuq::model::{ClassProbVector, Dataset, Detection};
use affuq::pipeline::{run_pipeline, simulate_file, PipelineConfig};
use affuq::pmq::{
    aggregate_pmq, assign_hungarian, pair_ppmq, pairwise_pmq, q_label, spatial_quality, PmqConfig,
};
use affuq::sim::{simulate_dataset, NoiseConfig, Regime, SimConfig};
use affuq::uncertainty::{aleatoric_cov, epistemic_cov, SampleMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

// Pinned tolerances.
const IDENTITY_TOL: f64 = 1e-12;
const VANISH_TOL: f64 = 1e-15;
const ASSIGN_TOL: f64 = 1e-9;
const PERFECT_PPMQ: f64 = 1.0 - 1e-4;
const HALF_PPMQ_TOL: f64 = 1e-6;
const ECE_STREAM_MAX: f64 = 0.02;
const ECE_FIXTURE_TOL: f64 = 1e-4;
const AUSE_ZERO_TOL: f64 = 1e-12;
const DOMINANCE_TOL: f64 = 1e-9;
const AUSE_INVARIANCE_TOL: f64 = 1e-12;
const BOUNDARY_RATIO: f64 = 2.0;
const REGIME_WINS: usize = 18;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let spent = start.elapsed();
    ensure(spent < limit, || format!("{what} took {spent:?}, limit {limit:?}"))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.gen_range(1..=16);
        let d = rng.gen_range(1..=12);
        let rows = random_simplex_rows(&mut rng, k, d);
        let samples = sample_matrix(&rows);
        let sum = &epistemic_cov(&samples) + &aleatoric_cov(&samples);
        let oracle = mixture_oracle(&rows);
        for (i, row) in oracle.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                worst = worst.max((sum.get(i, j) - v).abs());
            }
        }
    }
    ensure(worst <= IDENTITY_TOL, || format!("max deviation {worst:e}"))?;
    within_time(start, Duration::from_secs(5), "1000 decompositions")?;
    Ok(format!("max deviation {worst:.1e} in {:?}", start.elapsed()))
}

fn criterion_2() -> Outcome {
    let opposite = sample_matrix(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let e = epistemic_cov(&opposite).trace();
    ensure(e == 0.5, || format!("epistemic trace {e}, expected 0.5"))?;
    let single = sample_matrix(&[vec![0.5, 0.5]]);
    let a = aleatoric_cov(&single).trace();
    ensure(a == 0.5, || format!("aleatoric trace {a}, expected 0.5"))?;
    let row = vec![0.1, 0.2, 0.3, 0.4];
    let same = SampleMatrix::new_categorical(&vec![row; 7]).unwrap();
    let cov = epistemic_cov(&same);
    let worst = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| cov.get(i, j).abs())
        .fold(0.0, f64::max);
    ensure(worst <= VANISH_TOL, || format!("identical samples leave epistemic {worst:e}"))?;
    Ok(format!("traces {e} and {a}, identical-sample epistemic {worst:.1e}"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let rows = rng.gen_range(1..=6);
        let cols = rng.gen_range(1..=6);
        let w = WeightMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.gen::<f64>()).collect());
        let got = assignment_total(&w, &maximize(&w));
        worst = worst.max((got - brute_force_max(&w)).abs());
    }
    ensure(worst <= ASSIGN_TOL, || format!("max gap to brute force {worst:e}"))?;
    within_time(start, Duration::from_secs(10), "500 assignments")?;
    Ok(format!("max gap {worst:.1e} in {:?}", start.elapsed()))
}

fn criterion_4() -> Outcome {
    let cfg = PmqConfig::default();
    let gt = rect_mask(20, 24, 4, 5, 8, 10);
    let probs = ClassProbVector::one_hot(3, 1).map_err(|e| e.to_string())?;

    let perfect = pair_ppmq(
        q_label(1, &probs).map_err(|e| e.to_string())?,
        spatial_quality(&gt, &indicator(&gt, 1.0, 0.0), &cfg).map_err(|e| e.to_string())?,
    );
    ensure(perfect >= PERFECT_PPMQ, || format!("perfect pPMQ {perfect}"))?;

    let qs = spatial_quality(&gt, &indicator(&gt, 0.5, 0.0), &cfg).map_err(|e| e.to_string())?;
    let half = pair_ppmq(0.5, qs);
    ensure((half - 0.5).abs() <= HALF_PPMQ_TOL, || format!("uniform-half pPMQ {half}"))?;

    let frame = assign_hungarian(&WeightMatrix::from_rows(&[vec![0.8], vec![0.0]]), cfg.validity_floor);
    let pmq = aggregate_pmq(&[frame]).map_err(|e| e.to_string())?.pmq;
    ensure(pmq == 0.4, || format!("1 TP + 1 FN gives PMQ {pmq}"))?;
    Ok(format!("perfect {perfect:.7}, half {half:.7}, TP+FN {pmq}"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let stream: Vec<(f64, bool)> = (0..100_000)
        .map(|_| {
            let conf = (rng.gen_range(0..10) as f64 + 0.5) / 10.0;
            (conf, rng.gen::<f64>() < conf)
        })
        .collect();
    let calibrated = ece_pairs(&stream, 10).map_err(|e| e.to_string())?;
    ensure(calibrated < ECE_STREAM_MAX, || format!("calibrated stream ECE {calibrated}"))?;

    let mut fixture = Vec::new();
    for i in 0..4 {
        fixture.push(CalibSample {
            confidence: 0.3,
            correct: i == 0,
            error: 0.0,
            variance: 0.0,
        });
    }
    for i in 0..6 {
        fixture.push(CalibSample {
            confidence: 0.9,
            correct: i < 5,
            error: 0.0,
            variance: 0.0,
        });
    }
    let two_bin = ece(&fixture, 10).map_err(|e| e.to_string())?;
    ensure((two_bin - 0.06).abs() <= ECE_FIXTURE_TOL, || format!("two-bin fixture ECE {two_bin}"))?;
    Ok(format!("calibrated stream {calibrated:.4}, fixture {two_bin:.6}"))
}

fn criterion_6() -> Outcome {
    let cfg = SparsificationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_rank = 0.0f64;
    let mut worst_dominance = 0.0f64;
    let mut worst_transform = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..200);
        let errors: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let variances: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();

        let ranked: Vec<f64> = errors.iter().map(|e| 3.0 * e + 1.0).collect();
        let same_rank = sparsification(&errors, &ranked, &cfg).map_err(|e| e.to_string())?;
        worst_rank = worst_rank.max(same_rank.ause.abs());

        let curve = sparsification(&errors, &variances, &cfg).map_err(|e| e.to_string())?;
        for (m, o) in curve.model.iter().zip(&curve.oracle) {
            worst_dominance = worst_dominance.max(o - m);
        }
        for transform in [|x: f64| x * x * x, |x: f64| x.ln_1p()] {
            let v: Vec<f64> = variances.iter().map(|&x| transform(x)).collect();
            let t = sparsification(&errors, &v, &cfg).map_err(|e| e.to_string())?;
            worst_transform = worst_transform.max((t.ause - curve.ause).abs());
        }
    }
    ensure(worst_rank <= AUSE_ZERO_TOL, || format!("rank-equal AUSE {worst_rank:e}"))?;
    ensure(worst_dominance <= DOMINANCE_TOL, || format!("oracle above model by {worst_dominance:e}"))?;
    ensure(worst_transform <= AUSE_INVARIANCE_TOL, || format!("transform changed AUSE by {worst_transform:e}"))?;
    Ok(format!(
        "rank-equal {worst_rank:.1e}, dominance slack {worst_dominance:.1e}, transform drift {worst_transform:.1e}"
    ))
}

/// Every input detection appears in exactly one cluster.
fn is_partition(detections: &[Detection], clusters: &[affuq::clustering::ObservationCluster]) -> bool {
    let mut used = vec![false; detections.len()];
    for member in clusters.iter().flat_map(|c| c.members()) {
        match (0..detections.len()).find(|&i| !used[i] && detections[i] == *member) {
            Some(i) => used[i] = true,
            None => return false,
        }
    }
    used.into_iter().all(|u| u)
}

fn criterion_7() -> Outcome {
    let dataset = simulate_dataset(&SimConfig {
        seed: 7,
        n_frames: 200,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let cfg = ClusteringConfig::default();
    let thresholds = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
    let mut n_detections = 0;
    for frame in &dataset.frames {
        let detections = frame.detections();
        n_detections += detections.len();
        let clusters = cluster_bsas(&detections, &cfg).map_err(|e| e.to_string())?;
        ensure(is_partition(&detections, &clusters), || format!("{}: not a partition", frame.frame_id))?;
        for c in &clusters {
            ensure(c.members().iter().all(|d| d.label() == c.class_id()), || {
                format!("{}: mixed-class cluster", frame.frame_id)
            })?;
        }
        let again = cluster_bsas(&detections, &cfg).map_err(|e| e.to_string())?;
        ensure(again == clusters, || format!("{}: clustering not deterministic", frame.frame_id))?;
        let mut previous = 0;
        for t in thresholds {
            let n = cluster_bsas(&detections, &ClusteringConfig { iou_threshold: t, ..cfg })
                .map_err(|e| e.to_string())?
                .len();
            ensure(n >= previous, || format!("{}: {n} clusters at {t} after {previous}", frame.frame_id))?;
            previous = n;
        }
    }

    let clean = simulate_dataset(&SimConfig {
        seed: 7,
        n_frames: 200,
        noise: NoiseConfig::noiseless(),
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    for frame in &clean.frames {
        let obs = fuse_frame(frame, &clean.classes, &cfg, &FusionConfig::default()).map_err(|e| e.to_string())?;
        ensure(obs.len() == frame.ground_truth.len(), || {
            format!("{}: {} observations for {} instances", frame.frame_id, obs.len(), frame.ground_truth.len())
        })?;
    }
    Ok(format!("200 frames, {n_detections} detections, 9 thresholds"))
}

/// True when the 5x5 neighbourhood of `(r, c)` holds both foreground and
/// background ground-truth pixels.
fn near_contour(gt: &BinaryMask, r: i64, c: i64) -> bool {
    let (mut fg, mut bg) = (false, false);
    for dr in -2..=2 {
        for dc in -2..=2 {
            let (rr, cc) = (r + dr, c + dc);
            if rr < 0 || cc < 0 || rr >= gt.rows() as i64 || cc >= gt.cols() as i64 {
                continue;
            }
            if gt.get(rr as usize, cc as usize) {
                fg = true;
            } else {
                bg = true;
            }
        }
    }
    fg && bg
}

fn matched_observations(dataset: &Dataset) -> Result<Vec<(usize, usize, Observation)>, String> {
    let mut out = Vec::new();
    for (fi, frame) in dataset.frames.iter().enumerate() {
        let obs = fuse_frame(frame, &dataset.classes, &ClusteringConfig::default(), &FusionConfig::default())
            .map_err(|e| e.to_string())?;
        let pairs = pairwise_pmq(&frame.ground_truth, &obs, &PmqConfig::default()).map_err(|e| e.to_string())?;
        let assignment = assign_hungarian(&pairs.ppmq(), PmqConfig::default().validity_floor);
        for m in assignment.matches {
            out.push((fi, m.gt_index, obs[m.obs_index].clone()));
        }
    }
    Ok(out)
}

fn criterion_8() -> Outcome {
    let (mut boundary_sum, mut interior_sum) = (0.0, 0.0);
    for seed in 0..20 {
        let cfg = SimConfig {
            seed,
            noise: NoiseConfig {
                mask_flip_rate: 0.05,
                ..Default::default()
            },
            ..Default::default()
        };
        let dataset = simulate_dataset(&cfg).map_err(|e| e.to_string())?;
        let (mut b, mut nb, mut i, mut ni) = (0.0, 0usize, 0.0, 0usize);
        for (fi, gi, obs) in matched_observations(&dataset)? {
            let frame = &dataset.frames[fi];
            let gt = &frame.ground_truth[gi].mask;
            let aleatoric = &obs.uncertainty.spatial_aleatoric;
            for (r, c) in aleatoric.window.clip(frame.extent).pixels() {
                let v = aleatoric.at(r, c);
                if near_contour(gt, r, c) {
                    b += v;
                    nb += 1;
                } else if gt.at(r, c) {
                    i += v;
                    ni += 1;
                }
            }
        }
        ensure(nb > 0 && ni > 0, || format!("seed {seed}: no boundary or interior pixels"))?;
        boundary_sum += b / nb as f64;
        interior_sum += i / ni as f64;
    }
    let (boundary, interior) = (boundary_sum / 20.0, interior_sum / 20.0);
    ensure(boundary > 0.0 && boundary >= BOUNDARY_RATIO * interior, || {
        format!("boundary {boundary:.5} vs interior {interior:.5}")
    })?;
    Ok(format!("boundary {boundary:.5}, interior {interior:.5}"))
}

fn mean_semantic_epistemic(cfg: &SimConfig) -> Result<f64, String> {
    let dataset = simulate_dataset(cfg).map_err(|e| e.to_string())?;
    let (mut sum, mut n) = (0.0, 0usize);
    for frame in &dataset.frames {
        let obs = fuse_frame(frame, &dataset.classes, &ClusteringConfig::default(), &FusionConfig::default())
            .map_err(|e| e.to_string())?;
        for o in obs {
            sum += o.uncertainty.semantic_epistemic;
            n += 1;
        }
    }
    ensure(n > 0, || "no observations".into())?;
    Ok(sum / n as f64)
}

fn criterion_9() -> Outcome {
    let mut wins = 0;
    for seed in 0..20 {
        let deep = mean_semantic_epistemic(&SimConfig {
            seed,
            regime: Regime::DeepEnsembles,
            correlation: 0.0,
            ..Default::default()
        })?;
        let dropout = mean_semantic_epistemic(&SimConfig {
            seed,
            regime: Regime::McDropout,
            correlation: 0.9,
            ..Default::default()
        })?;
        if deep > dropout {
            wins += 1;
        }
    }
    ensure(wins >= REGIME_WINS, || format!("deep ensembles higher in {wins}/20 seeds"))?;
    Ok(format!("deep ensembles higher in {wins}/20 seeds"))
}

fn random_small_config(rng: &mut ChaCha8Rng) -> SimConfig {
    let rows = rng.gen_range(16..=40);
    let cols = rng.gen_range(16..=40);
    let regime = [Regime::McDropout, Regime::MaskEnsembles, Regime::DeepEnsembles, Regime::SnapshotEnsembles]
        [rng.gen_range(0..4)];
    SimConfig {
        seed: rng.gen(),
        image_extent: [rows, cols],
        n_frames: rng.gen_range(1..=3),
        instances_per_frame: [1, rng.gen_range(1..=3)],
        object_size: [4, 12],
        background: rng.gen_bool(0.5),
        passes: rng.gen_range(1..=5),
        regime,
        correlation: rng.gen(),
        noise: NoiseConfig {
            bbox_sigma: rng.gen_range(0.0..2.0),
            logit_sigma: rng.gen_range(0.0..2.0),
            mask_flip_rate: rng.gen_range(0.0..0.2),
            miss_rate: rng.gen_range(0.0..0.5),
            mask_blur: rng.gen_range(0.0..2.0),
        },
        ..Default::default()
    }
}

fn criterion_10() -> Outcome {
    let cfg = PipelineConfig::default();
    let first = to_json_pretty(&run_pipeline(&cfg).map_err(|e| e.to_string())?.report);
    let second = to_json_pretty(&run_pipeline(&cfg).map_err(|e| e.to_string())?.report);
    ensure(first == second, || "pipeline reports differ between runs".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..1000 {
        let rows = rng.gen_range(1..=512);
        let cols = rng.gen_range(1..=512);
        let density: f64 = rng.gen();
        let mask = BinaryMask::from_fn(rows, cols, |_, _| rng.gen::<f64>() < density);
        let back = rle::decode(&rle::encode(&mask)).map_err(|e| e.to_string())?;
        ensure(back == mask, || format!("RLE case {case} ({rows}x{cols}) did not round-trip"))?;
    }

    for case in 0..1000 {
        let sim = random_small_config(&mut rng);
        let file = simulate_file(&sim).map_err(|e| format!("dataset case {case}: {e}"))?;
        let text = to_json_compact(&file);
        let parsed: DatasetFile = from_json_str(&text).map_err(|e| e.to_string())?;
        ensure(parsed == file, || format!("dataset case {case}: parse(serialize) differs"))?;
        let rebuilt = DatasetFile::from_dataset(&parsed.to_dataset().map_err(|e| e.to_string())?, Some(&sim));
        ensure(to_json_compact(&rebuilt) == text, || format!("dataset case {case}: model round trip differs"))?;
    }
    Ok(format!("report {} bytes stable, 1000 RLE masks, 1000 datasets", first.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("variance decomposition identity", criterion_1),
        ("analytic covariance fixtures", criterion_2),
        ("assignment matches brute force", criterion_3),
        ("PMQ closed-form fixtures", criterion_4),
        ("ECE calibrated stream and fixture", criterion_5),
        ("AUSE ranking properties", criterion_6),
        ("clustering properties", criterion_7),
        ("aleatoric variance concentrates on contours", criterion_8),
        ("regime separation", criterion_9),
        ("determinism and round trips", criterion_10),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = check();
        let spent = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({spent:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({spent:.2}s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed in {:?}", criteria.len() - failed, criteria.len(), start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
