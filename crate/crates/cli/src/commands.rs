//! The pipelines behind each subcommand, kept as library functions so the
//! test suites can drive them in-process.

use std::fmt::Write as _;
use std::path::Path;

use adyolo_core::decoder::{decode, Detection};
use adyolo_core::gradcheck;
use adyolo_core::labels::{assign_responsibility, PredictionTensor, ReferenceSet};
use adyolo_core::loss::{total_loss, LossBreakdown, LossWeights};
use adyolo_core::metrics::{evaluate, filter_frames, same_class_overlap_frames, MetricsReport};
use adyolo_core::sim::{simulate, SceneSpec, SimulatedScene};
use adyolo_core::train::{train_toy, ToyHead, TrainOptions};
use anyhow::{bail, Context, Result};

use crate::config::Config;
use crate::csvio;
use crate::csvio::EventRow;
use crate::tensorio;

fn load_reference_set(
    path: &Path,
    num_frames: usize,
    num_classes: usize,
    config: &Config,
) -> Result<ReferenceSet> {
    let rows = csvio::read_events(path)?;
    csvio::reference_set_from_rows(path, &rows, num_frames, num_classes, config.grid()?)
}

pub fn simulate_cmd(
    scene: &SceneSpec,
    refs_out: &Path,
    features_out: Option<&Path>,
) -> Result<()> {
    let generated = simulate(scene).map_err(|e| anyhow::anyhow!("{e}"))?;
    let rows: Vec<EventRow> = generated
        .events
        .iter()
        .map(|e| EventRow {
            frame: e.frame,
            class_id: e.class_id,
            source_id: e.source_id,
            azimuth_deg: e.doa.azimuth_deg(),
            elevation_deg: e.doa.elevation_deg(),
        })
        .collect();
    csvio::write_events(refs_out, &rows)?;
    println!(
        "wrote {} events over {} frames to {}",
        rows.len(),
        scene.num_frames,
        refs_out.display()
    );
    if let Some(features_out) = features_out {
        tensorio::write_features(features_out, &generated.features)?;
        println!(
            "wrote {} feature frames (dim {}) to {}",
            generated.features.len(),
            generated.feature_dim,
            features_out.display()
        );
    }
    Ok(())
}

/// Responsibility statistics per threshold for a (references, predictions)
/// pair.
pub fn encode_summary(config: &Config, refs_path: &Path, preds_path: &Path) -> Result<String> {
    let grid = config.grid()?;
    let preds = tensorio::read_predictions(preds_path, &grid)?;
    let refs = load_reference_set(
        refs_path,
        preds.num_frames(),
        preds.num_classes(),
        config,
    )?;
    let masks = assign_responsibility(&refs, &preds, &config.thresholds_deg)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut out = String::new();
    writeln!(
        out,
        "frames={} cells={} slots_per_cell={} classes={} references={}",
        preds.num_frames(),
        preds.num_cells(),
        preds.preds_per_cell(),
        preds.num_classes(),
        refs.events().len()
    )?;
    for level in masks.levels() {
        let covered: std::collections::BTreeSet<usize> =
            level.pairs().iter().map(|p| p.ref_index).collect();
        writeln!(
            out,
            "tau={} responsible_slots={}/{} pairs={} refs_covered={}/{}",
            level.threshold_deg(),
            level.responsible_slot_count(),
            level.total_slots(),
            level.pairs().len(),
            covered.len(),
            refs.events().len()
        )?;
    }
    Ok(out)
}

pub fn encode_cmd(
    config: &Config,
    refs_path: &Path,
    preds_path: &Path,
    out: Option<&Path>,
) -> Result<()> {
    let summary = encode_summary(config, refs_path, preds_path)?;
    match out {
        Some(path) => {
            std::fs::write(path, &summary)
                .with_context(|| format!("cannot write {}", path.display()))?;
            println!("wrote responsibility summary to {}", path.display());
        }
        None => print!("{summary}"),
    }
    Ok(())
}

/// `key=value` rendering of a loss breakdown.
pub fn format_breakdown(breakdown: &LossBreakdown) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "l_delta={}", breakdown.doa);
    for terms in &breakdown.per_threshold {
        let _ = writeln!(out, "l_pos[{}]={}", terms.threshold_deg, terms.pos);
        let _ = writeln!(out, "l_neg[{}]={}", terms.threshold_deg, terms.neg);
        let _ = writeln!(out, "l_class[{}]={}", terms.threshold_deg, terms.class);
    }
    let _ = writeln!(out, "total={}", breakdown.total);
    out
}

pub fn loss_cmd(config: &Config, refs_path: &Path, preds_path: &Path) -> Result<()> {
    let grid = config.grid()?;
    let preds = tensorio::read_predictions(preds_path, &grid)?;
    let refs = load_reference_set(
        refs_path,
        preds.num_frames(),
        preds.num_classes(),
        config,
    )?;
    let (breakdown, _) = total_loss(&refs, &preds, &config.weights(), &config.thresholds_deg)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    print!("{}", format_breakdown(&breakdown));
    Ok(())
}

pub fn gradcheck_cmd(seed: u64, trials: usize) -> Result<()> {
    let report = gradcheck::run(seed, trials);
    print!("{}", gradcheck::format_report(&report));
    if !report.passed() {
        bail!(
            "gradient check failed: max relative error {:.3e} >= {:.0e}",
            report.max_rel_error(),
            gradcheck::REL_TOLERANCE
        );
    }
    Ok(())
}

pub fn decode_cmd(
    config: &Config,
    preds_path: &Path,
    upsilon_deg: f64,
    score_threshold: f64,
    out: &Path,
) -> Result<()> {
    let grid = config.grid()?;
    let preds = tensorio::read_predictions(preds_path, &grid)?;
    let detections = decode(&preds, upsilon_deg, score_threshold);
    csvio::write_detections(out, &detections)?;
    println!(
        "wrote {} detections (upsilon={upsilon_deg}, score_threshold={score_threshold}) to {}",
        detections.len(),
        out.display()
    );
    Ok(())
}

/// Evaluates a detections file against a references file. Frame and class
/// counts are inferred from the union of both files.
pub fn eval_report(
    config: &Config,
    refs_path: &Path,
    dets_path: &Path,
    overlap_only: bool,
) -> Result<MetricsReport> {
    let ref_rows = csvio::read_events(refs_path)?;
    let det_rows = csvio::read_detections(dets_path)?;
    let num_frames = ref_rows
        .iter()
        .map(|r| r.frame)
        .chain(det_rows.iter().map(|(r, _)| r.frame))
        .max()
        .map_or(1, |m| m + 1);
    let num_classes = ref_rows
        .iter()
        .map(|r| r.class_id)
        .chain(det_rows.iter().map(|(r, _)| r.class_id))
        .max()
        .map_or(1, |m| m + 1);
    let refs =
        csvio::reference_set_from_rows(refs_path, &ref_rows, num_frames, num_classes, config.grid()?)?;
    let detections = csvio::detections_from_rows(dets_path, &det_rows)?;
    let (refs, detections) = if overlap_only {
        let keep = same_class_overlap_frames(&refs);
        let filtered_dets: Vec<Detection> = detections
            .into_iter()
            .filter(|d| keep.contains(&d.frame))
            .collect();
        (filter_frames(&refs, &keep), filtered_dets)
    } else {
        (refs, detections)
    };
    Ok(evaluate(&refs, &detections, config.labels_per_second))
}

pub fn eval_cmd(
    config: &Config,
    refs_path: &Path,
    dets_path: &Path,
    overlap_only: bool,
    json: bool,
) -> Result<()> {
    let report = eval_report(config, refs_path, dets_path, overlap_only)?;
    if json {
        println!("{}", report.json());
    } else {
        print!("{}", report.kv_block());
    }
    Ok(())
}

/// Shared trainer entry: builds a seeded head, runs full-batch descent, and
/// returns the head together with its loss curve.
fn fit_head(
    refs: &ReferenceSet,
    features: &[Vec<f64>],
    config: &Config,
    hidden_dim: usize,
    epochs: usize,
    learning_rate: f64,
    stop_below_total: Option<f64>,
    head_seed: u64,
) -> Result<(ToyHead, Vec<LossBreakdown>)> {
    let feature_dim = features.first().map_or(0, Vec::len);
    if features.len() != refs.num_frames() {
        bail!(
            "feature file has {} frames but the references span {}",
            features.len(),
            refs.num_frames()
        );
    }
    let mut head = ToyHead::new(
        feature_dim,
        hidden_dim,
        *refs.grid(),
        config.preds_per_cell,
        refs.num_classes(),
        head_seed,
    );
    let opts = TrainOptions {
        epochs,
        learning_rate,
        weights: config.weights(),
        thresholds_deg: config.thresholds_deg.clone(),
        stop_below_total,
    };
    let curve = train_toy(&mut head, &[(refs, features)], &opts)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok((head, curve))
}

#[allow(clippy::too_many_arguments)]
pub fn train_toy_cmd(
    config: &Config,
    refs_path: &Path,
    features_path: &Path,
    hidden_dim: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
    curve_out: &Path,
    preds_out: Option<&Path>,
) -> Result<()> {
    let features = tensorio::read_features(features_path)?;
    let refs = load_reference_set(refs_path, features.len().max(1), config.num_classes, config)?;
    let (head, curve) = fit_head(
        &refs,
        &features,
        config,
        hidden_dim,
        epochs,
        learning_rate,
        None,
        seed,
    )?;
    csvio::write_loss_curve(curve_out, &curve)?;
    let first = curve.first().expect("curve always holds the initial loss");
    let last = curve.last().expect("curve is non-empty");
    println!(
        "trained {} epochs: total {} -> {} (curve in {})",
        curve.len() - 1,
        first.total,
        last.total,
        curve_out.display()
    );
    if let Some(preds_out) = preds_out {
        let (preds, _) = head.forward(&features);
        tensorio::write_predictions(preds_out, &preds)?;
        println!("wrote trained predictions to {}", preds_out.display());
    }
    Ok(())
}

/// Everything the end-to-end demonstration needs.
#[derive(Debug, Clone)]
pub struct DemoOptions {
    pub scene: SceneSpec,
    pub preds_per_cell: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub stop_below_total: Option<f64>,
    pub weights: LossWeights,
    pub thresholds_deg: Vec<f64>,
    pub upsilon_deg: f64,
    pub score_threshold: f64,
    pub labels_per_second: usize,
    pub head_seed: u64,
}

impl DemoOptions {
    /// The default desk-scale experiment: a noiseless 100-frame scene with
    /// 5 classes and polyphony up to 3, decoded at upsilon 15°.
    pub fn from_config(config: &Config) -> Self {
        Self {
            scene: SceneSpec {
                num_frames: 100,
                num_classes: config.num_classes,
                seed: config.seed,
                ..SceneSpec::default()
            },
            preds_per_cell: config.preds_per_cell,
            hidden_dim: 96,
            epochs: 1500,
            learning_rate: 1.0,
            stop_below_total: Some(0.02),
            weights: config.weights(),
            thresholds_deg: config.thresholds_deg.clone(),
            upsilon_deg: config.upsilon_deg,
            score_threshold: config.score_threshold,
            labels_per_second: config.labels_per_second,
            head_seed: config.seed.wrapping_add(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub scene: SimulatedScene,
    pub curve: Vec<LossBreakdown>,
    pub predictions: PredictionTensor,
    pub detections: Vec<Detection>,
    pub report: MetricsReport,
}

/// Simulate, train the toy head on the scene, decode its output, and score
/// it against the scene's own references.
pub fn run_demo(opts: &DemoOptions) -> Result<DemoOutcome> {
    let scene = simulate(&opts.scene).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut head = ToyHead::new(
        scene.feature_dim,
        opts.hidden_dim,
        *scene.refs.grid(),
        opts.preds_per_cell,
        opts.scene.num_classes,
        opts.head_seed,
    );
    let train_opts = TrainOptions {
        epochs: opts.epochs,
        learning_rate: opts.learning_rate,
        weights: opts.weights,
        thresholds_deg: opts.thresholds_deg.clone(),
        stop_below_total: opts.stop_below_total,
    };
    let curve = train_toy(&mut head, &[(&scene.refs, &scene.features)], &train_opts)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let (predictions, _) = head.forward(&scene.features);
    let detections = decode(&predictions, opts.upsilon_deg, opts.score_threshold);
    let report = evaluate(&scene.refs, &detections, opts.labels_per_second);
    Ok(DemoOutcome {
        scene,
        curve,
        predictions,
        detections,
        report,
    })
}

pub fn demo_cmd(opts: &DemoOptions, outdir: Option<&Path>) -> Result<()> {
    let outcome = run_demo(opts)?;
    let first = outcome.curve.first().expect("curve is non-empty");
    let last = outcome.curve.last().expect("curve is non-empty");
    println!(
        "scene: {} events over {} frames (same-class overlap frames: {})",
        outcome.scene.events.len(),
        opts.scene.num_frames,
        same_class_overlap_frames(&outcome.scene.refs).len()
    );
    println!(
        "training: {} epochs, total {} -> {}",
        outcome.curve.len() - 1,
        first.total,
        last.total
    );
    println!("detections: {}", outcome.detections.len());
    print!("{}", outcome.report.kv_block());
    if let Some(outdir) = outdir {
        std::fs::create_dir_all(outdir)
            .with_context(|| format!("cannot create {}", outdir.display()))?;
        let rows: Vec<EventRow> = outcome
            .scene
            .events
            .iter()
            .map(|e| EventRow {
                frame: e.frame,
                class_id: e.class_id,
                source_id: e.source_id,
                azimuth_deg: e.doa.azimuth_deg(),
                elevation_deg: e.doa.elevation_deg(),
            })
            .collect();
        csvio::write_events(&outdir.join("refs.csv"), &rows)?;
        tensorio::write_features(&outdir.join("features.bin"), &outcome.scene.features)?;
        csvio::write_loss_curve(&outdir.join("loss_curve.csv"), &outcome.curve)?;
        tensorio::write_predictions(&outdir.join("predictions.bin"), &outcome.predictions)?;
        csvio::write_detections(&outdir.join("detections.csv"), &outcome.detections)?;
        std::fs::write(outdir.join("metrics.json"), outcome.report.json())?;
        println!("artifacts written to {}", outdir.display());
    }
    Ok(())
}
