//! Central finite-difference verification of every analytic gradient.
//!
//! The loss terms are differentiated with the responsibility masks held
//! fixed (exactly the functions the loss operations compute; the masks'
//! own dependence on the predictions is a non-differentiable selection).
//! Each check perturbs raw tensor entries by ±h and compares the central
//! difference against the analytic gradient entry.
//!
//! The harness ships in the library so binaries can run it as a self-test;
//! the test suites call the same entry points.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::GridSpec;
use crate::labels::{assign_responsibility, PredictionTensor, ReferenceSet, ResponsibilityMasks};
use crate::loss::{class_loss, doa_loss, existence_losses, total_loss_with_masks, LossWeights};
use crate::sim::{simulate, SceneSpec, Trajectory};
use crate::train::{scene_loss_with_grad, ToyHead};

/// Relative tolerance every gradient must meet.
pub const REL_TOLERANCE: f64 = 1e-4;

/// Central-difference step on raw tensor entries.
pub const FD_STEP: f64 = 1e-5;

const THRESHOLDS: [f64; 3] = [45.0, 25.0, 10.0];

/// Relative error with a small absolute floor so zero-gradient entries
/// compare the finite-difference noise absolutely instead of dividing by it.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Worst relative error seen per loss term, over all instances checked.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradcheckReport {
    pub doa: f64,
    pub pos: f64,
    pub neg: f64,
    pub class: f64,
    pub total: f64,
    pub head: f64,
}

impl GradcheckReport {
    pub fn max_rel_error(&self) -> f64 {
        [self.doa, self.pos, self.neg, self.class, self.total, self.head]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < REL_TOLERANCE
    }

    /// One `name=value` line per term.
    pub fn lines(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("doa", self.doa),
            ("existence_pos", self.pos),
            ("existence_neg", self.neg),
            ("class", self.class),
            ("total", self.total),
            ("toy_head", self.head),
        ]
    }
}

/// A reproducible random (references, predictions) instance on the default
/// grid: `T <= 4`, `K = 3`, `C <= 5`, up to six reference events, raw values
/// uniform in ±3 so no logit saturates.
pub fn random_instance(seed: u64) -> (ReferenceSet, PredictionTensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = GridSpec::default();
    let num_frames = rng.gen_range(1..=4);
    let num_classes = rng.gen_range(1..=5);
    let preds_per_cell = 3;
    let num_events = rng.gen_range(0..=6);
    let mut rows = Vec::with_capacity(num_events);
    for _ in 0..num_events {
        rows.push((
            rng.gen_range(0..num_frames),
            rng.gen_range(0..num_classes),
            rng.gen_range(-180.0..180.0),
            rng.gen_range(-90.0..=90.0),
        ));
    }
    let refs = ReferenceSet::from_rows(&rows, num_frames, num_classes, grid)
        .expect("generated rows are valid");
    let len = num_frames * grid.num_cells() * preds_per_cell * (num_classes + 3);
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let preds = PredictionTensor::new(raw, num_frames, grid, preds_per_cell, num_classes)
        .expect("generated tensor is valid");
    (refs, preds)
}

fn central_difference<F: FnMut(&PredictionTensor) -> f64>(
    preds: &PredictionTensor,
    index: usize,
    mut f: F,
) -> f64 {
    let mut perturbed = preds.clone();
    perturbed.raw_mut()[index] += FD_STEP;
    let plus = f(&perturbed);
    perturbed.raw_mut()[index] -= 2.0 * FD_STEP;
    let minus = f(&perturbed);
    (plus - minus) / (2.0 * FD_STEP)
}

/// Entries to probe: a biased sample covering responsible slots (where the
/// interesting gradients live) plus uniform picks over the whole tensor.
fn sample_entries(
    rng: &mut ChaCha8Rng,
    preds: &PredictionTensor,
    masks: &ResponsibilityMasks,
    full: bool,
) -> Vec<usize> {
    let len = preds.raw().len();
    if full {
        return (0..len).collect();
    }
    let channels = preds.channels();
    let mut entries = Vec::new();
    let responsible: Vec<usize> = masks
        .max_level()
        .existence_mask()
        .iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(slot_idx, _)| slot_idx)
        .collect();
    for _ in 0..12 {
        if let Some(&slot_idx) = responsible
            .get(rng.gen_range(0..responsible.len().max(1)))
            .filter(|_| !responsible.is_empty())
        {
            entries.push(slot_idx * channels + rng.gen_range(0..channels));
        }
    }
    for _ in 0..8 {
        entries.push(rng.gen_range(0..len));
    }
    entries.sort_unstable();
    entries.dedup();
    entries
}

fn max_err(worst: &mut f64, analytic: &[f64], preds: &PredictionTensor, entries: &[usize], f: &mut dyn FnMut(&PredictionTensor) -> f64) {
    for &index in entries {
        let numeric = central_difference(preds, index, &mut *f);
        let err = relative_error(analytic[index], numeric);
        *worst = worst.max(err);
    }
}

/// Checks the four loss terms and the weighted total on one instance.
/// `full_tensor` probes every raw entry instead of a sample.
pub fn check_instance(seed: u64, full_tensor: bool) -> GradcheckReport {
    let (refs, preds) = random_instance(seed);
    let masks = assign_responsibility(&refs, &preds, &THRESHOLDS)
        .expect("instance shapes are consistent");
    let weights = LossWeights::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let entries = sample_entries(&mut rng, &preds, &masks, full_tensor);

    let mut report = GradcheckReport::default();

    let analytic = doa_loss(&refs, &preds, &masks, THRESHOLDS[0]);
    max_err(&mut report.doa, &analytic.grad, &preds, &entries, &mut |p| {
        doa_loss(&refs, p, &masks, THRESHOLDS[0]).value
    });

    for &tau in &THRESHOLDS {
        let existence = existence_losses(&preds, &masks, tau);
        max_err(&mut report.pos, &existence.pos.grad, &preds, &entries, &mut |p| {
            existence_losses(p, &masks, tau).pos.value
        });
        max_err(&mut report.neg, &existence.neg.grad, &preds, &entries, &mut |p| {
            existence_losses(p, &masks, tau).neg.value
        });
        let class = class_loss(&preds, &masks, tau);
        max_err(&mut report.class, &class.grad, &preds, &entries, &mut |p| {
            class_loss(p, &masks, tau).value
        });
    }

    let (_, total_grad) = total_loss_with_masks(&refs, &preds, &masks, &weights);
    max_err(&mut report.total, &total_grad, &preds, &entries, &mut |p| {
        total_loss_with_masks(&refs, p, &masks, &weights).0.total
    });

    report
}

/// Finite-difference check of the toy head's parameter gradients (every
/// parameter of a hidden-8 head on a small static scene), with the masks
/// frozen at the unperturbed forward pass.
pub fn check_toy_head(seed: u64) -> f64 {
    let scene = simulate(&SceneSpec {
        num_frames: 5,
        num_classes: 3,
        max_polyphony: 2,
        birth_prob: 0.6,
        trajectory: Trajectory::Static,
        seed,
        ..SceneSpec::default()
    })
    .expect("scene spec is valid");
    let grid = *scene.refs.grid();
    let mut head = ToyHead::new(scene.feature_dim, 8, grid, 3, 3, seed);
    let weights = LossWeights::default();

    let (breakdown, grads) =
        scene_loss_with_grad(&head, &scene.refs, &scene.features, &weights, &THRESHOLDS)
            .expect("scene matches head");
    debug_assert!(breakdown.total.is_finite());
    let (preds, _) = head.forward(&scene.features);
    let masks = assign_responsibility(&scene.refs, &preds, &THRESHOLDS).expect("shapes agree");

    let frozen_loss = |head: &ToyHead| -> f64 {
        let (preds, _) = head.forward(&scene.features);
        total_loss_with_masks(&scene.refs, &preds, &masks, &weights).0.total
    };

    let mut worst = 0.0f64;
    let blocks: [(fn(&mut ToyHead) -> &mut Vec<f64>, &Vec<f64>); 4] = [
        (|h| &mut h.w1, &grads.w1),
        (|h| &mut h.b1, &grads.b1),
        (|h| &mut h.w2, &grads.w2),
        (|h| &mut h.b2, &grads.b2),
    ];
    for (select, analytic) in blocks {
        for i in 0..analytic.len() {
            select(&mut head)[i] += FD_STEP;
            let plus = frozen_loss(&head);
            select(&mut head)[i] -= 2.0 * FD_STEP;
            let minus = frozen_loss(&head);
            select(&mut head)[i] += FD_STEP;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(analytic[i], numeric));
        }
    }
    worst
}

/// Runs the whole suite: `instances` random loss instances (the first few at
/// full-tensor resolution) plus the toy-head parameter check.
pub fn run(seed: u64, instances: usize) -> GradcheckReport {
    let mut report = GradcheckReport::default();
    for i in 0..instances {
        let inst = check_instance(seed.wrapping_add(i as u64), i < 3);
        report.doa = report.doa.max(inst.doa);
        report.pos = report.pos.max(inst.pos);
        report.neg = report.neg.max(inst.neg);
        report.class = report.class.max(inst.class);
        report.total = report.total.max(inst.total);
    }
    report.head = check_toy_head(seed);
    report
}

/// Formats the report the way the command-line self-test prints it.
pub fn format_report(report: &GradcheckReport) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    for (name, value) in report.lines() {
        let _ = writeln!(out, "max_rel_error[{name}]={value:.3e}");
    }
    let _ = writeln!(out, "max_rel_error={:.3e}", report.max_rel_error());
    let _ = writeln!(
        out,
        "tolerance={REL_TOLERANCE:.0e} result={}",
        if report.passed() { "pass" } else { "FAIL" }
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_handful_of_instances_pass_quickly() {
        for seed in [0, 1, 2] {
            let report = check_instance(seed, false);
            assert!(
                report.max_rel_error() < REL_TOLERANCE,
                "seed {seed}: {report:?}"
            );
        }
    }

    #[test]
    fn toy_head_gradients_match() {
        let worst = check_toy_head(7);
        assert!(worst < REL_TOLERANCE, "worst {worst:.3e}");
    }
}
