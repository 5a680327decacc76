//! The training loss: angular-distance DOA term, existence terms, and
//! classification term, layered over multiple responsibility thresholds,
//! together with analytic gradients with respect to the raw prediction
//! tensor.
//!
//! Responsibility masks are treated as constants during differentiation
//! (their dependence on the predictions is a non-differentiable selection,
//! handled straight-through). Every term with an empty denominator is
//! defined as zero so silence batches stay trainable, and cross entropies
//! are evaluated in logit space so saturated predictions cannot overflow.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geometry::{angular_distance_grad, angular_distance_deg, GridIndex, DEG_TO_RAD};
use crate::labels::{
    assign_responsibility, decode_doa_with_grad, LabelError, PredictionTensor, ReferenceSet,
    ResponsibilityLevel, ResponsibilityMasks,
};
use crate::num::bce_grad_logit;
use crate::num::bce_with_logit;

/// Weights of the four loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of the angular-distance term.
    pub doa: f64,
    /// Weight of the positive existence term.
    pub pos: f64,
    /// Weight of the negative existence term.
    pub neg: f64,
    /// Weight of the classification term.
    pub class: f64,
}

impl Default for LossWeights {
    /// `{5, 1, 5, 3}`.
    fn default() -> Self {
        Self {
            doa: 5.0,
            pos: 1.0,
            neg: 5.0,
            class: 3.0,
        }
    }
}

/// Per-threshold values of the three threshold-dependent terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdTerms {
    pub threshold_deg: f64,
    pub pos: f64,
    pub neg: f64,
    pub class: f64,
}

/// Every component of one loss evaluation, plus the weighted total.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    /// Angular-distance term, evaluated at the largest threshold.
    pub doa: f64,
    /// One entry per threshold, in descending threshold order.
    pub per_threshold: Vec<ThresholdTerms>,
    pub total: f64,
}

impl LossBreakdown {
    /// Recomputes the weighted total from the stored components. The stored
    /// `total` is produced by this same expression, so the two agree bit for
    /// bit.
    pub fn compute_total(&self, weights: &LossWeights) -> f64 {
        let mut acc = 0.0;
        for terms in &self.per_threshold {
            acc += weights.pos * terms.pos + weights.neg * terms.neg + weights.class * terms.class;
        }
        weights.doa * self.doa + acc / self.per_threshold.len() as f64
    }

    /// Mean of the positive existence term over thresholds.
    pub fn mean_pos(&self) -> f64 {
        self.per_threshold.iter().map(|t| t.pos).sum::<f64>() / self.per_threshold.len() as f64
    }

    /// Mean of the negative existence term over thresholds.
    pub fn mean_neg(&self) -> f64 {
        self.per_threshold.iter().map(|t| t.neg).sum::<f64>() / self.per_threshold.len() as f64
    }

    /// Mean of the classification term over thresholds.
    pub fn mean_class(&self) -> f64 {
        self.per_threshold.iter().map(|t| t.class).sum::<f64>() / self.per_threshold.len() as f64
    }
}

/// A scalar loss term and its gradient, shaped like the raw tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerm {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl LossTerm {
    fn zeros(preds: &PredictionTensor) -> Self {
        Self {
            value: 0.0,
            grad: vec![0.0; preds.raw().len()],
        }
    }
}

/// Positive and negative existence terms for one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceLoss {
    pub pos: LossTerm,
    pub neg: LossTerm,
}

fn level_at<'m>(masks: &'m ResponsibilityMasks, threshold_deg: f64) -> &'m ResponsibilityLevel {
    masks
        .level_for(threshold_deg)
        .expect("masks were not built with the requested threshold")
}

/// Mean angular distance between every responsible (reference, slot) pair,
/// in radians normalized by pi: `sum(delta) / (pi * pair_count)`.
///
/// The masks must have been built with `tau_max_deg = max(thresholds)`. A
/// slot responsible for several references contributes one summand per pair.
/// With no responsible pair the term and its gradient are zero.
pub fn doa_loss(
    refs: &ReferenceSet,
    preds: &PredictionTensor,
    masks: &ResponsibilityMasks,
    tau_max_deg: f64,
) -> LossTerm {
    let level = level_at(masks, tau_max_deg);
    let mut out = LossTerm::zeros(preds);
    let pairs = level.pairs();
    if pairs.is_empty() {
        return out;
    }
    let scale = 1.0 / (PI * pairs.len() as f64);
    let grid = preds.grid();
    let mut sum_rad = 0.0;
    for pair in pairs {
        let event = refs.events()[pair.ref_index];
        let cell = GridIndex::from_flat(pair.cell, grid);
        let raw = preds.doa_raw(pair.frame, pair.cell, pair.slot);
        let (decoded, d_az_du, d_el_dv) = decode_doa_with_grad(raw, cell, grid);
        sum_rad += angular_distance_deg(decoded, event.doa) * DEG_TO_RAD;
        let (g_az, g_el) = angular_distance_grad(decoded, event.doa);
        let off = preds.slot_offset(pair.frame, pair.cell, pair.slot) + preds.num_classes() + 1;
        out.grad[off] += scale * DEG_TO_RAD * g_az * d_az_du;
        out.grad[off + 1] += scale * DEG_TO_RAD * g_el * d_el_dv;
    }
    out.value = sum_rad * scale;
    out
}

/// Mean binary cross entropy of the existence logit against 1 over
/// responsible slots, and against 0 over the remaining slots.
pub fn existence_losses(
    preds: &PredictionTensor,
    masks: &ResponsibilityMasks,
    tau_deg: f64,
) -> ExistenceLoss {
    let level = level_at(masks, tau_deg);
    let mut pos = LossTerm::zeros(preds);
    let mut neg = LossTerm::zeros(preds);
    let n_pos = level.responsible_slot_count();
    let n_neg = level.total_slots() - n_pos;
    let mask = level.existence_mask();
    let channels = preds.channels();
    let class_count = preds.num_classes();
    for (slot_idx, &responsible) in mask.iter().enumerate() {
        let logit_off = slot_idx * channels + class_count;
        let logit = preds.raw()[logit_off];
        if responsible {
            pos.value += bce_with_logit(1.0, logit);
            pos.grad[logit_off] = bce_grad_logit(1.0, logit) / n_pos as f64;
        } else if n_neg > 0 {
            neg.value += bce_with_logit(0.0, logit);
            neg.grad[logit_off] = bce_grad_logit(0.0, logit) / n_neg as f64;
        }
    }
    if n_pos > 0 {
        pos.value /= n_pos as f64;
    } else {
        pos.value = 0.0;
    }
    if n_neg > 0 {
        neg.value /= n_neg as f64;
    } else {
        neg.value = 0.0;
    }
    ExistenceLoss { pos, neg }
}

/// Classification term: the sum over every responsible slot of the per-class
/// binary cross entropies against that slot's class-target row, divided by
/// `C * (number of responsible slots)`. Non-responsible slots contribute
/// nothing and receive no gradient from this term.
pub fn class_loss(
    preds: &PredictionTensor,
    masks: &ResponsibilityMasks,
    tau_deg: f64,
) -> LossTerm {
    let level = level_at(masks, tau_deg);
    let mut out = LossTerm::zeros(preds);
    let n_responsible = level.responsible_slot_count();
    if n_responsible == 0 {
        return out;
    }
    let class_count = preds.num_classes();
    let channels = preds.channels();
    let norm = (class_count * n_responsible) as f64;
    for (slot_idx, &responsible) in level.existence_mask().iter().enumerate() {
        if !responsible {
            continue;
        }
        for c in 0..class_count {
            let target = if level.class_mask()[slot_idx * class_count + c] {
                1.0
            } else {
                0.0
            };
            let logit_off = slot_idx * channels + c;
            let logit = preds.raw()[logit_off];
            out.value += bce_with_logit(target, logit);
            out.grad[logit_off] = bce_grad_logit(target, logit) / norm;
        }
    }
    out.value /= norm;
    out
}

/// Assembles the weighted total from pre-built masks:
/// `w_doa * doa(max tau) + mean over tau of (w_pos*pos + w_neg*neg +
/// w_class*class)`. Returns the breakdown and the full gradient tensor.
pub fn total_loss_with_masks(
    refs: &ReferenceSet,
    preds: &PredictionTensor,
    masks: &ResponsibilityMasks,
    weights: &LossWeights,
) -> (LossBreakdown, Vec<f64>) {
    let levels = masks.levels();
    let tau_max = levels[0].threshold_deg();
    let doa = doa_loss(refs, preds, masks, tau_max);

    let mut grad = doa.grad;
    for g in grad.iter_mut() {
        *g *= weights.doa;
    }

    let tau_norm = levels.len() as f64;
    let mut per_threshold = Vec::with_capacity(levels.len());
    for level in levels {
        let tau = level.threshold_deg();
        let existence = existence_losses(preds, masks, tau);
        let class = class_loss(preds, masks, tau);
        for (idx, g) in grad.iter_mut().enumerate() {
            *g += (weights.pos * existence.pos.grad[idx]
                + weights.neg * existence.neg.grad[idx]
                + weights.class * class.grad[idx])
                / tau_norm;
        }
        per_threshold.push(ThresholdTerms {
            threshold_deg: tau,
            pos: existence.pos.value,
            neg: existence.neg.value,
            class: class.value,
        });
    }

    let mut breakdown = LossBreakdown {
        doa: doa.value,
        per_threshold,
        total: 0.0,
    };
    breakdown.total = breakdown.compute_total(weights);
    (breakdown, grad)
}

/// Builds responsibility masks for the given thresholds and evaluates the
/// weighted total loss with its gradient.
pub fn total_loss(
    refs: &ReferenceSet,
    preds: &PredictionTensor,
    weights: &LossWeights,
    thresholds_deg: &[f64],
) -> Result<(LossBreakdown, Vec<f64>), LabelError> {
    let masks = assign_responsibility(refs, preds, thresholds_deg)?;
    Ok(total_loss_with_masks(refs, preds, &masks, weights))
}
