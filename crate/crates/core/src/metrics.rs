//! SELD evaluation: location-sensitive error rate and F-score at 20°,
//! class-sensitive localization error and recall, and their average.
//!
//! Detections and references are paired per frame and class by minimum-cost
//! assignment on angular distance. Pairs closer than 20° are true positives;
//! pairs at or beyond 20° count as both a false positive and a false
//! negative. The error rate is computed per one-second segment as
//! `(S + D + I) / N` from the pooled per-segment counts and aggregated by
//! summing numerators and denominators; F, LE, and LR pool their counts
//! over the whole input (micro-aggregation).

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::assignment::min_cost_assignment;
use crate::decoder::Detection;
use crate::geometry::{angular_distance_deg, Direction};
use crate::labels::ReferenceSet;

/// Angular gate for location-sensitive true positives, degrees.
pub const TP_DISTANCE_DEG: f64 = 20.0;

/// The four metrics plus their average.
///
/// `le_cd_deg` is `None` when no detection was class-matched to any
/// reference; inside [`seld_error`] that case is scored as the maximal 180°.
/// `er20` is infinite when there are detections but no references at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub er20: f64,
    pub f20: f64,
    pub le_cd_deg: Option<f64>,
    pub lr_cd: f64,
    pub seld_error: f64,
}

impl MetricsReport {
    /// Flat `key=value` lines, one metric per line.
    pub fn kv_block(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("er20={}\n", self.er20));
        out.push_str(&format!("f20={}\n", self.f20));
        match self.le_cd_deg {
            Some(le) => out.push_str(&format!("le_cd_deg={le}\n")),
            None => out.push_str("le_cd_deg=undefined\n"),
        }
        out.push_str(&format!("lr_cd={}\n", self.lr_cd));
        out.push_str(&format!("seld_error={}\n", self.seld_error));
        out
    }

    /// Machine-readable JSON document. Undefined or non-finite values are
    /// emitted as `null`.
    pub fn json(&self) -> String {
        fn field(v: f64) -> String {
            if v.is_finite() {
                format!("{v}")
            } else {
                String::from("null")
            }
        }
        let le = match self.le_cd_deg {
            Some(le) => field(le),
            None => String::from("null"),
        };
        format!(
            "{{\"er20\": {}, \"f20\": {}, \"le_cd_deg\": {}, \"lr_cd\": {}, \"seld_error\": {}}}",
            field(self.er20),
            field(self.f20),
            le,
            field(self.lr_cd),
            field(self.seld_error)
        )
    }
}

/// Average of the four error terms:
/// `(er + (1 - f) + (1 - lr) + le/180) / 4`, with an undefined localization
/// error substituted by the maximally penalized 180°.
pub fn seld_error(er20: f64, f20: f64, le_cd_deg: Option<f64>, lr_cd: f64) -> f64 {
    let le = le_cd_deg.unwrap_or(180.0);
    (er20 + (1.0 - f20) + (1.0 - lr_cd) + le / 180.0) / 4.0
}

/// Matching of one frame/class bucket: index pairs with their angular
/// distance, plus the leftovers on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    /// `(detection index, reference index, distance_deg)`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_references: Vec<usize>,
}

/// Pairs detections with references (already restricted to one frame and
/// class) by minimum-cost assignment on angular distance. All
/// `min(dets, refs)` pairs are formed regardless of distance; the 20° gate
/// is applied by the caller.
pub fn match_per_class(detections: &[Direction], references: &[Direction]) -> MatchOutcome {
    let rows = detections.len();
    let cols = references.len();
    let mut costs = Vec::with_capacity(rows * cols);
    for d in detections {
        for r in references {
            costs.push(angular_distance_deg(*d, *r));
        }
    }
    let assignment = min_cost_assignment(&costs, rows, cols);
    let pairs: Vec<(usize, usize, f64)> = assignment
        .iter()
        .map(|&(d, r)| (d, r, costs[d * cols + r]))
        .collect();
    let matched_d: BTreeSet<usize> = pairs.iter().map(|p| p.0).collect();
    let matched_r: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
    MatchOutcome {
        pairs,
        unmatched_detections: (0..rows).filter(|d| !matched_d.contains(d)).collect(),
        unmatched_references: (0..cols).filter(|r| !matched_r.contains(r)).collect(),
    }
}

/// Location-sensitive counts pooled over everything evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DetectionCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Per-segment substitution/deletion/insertion tally for the error rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SegmentCounts {
    pub references: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl SegmentCounts {
    pub fn substitutions(&self) -> usize {
        self.false_negatives.min(self.false_positives)
    }

    pub fn deletions(&self) -> usize {
        self.false_negatives.saturating_sub(self.false_positives)
    }

    pub fn insertions(&self) -> usize {
        self.false_positives.saturating_sub(self.false_negatives)
    }
}

/// Everything [`evaluate`] tallies before reducing to a [`MetricsReport`].
/// Exposed so golden tests can check the counting tables directly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvaluationTally {
    pub counts: DetectionCounts,
    /// Segment index -> counts; only segments with any activity appear.
    pub segments: BTreeMap<usize, SegmentCounts>,
    /// Sum of matched-pair angular distances (no 20° gate).
    pub matched_distance_sum_deg: f64,
    /// Number of class-matched pairs.
    pub matched_pairs: usize,
    /// Total number of references.
    pub total_references: usize,
}

impl EvaluationTally {
    pub fn report(&self) -> MetricsReport {
        let er_numerator: usize = self
            .segments
            .values()
            .map(|s| s.substitutions() + s.deletions() + s.insertions())
            .sum();
        let er_denominator: usize = self.segments.values().map(|s| s.references).sum();
        let er20 = if er_denominator > 0 {
            er_numerator as f64 / er_denominator as f64
        } else if er_numerator == 0 {
            0.0
        } else {
            f64::INFINITY
        };

        let c = &self.counts;
        let f_denominator = 2 * c.true_positives + c.false_positives + c.false_negatives;
        let f20 = if f_denominator > 0 {
            2.0 * c.true_positives as f64 / f_denominator as f64
        } else {
            0.0
        };

        let le_cd_deg = if self.matched_pairs > 0 {
            Some(self.matched_distance_sum_deg / self.matched_pairs as f64)
        } else {
            None
        };
        let lr_cd = if self.total_references > 0 {
            self.matched_pairs as f64 / self.total_references as f64
        } else {
            0.0
        };

        MetricsReport {
            er20,
            f20,
            le_cd_deg,
            lr_cd,
            seld_error: seld_error(er20, f20, le_cd_deg, lr_cd),
        }
    }
}

/// Scores detections against references.
///
/// `labels_per_second` fixes the one-second segment length for the error
/// rate (frames `[0, lps)` form segment 0, and so on).
pub fn evaluate(
    refs: &ReferenceSet,
    detections: &[Detection],
    labels_per_second: usize,
) -> MetricsReport {
    tally(refs, detections, labels_per_second).report()
}

/// The counting pass behind [`evaluate`].
pub fn tally(
    refs: &ReferenceSet,
    detections: &[Detection],
    labels_per_second: usize,
) -> EvaluationTally {
    assert!(labels_per_second > 0, "labels_per_second must be positive");
    let mut buckets: BTreeMap<(usize, usize), (Vec<Direction>, Vec<Direction>)> = BTreeMap::new();
    for det in detections {
        buckets
            .entry((det.frame, det.class_id))
            .or_default()
            .0
            .push(det.doa);
    }
    for event in refs.events() {
        buckets
            .entry((event.frame, event.class_id))
            .or_default()
            .1
            .push(event.doa);
    }

    let mut out = EvaluationTally {
        total_references: refs.events().len(),
        ..Default::default()
    };
    for event in refs.events() {
        out.segments
            .entry(event.frame / labels_per_second)
            .or_default()
            .references += 1;
    }

    for (&(frame, _class), (dets, references)) in &buckets {
        let outcome = match_per_class(dets, references);
        let segment = out
            .segments
            .entry(frame / labels_per_second)
            .or_default();
        let mut fp = outcome.unmatched_detections.len();
        let mut fnp = outcome.unmatched_references.len();
        for &(_, _, distance) in &outcome.pairs {
            if distance < TP_DISTANCE_DEG {
                out.counts.true_positives += 1;
            } else {
                fp += 1;
                fnp += 1;
            }
            out.matched_distance_sum_deg += distance;
        }
        out.matched_pairs += outcome.pairs.len();
        segment.false_positives += fp;
        segment.false_negatives += fnp;
        out.counts.false_positives += fp;
        out.counts.false_negatives += fnp;
    }
    out
}

/// Frames holding at least two same-class references (the condition behind
/// overlap-only evaluation).
pub fn same_class_overlap_frames(refs: &ReferenceSet) -> BTreeSet<usize> {
    let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for event in refs.events() {
        *seen.entry((event.frame, event.class_id)).or_default() += 1;
    }
    seen.iter()
        .filter(|(_, &count)| count >= 2)
        .map(|(&(frame, _), _)| frame)
        .collect()
}

/// Restricts a reference set to the given frames (frame indices keep their
/// original values so segment grouping is unchanged).
pub fn filter_frames(refs: &ReferenceSet, keep: &BTreeSet<usize>) -> ReferenceSet {
    let events: Vec<_> = refs
        .events()
        .iter()
        .copied()
        .filter(|e| keep.contains(&e.frame))
        .collect();
    ReferenceSet::new(events, refs.num_frames(), refs.num_classes(), *refs.grid())
        .expect("filtering preserves validity")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridSpec;

    fn dir(az: f64, el: f64) -> Direction {
        Direction::new(az, el).unwrap()
    }

    fn det(frame: usize, class_id: usize, az: f64, el: f64) -> Detection {
        Detection {
            frame,
            class_id,
            doa: dir(az, el),
            score: 0.9,
        }
    }

    #[test]
    fn seld_error_trivial_and_perfect() {
        assert_eq!(seld_error(0.0, 1.0, Some(0.0), 1.0), 0.0);
        // Undefined localization error is scored as 180°.
        assert_eq!(seld_error(0.0, 1.0, None, 1.0), 0.25);
    }

    #[test]
    fn match_per_class_basics() {
        // One pair at 5°.
        let outcome = match_per_class(&[dir(5.0, 0.0)], &[dir(0.0, 0.0)]);
        assert_eq!(outcome.pairs.len(), 1);
        assert!((outcome.pairs[0].2 - 5.0).abs() < 1e-9);
        assert!(outcome.unmatched_detections.is_empty());
        assert!(outcome.unmatched_references.is_empty());
        // No detections: every reference is a miss.
        let outcome = match_per_class(&[], &[dir(0.0, 0.0), dir(50.0, 0.0)]);
        assert!(outcome.pairs.is_empty());
        assert_eq!(outcome.unmatched_references, vec![0, 1]);
    }

    #[test]
    fn match_per_class_crossing_configuration() {
        // Det 0 is 10° from ref 0 and 30° from ref 1; det 1 is 30° from
        // ref 0 and 10° from ref 1. Straight pairing costs 20, crossed 60.
        let dets = [dir(10.0, 0.0), dir(40.0, 0.0)];
        let refs = [dir(0.0, 0.0), dir(50.0, 0.0)];
        let outcome = match_per_class(&dets, &refs);
        let mut pairs: Vec<_> = outcome.pairs.iter().map(|p| (p.0, p.1)).collect();
        pairs.sort_unstable();
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn perfect_detections_score_perfectly() {
        let grid = GridSpec::default();
        let refs = ReferenceSet::from_rows(
            &[(0, 0, 10.0, 10.0), (0, 1, -50.0, 0.0), (12, 0, 100.0, -30.0)],
            20,
            3,
            grid,
        )
        .unwrap();
        let dets: Vec<Detection> = refs
            .events()
            .iter()
            .map(|e| Detection {
                frame: e.frame,
                class_id: e.class_id,
                doa: e.doa,
                score: 1.0,
            })
            .collect();
        let report = evaluate(&refs, &dets, 10);
        assert_eq!(report.er20, 0.0);
        assert_eq!(report.f20, 1.0);
        assert_eq!(report.le_cd_deg, Some(0.0));
        assert_eq!(report.lr_cd, 1.0);
        assert_eq!(report.seld_error, 0.0);
    }

    #[test]
    fn over_gate_match_counts_as_fp_and_fn_but_still_localizes() {
        let grid = GridSpec::default();
        let refs = ReferenceSet::from_rows(&[(0, 0, 0.0, 0.0)], 10, 2, grid).unwrap();
        // Same class at 25°: past the gate.
        let report = evaluate(&refs, &[det(0, 0, 25.0, 0.0)], 10);
        assert_eq!(report.f20, 0.0);
        assert_eq!(report.er20, 1.0);
        // The class-sensitive pair still exists: LE 25°, LR 1.
        assert!((report.le_cd_deg.unwrap() - 25.0).abs() < 1e-9);
        assert_eq!(report.lr_cd, 1.0);
        // At 35° likewise (recall ignores the gate entirely).
        let report = evaluate(&refs, &[det(0, 0, 35.0, 0.0)], 10);
        assert!((report.le_cd_deg.unwrap() - 35.0).abs() < 1e-9);
        assert_eq!(report.lr_cd, 1.0);
    }

    #[test]
    fn zero_reference_guards() {
        let grid = GridSpec::default();
        let refs = ReferenceSet::from_rows(&[], 10, 2, grid).unwrap();
        // No references, no detections: everything defined, nothing scored.
        let report = evaluate(&refs, &[], 10);
        assert_eq!(report.er20, 0.0);
        assert_eq!(report.f20, 0.0);
        assert_eq!(report.le_cd_deg, None);
        assert_eq!(report.lr_cd, 0.0);
        assert!(report.seld_error.is_finite());
        // Detections against silence: insertions over an empty denominator.
        let report = evaluate(&refs, &[det(0, 0, 0.0, 0.0)], 10);
        assert!(report.er20.is_infinite());
        assert_eq!(report.f20, 0.0);
    }

    #[test]
    fn detection_order_does_not_matter() {
        let grid = GridSpec::default();
        let refs = ReferenceSet::from_rows(
            &[(0, 0, 0.0, 0.0), (0, 0, 90.0, 0.0), (1, 1, -10.0, 5.0)],
            10,
            2,
            grid,
        )
        .unwrap();
        let mut dets = [
            det(0, 0, 3.0, 0.0),
            det(0, 0, 88.0, 1.0),
            det(1, 1, -12.0, 4.0),
            det(1, 0, 170.0, 0.0),
        ];
        let forward = evaluate(&refs, &dets, 10);
        dets.reverse();
        let reversed = evaluate(&refs, &dets, 10);
        assert_eq!(forward, reversed);
    }

    #[test]
    fn overlap_frame_filter() {
        let grid = GridSpec::default();
        let refs = ReferenceSet::from_rows(
            &[
                (0, 0, 0.0, 0.0),
                (0, 1, 50.0, 0.0),
                (2, 1, 10.0, 0.0),
                (2, 1, 120.0, 0.0),
                (3, 0, 0.0, 0.0),
            ],
            5,
            2,
            grid,
        )
        .unwrap();
        let frames = same_class_overlap_frames(&refs);
        assert_eq!(frames.into_iter().collect::<Vec<_>>(), vec![2]);
        let filtered = filter_frames(&refs, &[2usize].into_iter().collect());
        assert_eq!(filtered.events().len(), 2);
        assert!(filtered.events().iter().all(|e| e.frame == 2));
    }
}
