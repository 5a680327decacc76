//! Inference: confidence thresholding and connectivity-based non-maximal
//! suppression.
//!
//! Per frame and class, every slot whose conditional score
//! `sigmoid(class logit) * sigmoid(existence logit)` clears the threshold
//! becomes a candidate. Candidates are clustered as the connected components
//! of the graph that joins pairs closer than the unify threshold (transitive
//! single-linkage, not pairwise completeness), and each cluster collapses to
//! one detection whose DOA is the renormalized confidence-weighted mean of
//! the member Cartesian DOAs.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{angular_distance_deg, Direction, GridIndex};
use crate::labels::PredictionTensor;
use crate::num::sigmoid;

/// A decoded frame-wise event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub frame: usize,
    pub class_id: usize,
    pub doa: Direction,
    /// Conditional class score of the strongest cluster member, in `(0, 1]`.
    pub score: f64,
}

/// A slot/class pairing that cleared the score threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub frame: usize,
    pub class_id: usize,
    /// Flat grid cell of the originating slot.
    pub cell: usize,
    /// Slot index within the cell.
    pub slot: usize,
    pub doa: Direction,
    pub score: f64,
}

/// One member of a cluster, carrying what unification needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterMember {
    /// Index into the candidate slice the cluster was built from.
    pub candidate_index: usize,
    pub score: f64,
    pub cartesian: [f64; 3],
}

/// A connected component of same-class candidates within one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub frame: usize,
    pub class_id: usize,
    pub members: Vec<ClusterMember>,
}

/// Extracts all candidates above `score_threshold` (strict), ordered by
/// (frame, cell, slot, class). One slot can yield candidates for several
/// classes.
pub fn candidate_detections(preds: &PredictionTensor, score_threshold: f64) -> Vec<Candidate> {
    let mut out = Vec::new();
    let grid = preds.grid();
    for frame in 0..preds.num_frames() {
        for cell in 0..preds.num_cells() {
            let index = GridIndex::from_flat(cell, grid);
            for slot in 0..preds.preds_per_cell() {
                let existence = sigmoid(preds.existence_logit(frame, cell, slot));
                let mut doa = None;
                for class_id in 0..preds.num_classes() {
                    let score = sigmoid(preds.class_logit(frame, cell, slot, class_id)) * existence;
                    if score > score_threshold {
                        let doa = *doa.get_or_insert_with(|| {
                            crate::labels::decode_doa(
                                preds.doa_raw(frame, cell, slot),
                                index,
                                grid,
                            )
                        });
                        out.push(Candidate {
                            frame,
                            class_id,
                            cell,
                            slot,
                            doa,
                            score,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Groups candidates of one frame and one class into the connected
/// components of the graph whose edges join pairs with angular distance
/// strictly below `upsilon_deg`.
///
/// Clusters are ordered by their smallest member index and members keep the
/// input order, so the output is deterministic.
pub fn cluster_candidates(candidates: &[Candidate], upsilon_deg: f64) -> Vec<Cluster> {
    if candidates.is_empty() {
        return Vec::new();
    }
    let frame = candidates[0].frame;
    let class_id = candidates[0].class_id;
    assert!(
        candidates
            .iter()
            .all(|c| c.frame == frame && c.class_id == class_id),
        "cluster_candidates expects candidates of a single frame and class"
    );

    let n = candidates.len();
    let mut component = vec![usize::MAX; n];
    let mut next_component = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        component[start] = next_component;
        stack.push(start);
        while let Some(a) = stack.pop() {
            for b in 0..n {
                if component[b] == usize::MAX
                    && angular_distance_deg(candidates[a].doa, candidates[b].doa) < upsilon_deg
                {
                    component[b] = next_component;
                    stack.push(b);
                }
            }
        }
        next_component += 1;
    }

    let mut clusters: Vec<Cluster> = (0..next_component)
        .map(|_| Cluster {
            frame,
            class_id,
            members: Vec::new(),
        })
        .collect();
    for (idx, candidate) in candidates.iter().enumerate() {
        clusters[component[idx]].members.push(ClusterMember {
            candidate_index: idx,
            score: candidate.score,
            cartesian: candidate.doa.to_cartesian(),
        });
    }
    clusters
}

/// Collapses a non-empty cluster into one detection.
///
/// Member weights are `softmax(exp(score^2 / 0.5))` (the double
/// exponentiation is intentional), the unified DOA is the weighted Cartesian
/// mean renormalized onto the sphere, and the detection score is the largest
/// member score. If antipodal members cancel the weighted sum to (near)
/// zero length, the highest-score member's DOA is used instead.
pub fn unify_cluster(cluster: &Cluster) -> Detection {
    assert!(!cluster.members.is_empty(), "cannot unify an empty cluster");
    let inner: Vec<f64> = cluster
        .members
        .iter()
        .map(|m| libm::exp(m.score * m.score / 0.5))
        .collect();
    // Softmax with the usual max shift; inner values live in (1, e^2].
    let max_inner = inner.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = inner.iter().map(|&w| libm::exp(w - max_inner)).collect();
    let denom: f64 = exps.iter().sum();

    let mut sum = [0.0f64; 3];
    for (member, &e) in cluster.members.iter().zip(&exps) {
        let w = e / denom;
        sum[0] += w * member.cartesian[0];
        sum[1] += w * member.cartesian[1];
        sum[2] += w * member.cartesian[2];
    }
    let norm = libm::sqrt(sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]);

    let best = cluster
        .members
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.score
                .partial_cmp(&b.score)
                .expect("scores are finite")
                .then(ib.cmp(ia))
        })
        .map(|(_, m)| m)
        .expect("cluster is non-empty");

    let doa = if norm < 1e-12 {
        Direction::from_cartesian(best.cartesian)
    } else {
        Direction::from_cartesian(sum)
    };
    Detection {
        frame: cluster.frame,
        class_id: cluster.class_id,
        doa,
        score: best.score,
    }
}

/// Full decoding pipeline: candidates, per-(frame, class) clustering, and
/// unification. Output is sorted by (frame, class, descending score).
pub fn decode(preds: &PredictionTensor, upsilon_deg: f64, score_threshold: f64) -> Vec<Detection> {
    let candidates = candidate_detections(preds, score_threshold);
    let mut groups: BTreeMap<(usize, usize), Vec<Candidate>> = BTreeMap::new();
    for candidate in candidates {
        groups
            .entry((candidate.frame, candidate.class_id))
            .or_default()
            .push(candidate);
    }
    let mut detections = Vec::new();
    for group in groups.values() {
        for cluster in cluster_candidates(group, upsilon_deg) {
            detections.push(unify_cluster(&cluster));
        }
    }
    detections.sort_by(|a, b| {
        (a.frame, a.class_id)
            .cmp(&(b.frame, b.class_id))
            .then(b.score.total_cmp(&a.score))
            .then(a.doa.azimuth_deg().total_cmp(&b.doa.azimuth_deg()))
            .then(a.doa.elevation_deg().total_cmp(&b.doa.elevation_deg()))
    });
    detections
}
