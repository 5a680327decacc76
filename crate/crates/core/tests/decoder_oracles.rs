//! Decoder checked against brute force: clustering versus an explicit
//! transitive-closure oracle, unify weights versus a naive scalar
//! recomputation, and the documented threshold-degeneracy properties.

use adyolo_core::decoder::{
    candidate_detections, cluster_candidates, decode, unify_cluster, Candidate,
};
use adyolo_core::geometry::{angular_distance_deg, Direction, GridSpec};
use adyolo_core::labels::PredictionTensor;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn random_candidates(rng: &mut ChaCha8Rng, count: usize) -> Vec<Candidate> {
    (0..count)
        .map(|_| Candidate {
            frame: 0,
            class_id: 0,
            cell: 0,
            slot: 0,
            doa: Direction::new(rng.gen_range(-180.0..180.0), rng.gen_range(-90.0..=90.0))
                .unwrap(),
            score: rng.gen_range(0.5..1.0),
        })
        .collect()
}

/// Transitive closure by repeated boolean squaring over the strict-distance
/// adjacency; the component of each node is its closure row.
fn closure_components(candidates: &[Candidate], upsilon: f64) -> Vec<BTreeSet<usize>> {
    let n = candidates.len();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] =
                i == j || angular_distance_deg(candidates[i].doa, candidates[j].doa) < upsilon;
        }
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if !reach[i][j] {
                    continue;
                }
                for k in 0..n {
                    if reach[j][k] && !reach[i][k] {
                        reach[i][k] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let comp: BTreeSet<usize> = (0..n).filter(|&j| reach[i][j]).collect();
        for &j in &comp {
            seen[j] = true;
        }
        components.push(comp);
    }
    components
}

#[test]
fn clustering_equals_transitive_closure_on_100_seeds() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = rng.gen_range(1..=20);
        let upsilon = rng.gen_range(5.0..60.0);
        let candidates = random_candidates(&mut rng, count);
        let clusters = cluster_candidates(&candidates, upsilon);
        let got: BTreeSet<BTreeSet<usize>> = clusters
            .iter()
            .map(|c| c.members.iter().map(|m| m.candidate_index).collect())
            .collect();
        let expected: BTreeSet<BTreeSet<usize>> =
            closure_components(&candidates, upsilon).into_iter().collect();
        assert_eq!(got, expected, "seed {seed} upsilon {upsilon}");
        // Partition property: every candidate in exactly one cluster.
        let total: usize = clusters.iter().map(|c| c.members.len()).sum();
        assert_eq!(total, count);
    }
}

#[test]
fn unify_weights_match_naive_scalar_route_on_100_seeds() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let count = rng.gen_range(1..=8);
        let candidates = random_candidates(&mut rng, count);
        // One big cluster regardless of geometry.
        let clusters = cluster_candidates(&candidates, 181.0);
        assert_eq!(clusters.len(), 1);
        let det = unify_cluster(&clusters[0]);
        // Naive scalar recomputation of the weights and the weighted mean.
        let inner: Vec<f64> = candidates.iter().map(|c| (c.score * c.score / 0.5).exp()).collect();
        let z: f64 = inner.iter().map(|&x| x.exp()).sum();
        let mut mean = [0.0f64; 3];
        for (c, &x) in candidates.iter().zip(&inner) {
            let w = x.exp() / z;
            let v = c.doa.to_cartesian();
            for axis in 0..3 {
                mean[axis] += w * v[axis];
            }
        }
        let norm = (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]).sqrt();
        if norm < 1e-12 {
            continue;
        }
        // Compare on the unit sphere component-wise; the acos route has a
        // ~1e-7 degree noise floor near coincident directions.
        let got = det.doa.to_cartesian();
        for axis in 0..3 {
            let expected = mean[axis] / norm;
            assert!(
                (got[axis] - expected).abs() < 1e-9,
                "seed {seed} axis {axis}: {} vs {expected}",
                got[axis]
            );
        }
        let best = candidates.iter().map(|c| c.score).fold(0.0f64, f64::max);
        assert_eq!(det.score, best);
    }
}

#[test]
fn upsilon_degeneracies() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let candidates = random_candidates(&mut rng, 12);
    // upsilon 0: strict inequality admits no edge, one cluster per candidate.
    let clusters = cluster_candidates(&candidates, 0.0);
    assert_eq!(clusters.len(), candidates.len());
    // upsilon 180: everything merges (no antipodal pair in a random draw).
    let clusters = cluster_candidates(&candidates, 180.0);
    assert_eq!(clusters.len(), 1);
}

#[test]
fn unified_doa_stays_within_the_member_spread() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let count = rng.gen_range(1..=10);
        // Keep members in a hemisphere-sized patch so the mean cannot cancel.
        let base_az: f64 = rng.gen_range(-140.0..140.0);
        let base_el: f64 = rng.gen_range(-50.0..50.0);
        let candidates: Vec<Candidate> = (0..count)
            .map(|_| Candidate {
                frame: 0,
                class_id: 0,
                cell: 0,
                slot: 0,
                doa: Direction::new(
                    base_az + rng.gen_range(-30.0..30.0),
                    (base_el + rng.gen_range(-30.0..30.0)).clamp(-90.0, 90.0),
                )
                .unwrap(),
                score: rng.gen_range(0.5..1.0),
            })
            .collect();
        let clusters = cluster_candidates(&candidates, 181.0);
        let det = unify_cluster(&clusters[0]);
        let nearest = candidates
            .iter()
            .map(|c| angular_distance_deg(det.doa, c.doa))
            .fold(f64::INFINITY, f64::min);
        let max_pairwise = candidates
            .iter()
            .flat_map(|a| {
                candidates
                    .iter()
                    .map(move |b| angular_distance_deg(a.doa, b.doa))
            })
            .fold(0.0f64, f64::max);
        assert!(
            nearest <= max_pairwise + 1e-9,
            "seed {seed}: unified DOA {nearest} beyond spread {max_pairwise}"
        );
    }
}

#[test]
fn decode_output_is_invariant_to_candidate_order() {
    // Permuting slots inside cells permutes candidate discovery order; the
    // detection set must not change.
    let grid = GridSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut preds = PredictionTensor::zeros(2, grid, 3, 3);
    for v in preds.raw_mut().iter_mut() {
        *v = rng.gen_range(-3.0..3.0);
    }
    let baseline = decode(&preds, 30.0, 0.5);
    assert!(!baseline.is_empty(), "want a non-trivial instance");

    let channels = preds.channels();
    let mut swapped = preds.clone();
    for frame in 0..2 {
        for cell in 0..grid.num_cells() {
            let a = swapped.slot_offset(frame, cell, 0);
            let b = swapped.slot_offset(frame, cell, 2);
            for ch in 0..channels {
                swapped.raw_mut().swap(a + ch, b + ch);
            }
        }
    }
    let permuted = decode(&swapped, 30.0, 0.5);
    assert_eq!(baseline.len(), permuted.len());
    for (x, y) in baseline.iter().zip(&permuted) {
        assert_eq!((x.frame, x.class_id), (y.frame, y.class_id));
        assert!(angular_distance_deg(x.doa, y.doa) < 1e-9);
        assert!((x.score - y.score).abs() < 1e-12);
    }
}

#[test]
fn detection_count_is_monotone_in_upsilon() {
    for seed in 0..100 {
        let grid = GridSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let mut preds = PredictionTensor::zeros(1, grid, 3, 3);
        for v in preds.raw_mut().iter_mut() {
            *v = rng.gen_range(-2.0..4.0);
        }
        let counts: Vec<usize> = [15.0, 30.0, 45.0]
            .iter()
            .map(|&u| decode(&preds, u, 0.5).len())
            .collect();
        assert!(
            counts[0] >= counts[1] && counts[1] >= counts[2],
            "seed {seed}: {counts:?}"
        );
    }
}

#[test]
fn candidates_respect_strict_threshold_and_multiclass_slots() {
    let grid = GridSpec::default();
    let mut preds = PredictionTensor::zeros(1, grid, 1, 3);
    let off = preds.slot_offset(0, 7, 0);
    // Two confident classes on the same slot.
    preds.raw_mut()[off] = 20.0;
    preds.raw_mut()[off + 2] = 20.0;
    preds.raw_mut()[off + 3] = 20.0;
    let candidates = candidate_detections(&preds, 0.5);
    assert_eq!(candidates.len(), 2);
    assert_eq!(candidates[0].class_id, 0);
    assert_eq!(candidates[1].class_id, 2);
    assert_eq!(candidates[0].doa, candidates[1].doa);
}
