//! Responsibility assignment checked against a brute-force triple loop that
//! re-derives everything from scratch: sigmoid decoding inline, distances via
//! Cartesian dot products, and extended-cell membership via plain interval
//! arithmetic.

use adyolo_core::gradcheck::random_instance;
use adyolo_core::labels::{assign_responsibility, decode_doa, PredictionTensor, ReferenceSet};
use adyolo_core::geometry::{Direction, GridIndex, GridSpec};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const THRESHOLDS: [f64; 3] = [45.0, 25.0, 10.0];

fn oracle_sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Re-derives a slot's decoded DOA without calling the library decoder.
fn oracle_decode(raw: (f64, f64), flat: usize, spec: &GridSpec) -> (f64, f64) {
    let i = flat % spec.lon_cells();
    let j = flat / spec.lon_cells();
    let center_az = -180.0 + (i as f64 + 0.5) * spec.cell_width_deg();
    let center_el = -90.0 + (j as f64 + 0.5) * spec.cell_height_deg();
    let reach_w = spec.cell_width_deg() * (1.0 + 2.0 * spec.overlap_fraction());
    let reach_h = spec.cell_height_deg() * (1.0 + 2.0 * spec.overlap_fraction());
    let az = center_az + (oracle_sigmoid(raw.0) - 0.5) * reach_w;
    let el = (center_el + (oracle_sigmoid(raw.1) - 0.5) * reach_h).clamp(-90.0, 90.0);
    (az, el)
}

fn oracle_distance_deg(a: (f64, f64), b: (f64, f64)) -> f64 {
    let cart = |(az, el): (f64, f64)| {
        let (az, el) = (az.to_radians(), el.to_radians());
        [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
    };
    let va = cart(a);
    let vb = cart(b);
    if va == vb {
        return 0.0;
    }
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Interval-arithmetic extended membership (azimuth candidates tested with
/// explicit ±360 shifts).
fn oracle_extended_contains(az: f64, el: f64, flat: usize, spec: &GridSpec) -> bool {
    let i = flat % spec.lon_cells();
    let j = flat / spec.lon_cells();
    let lon_lo = -180.0 + i as f64 * spec.cell_width_deg();
    let lon_hi = lon_lo + spec.cell_width_deg();
    let lat_lo = -90.0 + j as f64 * spec.cell_height_deg();
    let lat_hi = lat_lo + spec.cell_height_deg();
    let ew = spec.lon_extension_deg();
    let eh = spec.lat_extension_deg();
    let lon_base = az >= lon_lo && az < lon_hi;
    let lon_strict = [az, az + 360.0, az - 360.0]
        .iter()
        .any(|&a| a > lon_lo - ew && a < lon_hi + ew);
    let lat_base =
        (el >= lat_lo && el < lat_hi) || (j == spec.lat_cells() - 1 && el == 90.0);
    let lat_strict = el > lat_lo - eh && el < lat_hi + eh;
    (lon_base || (ew > 0.0 && lon_strict)) && (lat_base || (eh > 0.0 && lat_strict))
}

/// Brute-force masks: for every (reference, slot, threshold) triple decide
/// responsibility from first principles.
#[allow(clippy::type_complexity)]
fn oracle_masks(
    refs: &ReferenceSet,
    preds: &PredictionTensor,
    taus: &[f64],
) -> (Vec<Vec<bool>>, Vec<Vec<bool>>, Vec<Vec<(usize, usize, usize, usize)>>) {
    let spec = *preds.grid();
    let cells = spec.num_cells();
    let slots = preds.preds_per_cell();
    let classes = preds.num_classes();
    let num_slots = preds.num_frames() * cells * slots;
    let mut existence = vec![vec![false; num_slots]; taus.len()];
    let mut class_mask = vec![vec![false; num_slots * classes]; taus.len()];
    let mut pairs: Vec<Vec<(usize, usize, usize, usize)>> = vec![Vec::new(); taus.len()];
    for (m, event) in refs.events().iter().enumerate() {
        let (r_az, r_el) = (event.doa.azimuth_deg(), event.doa.elevation_deg());
        for cell in 0..cells {
            if !oracle_extended_contains(r_az, r_el, cell, &spec) {
                continue;
            }
            for k in 0..slots {
                let decoded = oracle_decode(preds.doa_raw(event.frame, cell, k), cell, &spec);
                let delta = oracle_distance_deg(decoded, (r_az, r_el));
                for (ti, &tau) in taus.iter().enumerate() {
                    if delta < tau {
                        let si = (event.frame * cells + cell) * slots + k;
                        existence[ti][si] = true;
                        class_mask[ti][si * classes + event.class_id] = true;
                        pairs[ti].push((m, event.frame, cell, k));
                    }
                }
            }
        }
    }
    for level in pairs.iter_mut() {
        level.sort_unstable();
    }
    (existence, class_mask, pairs)
}

#[test]
fn masks_equal_brute_force_on_100_seeded_instances() {
    for seed in 0..100 {
        let (refs, preds) = random_instance(seed);
        let masks = assign_responsibility(&refs, &preds, &THRESHOLDS).unwrap();
        let (existence, class_mask, pairs) = oracle_masks(&refs, &preds, &THRESHOLDS);
        for (ti, level) in masks.levels().iter().enumerate() {
            assert_eq!(level.threshold_deg(), THRESHOLDS[ti]);
            assert_eq!(level.existence_mask(), &existence[ti][..], "seed {seed} tau {ti}");
            assert_eq!(level.class_mask(), &class_mask[ti][..], "seed {seed} tau {ti}");
            let mut got: Vec<(usize, usize, usize, usize)> = level
                .pairs()
                .iter()
                .map(|p| (p.ref_index, p.frame, p.cell, p.slot))
                .collect();
            got.sort_unstable();
            assert_eq!(got, pairs[ti], "seed {seed} tau {ti}");
        }
    }
}

#[test]
fn responsibility_is_monotone_in_tau() {
    for seed in 0..20 {
        let (refs, preds) = random_instance(seed);
        let masks = assign_responsibility(&refs, &preds, &[60.0, 45.0, 25.0, 10.0, 2.0]).unwrap();
        for window in masks.levels().windows(2) {
            let (loose, strict) = (&window[0], &window[1]);
            for (idx, &s) in strict.existence_mask().iter().enumerate() {
                assert!(!s || loose.existence_mask()[idx], "seed {seed} slot {idx}");
            }
            assert!(strict.pairs().len() <= loose.pairs().len());
        }
    }
}

#[test]
fn responsibility_respects_locality() {
    for seed in 0..20 {
        let (refs, preds) = random_instance(seed);
        let masks = assign_responsibility(&refs, &preds, &THRESHOLDS).unwrap();
        for level in masks.levels() {
            for pair in level.pairs() {
                let event = refs.events()[pair.ref_index];
                assert!(oracle_extended_contains(
                    event.doa.azimuth_deg(),
                    event.doa.elevation_deg(),
                    pair.cell,
                    preds.grid()
                ));
                assert_eq!(pair.frame, event.frame);
                // The stored distance is the recomputable one.
                let decoded = preds.decoded_doa(pair.frame, pair.cell, pair.slot);
                let delta = adyolo_core::geometry::angular_distance_deg(decoded, event.doa);
                assert!((delta - pair.distance_deg).abs() < 1e-12);
                assert!(pair.distance_deg < level.threshold_deg());
            }
        }
    }
}

#[test]
fn decode_doa_inverts_numerically_inside_the_reach() {
    // For any target strictly inside the reachable region, solving the
    // sigmoid mapping for (u, v) and decoding again recovers the target.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let spec = GridSpec::default();
    let logit = |p: f64| (p / (1.0 - p)).ln();
    for _ in 0..500 {
        let flat = rng.gen_range(0..spec.num_cells());
        let cell = GridIndex::from_flat(flat, &spec);
        let center = cell.center(&spec);
        let reach_w = spec.cell_width_deg() * 2.0;
        let reach_h = spec.cell_height_deg() * 2.0;
        // Stay inside 98% of the reach and inside the valid elevation range.
        let off_az = rng.gen_range(-0.49..0.49) * reach_w;
        let off_el = rng.gen_range(-0.49..0.49) * reach_h;
        let target_az = center.azimuth_deg() + off_az;
        let target_el = center.elevation_deg() + off_el;
        if !(-90.0..=90.0).contains(&target_el) {
            continue;
        }
        let u = logit(off_az / reach_w + 0.5);
        let v = logit(off_el / reach_h + 0.5);
        let decoded = decode_doa((u, v), cell, &spec);
        let target = Direction::new(target_az, target_el).unwrap();
        let miss = adyolo_core::geometry::angular_distance_deg(decoded, target);
        assert!(miss < 1e-6, "decoded {decoded:?} misses {target:?} by {miss}");
    }
}
