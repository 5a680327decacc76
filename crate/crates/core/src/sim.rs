//! Synthetic SELD scenes: seeded event trajectories plus deterministic
//! per-frame feature vectors for the toy trainer.
//!
//! Events are born and killed by per-frame coin flips, optionally duplicating
//! an active event's class to force class-homogeneous polyphony, and move
//! either not at all or along a great circle. The per-frame feature is the
//! sum over active events of `[class one-hot | unit Cartesian DOA]`, plus
//! optional uniform noise — it deliberately leaks the DOA so that end-to-end
//! tests measure the correctness of the loss and decoder, not learning
//! difficulty.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Direction, GridSpec, DEG_TO_RAD};
use crate::labels::{ReferenceEvent, ReferenceSet};

/// How event directions evolve over frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trajectory {
    Static,
    /// Motion along a per-event great circle at a fixed angular velocity.
    GreatCircleDrift { deg_per_frame: f64 },
}

/// Parameters of a synthetic scene. Output is reproducible given `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub num_frames: usize,
    pub num_classes: usize,
    pub max_polyphony: usize,
    /// Probability that a newborn event duplicates an active event's class
    /// (at a different DOA).
    pub same_class_overlap_prob: f64,
    pub trajectory: Trajectory,
    /// Per-frame probability of spawning an event while below max polyphony.
    pub birth_prob: f64,
    /// Per-frame, per-event probability of ending.
    pub death_prob: f64,
    /// Minimum angular separation enforced between same-class events when a
    /// newborn is placed.
    pub min_same_class_separation_deg: f64,
    /// Amplitude of the uniform feature noise; zero means noiseless.
    pub noise_amplitude: f64,
    pub grid: GridSpec,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            num_frames: 100,
            num_classes: 5,
            max_polyphony: 3,
            same_class_overlap_prob: 0.25,
            trajectory: Trajectory::GreatCircleDrift { deg_per_frame: 2.0 },
            birth_prob: 0.25,
            death_prob: 0.04,
            min_same_class_separation_deg: 60.0,
            noise_amplitude: 0.0,
            grid: GridSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimError(&'static str);

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid scene spec: {}", self.0)
    }
}

impl core::error::Error for SimError {}

/// One event row with its source identity (the reference format keeps only
/// frame/class/DOA; the source id survives for CSV export).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub frame: usize,
    pub class_id: usize,
    pub source_id: i64,
    pub doa: Direction,
}

/// A generated scene. `events[i]` corresponds to `refs.events()[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedScene {
    pub events: Vec<SimEvent>,
    pub refs: ReferenceSet,
    /// One feature vector of length `feature_dim` per frame.
    pub features: Vec<Vec<f64>>,
    /// `num_classes + 3`.
    pub feature_dim: usize,
}

struct ActiveEvent {
    source_id: i64,
    class_id: usize,
    position: [f64; 3],
    axis: [f64; 3],
}

/// Generates a scene from the spec. Identical specs produce bit-identical
/// output.
pub fn simulate(spec: &SceneSpec) -> Result<SimulatedScene, SimError> {
    if spec.num_frames == 0 {
        return Err(SimError("num_frames must be at least 1"));
    }
    if spec.num_classes == 0 {
        return Err(SimError("num_classes must be at least 1"));
    }
    if spec.max_polyphony == 0 {
        return Err(SimError("max_polyphony must be at least 1"));
    }
    for p in [
        spec.same_class_overlap_prob,
        spec.birth_prob,
        spec.death_prob,
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(SimError("probabilities must lie in [0, 1]"));
        }
    }
    if !(spec.min_same_class_separation_deg >= 0.0) || !(spec.noise_amplitude >= 0.0) {
        return Err(SimError("separation and noise amplitude must be non-negative"));
    }
    if let Trajectory::GreatCircleDrift { deg_per_frame } = spec.trajectory {
        if !deg_per_frame.is_finite() {
            return Err(SimError("drift velocity must be finite"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let feature_dim = spec.num_classes + 3;
    let mut active: Vec<ActiveEvent> = Vec::new();
    let mut next_source: i64 = 0;
    let mut events: Vec<SimEvent> = Vec::new();
    let mut features: Vec<Vec<f64>> = Vec::with_capacity(spec.num_frames);

    for frame in 0..spec.num_frames {
        if frame > 0 {
            active.retain(|_| rng.gen::<f64>() >= spec.death_prob);
        }
        let force_spawn = frame == 0;
        if active.len() < spec.max_polyphony
            && (force_spawn || rng.gen::<f64>() < spec.birth_prob)
        {
            let class_id = if !active.is_empty()
                && rng.gen::<f64>() < spec.same_class_overlap_prob
            {
                active[rng.gen_range(0..active.len())].class_id
            } else {
                rng.gen_range(0..spec.num_classes)
            };
            let position = place_apart(&mut rng, &active, class_id, spec);
            let axis = random_perpendicular(&mut rng, position);
            active.push(ActiveEvent {
                source_id: next_source,
                class_id,
                position,
                axis,
            });
            next_source += 1;
        }

        let mut feature = vec![0.0f64; feature_dim];
        for event in &active {
            let doa = Direction::from_cartesian(event.position);
            events.push(SimEvent {
                frame,
                class_id: event.class_id,
                source_id: event.source_id,
                doa,
            });
            feature[event.class_id] += 1.0;
            let cart = doa.to_cartesian();
            feature[spec.num_classes] += cart[0];
            feature[spec.num_classes + 1] += cart[1];
            feature[spec.num_classes + 2] += cart[2];
        }
        if spec.noise_amplitude > 0.0 {
            for value in feature.iter_mut() {
                *value += spec.noise_amplitude * (2.0 * rng.gen::<f64>() - 1.0);
            }
        }
        features.push(feature);

        if let Trajectory::GreatCircleDrift { deg_per_frame } = spec.trajectory {
            let angle = deg_per_frame * DEG_TO_RAD;
            for event in active.iter_mut() {
                event.position = rotate_about(event.position, event.axis, angle);
            }
        }
    }

    // Align the raw event rows with the sorted order ReferenceSet keeps.
    events.sort_by(|a, b| (a.frame, a.class_id).cmp(&(b.frame, b.class_id)));
    let rows: Vec<ReferenceEvent> = events
        .iter()
        .map(|e| ReferenceEvent {
            frame: e.frame,
            class_id: e.class_id,
            doa: e.doa,
        })
        .collect();
    let refs = ReferenceSet::new(rows, spec.num_frames, spec.num_classes, spec.grid)
        .expect("simulated events are valid by construction");
    debug_assert!(events
        .iter()
        .zip(refs.events())
        .all(|(e, r)| e.frame == r.frame && e.class_id == r.class_id));

    Ok(SimulatedScene {
        events,
        refs,
        features,
        feature_dim,
    })
}

fn random_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    // Uniform on the sphere: uniform azimuth, uniform z.
    let az = rng.gen_range(-180.0f64..180.0) * DEG_TO_RAD;
    let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
    let r = libm::sqrt((1.0 - z * z).max(0.0));
    [r * libm::cos(az), r * libm::sin(az), z]
}

/// Samples a birth position, retrying to keep it at least the configured
/// separation away from every active same-class event. After a bounded
/// number of attempts the farthest draw wins.
fn place_apart(
    rng: &mut ChaCha8Rng,
    active: &[ActiveEvent],
    class_id: usize,
    spec: &SceneSpec,
) -> [f64; 3] {
    let min_cos = libm::cos(spec.min_same_class_separation_deg * DEG_TO_RAD);
    let mut best = random_direction(rng);
    let mut best_sep = separation_score(best, active, class_id);
    if best_sep <= min_cos {
        return best;
    }
    for _ in 0..63 {
        let candidate = random_direction(rng);
        let sep = separation_score(candidate, active, class_id);
        if sep < best_sep {
            best = candidate;
            best_sep = sep;
        }
        if best_sep <= min_cos {
            break;
        }
    }
    best
}

/// Largest cosine (smallest angle) between the candidate and any same-class
/// active event; -1 when there is none.
fn separation_score(candidate: [f64; 3], active: &[ActiveEvent], class_id: usize) -> f64 {
    active
        .iter()
        .filter(|e| e.class_id == class_id)
        .map(|e| dot(candidate, e.position))
        .fold(-1.0f64, |a, b| a.max(b))
}

fn random_perpendicular(rng: &mut ChaCha8Rng, position: [f64; 3]) -> [f64; 3] {
    loop {
        let v = random_direction(rng);
        let proj = dot(v, position);
        let perp = [
            v[0] - proj * position[0],
            v[1] - proj * position[1],
            v[2] - proj * position[2],
        ];
        let norm = libm::sqrt(dot(perp, perp));
        if norm > 1e-6 {
            return [perp[0] / norm, perp[1] / norm, perp[2] / norm];
        }
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Rodrigues rotation of `p` about the unit `axis`; with axis perpendicular
/// to `p` this traces a great circle. Renormalized to fight drift.
fn rotate_about(p: [f64; 3], axis: [f64; 3], angle_rad: f64) -> [f64; 3] {
    let (sin_a, cos_a) = (libm::sin(angle_rad), libm::cos(angle_rad));
    let axp = cross(axis, p);
    let adp = dot(axis, p);
    let mut out = [0.0f64; 3];
    for i in 0..3 {
        out[i] = p[i] * cos_a + axp[i] * sin_a + axis[i] * adp * (1.0 - cos_a);
    }
    let norm = libm::sqrt(dot(out, out));
    [out[0] / norm, out[1] / norm, out[2] / norm]
}
