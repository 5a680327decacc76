//! Reference labels, the raw prediction tensor, and responsibility masks.
//!
//! A scene's references are rows of (frame, class, DOA). The network output
//! is a `T x G x K x (C+3)` tensor: `K` prediction slots per grid cell, each
//! holding `C` class logits, one existence logit, and two raw DOA parameters.
//! Responsibility assignment marks, per angular threshold, every slot whose
//! decoded DOA lies within the threshold of a reference housed in one of the
//! slot's (overlap-extended) cells.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{
    angular_distance_deg, extended_cells_of, Direction, GeometryError, GridIndex, GridSpec,
};
use crate::num::{sigmoid, sigmoid_grad};

/// Errors from building labels, tensors, or responsibility masks.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelError {
    FrameOutOfRange {
        row: usize,
        frame: usize,
        num_frames: usize,
    },
    ClassOutOfRange {
        row: usize,
        class_id: usize,
        num_classes: usize,
    },
    BadDirection {
        row: usize,
        source: GeometryError,
    },
    /// Raw tensor length does not match `T * G * K * (C+3)`.
    BadTensorLength {
        expected: usize,
        actual: usize,
    },
    /// Raw tensor holds a NaN or infinity.
    NonFiniteValue {
        index: usize,
    },
    /// References and predictions disagree on grid, frame count, or classes.
    ShapeMismatch {
        what: &'static str,
    },
    NoThresholds,
    BadThreshold(f64),
}

impl fmt::Display for LabelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FrameOutOfRange {
                row,
                frame,
                num_frames,
            } => write!(f, "row {row}: frame {frame} >= number of frames {num_frames}"),
            Self::ClassOutOfRange {
                row,
                class_id,
                num_classes,
            } => write!(f, "row {row}: class {class_id} >= number of classes {num_classes}"),
            Self::BadDirection { row, source } => write!(f, "row {row}: {source}"),
            Self::BadTensorLength { expected, actual } => {
                write!(f, "raw tensor has {actual} values, expected {expected}")
            }
            Self::NonFiniteValue { index } => {
                write!(f, "raw tensor value at index {index} is not finite")
            }
            Self::ShapeMismatch { what } => {
                write!(f, "references and predictions disagree on {what}")
            }
            Self::NoThresholds => write!(f, "threshold set is empty"),
            Self::BadThreshold(v) => write!(f, "threshold {v} is not a positive angle"),
        }
    }
}

impl core::error::Error for LabelError {}

/// One active sound event: a frame index, a class, and a direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceEvent {
    pub frame: usize,
    pub class_id: usize,
    pub doa: Direction,
}

/// A validated scene's worth of reference events, sorted by (frame, class).
///
/// Several same-class events per frame are allowed; that is exactly the
/// class-homogeneous polyphony the grid format exists to represent, so
/// duplicate rows are preserved rather than deduplicated.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    events: Vec<ReferenceEvent>,
    num_frames: usize,
    num_classes: usize,
    grid: GridSpec,
}

impl ReferenceSet {
    pub fn new(
        mut events: Vec<ReferenceEvent>,
        num_frames: usize,
        num_classes: usize,
        grid: GridSpec,
    ) -> Result<Self, LabelError> {
        for (row, ev) in events.iter().enumerate() {
            if ev.frame >= num_frames {
                return Err(LabelError::FrameOutOfRange {
                    row,
                    frame: ev.frame,
                    num_frames,
                });
            }
            if ev.class_id >= num_classes {
                return Err(LabelError::ClassOutOfRange {
                    row,
                    class_id: ev.class_id,
                    num_classes,
                });
            }
        }
        events.sort_by(|a, b| (a.frame, a.class_id).cmp(&(b.frame, b.class_id)));
        Ok(Self {
            events,
            num_frames,
            num_classes,
            grid,
        })
    }

    /// Builds a reference set from raw (frame, class, azimuth, elevation)
    /// rows, reporting the first offending row index on failure. Grid indices
    /// are derived on demand from the geometry, never stored per row.
    pub fn from_rows(
        rows: &[(usize, usize, f64, f64)],
        num_frames: usize,
        num_classes: usize,
        grid: GridSpec,
    ) -> Result<Self, LabelError> {
        let mut events = Vec::with_capacity(rows.len());
        for (row, &(frame, class_id, az, el)) in rows.iter().enumerate() {
            if frame >= num_frames {
                return Err(LabelError::FrameOutOfRange {
                    row,
                    frame,
                    num_frames,
                });
            }
            if class_id >= num_classes {
                return Err(LabelError::ClassOutOfRange {
                    row,
                    class_id,
                    num_classes,
                });
            }
            let doa =
                Direction::new(az, el).map_err(|source| LabelError::BadDirection { row, source })?;
            events.push(ReferenceEvent {
                frame,
                class_id,
                doa,
            });
        }
        Self::new(events, num_frames, num_classes, grid)
    }

    pub fn events(&self) -> &[ReferenceEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Events of one frame (a contiguous slice, since events are sorted).
    pub fn frame_events(&self, frame: usize) -> &[ReferenceEvent] {
        let lo = self.events.partition_point(|e| e.frame < frame);
        let hi = self.events.partition_point(|e| e.frame <= frame);
        &self.events[lo..hi]
    }
}

/// Raw network output of shape `T x G x K x (C+3)`, stored row-major.
///
/// Per-slot channel layout: `[class logits x C][existence logit][azimuth
/// parameter][elevation parameter]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTensor {
    raw: Vec<f64>,
    num_frames: usize,
    grid: GridSpec,
    preds_per_cell: usize,
    num_classes: usize,
}

impl PredictionTensor {
    pub fn new(
        raw: Vec<f64>,
        num_frames: usize,
        grid: GridSpec,
        preds_per_cell: usize,
        num_classes: usize,
    ) -> Result<Self, LabelError> {
        let expected = num_frames * grid.num_cells() * preds_per_cell * (num_classes + 3);
        if raw.len() != expected {
            return Err(LabelError::BadTensorLength {
                expected,
                actual: raw.len(),
            });
        }
        if let Some(index) = raw.iter().position(|v| !v.is_finite()) {
            return Err(LabelError::NonFiniteValue { index });
        }
        Ok(Self {
            raw,
            num_frames,
            grid,
            preds_per_cell,
            num_classes,
        })
    }

    pub fn zeros(
        num_frames: usize,
        grid: GridSpec,
        preds_per_cell: usize,
        num_classes: usize,
    ) -> Self {
        let len = num_frames * grid.num_cells() * preds_per_cell * (num_classes + 3);
        Self {
            raw: vec![0.0; len],
            num_frames,
            grid,
            preds_per_cell,
            num_classes,
        }
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Mutable access for optimizers. Callers are responsible for keeping
    /// every value finite.
    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.raw
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn num_cells(&self) -> usize {
        self.grid.num_cells()
    }

    pub fn preds_per_cell(&self) -> usize {
        self.preds_per_cell
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Channels per slot: `C + 3`.
    pub fn channels(&self) -> usize {
        self.num_classes + 3
    }

    pub fn num_slots(&self) -> usize {
        self.num_frames * self.grid.num_cells() * self.preds_per_cell
    }

    /// Offset of slot `(t, g, k)` into the raw buffer.
    pub fn slot_offset(&self, frame: usize, cell: usize, slot: usize) -> usize {
        debug_assert!(
            frame < self.num_frames && cell < self.grid.num_cells() && slot < self.preds_per_cell
        );
        ((frame * self.grid.num_cells() + cell) * self.preds_per_cell + slot) * self.channels()
    }

    pub fn class_logit(&self, frame: usize, cell: usize, slot: usize, class_id: usize) -> f64 {
        debug_assert!(class_id < self.num_classes);
        self.raw[self.slot_offset(frame, cell, slot) + class_id]
    }

    pub fn existence_logit(&self, frame: usize, cell: usize, slot: usize) -> f64 {
        self.raw[self.slot_offset(frame, cell, slot) + self.num_classes]
    }

    /// Raw (azimuth, elevation) parameters of a slot.
    pub fn doa_raw(&self, frame: usize, cell: usize, slot: usize) -> (f64, f64) {
        let off = self.slot_offset(frame, cell, slot) + self.num_classes + 1;
        (self.raw[off], self.raw[off + 1])
    }

    /// The DOA a slot currently points at.
    pub fn decoded_doa(&self, frame: usize, cell: usize, slot: usize) -> Direction {
        decode_doa(
            self.doa_raw(frame, cell, slot),
            GridIndex::from_flat(cell, &self.grid),
            &self.grid,
        )
    }
}

/// Maps a slot's raw DOA parameters onto the cell's overlap-extended region.
///
/// `azimuth = center + (sigmoid(u) - 0.5) * cell_width * (1 + 2 * overlap)`,
/// and likewise for elevation, which is then clamped to `[-90, 90]`. The
/// reachable region therefore coincides with the region the slot can be
/// responsible for.
pub fn decode_doa(raw_doa: (f64, f64), cell: GridIndex, spec: &GridSpec) -> Direction {
    let (direction, _, _) = decode_doa_with_grad(raw_doa, cell, spec);
    direction
}

/// [`decode_doa`] plus the derivatives of the decoded angles with respect to
/// the raw parameters: `(d azimuth / d u, d elevation / d v)` in degrees per
/// unit. The elevation derivative is zero where the clamp is active.
pub fn decode_doa_with_grad(
    raw_doa: (f64, f64),
    cell: GridIndex,
    spec: &GridSpec,
) -> (Direction, f64, f64) {
    let (u, v) = raw_doa;
    let reach_w = spec.cell_width_deg() * (1.0 + 2.0 * spec.overlap_fraction());
    let reach_h = spec.cell_height_deg() * (1.0 + 2.0 * spec.overlap_fraction());
    let center = cell.center(spec);
    let azimuth = center.azimuth_deg() + (sigmoid(u) - 0.5) * reach_w;
    let elevation_raw = center.elevation_deg() + (sigmoid(v) - 0.5) * reach_h;
    let elevation = elevation_raw.clamp(-90.0, 90.0);
    let d_az_du = sigmoid_grad(u) * reach_w;
    let d_el_dv = if elevation_raw > 90.0 || elevation_raw < -90.0 {
        0.0
    } else {
        sigmoid_grad(v) * reach_h
    };
    let direction =
        Direction::new(azimuth, elevation).expect("decoded elevation is clamped into range");
    (direction, d_az_du, d_el_dv)
}

/// One (reference, slot) responsibility pairing at some threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponsiblePair {
    /// Index into `ReferenceSet::events()`.
    pub ref_index: usize,
    pub frame: usize,
    /// Flat cell index.
    pub cell: usize,
    /// Slot index within the cell.
    pub slot: usize,
    /// Angular distance between the slot's decoded DOA and the reference.
    pub distance_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct MaskShape {
    frames: usize,
    cells: usize,
    slots: usize,
    classes: usize,
}

/// Responsibility state for a single threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsibilityLevel {
    threshold_deg: f64,
    shape: MaskShape,
    /// `T x G x K` union mask: slot is responsible for at least one reference.
    existence: Vec<bool>,
    /// `T x G x K x C` class mask; implies the existence mask.
    class_targets: Vec<bool>,
    /// Every (reference, slot) pairing, in reference order.
    pairs: Vec<ResponsiblePair>,
}

impl ResponsibilityLevel {
    pub fn threshold_deg(&self) -> f64 {
        self.threshold_deg
    }

    fn slot_index(&self, frame: usize, cell: usize, slot: usize) -> usize {
        (frame * self.shape.cells + cell) * self.shape.slots + slot
    }

    pub fn is_responsible(&self, frame: usize, cell: usize, slot: usize) -> bool {
        self.existence[self.slot_index(frame, cell, slot)]
    }

    pub fn class_target(&self, frame: usize, cell: usize, slot: usize, class_id: usize) -> bool {
        self.class_targets[self.slot_index(frame, cell, slot) * self.shape.classes + class_id]
    }

    pub fn existence_mask(&self) -> &[bool] {
        &self.existence
    }

    pub fn class_mask(&self) -> &[bool] {
        &self.class_targets
    }

    pub fn pairs(&self) -> &[ResponsiblePair] {
        &self.pairs
    }

    /// Number of slots responsible for at least one reference.
    pub fn responsible_slot_count(&self) -> usize {
        self.existence.iter().filter(|&&b| b).count()
    }

    pub fn total_slots(&self) -> usize {
        self.existence.len()
    }
}

/// Per-threshold responsibility masks for one (references, predictions) pair.
///
/// Thresholds are held in descending order; smaller thresholds are stricter,
/// so each level's masks are a subset of the previous level's.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsibilityMasks {
    shape: MaskShape,
    levels: Vec<ResponsibilityLevel>,
}

impl ResponsibilityMasks {
    /// Levels in descending threshold order.
    pub fn levels(&self) -> &[ResponsibilityLevel] {
        &self.levels
    }

    pub fn level_for(&self, threshold_deg: f64) -> Option<&ResponsibilityLevel> {
        self.levels.iter().find(|l| l.threshold_deg == threshold_deg)
    }

    /// The loosest level, i.e. the largest threshold.
    pub fn max_level(&self) -> &ResponsibilityLevel {
        &self.levels[0]
    }

    pub fn num_slots(&self) -> usize {
        self.shape.frames * self.shape.cells * self.shape.slots
    }
}

/// Builds the per-threshold responsibility masks.
///
/// For every reference `m` and every slot `(t_m, g, k)` with `g` among the
/// overlap-extended cells of the reference DOA, the slot is responsible at
/// threshold `tau` when the angular distance between its decoded DOA and the
/// reference is strictly below `tau`. A slot may be responsible for several
/// references (and so for several classes) at once.
pub fn assign_responsibility(
    refs: &ReferenceSet,
    preds: &PredictionTensor,
    thresholds_deg: &[f64],
) -> Result<ResponsibilityMasks, LabelError> {
    if refs.grid() != preds.grid() {
        return Err(LabelError::ShapeMismatch { what: "grid" });
    }
    if refs.num_frames() != preds.num_frames() {
        return Err(LabelError::ShapeMismatch { what: "frame count" });
    }
    if refs.num_classes() != preds.num_classes() {
        return Err(LabelError::ShapeMismatch { what: "class count" });
    }
    if thresholds_deg.is_empty() {
        return Err(LabelError::NoThresholds);
    }
    for &tau in thresholds_deg {
        if !tau.is_finite() || tau <= 0.0 {
            return Err(LabelError::BadThreshold(tau));
        }
    }
    let mut taus = thresholds_deg.to_vec();
    taus.sort_by(|a, b| b.partial_cmp(a).expect("thresholds are finite"));
    taus.dedup();

    let shape = MaskShape {
        frames: preds.num_frames(),
        cells: preds.num_cells(),
        slots: preds.preds_per_cell(),
        classes: preds.num_classes(),
    };
    let num_slots = preds.num_slots();
    let mut levels: Vec<ResponsibilityLevel> = taus
        .iter()
        .map(|&threshold_deg| ResponsibilityLevel {
            threshold_deg,
            shape,
            existence: vec![false; num_slots],
            class_targets: vec![false; num_slots * shape.classes],
            pairs: Vec::new(),
        })
        .collect();

    for (ref_index, event) in refs.events().iter().enumerate() {
        for cell in extended_cells_of(event.doa, refs.grid()) {
            for slot in 0..preds.preds_per_cell() {
                let decoded = preds.decoded_doa(event.frame, cell.flat, slot);
                let distance_deg = angular_distance_deg(decoded, event.doa);
                for level in levels.iter_mut() {
                    if distance_deg < level.threshold_deg {
                        let si = level.slot_index(event.frame, cell.flat, slot);
                        level.existence[si] = true;
                        level.class_targets[si * shape.classes + event.class_id] = true;
                        level.pairs.push(ResponsiblePair {
                            ref_index,
                            frame: event.frame,
                            cell: cell.flat,
                            slot,
                            distance_deg,
                        });
                    }
                }
            }
        }
    }

    Ok(ResponsibilityMasks { shape, levels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir(az: f64, el: f64) -> Direction {
        Direction::new(az, el).unwrap()
    }

    fn small_tensor(grid: GridSpec) -> PredictionTensor {
        PredictionTensor::zeros(2, grid, 3, 5)
    }

    #[test]
    fn empty_reference_set_is_valid_silence() {
        let refs = ReferenceSet::from_rows(&[], 4, 5, GridSpec::default()).unwrap();
        assert!(refs.is_empty());
        assert_eq!(refs.frame_events(0), &[]);
    }

    #[test]
    fn from_rows_reports_offending_row() {
        let grid = GridSpec::default();
        let rows = [(0usize, 0usize, 0.0, 0.0), (1, 7, 0.0, 0.0)];
        match ReferenceSet::from_rows(&rows, 4, 5, grid) {
            Err(LabelError::ClassOutOfRange { row, class_id, .. }) => {
                assert_eq!((row, class_id), (1, 7));
            }
            other => panic!("expected class error, got {other:?}"),
        }
        let rows = [(9usize, 0usize, 0.0, 0.0)];
        assert!(matches!(
            ReferenceSet::from_rows(&rows, 4, 5, grid),
            Err(LabelError::FrameOutOfRange { row: 0, frame: 9, .. })
        ));
        let rows = [(0usize, 0usize, 0.0, 91.0)];
        assert!(matches!(
            ReferenceSet::from_rows(&rows, 4, 5, grid),
            Err(LabelError::BadDirection { row: 0, .. })
        ));
    }

    #[test]
    fn duplicate_rows_are_preserved() {
        let rows = [(0usize, 2usize, 10.0, 10.0), (0, 2, 10.0, 10.0)];
        let refs = ReferenceSet::from_rows(&rows, 1, 5, GridSpec::default()).unwrap();
        assert_eq!(refs.events().len(), 2);
        assert_eq!(refs.events()[0], refs.events()[1]);
    }

    #[test]
    fn events_are_sorted_by_frame_then_class() {
        let rows = [
            (1usize, 0usize, 0.0, 0.0),
            (0, 3, 0.0, 0.0),
            (0, 1, 0.0, 0.0),
        ];
        let refs = ReferenceSet::from_rows(&rows, 2, 5, GridSpec::default()).unwrap();
        let order: Vec<_> = refs.events().iter().map(|e| (e.frame, e.class_id)).collect();
        assert_eq!(order, vec![(0, 1), (0, 3), (1, 0)]);
        assert_eq!(refs.frame_events(0).len(), 2);
        assert_eq!(refs.frame_events(1).len(), 1);
    }

    #[test]
    fn tensor_shape_and_finiteness_are_validated() {
        let grid = GridSpec::default();
        assert!(matches!(
            PredictionTensor::new(vec![0.0; 10], 2, grid, 3, 5),
            Err(LabelError::BadTensorLength { .. })
        ));
        let len = 2 * grid.num_cells() * 3 * 8;
        let mut raw = vec![0.0; len];
        raw[17] = f64::NAN;
        assert!(matches!(
            PredictionTensor::new(raw, 2, grid, 3, 5),
            Err(LabelError::NonFiniteValue { index: 17 })
        ));
    }

    #[test]
    fn decode_doa_zero_params_hit_cell_center() {
        let spec = GridSpec::default();
        for flat in [0, 9, 31] {
            let cell = GridIndex::from_flat(flat, &spec);
            let d = decode_doa((0.0, 0.0), cell, &spec);
            let center = cell.center(&spec);
            assert!((d.azimuth_deg() - center.azimuth_deg()).abs() < 1e-12);
            assert!((d.elevation_deg() - center.elevation_deg()).abs() < 1e-12);
        }
    }

    #[test]
    fn decode_doa_saturated_param_reaches_half_extension() {
        let spec = GridSpec::default();
        let cell = GridIndex::new(2, 1, &spec);
        let center = cell.center(&spec);
        // sigmoid(50) is 1.0 to machine precision: half of the 90° reach.
        let d = decode_doa((50.0, 0.0), cell, &spec);
        assert!((d.azimuth_deg() - (center.azimuth_deg() + 45.0)).abs() < 1e-9);
    }

    #[test]
    fn decode_doa_clamps_elevation_and_kills_its_gradient() {
        let spec = GridSpec::default();
        // Top-row cell center has elevation 67.5; +45 reach exceeds the pole.
        let cell = GridIndex::new(0, 3, &spec);
        let (d, _, d_el_dv) = decode_doa_with_grad((0.0, 50.0), cell, &spec);
        assert_eq!(d.elevation_deg(), 90.0);
        assert_eq!(d_el_dv, 0.0);
        let (_, d_az_du, d_el_dv) = decode_doa_with_grad((0.0, 0.0), cell, &spec);
        assert!(d_az_du > 0.0 && d_el_dv > 0.0);
    }

    #[test]
    fn responsibility_trivial_cases() {
        let grid = GridSpec::default();
        let preds = small_tensor(grid);
        let refs = ReferenceSet::from_rows(&[(0, 2, 22.5, 22.5)], 2, 5, grid).unwrap();
        // Raw zeros decode every slot to its cell center; (22.5, 22.5) is a
        // center, so its own cell's slots sit at distance zero.
        let masks = assign_responsibility(&refs, &preds, &[45.0, 25.0, 10.0]).unwrap();
        let cell = crate::geometry::cell_of(dir(22.5, 22.5), &grid);
        for level in masks.levels() {
            assert!(level.is_responsible(0, cell.flat, 0));
            assert!(level.class_target(0, cell.flat, 0, 2));
            assert!(!level.class_target(0, cell.flat, 0, 1));
        }
        // A reference exactly 30° up the meridian from this cell's decoded
        // center: responsible at 45° only.
        let refs = ReferenceSet::from_rows(&[(0, 1, 22.5, 52.5)], 2, 5, grid).unwrap();
        let masks = assign_responsibility(&refs, &preds, &[45.0, 25.0, 10.0]).unwrap();
        let l45 = masks.level_for(45.0).unwrap();
        let l25 = masks.level_for(25.0).unwrap();
        let l10 = masks.level_for(10.0).unwrap();
        assert!(l45.is_responsible(0, cell.flat, 0));
        assert!(!l25.is_responsible(0, cell.flat, 0));
        assert!(!l10.is_responsible(0, cell.flat, 0));
        // Zero references: all-false masks.
        let refs = ReferenceSet::from_rows(&[], 2, 5, grid).unwrap();
        let masks = assign_responsibility(&refs, &preds, &[45.0]).unwrap();
        assert_eq!(masks.max_level().responsible_slot_count(), 0);
        assert!(masks.max_level().pairs().is_empty());
        // Shape mismatch is a configuration error.
        let refs = ReferenceSet::from_rows(&[], 3, 5, grid).unwrap();
        assert!(matches!(
            assign_responsibility(&refs, &preds, &[45.0]),
            Err(LabelError::ShapeMismatch { what: "frame count" })
        ));
        let refs = ReferenceSet::from_rows(&[], 2, 5, grid).unwrap();
        assert!(matches!(
            assign_responsibility(&refs, &preds, &[]),
            Err(LabelError::NoThresholds)
        ));
        assert!(matches!(
            assign_responsibility(&refs, &preds, &[-5.0]),
            Err(LabelError::BadThreshold(_))
        ));
    }

    #[test]
    fn smaller_thresholds_are_stricter() {
        let grid = GridSpec::default();
        let preds = small_tensor(grid);
        let refs =
            ReferenceSet::from_rows(&[(0, 0, 10.0, 10.0), (1, 3, -100.0, -50.0)], 2, 5, grid)
                .unwrap();
        let masks = assign_responsibility(&refs, &preds, &[45.0, 25.0, 10.0]).unwrap();
        let levels = masks.levels();
        assert_eq!(levels[0].threshold_deg(), 45.0);
        for w in levels.windows(2) {
            let (loose, strict) = (&w[0], &w[1]);
            for (idx, &r) in strict.existence_mask().iter().enumerate() {
                if r {
                    assert!(loose.existence_mask()[idx]);
                }
            }
        }
    }

    #[test]
    fn class_mask_implies_existence_mask() {
        let grid = GridSpec::default();
        let preds = small_tensor(grid);
        let refs = ReferenceSet::from_rows(
            &[(0, 0, 5.0, 5.0), (0, 4, 7.0, 5.0), (1, 2, -120.0, 70.0)],
            2,
            5,
            grid,
        )
        .unwrap();
        let masks = assign_responsibility(&refs, &preds, &[45.0, 10.0]).unwrap();
        for level in masks.levels() {
            for slot_idx in 0..level.total_slots() {
                let any_class = (0..5).any(|c| level.class_mask()[slot_idx * 5 + c]);
                assert_eq!(any_class, level.existence_mask()[slot_idx]);
            }
        }
    }
}
