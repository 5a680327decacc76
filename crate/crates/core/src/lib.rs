//! Location-oriented sound event localization and detection (SELD) on the
//! unit sphere.
//!
//! Instead of predicting a fixed number of event tracks, the sphere is
//! partitioned into longitude-latitude grid cells and every cell owns `K`
//! prediction slots. Each slot carries class confidences, a sound-existence
//! score, and a direction-of-arrival (DOA) offset into the cell's
//! overlap-extended neighborhood. Training assigns *responsibility* to the
//! slots whose decoded DOA falls within a set of angular thresholds of a
//! reference event, and minimizes the great-circle angular distance directly
//! together with binary cross-entropy terms for existence and class.
//!
//! The crate provides:
//!
//! - [`geometry`]: directions, great-circle distance with analytic gradients,
//!   and the overlapping grid partition.
//! - [`labels`]: reference sets, the raw prediction tensor layout, DOA
//!   decoding, and multi-threshold responsibility masks.
//! - [`loss`]: the weighted DOA / existence / classification loss with
//!   analytic gradients with respect to the raw tensor.
//! - [`decoder`]: confidence thresholding and connectivity-based NMS that
//!   unifies same-class prediction clusters into frame-wise detections.
//! - [`metrics`]: location-sensitive error rate and F-score at 20°,
//!   class-sensitive localization error and recall, and their average.
//! - [`sim`] and [`train`]: a synthetic scene generator and a small dense
//!   head trained by full-batch gradient descent, used to exercise the whole
//!   pipeline end to end at desk scale.
//! - [`gradcheck`]: finite-difference verification of every analytic
//!   gradient, exposed so binaries can run it as a self-test.
//!
//! The crate is `no_std` (with `alloc`); all floating-point math goes through
//! `libm`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod assignment;
pub mod decoder;
pub mod geometry;
pub mod gradcheck;
pub mod labels;
pub mod loss;
pub mod metrics;
pub mod num;
pub mod sim;
pub mod train;

pub use decoder::{decode, Detection};
pub use geometry::{angular_distance_deg, Direction, GridIndex, GridSpec};
pub use labels::{
    assign_responsibility, decode_doa, PredictionTensor, ReferenceEvent, ReferenceSet,
    ResponsibilityMasks,
};
pub use loss::{total_loss, LossBreakdown, LossWeights};
pub use metrics::{evaluate, seld_error, MetricsReport};
pub use sim::{simulate, SceneSpec, SimulatedScene};
pub use train::{train_toy, ToyHead, TrainOptions};
