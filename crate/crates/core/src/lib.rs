//! Two-stage, proposal-based trajectory prediction.
//!
//! A coarse end point is regressed from the observed history (stage 1). A grid
//! of candidate end points around it, combined with a set of lateral bend
//! offsets, yields cubic trajectory proposals. A small network then scores and
//! refines every proposal (stage 2), and an optional map prior decays the
//! scores of proposals that leave the movable area.
//!
//! The crate is organized bottom-up:
//!
//! - [`curve`]: cubic trajectory fitting and the bend ("curvature point") geometry.
//! - [`proposal`]: end-point grids, reference lines and proposal generation.
//! - [`labeling`]: average displacement, label assignment, negative sampling.
//! - [`geo`]: movable/drivable areas, containment, score decay, DAC.
//! - [`metrics`]: ADE/FDE and friends.
//! - [`model`]: features, the feed-forward networks, multi-task loss and training.
//! - [`pipeline`]: scenes, file formats, synthetic data, inference and reports.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curve;
pub mod error;
pub mod geo;
pub mod horizon;
pub mod labeling;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod proposal;
mod seed;
mod vec2;

pub use error::{Error, Result};
pub use horizon::Horizon;
pub use vec2::{Rigid2, Vec2};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/curves.md")]
    mod curves {}
    #[doc = include_str!("../../../book/src/proposals.md")]
    mod proposals {}
    #[doc = include_str!("../../../book/src/labeling.md")]
    mod labeling {}
    #[doc = include_str!("../../../book/src/safety.md")]
    mod safety {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
