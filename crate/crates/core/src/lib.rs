//! Provably-approximate rigid alignment and registration of point clouds.
//!
//! The crate is organised around the witness-set idea: a handful of
//! corresponding pairs (one pivot plus `d - 1` direction pairs) determines an
//! alignment whose per-pair residuals are within a constant factor of any
//! reference alignment. Enumerating (or sampling) such witness sets and keeping
//! the cheapest candidate yields constant-factor approximations for a broad
//! family of costs, including trimmed and saturating M-estimators.
//!
//! Modules:
//! - [`geom`]: rotations, subspace-confined rotations, projections.
//! - [`cost`]: the `(D, loss, aggregator)` cost family and its constants.
//! - [`witness`]: recursive direction alignment and candidate enumeration.
//! - [`prob`]: the norm-weighted randomized linear-time variant.
//! - [`registration`]: unknown-correspondence registration and baselines
//!   (nearest-neighbour, Hungarian, Kabsch, ICP).
//! - [`data`]: cloud I/O and the synthetic benchmark protocol.
//! - [`report`]: JSON run reports and ground-truth records.

pub mod cost;
pub mod data;
mod error;
pub mod geom;
mod parallel;
pub mod prob;
pub mod registration;
pub mod report;
pub mod witness;

pub use cost::{Aggregator, CostSpec, InnerDistance, OuterLoss, TheoryConstants, Trim};
pub use error::{Error, Result};
pub use geom::{Alignment, PointCloud, RotationMatrix, Subspace, Vector};
pub use registration::{Matching, RegistrationResult};
pub use witness::{BestAlignment, Candidate, CandidateSet, WitnessTuple};
