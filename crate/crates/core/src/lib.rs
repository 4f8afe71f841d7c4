//! Deterministic simulation of cluster-based mobile ad hoc networks with
//! distributed malicious-node detection, localization and tracking.
//!
//! The crate is organized bottom-up:
//!
//! - [`sim`]: clock, seeded randomness, random-waypoint mobility, sectors
//!   and an idealized ToA/ToD radio channel
//! - [`ranging`]: ranges and bearings from management-packet timestamps
//! - [`localization`]: triangulation and multilateration fixes
//! - [`tracking`]: contour-zone tracking from the last two fixes
//! - [`trust`]: certificates, introducers, trust chaining and verdicts
//! - [`elections`]: CA, RA and reference-node elections
//! - [`harness`]: scenario runs, paired tracker studies and exports
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod elections;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod localization;
pub mod ranging;
pub mod sim;
pub mod tracking;
pub mod trust;

pub use error::{Error, Result};
pub use geometry::Position;
