//! Replays a recorded trajectory through one contour-zone tracker.
//!
//! Observations are exact: each epoch the sensor reports the true bearing
//! and received energy from the zone apex, and a lost track re-acquires on
//! the true position. The output isolates the tracker's own error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Position, Stamped};
use crate::localization::Method;
use crate::tracking::{contour_index, plt_step, sense, TrackStatus, TrackerParams, TrackerState};

/// One trajectory sample as read from a file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl From<Sample> for Stamped {
    fn from(s: Sample) -> Self {
        Stamped {
            t: s.t,
            position: Position::new(s.x, s.y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayRow {
    pub t: f64,
    pub status: &'static str,
    pub est_x: Option<f64>,
    pub est_y: Option<f64>,
    pub true_x: f64,
    pub true_y: f64,
    pub error: Option<f64>,
}

pub const REPLAY_HEADERS: &[&str] = &["t", "status", "est_x", "est_y", "true_x", "true_y", "error"];

/// Tracks `samples` with `params`, seeding from the first two samples.
pub fn replay(
    samples: &[Stamped],
    params: TrackerParams,
    tx_energy: f64,
    path_exponent: f64,
) -> Result<Vec<ReplayRow>> {
    let [first, second, rest @ ..] = samples else {
        return Err(Error::InsufficientSamples {
            need: 2,
            have: samples.len(),
        });
    };
    let seeded = |s: &Stamped| ReplayRow {
        t: s.t,
        status: "seed",
        est_x: Some(s.position.x),
        est_y: Some(s.position.y),
        true_x: s.position.x,
        true_y: s.position.y,
        error: Some(0.0),
    };
    let mut rows = vec![seeded(first), seeded(second)];
    let mut state = TrackerState::new(0, *first, *second, params, Method::Multilateration)?;
    for s in rest {
        let (bearing, energy) = sense(&state.zone, &s.position, tx_energy, path_exponent);
        let contour = contour_index(&state.zone, energy.max(f64::MIN_POSITIVE), tx_energy, path_exponent)?;
        let (outcome, next) = plt_step(state, s.t, bearing, contour)?;
        state = next;
        let est = outcome.estimate.map(|e| e.position);
        rows.push(ReplayRow {
            t: s.t,
            status: outcome.status.as_str(),
            est_x: est.map(|p| p.x),
            est_y: est.map(|p| p.y),
            true_x: s.position.x,
            true_y: s.position.y,
            error: est.map(|p| p.distance(&s.position)),
        });
        if outcome.status == TrackStatus::Lost {
            state.reacquire(*s)?;
        }
    }
    Ok(rows)
}
