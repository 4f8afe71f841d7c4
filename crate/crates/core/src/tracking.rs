//! Contour-zone tracking seeded by the two latest fixes.
//!
//! A zone is a forward cone anchored at the latest position, pointing along
//! the heading of the last two positions. It is sliced into concentric
//! bands with radii `r_k = r1 * sqrt(k)`, so every band has the same area
//! `pi * r1^2`. Each epoch the tracker receives a beam bearing and a
//! received energy; the energy selects a band and the estimate is placed at
//! the band's mid-radius along the beam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_diff_deg, Position, Stamped, Trajectory};
use crate::localization::{Method, PositionEstimate};
use crate::sim::{energy_to_distance, received_energy, NodeId};

/// Bearing of the displacement `p_prev -> p_curr`.
pub fn predict_heading(p_prev: &Position, p_curr: &Position) -> Result<f64> {
    p_prev.bearing_to(p_curr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingZone {
    pub apex: Position,
    pub heading: f64,
    pub half_angle: f64,
    pub r1: f64,
    pub n_contours: usize,
    /// `radii[k-1] = r1 * sqrt(k)`.
    pub radii: Vec<f64>,
}

impl TrackingZone {
    /// Zone at `apex` with an explicit heading.
    pub fn new(
        apex: Position,
        heading: f64,
        r1: f64,
        n_contours: usize,
        half_angle: f64,
    ) -> Result<Self> {
        if !(r1 > 0.0 && r1.is_finite()) {
            return Err(Error::InvalidArgument(format!("r1 must be positive, got {r1}")));
        }
        if n_contours == 0 {
            return Err(Error::InvalidArgument("need at least one contour".into()));
        }
        if !(half_angle > 0.0 && half_angle <= 90.0) {
            return Err(Error::InvalidArgument(format!(
                "half angle {half_angle} outside (0, 90]"
            )));
        }
        let radii = (1..=n_contours).map(|k| r1 * (k as f64).sqrt()).collect();
        Ok(Self {
            apex,
            heading,
            half_angle,
            r1,
            n_contours,
            radii,
        })
    }

    /// Inner and outer radius of band `k` (1-based).
    pub fn band(&self, k: usize) -> (f64, f64) {
        let inner = if k <= 1 { 0.0 } else { self.radii[k - 2] };
        (inner, self.radii[k - 1])
    }

    /// Reported radius for band `k`: midway between its inner and outer edge.
    pub fn band_midpoint(&self, k: usize) -> f64 {
        let (inner, outer) = self.band(k);
        0.5 * (inner + outer)
    }

    pub fn annulus_area(&self, k: usize) -> f64 {
        let (inner, outer) = self.band(k);
        std::f64::consts::PI * (outer * outer - inner * inner)
    }

    pub fn outer_radius(&self) -> f64 {
        self.radii[self.n_contours - 1]
    }

    pub fn in_cone(&self, bearing: f64) -> bool {
        angle_diff_deg(bearing, self.heading).abs() <= self.half_angle + 1e-12
    }

    /// Band containing distance `d` from the apex.
    pub fn band_of(&self, d: f64) -> Contour {
        if d > self.outer_radius() {
            return Contour::Outside;
        }
        let k = self.radii.partition_point(|r| *r < d);
        Contour::Band(k + 1)
    }
}

/// Zone whose apex is `p_curr` and whose heading follows `p_prev -> p_curr`.
pub fn build_zone(
    p_prev: &Position,
    p_curr: &Position,
    r1: f64,
    n_contours: usize,
    half_angle: f64,
) -> Result<TrackingZone> {
    let heading = predict_heading(p_prev, p_curr)?;
    TrackingZone::new(*p_curr, heading, r1, n_contours, half_angle)
}

/// Band selected by a received-energy reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Contour {
    Band(usize),
    Outside,
}

/// Maps a received energy to a band, via the inverse energy law with a
/// unit reference distance.
pub fn contour_index(
    zone: &TrackingZone,
    received_energy: f64,
    tx_energy: f64,
    path_exponent: f64,
) -> Result<Contour> {
    if received_energy.is_nan() || received_energy <= 0.0 || tx_energy.is_nan() || tx_energy <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "energies must be positive (rx {received_energy}, tx {tx_energy})"
        )));
    }
    let d = energy_to_distance(tx_energy, received_energy, path_exponent);
    Ok(zone.band_of(d))
}

/// Beam bearing and received energy a zone sensor reports for a target
/// seen at `observed`.
pub fn sense(zone: &TrackingZone, observed: &Position, tx_energy: f64, path_exponent: f64) -> (f64, f64) {
    let d = zone.apex.distance(observed);
    let bearing = zone.apex.bearing_to(observed).unwrap_or(zone.heading);
    (bearing, received_energy(tx_energy, d, path_exponent))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackStatus {
    Locked,
    Coasting,
    Lost,
}

impl TrackStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackStatus::Locked => "locked",
            TrackStatus::Coasting => "coasting",
            TrackStatus::Lost => "lost",
        }
    }
}

/// How the innermost radius is chosen when a zone is (re)built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourScale {
    /// Always `TrackerParams::r1`.
    Fixed,
    /// The outermost contour reaches `coverage` times the displacement
    /// predicted for the next epoch; `r1` is never below `min_r1`.
    StepProportional { coverage: f64, min_r1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerParams {
    pub r1: f64,
    pub n_contours: usize,
    pub half_angle: f64,
    pub scale: ContourScale,
    /// Epochs a track may coast on its old heading before it is lost.
    pub max_coast_epochs: u32,
    /// Seconds between observations.
    pub epoch: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            r1: 10.0,
            n_contours: 10,
            half_angle: 45.0,
            scale: ContourScale::StepProportional {
                coverage: 2.0,
                min_r1: 0.5,
            },
            max_coast_epochs: 3,
            epoch: 1.0,
        }
    }
}

impl TrackerParams {
    pub fn fixed(r1: f64, n_contours: usize, half_angle: f64) -> Self {
        Self {
            r1,
            n_contours,
            half_angle,
            scale: ContourScale::Fixed,
            ..Default::default()
        }
    }

    fn r1_for(&self, predicted_displacement: f64) -> f64 {
        match self.scale {
            ContourScale::Fixed => self.r1,
            ContourScale::StepProportional { coverage, min_r1 } => {
                (coverage * predicted_displacement / (self.n_contours as f64).sqrt()).max(min_r1)
            }
        }
    }
}

/// One tracker following one target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub target_id: NodeId,
    pub last_two: [Stamped; 2],
    pub zone: TrackingZone,
    pub history: Trajectory,
    pub status: TrackStatus,
    pub params: TrackerParams,
    pub method: Method,
    coast_epochs: u32,
}

/// Output of one tracker update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// `None` when the track is lost this epoch.
    pub estimate: Option<PositionEstimate>,
    pub status: TrackStatus,
}

impl TrackerState {
    /// Seeds a track from two time-ordered fixes.
    pub fn new(
        target_id: NodeId,
        first: Stamped,
        second: Stamped,
        params: TrackerParams,
        method: Method,
    ) -> Result<Self> {
        if second.t < first.t {
            return Err(Error::InvalidArgument("seed fixes are not time-ordered".into()));
        }
        let heading = predict_heading(&first.position, &second.position)?;
        let mut history = Trajectory::new();
        history.push(first.t, first.position)?;
        history.push(second.t, second.position)?;
        let mut state = Self {
            target_id,
            last_two: [first, second],
            zone: TrackingZone::new(second.position, heading, params.r1, params.n_contours, params.half_angle)?,
            history,
            status: TrackStatus::Locked,
            params,
            method,
            coast_epochs: 0,
        };
        state.rebuild_zone(heading, params.half_angle)?;
        Ok(state)
    }

    /// Speed implied by the last two positions, m/s.
    pub fn speed(&self) -> f64 {
        let [a, b] = self.last_two;
        let dt = b.t - a.t;
        if dt > 0.0 {
            a.position.distance(&b.position) / dt
        } else {
            0.0
        }
    }

    pub fn coast_epochs(&self) -> u32 {
        self.coast_epochs
    }

    fn rebuild_zone(&mut self, heading: f64, half_angle: f64) -> Result<()> {
        let displacement = self.speed() * self.params.epoch * (self.coast_epochs + 1) as f64;
        let r1 = self.params.r1_for(displacement);
        self.zone = TrackingZone::new(
            self.last_two[1].position,
            heading,
            r1,
            self.params.n_contours,
            half_angle,
        )?;
        Ok(())
    }

    fn dead_reckoned(&self) -> Position {
        let disp = self.speed() * self.params.epoch * self.coast_epochs as f64;
        self.zone.apex + Position::polar(disp, self.zone.heading)
    }

    /// Replaces the newer seed with a fresh fix (re-acquisition).
    pub fn reacquire(&mut self, fix: Stamped) -> Result<()> {
        let prev = self.last_two[1];
        let heading = match predict_heading(&prev.position, &fix.position) {
            Ok(h) if fix.t > prev.t => h,
            _ => self.zone.heading,
        };
        if fix.t > prev.t {
            self.last_two = [prev, fix];
        } else {
            self.last_two[1] = fix;
        }
        self.coast_epochs = 0;
        self.status = TrackStatus::Locked;
        let _ = self.history.push(fix.t, fix.position);
        self.rebuild_zone(heading, self.params.half_angle)
    }
}

/// Advances `state` by one observation at time `t`.
///
/// A beam outside the cone puts the track into `Coasting`: the zone is
/// widened by one base half-angle (capped at 90°) and the reported estimate
/// is dead-reckoned along the old heading. More than `max_coast_epochs`
/// consecutive coasts, or an energy beyond the outermost contour, loses the
/// track; the caller re-acquires with a fresh fix.
pub fn plt_step(
    mut state: TrackerState,
    t: f64,
    beam_bearing: f64,
    contour: Contour,
) -> Result<(StepOutcome, TrackerState)> {
    let base = state.params.half_angle;
    if !state.zone.in_cone(beam_bearing) {
        state.coast_epochs += 1;
        if state.coast_epochs > state.params.max_coast_epochs {
            state.status = TrackStatus::Lost;
            return Ok((
                StepOutcome {
                    estimate: None,
                    status: TrackStatus::Lost,
                },
                state,
            ));
        }
        state.status = TrackStatus::Coasting;
        let estimate = PositionEstimate {
            position: state.dead_reckoned(),
            residual: 0.0,
            method: state.method,
            epoch: t,
        };
        let widened = (state.zone.half_angle + base).min(90.0);
        let heading = state.zone.heading;
        state.rebuild_zone(heading, widened)?;
        return Ok((
            StepOutcome {
                estimate: Some(estimate),
                status: TrackStatus::Coasting,
            },
            state,
        ));
    }

    let k = match contour {
        Contour::Band(k) if (1..=state.zone.n_contours).contains(&k) => k,
        Contour::Band(k) => {
            return Err(Error::InvalidArgument(format!(
                "band {k} outside 1..={}",
                state.zone.n_contours
            )))
        }
        Contour::Outside => {
            state.status = TrackStatus::Lost;
            return Ok((
                StepOutcome {
                    estimate: None,
                    status: TrackStatus::Lost,
                },
                state,
            ));
        }
    };

    let apex = Stamped {
        t: state.last_two[1].t,
        position: state.zone.apex,
    };
    let position = apex.position + Position::polar(state.zone.band_midpoint(k), beam_bearing);
    let estimate = PositionEstimate {
        position,
        residual: 0.0,
        method: state.method,
        epoch: t,
    };
    let next = Stamped { t, position };
    let heading = predict_heading(&apex.position, &position).unwrap_or(state.zone.heading);
    state.last_two = [apex, next];
    state.coast_epochs = 0;
    state.status = TrackStatus::Locked;
    let _ = state.history.push(t, position);
    state.rebuild_zone(heading, base)?;
    Ok((
        StepOutcome {
            estimate: Some(estimate),
            status: TrackStatus::Locked,
        },
        state,
    ))
}
