use rand::Rng;

use super::{NodeState, SimRng};
use crate::error::{Error, Result};
use crate::geometry::{Bounds, Position};

/// Random-waypoint parameters: uniform waypoints in `bounds`, uniform
/// speeds in `[v_min, v_max]`, no pause.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityParams {
    pub bounds: Bounds,
    pub v_min: f64,
    pub v_max: f64,
}

impl MobilityParams {
    pub fn draw_waypoint(&self, rng: &mut SimRng) -> Position {
        let b = &self.bounds;
        Position::new(
            rng.random_range(b.min_x..=b.max_x),
            rng.random_range(b.min_y..=b.max_y),
        )
    }

    pub fn draw_speed(&self, rng: &mut SimRng) -> f64 {
        if self.v_max > self.v_min {
            rng.random_range(self.v_min..=self.v_max)
        } else {
            self.v_min
        }
    }
}

const ARRIVAL_EPS: f64 = 1e-9;

/// Moves `node` toward its waypoint for `dt` seconds.
///
/// A node that starts the step on its waypoint draws a new waypoint and
/// speed first. A node that reaches its waypoint mid-step stops there and
/// draws the next leg, which it starts on the following step.
pub fn advance_waypoint(
    mut node: NodeState,
    dt: f64,
    rng: &mut SimRng,
    params: &MobilityParams,
) -> NodeState {
    if dt <= 0.0 {
        return node;
    }
    if node.position.distance(&node.waypoint) <= ARRIVAL_EPS {
        node.waypoint = params.draw_waypoint(rng);
        node.speed = params.draw_speed(rng);
    }
    let to_go = node.waypoint - node.position;
    let remaining = to_go.norm();
    let step = node.speed * dt;
    if step >= remaining {
        node.position = node.waypoint;
        node.waypoint = params.draw_waypoint(rng);
        node.speed = params.draw_speed(rng);
    } else if remaining > 0.0 {
        node.position = node.position + to_go * (step / remaining);
    }
    node.position = params.bounds.clamp(node.position);
    node
}

/// Rate of change of the distance between `a` and `b` over the last
/// `window` seconds of their histories. Lower means a more stable pair.
pub fn relative_mobility(a: &NodeState, b: &NodeState, window: f64) -> Result<f64> {
    let (a_end, b_end) = match (a.history.last(), b.history.last()) {
        (Some(x), Some(y)) => (x.t, y.t),
        _ => return Err(Error::InsufficientSamples { need: 2, have: 0 }),
    };
    let t2 = a_end.min(b_end);
    let t1 = t2 - window;
    let have = a.history.len().min(b.history.len());
    let (pa1, pb1, pa2, pb2) = match (
        a.history.at(t1),
        b.history.at(t1),
        a.history.at(t2),
        b.history.at(t2),
    ) {
        (Some(pa1), Some(pb1), Some(pa2), Some(pb2)) if window > 0.0 => (pa1, pb1, pa2, pb2),
        _ => return Err(Error::InsufficientSamples { need: 2, have }),
    };
    let d1 = pa1.distance(&pb1);
    let d2 = pa2.distance(&pb2);
    Ok((d2 - d1).abs() / window)
}
