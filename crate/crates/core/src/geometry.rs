//! Positions, bearings and time-stamped trajectories.
//!
//! Bearings are in degrees, measured counter-clockwise from the +x axis
//! (east) and normalized to `[0, 360)`.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in meters. 2D scenarios keep `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub const fn new_3d(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Unit vector at `bearing_deg`, scaled by `radius`.
    pub fn polar(radius: f64, bearing_deg: f64) -> Self {
        let b = bearing_deg.to_radians();
        Self::new(radius * b.cos(), radius * b.sin())
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (*self - *other).norm()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Planar bearing from `self` to `other`.
    pub fn bearing_to(&self, other: &Position) -> Result<f64> {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        if dx == 0.0 && dy == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        Ok(normalize_deg(dy.atan2(dx).to_degrees()))
    }

    pub fn dot(&self, other: &Position) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Rotates the planar part by `deg` about the origin.
    pub fn rotated(&self, deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Self::new_3d(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }
}

impl Add for Position {
    type Output = Position;
    fn add(self, rhs: Position) -> Position {
        Position::new_3d(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Position {
    type Output = Position;
    fn sub(self, rhs: Position) -> Position {
        Position::new_3d(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Position {
    type Output = Position;
    fn mul(self, k: f64) -> Position {
        Position::new_3d(self.x * k, self.y * k, self.z * k)
    }
}

/// Maps any angle in degrees into `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Smallest signed difference `a - b` in degrees, in `(-180, 180]`.
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let d = normalize_deg(a - b);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Axis-aligned rectangle `[min_x, max_x] x [min_y, max_y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            min_x: 0.0,
            min_y: 0.0,
            max_x: width,
            max_y: height,
        }
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Self {
        Self {
            min_x: self.min_x + dx,
            min_y: self.min_y + dy,
            max_x: self.max_x + dx,
            max_y: self.max_y + dy,
        }
    }

    pub fn contains(&self, p: &Position) -> bool {
        const EPS: f64 = 1e-9;
        p.x >= self.min_x - EPS
            && p.x <= self.max_x + EPS
            && p.y >= self.min_y - EPS
            && p.y <= self.max_y + EPS
    }

    pub fn clamp(&self, p: Position) -> Position {
        Position::new_3d(
            p.x.clamp(self.min_x, self.max_x),
            p.y.clamp(self.min_y, self.max_y),
            p.z,
        )
    }

    pub fn center(&self) -> Position {
        Position::new(
            0.5 * (self.min_x + self.max_x),
            0.5 * (self.min_y + self.max_y),
        )
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// A position at a point in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stamped {
    pub t: f64,
    pub position: Position,
}

/// Time-ordered position history.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    samples: Vec<Stamped>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a sample. Samples older than the last one are rejected.
    pub fn push(&mut self, t: f64, position: Position) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if t < last.t {
                return Err(Error::InvalidArgument(format!(
                    "sample at t={t} precedes last sample at t={}",
                    last.t
                )));
            }
        }
        self.samples.push(Stamped { t, position });
        Ok(())
    }

    /// Keeps only the newest `n` samples.
    pub fn truncate_front(&mut self, n: usize) {
        if self.samples.len() > n {
            self.samples.drain(..self.samples.len() - n);
        }
    }

    pub fn samples(&self) -> &[Stamped] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&Stamped> {
        self.samples.last()
    }

    /// Position at `t`, linearly interpolated between bracketing samples.
    pub fn at(&self, t: f64) -> Option<Position> {
        let s = &self.samples;
        if s.is_empty() || t < s[0].t || t > s[s.len() - 1].t {
            return None;
        }
        let idx = s.partition_point(|p| p.t < t);
        if idx < s.len() && s[idx].t == t {
            return Some(s[idx].position);
        }
        let (a, b) = (s[idx - 1], s[idx]);
        let f = (t - a.t) / (b.t - a.t);
        Some(a.position + (b.position - a.position) * f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bearings() {
        let o = Position::ORIGIN;
        assert!((o.bearing_to(&Position::new(10.0, 10.0)).unwrap() - 45.0).abs() < 1e-12);
        assert!((o.bearing_to(&Position::new(-10.0, 0.0)).unwrap() - 180.0).abs() < 1e-12);
        assert!((o.bearing_to(&Position::new(0.0, -5.0)).unwrap() - 270.0).abs() < 1e-12);
        assert_eq!(o.bearing_to(&o), Err(Error::CoincidentPoints));
    }

    #[test]
    fn normalize_wraps() {
        assert_eq!(normalize_deg(360.0), 0.0);
        assert_eq!(normalize_deg(-90.0), 270.0);
        assert!(normalize_deg(-1e-18) < 360.0);
        assert_eq!(angle_diff_deg(10.0, 350.0), 20.0);
        assert_eq!(angle_diff_deg(350.0, 10.0), -20.0);
    }

    #[test]
    fn trajectory_interpolates() {
        let mut tr = Trajectory::new();
        tr.push(0.0, Position::new(0.0, 0.0)).unwrap();
        tr.push(2.0, Position::new(20.0, 0.0)).unwrap();
        assert_eq!(tr.at(1.0), Some(Position::new(10.0, 0.0)));
        assert_eq!(tr.at(2.0), Some(Position::new(20.0, 0.0)));
        assert_eq!(tr.at(3.0), None);
        assert!(tr.push(1.0, Position::ORIGIN).is_err());
    }
}
