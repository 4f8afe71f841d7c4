use crate::error::Result;
use crate::geometry::Position;

/// Number of sectors around a cluster head.
pub const SECTORS: u8 = 6;

/// Sector 1..=6 containing `point` as seen from `center`.
///
/// Sector `k` covers bearings `[(k-1)*60, k*60)` degrees, counter-clockwise
/// from east, in the world frame.
pub fn sector_of(center: &Position, point: &Position) -> Result<u8> {
    let bearing = center.bearing_to(point)?;
    let width = 360.0 / SECTORS as f64;
    // bearings within 1e-9 deg below a boundary are float noise on it
    let k = ((bearing + 1e-9) / width).floor() as u8 + 1;
    Ok(k.min(SECTORS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn at_bearing(deg: f64) -> Position {
        Position::polar(10.0, deg)
    }

    #[test]
    fn examples() {
        let c = Position::ORIGIN;
        assert_eq!(sector_of(&c, &at_bearing(30.0)).unwrap(), 1);
        assert_eq!(sector_of(&c, &Position::new(1.0, 3f64.sqrt())).unwrap(), 2);
        assert_eq!(sector_of(&c, &at_bearing(359.0)).unwrap(), 6);
        assert_eq!(sector_of(&c, &Position::new(5.0, 0.0)).unwrap(), 1);
        assert_eq!(sector_of(&c, &c), Err(Error::CoincidentPoints));
    }

    #[test]
    fn boundaries_are_half_open() {
        let c = Position::new(3.0, -2.0);
        for k in 0..6 {
            // exactly on a multiple of 60 degrees (up to rounding of polar)
            let p = c + Position::polar(100.0, k as f64 * 60.0 + 1e-9);
            assert_eq!(sector_of(&c, &p).unwrap(), k + 1);
        }
    }
}
