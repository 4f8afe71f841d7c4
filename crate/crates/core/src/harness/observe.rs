//! Point observations a tracking node makes of its target each epoch.

use crate::error::{Error, Result};
use crate::geometry::Position;
use crate::ranging::{aoa_between, measure_range, RangingParams};
use crate::sim::{energy_to_distance, received_energy, NodeId, RadioModel, SimRng};

/// Where the range half of an observation comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeSource {
    /// Averaged ToA/ToD exchange with the acceptance rule.
    Toa,
    /// Received signal energy, which a target cannot falsify with stamps.
    Energy,
}

/// Observer-relative position of `target`: a range along a measured angle
/// of arrival, anchored at the observer.
#[allow(clippy::too_many_arguments)]
pub fn observe(
    observer: (NodeId, Position),
    target: (NodeId, Position),
    source: RangeSource,
    radio: &RadioModel,
    ranging: &RangingParams,
    tod_skew: &mut dyn FnMut(&mut SimRng) -> f64,
    rng: &mut SimRng,
) -> Result<Position> {
    let bearing = aoa_between(&observer.1, &target.1, target.0, radio, ranging.aoa_noise_deg, rng)?;
    let range = match source {
        RangeSource::Toa => {
            let m = measure_range(0.0, observer, target, radio, ranging, tod_skew, rng);
            m.distance.ok_or_else(|| {
                Error::InvalidArgument(format!("range to {} rejected after {} attempts", target.0, m.attempts))
            })?
        }
        RangeSource::Energy => {
            let d = observer.1.distance(&target.1);
            let n = radio.path_loss_exponent;
            if d > 0.0 {
                energy_to_distance(1.0, received_energy(1.0, d, n), n)
            } else {
                0.0
            }
        }
    };
    Ok(observer.1 + Position::polar(range, bearing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::seeded_rng;

    #[test]
    fn noiseless_observation_is_exact() {
        let radio = RadioModel::default();
        let ranging = RangingParams {
            aoa_noise_deg: 0.0,
            ..Default::default()
        };
        let mut rng = seeded_rng(1);
        let o = (1, Position::new(10.0, 20.0));
        let t = (2, Position::new(70.0, -60.0));
        for source in [RangeSource::Toa, RangeSource::Energy] {
            let z = observe(o, t, source, &radio, &ranging, &mut |_| 0.0, &mut rng).unwrap();
            assert!(z.distance(&t.1) < 1e-6, "{source:?}: {z:?}");
        }
    }

    #[test]
    fn out_of_range_fails() {
        let radio = RadioModel::default();
        let mut rng = seeded_rng(1);
        let r = observe(
            (1, Position::ORIGIN),
            (2, Position::new(400.0, 0.0)),
            RangeSource::Energy,
            &radio,
            &RangingParams::default(),
            &mut |_| 0.0,
            &mut rng,
        );
        assert!(r.is_err());
    }
}
