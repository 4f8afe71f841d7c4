//! Range and bearing measurements from ToA/ToD management packets.
//!
//! A reading is the mean flight time of a small packet batch times the
//! propagation speed. Three independent readings are taken per
//! reference–target pair and checked for mutual consistency before a range
//! is released to the localization layer.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_deg, Position};
use crate::sim::{exchange_packets, NodeId, NodeState, RadioModel, SimRng};

/// Outcome of the three-reading consistency check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RangeStatus {
    Accepted,
    /// Two of the three readings agreed; the third was discarded.
    PartialAccept,
    Rejected,
}

impl RangeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RangeStatus::Accepted => "accepted",
            RangeStatus::PartialAccept => "partial",
            RangeStatus::Rejected => "rejected",
        }
    }
}

/// A single reading derived from one packet batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeReading {
    pub distance: f64,
    /// Set when noise drove the mean flight time negative and the
    /// distance was clamped to zero.
    pub clamped: bool,
}

/// Range from `(ToD, ToA)` pairs: `speed * mean(ToA - ToD)`.
pub fn range_from_packets(pairs: &[(f64, f64)], speed: f64) -> Result<RangeReading> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no packets to range from".into()));
    }
    let mean_flight =
        pairs.iter().map(|(tod, toa)| toa - tod).sum::<f64>() / pairs.len() as f64;
    let distance = speed * mean_flight;
    Ok(if distance < 0.0 {
        RangeReading {
            distance: 0.0,
            clamped: true,
        }
    } else {
        RangeReading {
            distance,
            clamped: false,
        }
    })
}

/// Result of [`accept_range`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeDecision {
    pub status: RangeStatus,
    /// `None` when rejected.
    pub distance: Option<f64>,
}

/// Two-of-three consistency check on repeated readings.
///
/// All three within `threshold` of their mean: accept the mean. Otherwise
/// the closest pair whose members both sit within `threshold` of the pair
/// mean is averaged. Otherwise reject.
pub fn accept_range(readings: [f64; 3], threshold: f64) -> RangeDecision {
    let mut r = readings;
    r.sort_by(f64::total_cmp);
    let mean = (r[0] + r[1] + r[2]) / 3.0;
    if r.iter().all(|x| (x - mean).abs() <= threshold) {
        return RangeDecision {
            status: RangeStatus::Accepted,
            distance: Some(mean),
        };
    }
    // adjacent pairs in sorted order are the only candidates for "closest"
    let low = (r[1] - r[0], 0.5 * (r[0] + r[1]));
    let high = (r[2] - r[1], 0.5 * (r[1] + r[2]));
    let (gap, pair_mean) = if high.0 < low.0 { high } else { low };
    if 0.5 * gap <= threshold {
        RangeDecision {
            status: RangeStatus::PartialAccept,
            distance: Some(pair_mean),
        }
    } else {
        RangeDecision {
            status: RangeStatus::Rejected,
            distance: None,
        }
    }
}

/// Bearing from `reference` to `target` with Gaussian error of
/// `noise_deg` standard deviation.
pub fn measure_aoa(
    reference: &NodeState,
    target: &NodeState,
    radio: &RadioModel,
    noise_deg: f64,
    rng: &mut SimRng,
) -> Result<f64> {
    aoa_between(&reference.position, &target.position, target.id, radio, noise_deg, rng)
}

pub(crate) fn aoa_between(
    reference: &Position,
    target: &Position,
    target_id: NodeId,
    radio: &RadioModel,
    noise_deg: f64,
    rng: &mut SimRng,
) -> Result<f64> {
    let distance = reference.distance(target);
    if distance > radio.transmission_range {
        return Err(Error::OutOfRange {
            target: target_id,
            distance,
            range: radio.transmission_range,
        });
    }
    let truth = reference.bearing_to(target)?;
    let noise = if noise_deg > 0.0 {
        Normal::new(0.0, noise_deg)
            .expect("noise_deg is positive and finite")
            .sample(rng)
    } else {
        0.0
    };
    Ok(normalize_deg(truth + noise))
}

/// Knobs for a full measurement session between one reference and one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RangingParams {
    pub packets_per_reading: usize,
    /// Acceptance threshold, meters.
    pub threshold: f64,
    /// Re-measurements after a rejection before the reference abstains.
    pub max_retries: usize,
    /// Seconds between consecutive packets of a batch.
    pub packet_spacing: f64,
    /// AoA noise standard deviation, degrees.
    pub aoa_noise_deg: f64,
}

impl Default for RangingParams {
    fn default() -> Self {
        Self {
            packets_per_reading: 3,
            threshold: 2.0,
            max_retries: 5,
            packet_spacing: 1e-3,
            aoa_noise_deg: 1.0,
        }
    }
}

/// Everything observed in one reference–target ranging session.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeMeasurement {
    pub t: f64,
    pub reference_id: NodeId,
    pub target_id: NodeId,
    /// `(ToD, ToA)` pairs of the final attempt, three batches back to back.
    pub packets: Vec<(f64, f64)>,
    pub n_packets: usize,
    pub readings: [f64; 3],
    pub status: RangeStatus,
    pub distance: Option<f64>,
    pub aoa: Option<f64>,
    pub attempts: usize,
}

/// Measures range and bearing from `reference` to `target` at time `t`.
///
/// `tod_skew` returns, per reading, how many seconds the target's ToD
/// stamps are stale by (zero for honest targets). Rejected attempts are
/// retried up to `params.max_retries` times; after that the measurement is
/// returned with status `Rejected`.
#[allow(clippy::too_many_arguments)]
pub fn measure_range(
    t: f64,
    reference: (NodeId, Position),
    target: (NodeId, Position),
    radio: &RadioModel,
    params: &RangingParams,
    tod_skew: &mut dyn FnMut(&mut SimRng) -> f64,
    rng: &mut SimRng,
) -> RangeMeasurement {
    let n = params.packets_per_reading.max(1);
    let mut attempts = 0;
    loop {
        attempts += 1;
        let mut packets = Vec::with_capacity(3 * n);
        let mut readings = [0.0; 3];
        for (i, reading) in readings.iter_mut().enumerate() {
            let start = t + (i * n) as f64 * params.packet_spacing;
            let skew = tod_skew(rng);
            let mut batch = exchange_packets(
                &target.1,
                &reference.1,
                n,
                start,
                params.packet_spacing,
                radio,
                rng,
            );
            for p in &mut batch {
                p.0 -= skew;
            }
            *reading = range_from_packets(&batch, radio.propagation_speed)
                .expect("batch is non-empty")
                .distance;
            packets.extend(batch);
        }
        let decision = accept_range(readings, params.threshold);
        if decision.status != RangeStatus::Rejected || attempts > params.max_retries {
            let aoa = aoa_between(
                &reference.1,
                &target.1,
                target.0,
                radio,
                params.aoa_noise_deg,
                rng,
            )
            .ok();
            return RangeMeasurement {
                t,
                reference_id: reference.0,
                target_id: target.0,
                packets,
                n_packets: n,
                readings,
                status: decision.status,
                distance: decision.distance,
                aoa,
                attempts,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::seeded_rng;
    use crate::trust::KeyPair;

    const C: f64 = 3.0e8;

    fn pairs_from_diffs(diffs_ns: &[f64]) -> Vec<(f64, f64)> {
        diffs_ns
            .iter()
            .enumerate()
            .map(|(i, d)| (i as f64, i as f64 + d * 1e-9))
            .collect()
    }

    #[test]
    fn range_examples() {
        let r = range_from_packets(&pairs_from_diffs(&[100.0, 100.0, 100.0]), C).unwrap();
        assert!((r.distance - 30.0).abs() < 1e-6);
        let r = range_from_packets(&pairs_from_diffs(&[90.0, 100.0, 110.0]), C).unwrap();
        assert!((r.distance - 30.0).abs() < 1e-6);
        assert!(range_from_packets(&[], C).is_err());
    }

    #[test]
    fn negative_flight_clamps() {
        let r = range_from_packets(&pairs_from_diffs(&[-5.0, 1.0]), C).unwrap();
        assert_eq!(r.distance, 0.0);
        assert!(r.clamped);
    }

    #[test]
    fn forward_oracle_roundtrip() {
        // 150*sqrt(2) = 212.13 m
        let target = Position::new(150.0, 150.0);
        let truth = target.norm();
        let radio = RadioModel::default();
        let pairs = exchange_packets(&Position::ORIGIN, &target, 3, 0.0, 1e-3, &radio, &mut seeded_rng(0));
        let r = range_from_packets(&pairs, radio.propagation_speed).unwrap();
        assert!((r.distance - truth).abs() < 1e-6);
        assert!((truth - 212.13).abs() < 5e-3);
    }

    #[test]
    fn acceptance_branches() {
        let d = accept_range([100.0, 100.5, 101.0], 2.0);
        assert_eq!(d.status, RangeStatus::Accepted);
        assert!((d.distance.unwrap() - 100.5).abs() < 1e-12);

        let d = accept_range([100.0, 100.5, 140.0], 2.0);
        assert_eq!(d.status, RangeStatus::PartialAccept);
        assert!((d.distance.unwrap() - 100.25).abs() < 1e-12);

        let d = accept_range([100.0, 150.0, 200.0], 2.0);
        assert_eq!(d.status, RangeStatus::Rejected);
        assert_eq!(d.distance, None);
    }

    #[test]
    fn partial_picks_closest_pair() {
        let d = accept_range([90.0, 100.0, 101.0], 6.0);
        assert_eq!(d.status, RangeStatus::PartialAccept);
        assert!((d.distance.unwrap() - 100.5).abs() < 1e-12);
    }

    fn node(id: NodeId, p: Position) -> NodeState {
        NodeState::new(id, p, KeyPair::from_seed(id as u64))
    }

    #[test]
    fn aoa_examples() {
        let radio = RadioModel::default();
        let mut rng = seeded_rng(1);
        let a = node(1, Position::ORIGIN);
        let b = node(2, Position::new(10.0, 10.0));
        assert!((measure_aoa(&a, &b, &radio, 0.0, &mut rng).unwrap() - 45.0).abs() < 1e-12);
        let c = node(3, Position::new(-10.0, 0.0));
        assert!((measure_aoa(&a, &c, &radio, 0.0, &mut rng).unwrap() - 180.0).abs() < 1e-12);
        let far = node(4, Position::new(400.0, 0.0));
        assert!(matches!(
            measure_aoa(&a, &far, &radio, 0.0, &mut rng),
            Err(Error::OutOfRange { target: 4, .. })
        ));
    }

    #[test]
    fn aoa_noise_is_unbiased() {
        let radio = RadioModel::default();
        let mut rng = seeded_rng(5);
        let a = node(1, Position::ORIGIN);
        let b = node(2, Position::new(10.0, 10.0));
        let n = 10_000;
        let mean = (0..n)
            .map(|_| measure_aoa(&a, &b, &radio, 1.0, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        // standard error 0.01 deg
        assert!((mean - 45.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn session_retries_then_abstains() {
        let radio = RadioModel::default();
        let params = RangingParams::default();
        let mut rng = seeded_rng(2);
        let mut k = 0.0;
        // every reading stale by a different, widely spaced amount
        let mut skew = |_: &mut SimRng| {
            k += 1.0;
            k * 100e-9
        };
        let m = measure_range(
            0.0,
            (1, Position::ORIGIN),
            (2, Position::new(50.0, 0.0)),
            &radio,
            &params,
            &mut skew,
            &mut rng,
        );
        assert_eq!(m.status, RangeStatus::Rejected);
        assert_eq!(m.attempts, params.max_retries + 1);
        assert_eq!(m.packets.len(), 9);
    }

    #[test]
    fn honest_session_is_exact_without_noise() {
        let radio = RadioModel::default();
        let m = measure_range(
            3.0,
            (1, Position::new(10.0, 20.0)),
            (2, Position::new(50.0, -10.0)),
            &radio,
            &RangingParams {
                aoa_noise_deg: 0.0,
                ..Default::default()
            },
            &mut |_| 0.0,
            &mut seeded_rng(0),
        );
        assert_eq!(m.status, RangeStatus::Accepted);
        assert!((m.distance.unwrap() - 50.0).abs() < 1e-6);
        assert!(m.aoa.is_some());
    }
}
