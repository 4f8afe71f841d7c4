use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimRng;
use crate::geometry::Position;

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Idealized line-of-sight channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioModel {
    /// m/s
    pub propagation_speed: f64,
    /// Standard deviation of the additive Gaussian ToA jitter, seconds.
    pub timestamp_noise_sigma: f64,
    /// meters
    pub transmission_range: f64,
    /// Exponent of the received-energy law `E_rx = E_tx * (d_ref / d)^n`.
    pub path_loss_exponent: f64,
}

impl Default for RadioModel {
    fn default() -> Self {
        Self {
            propagation_speed: SPEED_OF_LIGHT,
            timestamp_noise_sigma: 0.0,
            transmission_range: 300.0,
            path_loss_exponent: 2.0,
        }
    }
}

impl RadioModel {
    pub fn in_range(&self, a: &Position, b: &Position) -> bool {
        a.distance(b) <= self.transmission_range
    }
}

/// Noiseless one-way propagation time between `a` and `b`.
pub fn propagation_time(a: &Position, b: &Position, radio: &RadioModel) -> f64 {
    a.distance(b) / radio.propagation_speed
}

/// Propagation time as seen through the receiver's noisy detector.
pub fn sample_propagation_time(
    a: &Position,
    b: &Position,
    radio: &RadioModel,
    rng: &mut SimRng,
) -> f64 {
    propagation_time(a, b, radio) + timestamp_jitter(radio, rng)
}

fn timestamp_jitter(radio: &RadioModel, rng: &mut SimRng) -> f64 {
    if radio.timestamp_noise_sigma > 0.0 {
        Normal::new(0.0, radio.timestamp_noise_sigma)
            .expect("sigma is positive and finite")
            .sample(rng)
    } else {
        0.0
    }
}

/// Sends `n` management packets from `from` to `to`, starting at `t0` and
/// spaced by `spacing` seconds. Returns `(ToD, ToA)` pairs: the sender
/// stamps ToD exactly, the receiver stamps ToA with detector jitter.
pub fn exchange_packets(
    from: &Position,
    to: &Position,
    n: usize,
    t0: f64,
    spacing: f64,
    radio: &RadioModel,
    rng: &mut SimRng,
) -> Vec<(f64, f64)> {
    let flight = propagation_time(from, to, radio);
    (0..n)
        .map(|i| {
            let tod = t0 + i as f64 * spacing;
            (tod, tod + flight + timestamp_jitter(radio, rng))
        })
        .collect()
}

/// Energy received at distance `d` meters for a unit reference distance.
pub fn received_energy(tx_energy: f64, distance: f64, path_loss_exponent: f64) -> f64 {
    tx_energy * distance.max(f64::MIN_POSITIVE).powf(-path_loss_exponent)
}

/// Inverts [`received_energy`] for a unit reference distance.
pub fn energy_to_distance(tx_energy: f64, rx_energy: f64, path_loss_exponent: f64) -> f64 {
    (tx_energy / rx_energy).powf(1.0 / path_loss_exponent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::seeded_rng;

    #[test]
    fn thirty_meters_is_100ns() {
        let r = RadioModel::default();
        let t = propagation_time(&Position::ORIGIN, &Position::new(30.0, 0.0), &r);
        assert!((t - 100e-9).abs() < 1e-18);
        assert_eq!(propagation_time(&Position::ORIGIN, &Position::ORIGIN, &r), 0.0);
    }

    #[test]
    fn noisy_mean_converges() {
        let r = RadioModel {
            timestamp_noise_sigma: 1e-9,
            ..Default::default()
        };
        let (a, b) = (Position::ORIGIN, Position::new(30.0, 0.0));
        let mut rng = seeded_rng(11);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| sample_propagation_time(&a, &b, &r, &mut rng))
            .sum::<f64>()
            / n as f64;
        // standard error is 0.01 ns, so 0.1 ns is a 10-sigma band
        assert!((mean - 100e-9).abs() < 0.1e-9, "mean {mean}");
    }

    #[test]
    fn noiseless_packets_arrive_after_departure() {
        let r = RadioModel::default();
        let pairs = exchange_packets(
            &Position::ORIGIN,
            &Position::new(150.0, 150.0),
            3,
            1.0,
            1e-3,
            &r,
            &mut seeded_rng(0),
        );
        assert_eq!(pairs.len(), 3);
        for (tod, toa) in pairs {
            assert!(toa >= tod);
        }
    }

    #[test]
    fn energy_law_roundtrip() {
        let e = received_energy(1.0, 12.0, 2.0);
        assert!((e - 1.0 / 144.0).abs() < 1e-15);
        assert!((energy_to_distance(1.0, e, 2.0) - 12.0).abs() < 1e-12);
    }
}
