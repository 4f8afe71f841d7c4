//! Scenario configuration: one JSON document, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::attacker::AttackerConfig;
use crate::elections::CriteriaWeights;
use crate::error::{Error, Result};
use crate::geometry::Bounds;
use crate::localization::MaliciousLocalizationParams;
use crate::ranging::RangingParams;
use crate::sim::RadioModel;
use crate::tracking::{ContourScale, TrackerParams};
use crate::trust::Aggregation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extent {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedRange {
    pub min: f64,
    pub max: f64,
}

/// Radio channel as configured for a scenario. Unlike [`RadioModel`] the
/// timestamp noise defaults to 5 ns here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    pub propagation_speed: f64,
    pub timestamp_noise_sigma: f64,
    pub transmission_range: f64,
    pub path_loss_exponent: f64,
    /// Transmit energy used by the contour sensor, arbitrary units.
    pub tx_energy: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        let m = RadioModel::default();
        Self {
            propagation_speed: m.propagation_speed,
            timestamp_noise_sigma: 5e-9,
            transmission_range: m.transmission_range,
            path_loss_exponent: m.path_loss_exponent,
            tx_energy: 1.0,
        }
    }
}

impl RadioConfig {
    pub fn model(&self) -> RadioModel {
        RadioModel {
            propagation_speed: self.propagation_speed,
            timestamp_noise_sigma: self.timestamp_noise_sigma,
            transmission_range: self.transmission_range,
            path_loss_exponent: self.path_loss_exponent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Weights {
    pub ocf: CriteriaWeights,
    pub bcf: CriteriaWeights,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            ocf: CriteriaWeights::OCF_DEFAULT,
            bcf: CriteriaWeights::BCF_DEFAULT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Minimum trust to take part in elections and to act as introducer.
    pub trust: f64,
    pub bcf: f64,
    /// RMS residual (m) above which a fix counts as tampered with.
    pub residual: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            trust: 0.5,
            bcf: 0.8,
            residual: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElectionParams {
    /// Seconds between election epochs.
    pub interval: f64,
    /// Candidates whose hop eccentricity reaches this bound are dropped.
    pub cluster_size: u32,
}

impl Default for ElectionParams {
    fn default() -> Self {
        Self {
            interval: 30.0,
            cluster_size: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolParams {
    /// Seconds between a node's registration requests to its RA.
    pub registration_interval: f64,
    /// Key requests issued per cluster per second.
    pub key_requests_per_tick: usize,
    /// EWMA weight of new behaviour evidence.
    pub behaviour_alpha: f64,
    pub aggregation: Aggregation,
    /// Window (s) over which relative mobility is measured.
    pub mobility_window: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            registration_interval: 10.0,
            key_requests_per_tick: 2,
            behaviour_alpha: 0.3,
            aggregation: Aggregation::Mean,
            mobility_window: 1.0,
        }
    }
}

/// Paired tracker study settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareParams {
    /// Target speed, m/s.
    pub speed: f64,
    /// Tracker epochs per trajectory.
    pub steps: usize,
    /// Half side of the square the target stays in, centred on the cluster.
    pub track_half_width: f64,
    /// Reference candidates must lie within this distance of the centre.
    pub reference_radius: f64,
    /// Straight legs last between these many epochs before turning.
    pub min_leg: usize,
    pub max_leg: usize,
}

impl Default for CompareParams {
    fn default() -> Self {
        Self {
            speed: 5.0,
            steps: 60,
            track_half_width: 80.0,
            reference_radius: 180.0,
            min_leg: 8,
            max_leg: 16,
        }
    }
}

/// Which member measurements are written to the trace.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceParams {
    /// Also log every member ranging session and fix (large).
    pub member_measurements: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub clusters: usize,
    pub nodes_per_cluster: usize,
    /// Area of one cluster.
    pub bounds: Extent,
    /// Simulated seconds.
    pub duration: f64,
    pub speed: SpeedRange,
    pub radio: RadioConfig,
    pub ranging: RangingParams,
    pub attackers: AttackerConfig,
    pub weights: Weights,
    pub thresholds: Thresholds,
    pub tracker: TrackerParams,
    pub elections: ElectionParams,
    pub protocol: ProtocolParams,
    pub compare: CompareParams,
    pub trace: TraceParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            clusters: 7,
            nodes_per_cluster: 80,
            bounds: Extent {
                width: 700.0,
                height: 700.0,
            },
            duration: 600.0,
            speed: SpeedRange { min: 1.0, max: 20.0 },
            radio: RadioConfig::default(),
            ranging: RangingParams::default(),
            attackers: AttackerConfig::default(),
            weights: Weights::default(),
            thresholds: Thresholds::default(),
            tracker: TrackerParams::default(),
            elections: ElectionParams::default(),
            protocol: ProtocolParams::default(),
            compare: CompareParams::default(),
            trace: TraceParams::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
    }
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl ScenarioConfig {
    /// Two clusters of twenty nodes for one minute.
    pub fn small() -> Self {
        Self {
            clusters: 2,
            nodes_per_cluster: 20,
            duration: 60.0,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn cluster_bounds(&self) -> Bounds {
        Bounds::new(self.bounds.width, self.bounds.height)
    }

    pub fn localization_params(&self) -> MaliciousLocalizationParams {
        MaliciousLocalizationParams {
            ranging: self.ranging,
            residual_threshold: self.thresholds.residual,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 {
            return Err(Error::InvalidConfig("clusters must be positive".into()));
        }
        if self.nodes_per_cluster == 0 {
            return Err(Error::InvalidConfig("nodes_per_cluster must be positive".into()));
        }
        positive("bounds.width", self.bounds.width)?;
        positive("bounds.height", self.bounds.height)?;
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "duration must be non-negative, got {}",
                self.duration
            )));
        }
        positive("speed.min", self.speed.min)?;
        positive("speed.max", self.speed.max)?;
        if self.speed.min > self.speed.max {
            return Err(Error::InvalidConfig("speed.min exceeds speed.max".into()));
        }
        positive("radio.propagation_speed", self.radio.propagation_speed)?;
        positive("radio.transmission_range", self.radio.transmission_range)?;
        positive("radio.path_loss_exponent", self.radio.path_loss_exponent)?;
        positive("radio.tx_energy", self.radio.tx_energy)?;
        if !(self.radio.timestamp_noise_sigma >= 0.0 && self.radio.timestamp_noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig("radio.timestamp_noise_sigma must be non-negative".into()));
        }
        if self.ranging.packets_per_reading == 0 {
            return Err(Error::InvalidConfig("ranging.packets_per_reading must be positive".into()));
        }
        positive("ranging.threshold", self.ranging.threshold)?;
        positive("ranging.packet_spacing", self.ranging.packet_spacing)?;
        if self.ranging.aoa_noise_deg.is_nan() || self.ranging.aoa_noise_deg < 0.0 {
            return Err(Error::InvalidConfig("ranging.aoa_noise_deg must be non-negative".into()));
        }
        self.attackers.validate()?;
        unit("thresholds.trust", self.thresholds.trust)?;
        unit("thresholds.bcf", self.thresholds.bcf)?;
        positive("thresholds.residual", self.thresholds.residual)?;
        positive("tracker.r1", self.tracker.r1)?;
        if self.tracker.n_contours == 0 {
            return Err(Error::InvalidConfig("tracker.n_contours must be positive".into()));
        }
        if !(self.tracker.half_angle > 0.0 && self.tracker.half_angle <= 90.0) {
            return Err(Error::InvalidConfig("tracker.half_angle must lie in (0, 90]".into()));
        }
        positive("tracker.epoch", self.tracker.epoch)?;
        if let ContourScale::StepProportional { coverage, min_r1 } = self.tracker.scale {
            positive("tracker.scale.coverage", coverage)?;
            positive("tracker.scale.min_r1", min_r1)?;
        }
        positive("elections.interval", self.elections.interval)?;
        if self.elections.cluster_size == 0 {
            return Err(Error::InvalidConfig("elections.cluster_size must be positive".into()));
        }
        positive("protocol.registration_interval", self.protocol.registration_interval)?;
        unit("protocol.behaviour_alpha", self.protocol.behaviour_alpha)?;
        positive("protocol.mobility_window", self.protocol.mobility_window)?;
        positive("compare.speed", self.compare.speed)?;
        if self.compare.steps < 3 {
            return Err(Error::InvalidConfig("compare.steps must be at least 3".into()));
        }
        positive("compare.track_half_width", self.compare.track_half_width)?;
        positive("compare.reference_radius", self.compare.reference_radius)?;
        if self.compare.min_leg == 0 || self.compare.min_leg > self.compare.max_leg {
            return Err(Error::InvalidConfig("compare legs need 0 < min_leg <= max_leg".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ScenarioConfig::default().validate().unwrap();
        ScenarioConfig::small().validate().unwrap();
        let c = ScenarioConfig::default();
        assert_eq!((c.clusters, c.nodes_per_cluster), (7, 80));
        assert_eq!(c.radio.timestamp_noise_sigma, 5e-9);
        assert_eq!(c.ranging.threshold, 2.0);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c = ScenarioConfig::from_json(r#"{"seed": 9, "radio": {"transmission_range": 250}}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.radio.transmission_range, 250.0);
        assert_eq!(c.radio.timestamp_noise_sigma, 5e-9);
        assert_eq!(c.duration, 600.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ScenarioConfig::from_json(r#"{"sede": 1}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"radio": {"range": 1}}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"duration": -1}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"attackers": {"fraction": 1.0}}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"weights": {"ocf": [0.25, 0.25, 0.25, 0.25]}}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"speed": {"min": 5, "max": 1}}"#).is_err());
    }
}
