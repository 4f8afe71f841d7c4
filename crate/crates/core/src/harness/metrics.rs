//! Summary statistics of a scenario run.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

/// Count, mean, 95th percentile and maximum of a sample of errors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    pub p95: f64,
    pub max: f64,
}

impl ErrorStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            count: sorted.len(),
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p95: percentile(&sorted, 0.95),
            max: *sorted.last().expect("non-empty"),
        }
    }
}

/// Nearest-rank percentile of an ascending slice, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// A rate that is undefined when its denominator is zero; serialized as
/// `"N/A"` in that case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate(pub Option<f64>);

impl Rate {
    pub fn of(numerator: usize, denominator: usize) -> Self {
        if denominator == 0 {
            Rate(None)
        } else {
            Rate(Some(numerator as f64 / denominator as f64))
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_str("N/A"),
        }
    }
}

impl std::fmt::Display for Rate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v:.3}"),
            None => f.write_str("N/A"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ClusterMetrics {
    pub cluster: usize,
    pub attackers: usize,
    /// Attackers flagged malicious.
    pub detected: usize,
    /// Honest nodes flagged malicious.
    pub false_positives: usize,
    /// RA gate rejections per sector 1..=6.
    pub ra_rejects: [usize; 6],
}

/// Elections held in one epoch across all clusters.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EpochElections {
    pub epoch: u32,
    pub ca: usize,
    pub ra: usize,
    pub reference: usize,
    pub headless: usize,
    pub vacant_sectors: usize,
    pub reference_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub duration: f64,
    pub nodes: usize,
    pub attackers: usize,
    pub detected: usize,
    pub detection_rate: Rate,
    pub false_positives: usize,
    /// Honest nodes flagged while their trust was at least 0.8.
    pub false_positives_high_trust: usize,
    pub clusters: Vec<ClusterMetrics>,
    /// Position error of every estimate, by the method that produced it.
    pub tracking_error: BTreeMap<String, ErrorStats>,
    /// BCF of every elected reference node.
    pub elected_bcf: ErrorStats,
    pub elections: Vec<EpochElections>,
    pub ra_rejects: [usize; 6],
}

impl MetricsReport {
    pub fn empty(seed: u64) -> Self {
        Self {
            seed,
            duration: 0.0,
            nodes: 0,
            attackers: 0,
            detected: 0,
            detection_rate: Rate(None),
            false_positives: 0,
            false_positives_high_trust: 0,
            clusters: Vec::new(),
            tracking_error: BTreeMap::new(),
            elected_bcf: ErrorStats::default(),
            elections: Vec::new(),
            ra_rejects: [0; 6],
        }
    }

    pub fn mean_error(&self, method: &str) -> Option<f64> {
        self.tracking_error
            .get(method)
            .filter(|s| s.count > 0)
            .map(|s| s.mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_known_sample() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = ErrorStats::from_samples(&v);
        assert_eq!(s.count, 100);
        assert!((s.mean - 50.5).abs() < 1e-12);
        assert_eq!(s.p95, 95.0);
        assert_eq!(s.max, 100.0);
        assert_eq!(ErrorStats::from_samples(&[]).count, 0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn undefined_rate_serializes_as_na() {
        assert_eq!(serde_json::to_string(&Rate::of(0, 0)).unwrap(), "\"N/A\"");
        assert_eq!(serde_json::to_string(&Rate::of(1, 4)).unwrap(), "0.25");
        assert_eq!(Rate::of(0, 0).to_string(), "N/A");
    }
}
