//! Cluster-head, registration-authority and reference-node elections.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::geometry::Position;
use crate::sim::{NodeId, SECTORS};

/// Four weights over the election metrics.
///
/// Valid weights are non-negative, sum to one and are strictly ordered
/// `w1 > w2 = w3 > w4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct CriteriaWeights([f64; 4]);

impl CriteriaWeights {
    /// RA election weights: trust, stability, residual energy, connectivity.
    pub const OCF_DEFAULT: CriteriaWeights = CriteriaWeights([0.46, 0.22, 0.22, 0.10]);
    /// Reference election weights: distance, stability, residual energy, connectivity.
    pub const BCF_DEFAULT: CriteriaWeights = CriteriaWeights([0.44, 0.23, 0.23, 0.10]);

    pub fn new(w: [f64; 4]) -> Result<Self> {
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidWeights(format!("{w:?} has negative or non-finite entries")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!("{w:?} sums to {sum}")));
        }
        if !(w[0] > w[1] && (w[1] - w[2]).abs() <= 1e-12 && w[2] > w[3]) {
            return Err(Error::InvalidWeights(format!(
                "{w:?} violates w1 > w2 = w3 > w4"
            )));
        }
        Ok(Self(w))
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }
}

impl TryFrom<[f64; 4]> for CriteriaWeights {
    type Error = Error;
    fn try_from(w: [f64; 4]) -> Result<Self> {
        Self::new(w)
    }
}

impl From<CriteriaWeights> for [f64; 4] {
    fn from(w: CriteriaWeights) -> Self {
        w.0
    }
}

fn weighted(metrics: [f64; 4], w: &CriteriaWeights) -> Result<f64> {
    const NAMES: [&str; 4] = ["metric 1", "metric 2", "metric 3", "metric 4"];
    let mut s = 0.0;
    for ((x, wi), name) in metrics.iter().zip(w.0).zip(NAMES) {
        s += wi * check_unit(name, *x)?;
    }
    Ok(s)
}

/// Optimum criteria function over (trust, stability, residual energy,
/// connectivity).
pub fn ocf(x: [f64; 4], w: &CriteriaWeights) -> Result<f64> {
    weighted(x, w)
}

/// Best criteria function over (distance, stability, residual energy,
/// connectivity).
pub fn bcf(y: [f64; 4], v: &CriteriaWeights) -> Result<f64> {
    weighted(y, v)
}

/// Maps relative mobility (m/s) onto `(0, 1]`; a static pair scores 1.
pub fn stability_metric(relative_mobility: f64) -> f64 {
    1.0 / (1.0 + relative_mobility.max(0.0))
}

/// Connectivity degree relative to the best-connected node in the cluster.
pub fn connectivity_metric(degree: usize, max_degree: usize) -> f64 {
    if max_degree == 0 {
        0.0
    } else {
        (degree as f64 / max_degree as f64).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaCandidate {
    pub id: NodeId,
    /// Relative mobility, m/s.
    pub mobility: f64,
    pub degree: usize,
    /// Hops needed to reach the farthest cluster member; `None` when some
    /// member is unreachable.
    pub hop_count: Option<u32>,
}

/// Outcome of a CA election.
#[derive(Debug, Clone, PartialEq)]
pub struct CaElection {
    pub elected: NodeId,
    pub dropped: Vec<NodeId>,
}

/// Elects the cluster head among already-trusted candidates.
///
/// Candidates whose hop count reaches `cluster_size` are dropped. Among the
/// rest, lower mobility wins, then higher degree, then lower id.
pub fn elect_cluster_head(candidates: &[CaCandidate], cluster_size: u32) -> Result<CaElection> {
    let (eligible, dropped): (Vec<&CaCandidate>, Vec<&CaCandidate>) = candidates
        .iter()
        .partition(|c| c.hop_count.is_some_and(|h| h < cluster_size));
    let mut dropped: Vec<NodeId> = dropped.into_iter().map(|c| c.id).collect();
    dropped.sort_unstable();
    let winner = eligible
        .into_iter()
        .min_by(|a, b| {
            a.mobility
                .total_cmp(&b.mobility)
                .then(b.degree.cmp(&a.degree))
                .then(a.id.cmp(&b.id))
        })
        .ok_or_else(|| Error::NoCandidates(format!("all {} CA candidates dropped", candidates.len())))?;
    Ok(CaElection {
        elected: winner.id,
        dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaCandidate {
    pub id: NodeId,
    pub sector: u8,
    /// Normalized (trust, stability, residual energy, connectivity).
    pub metrics: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaElection {
    /// Sector -> (elected node, OCF).
    pub elected: BTreeMap<u8, (NodeId, f64)>,
    /// Sectors with no candidate this epoch.
    pub vacant: Vec<u8>,
    /// Reply window closing time per sector, seconds after start_election.
    pub reply_windows: BTreeMap<u8, f64>,
}

/// Per-sector reply window length, seconds.
pub const RA_REPLY_WINDOW: f64 = 0.1;

/// Elects one RA per sector by highest OCF; ties go to the lower id.
pub fn elect_ras(candidates: &[RaCandidate], w: &CriteriaWeights) -> Result<RaElection> {
    let mut best: BTreeMap<u8, (NodeId, f64)> = BTreeMap::new();
    for c in candidates {
        if !(1..=SECTORS).contains(&c.sector) {
            return Err(Error::InvalidArgument(format!("sector {} out of 1..=6", c.sector)));
        }
        let score = ocf(c.metrics, w)?;
        let better = match best.get(&c.sector) {
            None => true,
            Some(&(id, s)) => score > s || (score == s && c.id < id),
        };
        if better {
            best.insert(c.sector, (c.id, score));
        }
    }
    let vacant = (1..=SECTORS).filter(|k| !best.contains_key(k)).collect();
    let reply_windows = (1..=SECTORS)
        .map(|k| (k, k as f64 * RA_REPLY_WINDOW))
        .collect();
    Ok(RaElection {
        elected: best,
        vacant,
        reply_windows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefCandidate {
    pub id: NodeId,
    pub position: Position,
    pub bcf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefElection {
    pub ids: [NodeId; 3],
    /// Geometry score of the chosen triple.
    pub score: f64,
    /// Candidates that cleared the BCF threshold.
    pub candidates: usize,
    /// The chosen triple is (numerically) collinear.
    pub collinear: bool,
}

/// Weight of the pairwise-distance spread penalty.
pub const EQUIDISTANCE_LAMBDA: f64 = 1.0;
/// Largest pool of top-BCF candidates searched for a triple.
pub const MAX_REFERENCE_POOL: usize = 8;

/// `min pairwise distance - lambda * stddev(pairwise distances)`.
pub fn triple_score(a: &Position, b: &Position, c: &Position) -> f64 {
    let d = [a.distance(b), b.distance(c), a.distance(c)];
    let mean = d.iter().sum::<f64>() / 3.0;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0;
    d.iter().copied().fold(f64::INFINITY, f64::min) - EQUIDISTANCE_LAMBDA * var.sqrt()
}

/// Picks three reference nodes: high BCF and close to equidistant.
pub fn elect_references(candidates: &[RefCandidate], bcf_threshold: f64) -> Result<RefElection> {
    let mut pool: Vec<&RefCandidate> = candidates.iter().filter(|c| c.bcf >= bcf_threshold).collect();
    if pool.len() < 3 {
        return Err(Error::NoCandidates(format!(
            "{} reference candidates reach BCF {bcf_threshold}",
            pool.len()
        )));
    }
    let qualified = pool.len();
    pool.sort_by(|a, b| b.bcf.total_cmp(&a.bcf).then(a.id.cmp(&b.id)));
    pool.truncate(MAX_REFERENCE_POOL);

    let mut best: Option<(f64, f64, [NodeId; 3], [Position; 3])> = None;
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            for k in j + 1..pool.len() {
                let (a, b, c) = (pool[i], pool[j], pool[k]);
                let score = triple_score(&a.position, &b.position, &c.position);
                let bcf_sum = a.bcf + b.bcf + c.bcf;
                let mut ids = [a.id, b.id, c.id];
                ids.sort_unstable();
                let take = match &best {
                    None => true,
                    Some((s, bs, bid, _)) => {
                        score > *s || (score == *s && (bcf_sum > *bs || (bcf_sum == *bs && ids < *bid)))
                    }
                };
                if take {
                    best = Some((score, bcf_sum, ids, [a.position, b.position, c.position]));
                }
            }
        }
    }
    let (score, _, ids, p) = best.expect("pool has at least three candidates");
    let area = 0.5 * ((p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y)).abs();
    Ok(RefElection {
        ids,
        score,
        candidates: qualified,
        collinear: area <= crate::localization::DEGENERACY_EPS,
    })
}

/// Roles elected in one cluster for the current epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterState {
    pub index: usize,
    pub members: Vec<NodeId>,
    pub ca: Option<NodeId>,
    /// Sector -> RA.
    pub ras: BTreeMap<u8, NodeId>,
    pub references: Option<[NodeId; 3]>,
    /// Hop bound for CA eligibility.
    pub cluster_size: u32,
}

impl ClusterState {
    pub fn ra_of_sector(&self, sector: u8) -> Option<NodeId> {
        self.ras.get(&sector).copied()
    }

    pub fn holds_role(&self, id: NodeId) -> bool {
        self.ca == Some(id)
            || self.ras.values().any(|r| *r == id)
            || self.references.is_some_and(|r| r.contains(&id))
    }
}
