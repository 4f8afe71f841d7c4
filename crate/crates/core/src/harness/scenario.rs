//! The full scenario event loop.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use super::attacker::{Behavior, ScriptEntry};
use super::config::ScenarioConfig;
use super::metrics::{ClusterMetrics, EpochElections, ErrorStats, MetricsReport, Rate};
use super::observe::{observe, RangeSource};
use crate::elections::{
    bcf, connectivity_metric, elect_cluster_head, elect_ras, elect_references, stability_metric,
    CaCandidate, ClusterState, RaCandidate, RefCandidate,
};
use crate::error::Result;
use crate::geometry::{Bounds, Position, Stamped};
use crate::localization::{
    localize_malicious, multilaterate, triangulate, Method, PositionEstimate, ReferenceFix,
};
use crate::ranging::{measure_range, RangeMeasurement, RangeStatus};
use crate::sim::{
    advance_waypoint, relative_mobility, sector_of, seeded_rng, EventLog, EventQueue, MobilityParams,
    NodeId, NodeState, RadioModel, Role, SimClock, SimRng,
};
use crate::tracking::{plt_step, sense, contour_index, TrackStatus, TrackerState};
use crate::trust::{
    detect_malicious, introduce, ra_gate, update_behaviour, Certificate, DetectionReason, GateDecision,
    KeyDirectory, KeyPair, PublicKey, RegistrationRequest, SignatureScheme, SimulatedScheme, TrustLedger,
    VerdictKind, MISBEHAVIOUR_THRESHOLD,
};

/// Issuer id of the offline root that signs the initial certificates.
pub const ROOT_ID: NodeId = NodeId::MAX;
const HISTORY_KEEP: usize = 4;
const HIGH_TRUST: f64 = 0.8;

/// Staleness of one reading's ToD stamp from a replaying node: every other
/// reading on average carries a stale stamp up to `offset` seconds old.
fn replay_skew(offset: Option<f64>, rng: &mut SimRng) -> f64 {
    match offset {
        Some(o) if rng.random::<bool>() => o * rng.random::<f64>(),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementRow {
    pub t: f64,
    pub reference_id: NodeId,
    pub target_id: NodeId,
    pub n_packets: usize,
    pub attempts: usize,
    pub reading_1: f64,
    pub reading_2: f64,
    pub reading_3: f64,
    pub status: &'static str,
    pub distance: Option<f64>,
    pub aoa: Option<f64>,
}

impl MeasurementRow {
    fn from(m: &RangeMeasurement) -> Self {
        Self {
            t: m.t,
            reference_id: m.reference_id,
            target_id: m.target_id,
            n_packets: m.n_packets,
            attempts: m.attempts,
            reading_1: m.readings[0],
            reading_2: m.readings[1],
            reading_3: m.readings[2],
            status: m.status.as_str(),
            distance: m.distance,
            aoa: m.aoa,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub t: f64,
    pub target_id: NodeId,
    pub method: &'static str,
    /// Why the fix was taken: member, flagged, seed or reacquire.
    pub purpose: &'static str,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub residual: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackRow {
    pub t: f64,
    pub target_id: NodeId,
    pub observer_id: NodeId,
    pub status: &'static str,
    pub est_x: Option<f64>,
    pub est_y: Option<f64>,
    pub true_x: f64,
    pub true_y: f64,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionRow {
    pub t: f64,
    pub cluster: usize,
    /// `key_request` or `ra_gate`.
    pub source: &'static str,
    /// Requester (key request) or gatekeeper (RA gate).
    pub observer_id: NodeId,
    pub target_id: NodeId,
    pub verdict: &'static str,
    pub reason: Option<&'static str>,
    pub aggregate_trust: f64,
    pub votes_for: usize,
    pub votes_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElectionRow {
    pub epoch: u32,
    pub t: f64,
    pub cluster: usize,
    /// CA, RA or REF.
    pub kind: &'static str,
    pub sector: Option<u8>,
    pub candidates: usize,
    pub dropped: usize,
    /// Elected id(s), space separated; empty when the election failed.
    pub elected: String,
    pub score: Option<f64>,
}

/// One row per node flagged malicious.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlagRow {
    pub t: f64,
    pub cluster: usize,
    pub node_id: NodeId,
    pub attacker: bool,
    pub behavior: Option<&'static str>,
    pub reason: &'static str,
    pub trust_at_flag: f64,
}

/// Tabular traces of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Records {
    pub measurements: Vec<MeasurementRow>,
    pub estimates: Vec<EstimateRow>,
    pub tracking: Vec<TrackRow>,
    pub detections: Vec<DetectionRow>,
    pub elections: Vec<ElectionRow>,
    pub flags: Vec<FlagRow>,
}

/// Everything a scenario run produces.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub report: MetricsReport,
    pub records: Records,
    pub log: EventLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    Election { cluster: usize, generation: u32 },
    Tick,
    Registration { node: NodeId },
}

#[derive(Debug, Clone, Copy)]
struct Attacker {
    entry: ScriptEntry,
    forged: KeyPair,
}

enum Track {
    Seeding(Option<Stamped>),
    Active(Box<TrackerState>),
}

fn ms(t: f64) -> u64 {
    (t * 1000.0).round() as u64
}

struct World<'a> {
    cfg: &'a ScenarioConfig,
    radio: RadioModel,
    nodes: Vec<NodeState>,
    cluster_of: Vec<usize>,
    tiles: Vec<Bounds>,
    clusters: Vec<ClusterState>,
    generation: Vec<u32>,
    epochs: Vec<u32>,
    attackers: BTreeMap<NodeId, Attacker>,
    started: BTreeSet<NodeId>,
    scheme: SimulatedScheme,
    directory: KeyDirectory,
    certificates: Vec<Certificate>,
    ledger: TrustLedger,
    base_trust: Vec<f64>,
    flagged: BTreeMap<NodeId, f64>,
    last_fix: BTreeMap<NodeId, Position>,
    tracks: BTreeMap<NodeId, Track>,
    mobility_rng: SimRng,
    measure_rng: SimRng,
    protocol_rng: SimRng,
    queue: EventQueue<Ev>,
    clock: SimClock,
    log: EventLog,
    records: Records,
    errors: BTreeMap<&'static str, Vec<f64>>,
    elected_bcf: Vec<f64>,
    epoch_stats: BTreeMap<u32, EpochElections>,
    ra_rejects: Vec<[usize; 6]>,
    false_positives_high_trust: usize,
}

/// Runs one scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let mut world = World::new(cfg);
    world.run();
    Ok(world.finish())
}

impl<'a> World<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        let mut setup = seeded_rng(cfg.seed ^ 0x5EED_0000_0000_0001);
        let cols = (cfg.clusters as f64).sqrt().ceil() as usize;
        let tile = cfg.cluster_bounds();
        let tiles: Vec<Bounds> = (0..cfg.clusters)
            .map(|c| {
                tile.offset(
                    (c % cols) as f64 * cfg.bounds.width,
                    (c / cols) as f64 * cfg.bounds.height,
                )
            })
            .collect();

        let mut scheme = SimulatedScheme::new();
        let mut directory = KeyDirectory::new();
        let root = KeyPair::from_seed(cfg.seed.rotate_left(17) ^ 0xC0FF_EE00);
        scheme.register(&root);
        directory.insert(ROOT_ID, root.public);

        let total = cfg.clusters * cfg.nodes_per_cluster;
        let mut nodes = Vec::with_capacity(total);
        let mut cluster_of = Vec::with_capacity(total);
        let mut certificates = Vec::with_capacity(total);
        let mut base_trust = Vec::with_capacity(total);
        let mut ledger = TrustLedger::new();
        for (c, b) in tiles.iter().enumerate() {
            for _ in 0..cfg.nodes_per_cluster {
                let id = nodes.len() as NodeId;
                let pos = Position::new(
                    setup.random_range(b.min_x..=b.max_x),
                    setup.random_range(b.min_y..=b.max_y),
                );
                let key = KeyPair::from_seed(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ u64::from(id));
                scheme.register(&key);
                directory.insert(id, key.public);
                certificates.push(Certificate::issue(&scheme, ROOT_ID, &root, id, key.public, 0.0));
                let mut n = NodeState::new(id, pos, key);
                n.residual_energy = setup.random_range(0.6..=1.0);
                n.trust = setup.random_range(0.8..=1.0);
                base_trust.push(n.trust);
                ledger.set_reputation(id, n.trust).expect("trust drawn in [0.8, 1]");
                nodes.push(n);
                cluster_of.push(c);
            }
        }

        let n_attackers = ((cfg.attackers.fraction * total as f64) + 1e-9).floor() as usize;
        let mut ids: Vec<NodeId> = (0..total as NodeId).collect();
        ids.shuffle(&mut setup);
        let mut chosen: Vec<NodeId> = ids.into_iter().take(n_attackers).collect();
        chosen.sort_unstable();
        let mut attackers = BTreeMap::new();
        for (i, id) in chosen.into_iter().enumerate() {
            let entry = cfg.attackers.entry_for(i).expect("validated: script non-empty");
            let forged = KeyPair::from_seed(!(cfg.seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ u64::from(id)));
            scheme.register(&forged);
            attackers.insert(id, Attacker { entry, forged });
        }

        let clusters = (0..cfg.clusters)
            .map(|c| ClusterState {
                index: c,
                members: (0..total as NodeId).filter(|i| cluster_of[*i as usize] == c).collect(),
                cluster_size: cfg.elections.cluster_size,
                ..Default::default()
            })
            .collect();

        Self {
            cfg,
            radio: cfg.radio.model(),
            nodes,
            cluster_of,
            tiles,
            clusters,
            generation: vec![0; cfg.clusters],
            epochs: vec![0; cfg.clusters],
            attackers,
            started: BTreeSet::new(),
            scheme,
            directory,
            certificates,
            ledger,
            base_trust,
            flagged: BTreeMap::new(),
            last_fix: BTreeMap::new(),
            tracks: BTreeMap::new(),
            mobility_rng: seeded_rng(cfg.seed),
            measure_rng: seeded_rng(cfg.seed ^ 0x00A1_1CE0_0000_0002),
            protocol_rng: seeded_rng(cfg.seed ^ 0x0B0B_0000_0000_0003),
            queue: EventQueue::new(),
            clock: SimClock::default(),
            log: EventLog::new(),
            records: Records::default(),
            errors: BTreeMap::new(),
            elected_bcf: Vec::new(),
            epoch_stats: BTreeMap::new(),
            ra_rejects: vec![[0; 6]; cfg.clusters],
            false_positives_high_trust: 0,
        }
    }

    fn end_ms(&self) -> u64 {
        ms(self.cfg.duration)
    }

    fn run(&mut self) {
        for c in 0..self.cfg.clusters {
            self.queue.schedule(0, Ev::Election { cluster: c, generation: 0 });
        }
        if self.end_ms() >= 1000 {
            self.queue.schedule(1000, Ev::Tick);
        }
        let interval = ms(self.cfg.protocol.registration_interval).max(1);
        for id in 0..self.nodes.len() as u64 {
            // staggered so registrations do not all land on one instant
            let first = 1000 + (id * 7919) % interval;
            if first <= self.end_ms() {
                self.queue.schedule(first, Ev::Registration { node: id as NodeId });
            }
        }
        while let Some((clock, ev)) = self.queue.pop() {
            self.clock = clock;
            match ev {
                Ev::Election { cluster, generation } => {
                    if generation == self.generation[cluster] {
                        self.elect(cluster);
                    }
                }
                Ev::Tick => self.tick(),
                Ev::Registration { node } => self.registration(node),
            }
        }
    }

    fn now(&self) -> f64 {
        self.clock.now
    }

    fn is_flagged(&self, id: NodeId) -> bool {
        self.flagged.contains_key(&id)
    }

    fn active_behavior(&self, id: NodeId) -> Option<Behavior> {
        self.attackers
            .get(&id)
            .filter(|a| self.now() >= a.entry.start_t)
            .map(|a| a.entry.behavior)
    }

    /// ToD staleness bound (s) injected by `id`, if it replays stamps.
    fn replay_offset(&self, id: NodeId) -> Option<f64> {
        match self.active_behavior(id) {
            Some(Behavior::ReplayTod { offset_ns }) => Some(offset_ns * 1e-9),
            _ => None,
        }
    }

    /// True when `target` refuses to answer ranging from `observer`.
    fn hidden_from(&self, target: NodeId, observer: &Position) -> bool {
        match self.active_behavior(target) {
            Some(Behavior::Hide { sector }) => {
                sector_of(&self.nodes[target as usize].position, observer).is_ok_and(|s| s == sector)
            }
            _ => false,
        }
    }

    fn presented_key(&self, id: NodeId) -> PublicKey {
        match (self.active_behavior(id), self.attackers.get(&id)) {
            (Some(Behavior::ForgeKey), Some(a)) => a.forged.public,
            _ => self.nodes[id as usize].key_pair.public,
        }
    }

    /// Unflagged members of `cluster` within radio range of `id`.
    fn cluster_neighbors(&self, id: NodeId) -> Vec<NodeId> {
        let c = self.cluster_of[id as usize];
        let p = self.nodes[id as usize].position;
        self.clusters[c]
            .members
            .iter()
            .copied()
            .filter(|&j| j != id && !self.is_flagged(j))
            .filter(|&j| self.radio.in_range(&p, &self.nodes[j as usize].position))
            .collect()
    }

    fn mean_relative_mobility(&self, id: NodeId, others: &[NodeId]) -> f64 {
        let window = self.cfg.protocol.mobility_window;
        let a = &self.nodes[id as usize];
        let vals: Vec<f64> = others
            .iter()
            .filter_map(|&j| relative_mobility(a, &self.nodes[j as usize], window).ok())
            .collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }

    fn pair_mobility(&self, a: NodeId, b: NodeId) -> f64 {
        relative_mobility(
            &self.nodes[a as usize],
            &self.nodes[b as usize],
            self.cfg.protocol.mobility_window,
        )
        .unwrap_or(0.0)
    }

    fn eligible(&self, id: NodeId) -> bool {
        let n = &self.nodes[id as usize];
        !self.is_flagged(id)
            && n.trust >= self.cfg.thresholds.trust
            && self.ledger.behaviour(id) <= MISBEHAVIOUR_THRESHOLD
            // election packets signed with a forged key fail authentication
            && !matches!(self.active_behavior(id), Some(Behavior::ForgeKey))
    }

    /// Hop eccentricity of each node in the largest connected component of
    /// the cluster's unflagged members; others get `None`.
    fn eccentricities(&self, cluster: usize) -> BTreeMap<NodeId, Option<u32>> {
        let members: Vec<NodeId> = self.clusters[cluster]
            .members
            .iter()
            .copied()
            .filter(|&j| !self.is_flagged(j))
            .collect();
        let adj: BTreeMap<NodeId, Vec<NodeId>> =
            members.iter().map(|&m| (m, self.cluster_neighbors(m))).collect();
        let bfs = |src: NodeId| -> BTreeMap<NodeId, u32> {
            let mut dist = BTreeMap::from([(src, 0u32)]);
            let mut q = VecDeque::from([src]);
            while let Some(u) = q.pop_front() {
                let du = dist[&u];
                for &v in &adj[&u] {
                    if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(v) {
                        e.insert(du + 1);
                        q.push_back(v);
                    }
                }
            }
            dist
        };
        let mut out = BTreeMap::new();
        let mut component_of: BTreeMap<NodeId, usize> = BTreeMap::new();
        let mut components: Vec<Vec<NodeId>> = Vec::new();
        for &m in &members {
            if component_of.contains_key(&m) {
                continue;
            }
            let reach: Vec<NodeId> = bfs(m).keys().copied().collect();
            for &r in &reach {
                component_of.insert(r, components.len());
            }
            components.push(reach);
        }
        let largest = components
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i);
        for &m in &members {
            let ecc = if Some(component_of[&m]) == largest {
                bfs(m).values().copied().max()
            } else {
                None
            };
            out.insert(m, ecc);
        }
        out
    }

    fn clear_roles(&mut self, cluster: usize) {
        let cs = &mut self.clusters[cluster];
        let holders: Vec<NodeId> = cs
            .ca
            .into_iter()
            .chain(cs.ras.values().copied())
            .chain(cs.references.into_iter().flatten())
            .collect();
        cs.ca = None;
        cs.ras.clear();
        cs.references = None;
        for id in holders {
            let n = &mut self.nodes[id as usize];
            if n.role != Role::Malicious {
                n.role = Role::Member;
            }
        }
    }

    fn epoch_entry(&mut self, epoch: u32) -> &mut EpochElections {
        self.epoch_stats.entry(epoch).or_insert_with(|| EpochElections {
            epoch,
            ..Default::default()
        })
    }

    fn elect(&mut self, cluster: usize) {
        let t = self.now();
        let epoch = self.epochs[cluster];
        self.epochs[cluster] += 1;
        self.generation[cluster] += 1;
        let next = ms(t + self.cfg.elections.interval);
        if next <= self.end_ms() {
            self.queue.schedule(
                next,
                Ev::Election {
                    cluster,
                    generation: self.generation[cluster],
                },
            );
        }
        self.clear_roles(cluster);

        let members: Vec<NodeId> = self.clusters[cluster].members.clone();
        let eligible: Vec<NodeId> = members.iter().copied().filter(|&i| self.eligible(i)).collect();
        let ecc = self.eccentricities(cluster);
        let degree: BTreeMap<NodeId, usize> = members
            .iter()
            .filter(|&&i| !self.is_flagged(i))
            .map(|&i| (i, self.cluster_neighbors(i).len()))
            .collect();
        let max_degree = degree.values().copied().max().unwrap_or(0);

        let ca_candidates: Vec<CaCandidate> = eligible
            .iter()
            .map(|&i| CaCandidate {
                id: i,
                mobility: self.mean_relative_mobility(i, &self.cluster_neighbors(i)),
                degree: degree[&i],
                hop_count: ecc.get(&i).copied().flatten(),
            })
            .collect();
        let ca = match elect_cluster_head(&ca_candidates, self.cfg.elections.cluster_size) {
            Ok(e) => {
                self.records.elections.push(ElectionRow {
                    epoch,
                    t,
                    cluster,
                    kind: "CA",
                    sector: None,
                    candidates: ca_candidates.len(),
                    dropped: e.dropped.len(),
                    elected: e.elected.to_string(),
                    score: None,
                });
                self.log.push(
                    self.clock,
                    "election",
                    json!({"cluster": cluster, "epoch": epoch, "kind": "CA", "elected": e.elected,
                           "candidates": ca_candidates.len(), "dropped": e.dropped.len()}),
                );
                self.epoch_entry(epoch).ca += 1;
                e.elected
            }
            Err(err) => {
                self.records.elections.push(ElectionRow {
                    epoch,
                    t,
                    cluster,
                    kind: "CA",
                    sector: None,
                    candidates: ca_candidates.len(),
                    dropped: ca_candidates.len(),
                    elected: String::new(),
                    score: None,
                });
                self.log.push(
                    self.clock,
                    "headless",
                    json!({"cluster": cluster, "epoch": epoch, "error": err.to_string()}),
                );
                self.epoch_entry(epoch).headless += 1;
                return;
            }
        };
        self.clusters[cluster].ca = Some(ca);
        self.nodes[ca as usize].role = Role::ClusterHead;
        let ca_pos = self.nodes[ca as usize].position;

        let ra_candidates: Vec<RaCandidate> = eligible
            .iter()
            .copied()
            .filter(|&i| i != ca && self.radio.in_range(&ca_pos, &self.nodes[i as usize].position))
            .filter_map(|i| {
                let n = &self.nodes[i as usize];
                let sector = sector_of(&ca_pos, &n.position).ok()?;
                Some(RaCandidate {
                    id: i,
                    sector,
                    metrics: [
                        n.trust,
                        stability_metric(self.pair_mobility(i, ca)),
                        n.residual_energy,
                        connectivity_metric(degree[&i], max_degree),
                    ],
                })
            })
            .collect();
        let ras = elect_ras(&ra_candidates, &self.cfg.weights.ocf).expect("metrics are normalized");
        for (&sector, &(id, score)) in &ras.elected {
            self.clusters[cluster].ras.insert(sector, id);
            self.nodes[id as usize].role = Role::Ra(sector);
            let in_sector = ra_candidates.iter().filter(|c| c.sector == sector).count();
            self.records.elections.push(ElectionRow {
                epoch,
                t,
                cluster,
                kind: "RA",
                sector: Some(sector),
                candidates: in_sector,
                dropped: 0,
                elected: id.to_string(),
                score: Some(score),
            });
        }
        for &sector in &ras.vacant {
            self.log.push(
                self.clock,
                "vacancy",
                json!({"cluster": cluster, "epoch": epoch, "sector": sector}),
            );
        }
        self.log.push(
            self.clock,
            "election",
            json!({"cluster": cluster, "epoch": epoch, "kind": "RA",
                   "elected": ras.elected.iter().map(|(s, (id, _))| (s.to_string(), *id)).collect::<BTreeMap<_, _>>()}),
        );
        let stats = self.epoch_entry(epoch);
        stats.ra += ras.elected.len();
        stats.vacant_sectors += ras.vacant.len();

        let ra_ids: BTreeSet<NodeId> = ras.elected.values().map(|(id, _)| *id).collect();
        let max_dist = members
            .iter()
            .filter(|&&i| !self.is_flagged(i))
            .map(|&i| self.nodes[i as usize].position.distance(&ca_pos))
            .fold(0.0, f64::max);
        let ref_candidates: Vec<RefCandidate> = eligible
            .iter()
            .copied()
            .filter(|&i| i != ca && !ra_ids.contains(&i))
            .map(|i| {
                let n = &self.nodes[i as usize];
                let y1 = if max_dist > 0.0 {
                    n.position.distance(&ca_pos) / max_dist
                } else {
                    0.0
                };
                let y = [
                    y1,
                    stability_metric(self.pair_mobility(i, ca)),
                    n.residual_energy,
                    connectivity_metric(degree[&i], max_degree),
                ];
                RefCandidate {
                    id: i,
                    position: n.position,
                    bcf: bcf(y, &self.cfg.weights.bcf).expect("metrics are normalized"),
                }
            })
            .collect();
        match elect_references(&ref_candidates, self.cfg.thresholds.bcf) {
            Ok(r) => {
                self.clusters[cluster].references = Some(r.ids);
                for id in r.ids {
                    self.nodes[id as usize].role = Role::Reference;
                    let b = ref_candidates.iter().find(|c| c.id == id).map(|c| c.bcf);
                    self.elected_bcf.extend(b);
                }
                if r.collinear {
                    self.log.push(
                        self.clock,
                        "geometry_warning",
                        json!({"cluster": cluster, "epoch": epoch, "references": r.ids}),
                    );
                }
                self.records.elections.push(ElectionRow {
                    epoch,
                    t,
                    cluster,
                    kind: "REF",
                    sector: None,
                    candidates: r.candidates,
                    dropped: ref_candidates.len() - r.candidates,
                    elected: r.ids.map(|i| i.to_string()).join(" "),
                    score: Some(r.score),
                });
                self.log.push(
                    self.clock,
                    "election",
                    json!({"cluster": cluster, "epoch": epoch, "kind": "REF", "elected": r.ids, "score": r.score}),
                );
                self.epoch_entry(epoch).reference += 1;
            }
            Err(err) => {
                self.records.elections.push(ElectionRow {
                    epoch,
                    t,
                    cluster,
                    kind: "REF",
                    sector: None,
                    candidates: ref_candidates.len(),
                    dropped: ref_candidates.len(),
                    elected: String::new(),
                    score: None,
                });
                self.log.push(
                    self.clock,
                    "reference_election_failed",
                    json!({"cluster": cluster, "epoch": epoch, "error": err.to_string()}),
                );
                self.epoch_entry(epoch).reference_failures += 1;
            }
        }
    }

    fn tick(&mut self) {
        let t = self.now();
        let next = ms(t) + 1000;
        if next <= self.end_ms() {
            self.queue.schedule(next, Ev::Tick);
        }

        let mut spare = self.nodes[0].clone();
        for i in 0..self.nodes.len() {
            let params = MobilityParams {
                bounds: self.tiles[self.cluster_of[i]],
                v_min: self.cfg.speed.min,
                v_max: self.cfg.speed.max,
            };
            std::mem::swap(&mut spare, &mut self.nodes[i]);
            let mut node = advance_waypoint(spare, 1.0, &mut self.mobility_rng, &params);
            node.record(t, HISTORY_KEEP);
            spare = std::mem::replace(&mut self.nodes[i], node);
        }

        let starting: Vec<(NodeId, Behavior)> = self
            .attackers
            .iter()
            .filter(|(id, a)| t >= a.entry.start_t && !self.started.contains(id))
            .map(|(id, a)| (*id, a.entry.behavior))
            .collect();
        for (id, b) in starting {
            self.started.insert(id);
            self.log.push(self.clock, "attack_start", json!({"node": id, "behavior": b.name()}));
        }

        for i in 0..self.nodes.len() as NodeId {
            let d = if self.is_flagged(i) { 0 } else { self.cluster_neighbors(i).len() };
            self.nodes[i as usize].connectivity_degree = d;
        }

        for c in 0..self.clusters.len() {
            self.localize_members(c);
        }
        for c in 0..self.clusters.len() {
            self.key_requests(c);
        }
        self.track_flagged();
    }

    fn range_to(&mut self, reference: NodeId, target: NodeId) -> RangeMeasurement {
        let t = self.now();
        let offset = self.replay_offset(target);
        let mut skew = |rng: &mut SimRng| replay_skew(offset, rng);
        measure_range(
            t,
            (reference, self.nodes[reference as usize].position),
            (target, self.nodes[target as usize].position),
            &self.radio,
            &self.cfg.ranging,
            &mut skew,
            &mut self.measure_rng,
        )
    }

    fn log_measurement(&mut self, m: &RangeMeasurement) {
        self.log.push(
            self.clock,
            "measurement",
            json!({"reference": m.reference_id, "target": m.target_id, "status": m.status.as_str(),
                   "distance": m.distance, "attempts": m.attempts}),
        );
        self.records.measurements.push(MeasurementRow::from(m));
    }

    fn record_estimate(&mut self, target: NodeId, est: &PositionEstimate, purpose: &'static str, bucket: &'static str, logged: bool) {
        let truth = self.nodes[target as usize].position;
        let error = est.position.distance(&truth);
        self.errors.entry(bucket).or_default().push(error);
        self.last_fix.insert(target, est.position);
        if logged {
            self.log.push(
                self.clock,
                "estimate",
                json!({"target": target, "method": est.method.as_str(), "purpose": purpose,
                       "x": est.position.x, "y": est.position.y, "residual": est.residual, "error": error}),
            );
            self.records.estimates.push(EstimateRow {
                t: self.now(),
                target_id: target,
                method: est.method.as_str(),
                purpose,
                x: est.position.x,
                y: est.position.y,
                z: est.position.z,
                residual: est.residual,
                error,
            });
        }
    }

    /// Continuous localization of every unflagged member; the ranging
    /// sessions double as the behaviour monitor for stamp tampering.
    fn localize_members(&mut self, cluster: usize) {
        let logged = self.cfg.trace.member_measurements;
        let members = self.clusters[cluster].members.clone();
        let refs = self.clusters[cluster].references;
        for id in members {
            if self.is_flagged(id) {
                continue;
            }
            let pos = self.nodes[id as usize].position;
            let usable_refs = refs.filter(|r| {
                !r.contains(&id)
                    && r.iter().all(|&j| {
                        !self.is_flagged(j)
                            && self.radio.in_range(&self.nodes[j as usize].position, &pos)
                            && !self.hidden_from(id, &self.nodes[j as usize].position)
                    })
            });

            let (method, observers): (Method, Vec<NodeId>) = match usable_refs {
                Some(r) => (Method::Triangulation, r.to_vec()),
                None => {
                    let anchor = self.last_fix.get(&id).copied().unwrap_or(pos);
                    let mut near: Vec<(f64, NodeId)> = self
                        .cluster_neighbors(id)
                        .into_iter()
                        .filter(|&j| !self.hidden_from(id, &self.nodes[j as usize].position))
                        .map(|j| (self.nodes[j as usize].position.distance(&anchor), j))
                        .collect();
                    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    if near.len() < 4 {
                        continue;
                    }
                    (Method::Multilateration, near.into_iter().take(4).map(|(_, j)| j).collect())
                }
            };

            let mut fixes = Vec::with_capacity(observers.len());
            let mut tampered = false;
            for &o in &observers {
                let m = self.range_to(o, id);
                if logged {
                    self.log_measurement(&m);
                }
                tampered |= m.attempts > 1 || m.status == RangeStatus::Rejected;
                if let Some(d) = m.distance {
                    let mut f = ReferenceFix::new(self.nodes[o as usize].position, d);
                    f.aoa = m.aoa;
                    fixes.push(f);
                }
            }
            if fixes.len() == observers.len() {
                let est = match method {
                    Method::Triangulation => triangulate(&fixes),
                    Method::Multilateration => multilaterate(&fixes),
                };
                if let Ok(est) = est {
                    let est = est.at(self.now());
                    tampered |= est.residual > self.cfg.thresholds.residual;
                    self.record_estimate(id, &est, "member", method.as_str(), logged);
                }
            }
            self.observe_behaviour(id, if tampered { 1.0 } else { 0.0 });
        }
    }

    fn observe_behaviour(&mut self, id: NodeId, evidence: f64) {
        let evidence = match self.active_behavior(id) {
            Some(Behavior::DropPackets { ratio }) => evidence.max(ratio),
            _ => evidence,
        };
        let score = update_behaviour(&mut self.ledger, id, evidence, self.cfg.protocol.behaviour_alpha)
            .expect("evidence and alpha are in [0, 1]");
        let trust = self.base_trust[id as usize] * (1.0 - score);
        let n = &mut self.nodes[id as usize];
        n.behaviour = score;
        n.trust = trust;
        self.ledger.set_reputation(id, trust).expect("trust stays in [0, 1]");
    }

    fn key_requests(&mut self, cluster: usize) {
        let Some(ca) = self.clusters[cluster].ca else { return };
        let ca_pos = self.nodes[ca as usize].position;
        for _ in 0..self.cfg.protocol.key_requests_per_tick {
            let live: Vec<NodeId> = self.clusters[cluster]
                .members
                .iter()
                .copied()
                .filter(|&i| !self.is_flagged(i))
                .collect();
            if live.len() < 2 {
                return;
            }
            let requester = live[self.protocol_rng.random_range(0..live.len())];
            let target = loop {
                let cand = live[self.protocol_rng.random_range(0..live.len())];
                if cand != requester {
                    break cand;
                }
            };
            let mut sectors = Vec::new();
            for n in [requester, target] {
                if let Ok(s) = sector_of(&ca_pos, &self.nodes[n as usize].position) {
                    if !sectors.contains(&s) {
                        sectors.push(s);
                    }
                }
            }
            let introducers: Vec<NodeId> = sectors
                .iter()
                .filter_map(|&s| self.clusters[cluster].ra_of_sector(s))
                .filter(|&ra| ra != requester && ra != target && !self.is_flagged(ra))
                .filter(|&ra| self.ledger.trust(requester, ra) >= self.cfg.thresholds.trust)
                .collect();
            let replies: Vec<_> = introducers
                .iter()
                .filter_map(|&ra| {
                    introduce(
                        &self.scheme,
                        &self.nodes[ra as usize],
                        requester,
                        target,
                        &self.ledger,
                        &self.directory,
                    )
                    .ok()
                })
                .collect();
            let votes: Vec<(NodeId, PublicKey)> = self
                .cluster_neighbors(requester)
                .into_iter()
                .filter(|&v| v != target)
                .map(|v| (v, self.presented_key(target)))
                .collect();
            let Ok(verdict) = detect_malicious(
                &self.scheme,
                requester,
                target,
                &replies,
                &votes,
                self.cfg.thresholds.trust,
                &self.ledger,
                &self.directory,
                self.cfg.protocol.aggregation,
            ) else {
                continue;
            };
            let malicious = verdict.kind == VerdictKind::Malicious;
            self.records.detections.push(DetectionRow {
                t: self.now(),
                cluster,
                source: "key_request",
                observer_id: requester,
                target_id: target,
                verdict: if malicious { "malicious" } else { "honest" },
                reason: verdict.reason.map(|r| r.as_str()),
                aggregate_trust: verdict.aggregate_trust,
                votes_for: verdict.votes_for,
                votes_total: verdict.votes_total,
            });
            self.log.push(
                self.clock,
                "detection",
                json!({"requester": requester, "target": target, "verdict": if malicious { "malicious" } else { "honest" },
                       "reason": verdict.reason.map(|r| r.as_str()), "aggregate_trust": verdict.aggregate_trust,
                       "votes_for": verdict.votes_for, "votes_total": verdict.votes_total}),
            );
            if malicious {
                self.flag(target, verdict.reason.expect("malicious verdicts carry a reason"));
            }
        }
    }

    fn registration(&mut self, node: NodeId) {
        let next = ms(self.now() + self.cfg.protocol.registration_interval);
        if next <= self.end_ms() {
            self.queue.schedule(next, Ev::Registration { node });
        }
        if self.is_flagged(node) {
            return;
        }
        let cluster = self.cluster_of[node as usize];
        let Some(ca) = self.clusters[cluster].ca else { return };
        if ca == node {
            return;
        }
        let ca_pos = self.nodes[ca as usize].position;
        let Ok(sector) = sector_of(&ca_pos, &self.nodes[node as usize].position) else { return };
        let gatekeeper = match self.clusters[cluster].ra_of_sector(sector) {
            Some(ra) if ra != node => ra,
            _ => ca,
        };
        let request = RegistrationRequest {
            node_id: node,
            presented_key: self.presented_key(node),
            certificate: self.certificates[node as usize],
        };
        let decision = ra_gate(
            &self.scheme,
            &self.nodes[gatekeeper as usize],
            &request,
            &self.ledger,
            &self.directory,
            self.cfg.thresholds.trust,
            self.now(),
        );
        match decision {
            GateDecision::ForwardToCa => {
                self.log.push(
                    self.clock,
                    "gate",
                    json!({"node": node, "gatekeeper": gatekeeper, "sector": sector, "decision": "forward"}),
                );
            }
            GateDecision::Reject(alert) => {
                self.ra_rejects[cluster][sector as usize - 1] += 1;
                self.log.push(
                    self.clock,
                    "gate",
                    json!({"node": node, "gatekeeper": gatekeeper, "sector": sector, "decision": "reject",
                           "reason": alert.reason.as_str()}),
                );
                self.log.push(
                    self.clock,
                    "alert",
                    json!({"ra": alert.ra_id, "suspect": alert.suspect_id, "reason": alert.reason.as_str(), "sector": sector}),
                );
                self.records.detections.push(DetectionRow {
                    t: self.now(),
                    cluster,
                    source: "ra_gate",
                    observer_id: gatekeeper,
                    target_id: node,
                    verdict: "malicious",
                    reason: Some(alert.reason.as_str()),
                    aggregate_trust: self.ledger.trust(gatekeeper, node),
                    votes_for: 0,
                    votes_total: 0,
                });
                self.flag(node, alert.reason);
            }
        }
    }

    fn flag(&mut self, id: NodeId, reason: DetectionReason) {
        if self.is_flagged(id) {
            return;
        }
        let t = self.now();
        let cluster = self.cluster_of[id as usize];
        let attacker = self.attackers.contains_key(&id);
        let trust = self.nodes[id as usize].trust;
        if !attacker && trust >= HIGH_TRUST {
            self.false_positives_high_trust += 1;
        }
        self.flagged.insert(id, t);
        self.records.flags.push(FlagRow {
            t,
            cluster,
            node_id: id,
            attacker,
            behavior: self.attackers.get(&id).map(|a| a.entry.behavior.name()),
            reason: reason.as_str(),
            trust_at_flag: trust,
        });
        self.log.push(
            self.clock,
            "flag",
            json!({"node": id, "cluster": cluster, "reason": reason.as_str(), "attacker": attacker}),
        );

        let cs = &self.clusters[cluster];
        let was_ca = cs.ca == Some(id);
        if let Some((&s, _)) = cs.ras.iter().find(|(_, &r)| r == id) {
            self.clusters[cluster].ras.remove(&s);
            self.log.push(self.clock, "vacancy", json!({"cluster": cluster, "sector": s}));
        }
        if self.clusters[cluster].references.is_some_and(|r| r.contains(&id)) {
            self.clusters[cluster].references = None;
            self.log.push(self.clock, "references_revoked", json!({"cluster": cluster}));
        }
        self.nodes[id as usize].role = Role::Malicious;
        self.ledger.set_reputation(id, 0.0).expect("0 is a valid trust");
        if was_ca {
            self.clusters[cluster].ca = None;
            self.generation[cluster] += 1;
            self.queue.schedule(
                ms(t),
                Ev::Election {
                    cluster,
                    generation: self.generation[cluster],
                },
            );
        }

        let fix = self.localize_flagged(id, "flagged");
        self.tracks.insert(id, Track::Seeding(fix));
    }

    /// One multilateration attempt on flagged node `id` from authenticated
    /// nodes of any cluster.
    fn localize_flagged(&mut self, id: NodeId, purpose: &'static str) -> Option<Stamped> {
        let t = self.now();
        let target_pos = self.nodes[id as usize].position;
        let neighbors: Vec<(NodeId, Position)> = (0..self.nodes.len() as NodeId)
            .filter(|&j| j != id && !self.is_flagged(j))
            .map(|j| (j, self.nodes[j as usize].position))
            .filter(|(j, p)| self.radio.in_range(p, &target_pos) && !self.hidden_from(id, &self.nodes[*j as usize].position))
            .collect();
        let last_known = self.last_fix.get(&id).copied().unwrap_or(target_pos);
        let offset = self.replay_offset(id);
        let params = self.cfg.localization_params();
        let result = localize_malicious(
            t,
            &neighbors,
            (id, target_pos),
            last_known,
            &self.radio,
            &params,
            &mut |_, rng: &mut SimRng| replay_skew(offset, rng),
            &mut self.measure_rng,
        );
        match result {
            Ok(fix) => {
                for m in &fix.measurements {
                    self.log_measurement(m);
                }
                self.log.push(
                    self.clock,
                    "localize_attempt",
                    json!({"target": id, "purpose": purpose, "ok": true, "sets_tried": fix.sets_tried,
                           "neighbors": fix.neighbor_ids, "suspect": fix.suspect}),
                );
                self.record_estimate(id, &fix.estimate, purpose, "multilateration", true);
                // a fix that never met the residual threshold cannot seed a track
                (!fix.suspect).then_some(Stamped {
                    t,
                    position: fix.estimate.position,
                })
            }
            Err(err) => {
                self.log.push(
                    self.clock,
                    "localize_attempt",
                    json!({"target": id, "purpose": purpose, "ok": false, "error": err.to_string()}),
                );
                None
            }
        }
    }

    fn track_flagged(&mut self) {
        let t = self.now();
        let ids: Vec<NodeId> = self
            .tracks
            .keys()
            .copied()
            .filter(|id| self.flagged[id] < t)
            .collect();
        for id in ids {
            let track = self.tracks.remove(&id).expect("id taken from the map");
            let next = match track {
                Track::Seeding(prev) => {
                    let purpose = if prev.is_some() { "seed" } else { "reacquire" };
                    match (prev, self.localize_flagged(id, purpose)) {
                        // fixes closer than half an epoch carry no usable velocity
                        (Some(a), Some(b)) if b.t - a.t < 0.5 * self.cfg.tracker.epoch => Track::Seeding(Some(b)),
                        (Some(a), Some(b)) => {
                            match TrackerState::new(id, a, b, self.cfg.tracker, Method::Multilateration) {
                                Ok(s) => Track::Active(Box::new(s)),
                                Err(_) => Track::Seeding(Some(b)),
                            }
                        }
                        (_, fix) => Track::Seeding(fix.or(prev)),
                    }
                }
                Track::Active(state) => self.plt_epoch(id, *state),
            };
            self.tracks.insert(id, next);
        }
    }

    fn plt_epoch(&mut self, id: NodeId, state: TrackerState) -> Track {
        let t = self.now();
        let truth = self.nodes[id as usize].position;
        let apex = state.zone.apex;
        let observer = (0..self.nodes.len() as NodeId)
            .filter(|&j| j != id && !self.is_flagged(j))
            .filter(|&j| self.radio.in_range(&self.nodes[j as usize].position, &truth))
            .filter(|&j| !self.hidden_from(id, &self.nodes[j as usize].position))
            .min_by(|&a, &b| {
                let da = self.nodes[a as usize].position.distance(&apex);
                let db = self.nodes[b as usize].position.distance(&apex);
                da.total_cmp(&db).then(a.cmp(&b))
            });
        let Some(observer) = observer else {
            self.log.push(self.clock, "track_gap", json!({"target": id}));
            return Track::Active(Box::new(state));
        };
        let obs_pos = self.nodes[observer as usize].position;
        let Ok(seen) = observe(
            (observer, obs_pos),
            (id, truth),
            RangeSource::Energy,
            &self.radio,
            &self.cfg.ranging,
            &mut |_| 0.0,
            &mut self.measure_rng,
        ) else {
            self.log.push(self.clock, "track_gap", json!({"target": id}));
            return Track::Active(Box::new(state));
        };
        self.log.push(
            self.clock,
            "observation",
            json!({"target": id, "observer": observer, "x": seen.x, "y": seen.y}),
        );
        let tx = self.cfg.radio.tx_energy;
        let exp = self.radio.path_loss_exponent;
        let (bearing, energy) = sense(&state.zone, &seen, tx, exp);
        let contour = contour_index(&state.zone, energy.max(f64::MIN_POSITIVE), tx, exp)
            .expect("energies are positive");
        let (outcome, mut state) = plt_step(state, t, bearing, contour).expect("contour comes from the zone");
        let error = outcome.estimate.map(|e| e.position.distance(&truth));
        if let Some(e) = error {
            self.errors.entry("multilateration_plt").or_default().push(e);
        }
        self.log.push(
            self.clock,
            "track",
            json!({"target": id, "observer": observer, "status": outcome.status.as_str(),
                   "x": outcome.estimate.map(|e| e.position.x), "y": outcome.estimate.map(|e| e.position.y),
                   "error": error}),
        );
        self.records.tracking.push(TrackRow {
            t,
            target_id: id,
            observer_id: observer,
            status: outcome.status.as_str(),
            est_x: outcome.estimate.map(|e| e.position.x),
            est_y: outcome.estimate.map(|e| e.position.y),
            true_x: truth.x,
            true_y: truth.y,
            error,
        });
        if let Some(e) = outcome.estimate {
            self.last_fix.insert(id, e.position);
        }
        if outcome.status == TrackStatus::Lost {
            if let Some(fix) = self.localize_flagged(id, "reacquire") {
                if state.reacquire(fix).is_err() {
                    return Track::Seeding(Some(fix));
                }
            }
        }
        Track::Active(Box::new(state))
    }

    fn finish(self) -> ScenarioOutput {
        let cfg = self.cfg;
        let mut clusters: Vec<ClusterMetrics> = (0..cfg.clusters)
            .map(|c| ClusterMetrics {
                cluster: c + 1,
                attackers: self.attackers.keys().filter(|&&a| self.cluster_of[a as usize] == c).count(),
                ra_rejects: self.ra_rejects[c],
                ..Default::default()
            })
            .collect();
        for f in &self.records.flags {
            if f.attacker {
                clusters[f.cluster].detected += 1;
            } else {
                clusters[f.cluster].false_positives += 1;
            }
        }
        let detected = clusters.iter().map(|c| c.detected).sum();
        let false_positives = clusters.iter().map(|c| c.false_positives).sum();
        let mut ra_rejects = [0; 6];
        for r in &self.ra_rejects {
            for (acc, v) in ra_rejects.iter_mut().zip(r) {
                *acc += v;
            }
        }
        let report = MetricsReport {
            seed: cfg.seed,
            duration: cfg.duration,
            nodes: self.nodes.len(),
            attackers: self.attackers.len(),
            detected,
            detection_rate: Rate::of(detected, self.attackers.len()),
            false_positives,
            false_positives_high_trust: self.false_positives_high_trust,
            clusters,
            tracking_error: self
                .errors
                .iter()
                .map(|(k, v)| (k.to_string(), ErrorStats::from_samples(v)))
                .collect(),
            elected_bcf: ErrorStats::from_samples(&self.elected_bcf),
            elections: self.epoch_stats.into_values().collect(),
            ra_rejects,
        };
        ScenarioOutput {
            report,
            records: self.records,
            log: self.log,
        }
    }
}
