//! Deterministic world model: clock, node kinematics, cluster sectors and
//! an idealized radio-timing channel.

mod clock;
mod mobility;
mod radio;
mod sector;
mod trace;

use serde::{Deserialize, Serialize};

pub use clock::{EventQueue, SimClock};
pub use mobility::{advance_waypoint, relative_mobility, MobilityParams};
pub use radio::{
    energy_to_distance, exchange_packets, propagation_time, received_energy, sample_propagation_time,
    RadioModel,
};
pub use sector::{sector_of, SECTORS};
pub use trace::{Event, EventLog};

use crate::geometry::{Position, Trajectory};
use crate::trust::KeyPair;

/// Seeded randomness source used everywhere in the simulator.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds the simulator RNG from a seed.
pub fn seeded_rng(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}

pub type NodeId = u32;

/// The single role a node holds at any instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Member,
    ClusterHead,
    /// Registration authority for sector 1..=6.
    Ra(u8),
    Reference,
    Malicious,
}

impl Role {
    pub fn is_authority(&self) -> bool {
        matches!(self, Role::ClusterHead | Role::Ra(_) | Role::Reference)
    }
}

/// Full per-node state carried by the world.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub position: Position,
    pub waypoint: Position,
    /// m/s
    pub speed: f64,
    pub role: Role,
    pub residual_energy: f64,
    pub trust: f64,
    /// Smoothed misbehaviour score; higher is worse.
    pub behaviour: f64,
    pub key_pair: KeyPair,
    pub connectivity_degree: usize,
    /// Recent position samples, newest last.
    pub history: Trajectory,
}

impl NodeState {
    pub fn new(id: NodeId, position: Position, key_pair: KeyPair) -> Self {
        let mut history = Trajectory::new();
        history
            .push(0.0, position)
            .expect("empty trajectory accepts any sample");
        Self {
            id,
            position,
            waypoint: position,
            speed: 0.0,
            role: Role::Member,
            residual_energy: 1.0,
            trust: 1.0,
            behaviour: 0.0,
            key_pair,
            connectivity_degree: 0,
            history,
        }
    }

    /// Records the current position at time `t`, keeping at most `keep` samples.
    pub fn record(&mut self, t: f64, keep: usize) {
        // Out-of-order samples are a caller bug; the trajectory rejects them.
        if self.history.push(t, self.position).is_ok() {
            self.history.truncate_front(keep);
        }
    }
}
