//! Trust values, behaviour monitoring and the PKI-backed detection protocol.

mod crypto;
mod pki;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use crypto::{KeyPair, PublicKey, Signature, SignatureScheme, SimulatedScheme};
pub use pki::{
    detect_malicious, introduce, introduce_bundle, ra_gate, Certificate, DetectionReason,
    GateDecision, IntroducerReply, KeyDirectory, MaliciousAlert, RegistrationRequest, Verdict,
    VerdictKind,
};

use crate::error::{check_unit, Error, Result};
use crate::sim::NodeId;

/// Behaviour scores above this mark a node as misbehaving.
pub const MISBEHAVIOUR_THRESHOLD: f64 = 0.8;

/// Trust of `observer -> target` through one introducer:
/// `1 - (1 - v_introducer_target) ^ v_observer_introducer`.
pub fn chain_trust(v_observer_introducer: f64, v_introducer_target: f64) -> Result<f64> {
    let a = check_unit("v_observer_introducer", v_observer_introducer)?;
    let b = check_unit("v_introducer_target", v_introducer_target)?;
    Ok(1.0 - (1.0 - b).powf(a))
}

/// How several chained trust values are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Min,
    Max,
}

pub fn aggregate_paths(values: &[f64], how: Aggregation) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("no trust paths to aggregate".into()));
    }
    for v in values {
        check_unit("chained trust", *v)?;
    }
    Ok(match how {
        Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregation::Min => values.iter().copied().fold(1.0, f64::min),
        Aggregation::Max => values.iter().copied().fold(0.0, f64::max),
    })
}

/// Directed trust values plus per-subject behaviour scores.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustLedger {
    directed: BTreeMap<(NodeId, NodeId), f64>,
    reputation: BTreeMap<NodeId, f64>,
    behaviour: BTreeMap<NodeId, f64>,
    /// Used when neither a directed value nor a reputation is known.
    pub default_trust: f64,
}

impl Default for TrustLedger {
    fn default() -> Self {
        Self {
            directed: BTreeMap::new(),
            reputation: BTreeMap::new(),
            behaviour: BTreeMap::new(),
            default_trust: 1.0,
        }
    }
}

impl TrustLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_trust(&mut self, observer: NodeId, subject: NodeId, value: f64) -> Result<()> {
        self.directed
            .insert((observer, subject), check_unit("trust", value)?);
        Ok(())
    }

    /// Network-wide trust in `subject`, used where no directed value exists.
    pub fn set_reputation(&mut self, subject: NodeId, value: f64) -> Result<()> {
        self.reputation.insert(subject, check_unit("trust", value)?);
        Ok(())
    }

    pub fn trust(&self, observer: NodeId, subject: NodeId) -> f64 {
        self.directed
            .get(&(observer, subject))
            .or_else(|| self.reputation.get(&subject))
            .copied()
            .unwrap_or(self.default_trust)
    }

    pub fn behaviour(&self, subject: NodeId) -> f64 {
        self.behaviour.get(&subject).copied().unwrap_or(0.0)
    }

    pub fn is_misbehaving(&self, subject: NodeId) -> bool {
        self.behaviour(subject) > MISBEHAVIOUR_THRESHOLD
    }
}

/// Folds one epoch of misbehaviour evidence into `subject`'s score with an
/// exponentially weighted moving average and returns the new score.
pub fn update_behaviour(
    ledger: &mut TrustLedger,
    subject: NodeId,
    observation: f64,
    alpha: f64,
) -> Result<f64> {
    let obs = check_unit("observation", observation)?;
    let alpha = check_unit("alpha", alpha)?;
    let score = alpha * obs + (1.0 - alpha) * ledger.behaviour(subject);
    ledger.behaviour.insert(subject, score);
    Ok(score)
}
