use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{aggregate_paths, chain_trust, Aggregation, KeyPair, PublicKey, Signature, SignatureScheme, TrustLedger, MISBEHAVIOUR_THRESHOLD};
use crate::error::{check_unit, Error, Result};
use crate::sim::{NodeId, NodeState, Role};

/// Registered public key per node: the cluster's PKI directory.
pub type KeyDirectory = BTreeMap<NodeId, PublicKey>;

/// Public-key certificate issued by an RA (or the CA).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub subject_id: NodeId,
    pub subject_public_key: PublicKey,
    pub issuer_id: NodeId,
    pub timestamp: f64,
    pub signature: Signature,
}

impl Certificate {
    fn signed_bytes(subject_id: NodeId, key: &PublicKey, issuer_id: NodeId, timestamp: f64) -> Vec<u8> {
        let mut m = Vec::with_capacity(4 + 32 + 4 + 8 + 4);
        m.extend_from_slice(b"cert");
        m.extend_from_slice(&subject_id.to_le_bytes());
        m.extend_from_slice(&key.0);
        m.extend_from_slice(&issuer_id.to_le_bytes());
        m.extend_from_slice(&timestamp.to_le_bytes());
        m
    }

    pub fn issue(
        scheme: &dyn SignatureScheme,
        issuer_id: NodeId,
        issuer_key: &KeyPair,
        subject_id: NodeId,
        subject_public_key: PublicKey,
        timestamp: f64,
    ) -> Self {
        let msg = Self::signed_bytes(subject_id, &subject_public_key, issuer_id, timestamp);
        Self {
            subject_id,
            subject_public_key,
            issuer_id,
            timestamp,
            signature: scheme.sign(issuer_key, &msg),
        }
    }

    /// Valid iff the issuer's signature checks out and the certificate is
    /// not dated in the future.
    pub fn verify(&self, scheme: &dyn SignatureScheme, issuer_public: &PublicKey, now: f64) -> bool {
        let msg = Self::signed_bytes(
            self.subject_id,
            &self.subject_public_key,
            self.issuer_id,
            self.timestamp,
        );
        self.timestamp <= now && scheme.verify(issuer_public, &msg, &self.signature)
    }
}

/// Signed answer of an introducer about a target's key and trust.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntroducerReply {
    pub introducer_id: NodeId,
    pub target_id: NodeId,
    pub target_public_key: PublicKey,
    pub trust_value: f64,
    pub signature: Signature,
}

impl IntroducerReply {
    fn signed_bytes(&self) -> Vec<u8> {
        let mut m = Vec::with_capacity(64);
        m.extend_from_slice(b"intro");
        m.extend_from_slice(&self.introducer_id.to_le_bytes());
        m.extend_from_slice(&self.target_id.to_le_bytes());
        m.extend_from_slice(&self.target_public_key.0);
        m.extend_from_slice(&self.trust_value.to_le_bytes());
        m
    }

    pub fn verify(&self, scheme: &dyn SignatureScheme, introducer_public: &PublicKey) -> bool {
        (0.0..=1.0).contains(&self.trust_value)
            && scheme.verify(introducer_public, &self.signed_bytes(), &self.signature)
    }
}

/// An RA answers a key request about `target_id`.
pub fn introduce(
    scheme: &dyn SignatureScheme,
    ra: &NodeState,
    requester_id: NodeId,
    target_id: NodeId,
    ledger: &TrustLedger,
    directory: &KeyDirectory,
) -> Result<IntroducerReply> {
    let _ = requester_id;
    if !matches!(ra.role, Role::Ra(_)) {
        return Err(Error::WrongRole(ra.id));
    }
    let key = directory
        .get(&target_id)
        .ok_or(Error::UnknownNode(target_id))?;
    let mut reply = IntroducerReply {
        introducer_id: ra.id,
        target_id,
        target_public_key: *key,
        trust_value: check_unit("trust", ledger.trust(ra.id, target_id))?,
        signature: Signature([0; 32]),
    };
    reply.signature = scheme.sign(&ra.key_pair, &reply.signed_bytes());
    Ok(reply)
}

/// Replies of every RA involved when requester and target sit in
/// different sectors, concatenated in the order given.
pub fn introduce_bundle(
    scheme: &dyn SignatureScheme,
    ras: &[&NodeState],
    requester_id: NodeId,
    target_id: NodeId,
    ledger: &TrustLedger,
    directory: &KeyDirectory,
) -> Result<Vec<IntroducerReply>> {
    ras.iter()
        .map(|ra| introduce(scheme, ra, requester_id, target_id, ledger, directory))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    Honest,
    Malicious,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionReason {
    LowTrust,
    KeyDispute,
    ForgedCertificate,
    Misbehaviour,
}

impl DetectionReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectionReason::LowTrust => "low trust",
            DetectionReason::KeyDispute => "key dispute",
            DetectionReason::ForgedCertificate => "forged certificate",
            DetectionReason::Misbehaviour => "misbehaviour",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub reason: Option<DetectionReason>,
    pub aggregate_trust: f64,
    pub votes_for: usize,
    pub votes_total: usize,
}

/// Decides whether `target_id` is malicious from introducer replies and
/// neighbour votes on its key.
///
/// Replies that fail verification are discarded. The surviving replies'
/// trust values are chained through the requester's trust in each
/// introducer and aggregated; below `trust_threshold` the target is
/// malicious. Otherwise a strict majority of votes must agree with the
/// introduced key.
#[allow(clippy::too_many_arguments)]
pub fn detect_malicious(
    scheme: &dyn SignatureScheme,
    requester_id: NodeId,
    target_id: NodeId,
    replies: &[IntroducerReply],
    votes: &[(NodeId, PublicKey)],
    trust_threshold: f64,
    ledger: &TrustLedger,
    directory: &KeyDirectory,
    aggregation: Aggregation,
) -> Result<Verdict> {
    let mut valid: Vec<&IntroducerReply> = replies
        .iter()
        .filter(|r| r.target_id == target_id)
        .filter(|r| {
            directory
                .get(&r.introducer_id)
                .is_some_and(|pk| r.verify(scheme, pk))
        })
        .collect();
    if valid.is_empty() {
        return Err(Error::NoValidReplies);
    }
    if votes.is_empty() {
        return Err(Error::NoVotes);
    }
    valid.sort_by_key(|r| r.introducer_id);

    let chained = valid
        .iter()
        .map(|r| chain_trust(ledger.trust(requester_id, r.introducer_id), r.trust_value))
        .collect::<Result<Vec<_>>>()?;
    let aggregate_trust = aggregate_paths(&chained, aggregation)?;
    let key = valid[0].target_public_key;
    let votes_for = votes.iter().filter(|(_, k)| *k == key).count();
    let votes_total = votes.len();

    let (kind, reason) = if aggregate_trust < trust_threshold {
        (VerdictKind::Malicious, Some(DetectionReason::LowTrust))
    } else if 2 * votes_for > votes_total {
        (VerdictKind::Honest, None)
    } else {
        (VerdictKind::Malicious, Some(DetectionReason::KeyDispute))
    };
    Ok(Verdict {
        kind,
        reason,
        aggregate_trust,
        votes_for,
        votes_total,
    })
}

/// A node asking its sector RA for access to the CA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationRequest {
    pub node_id: NodeId,
    pub presented_key: PublicKey,
    pub certificate: Certificate,
}

/// Broadcast by an RA to its sector after rejecting a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaliciousAlert {
    pub ra_id: NodeId,
    pub suspect_id: NodeId,
    pub reason: DetectionReason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateDecision {
    ForwardToCa,
    Reject(MaliciousAlert),
}

/// RA-side admission check: certificate, trust and behaviour must all pass.
pub fn ra_gate(
    scheme: &dyn SignatureScheme,
    ra: &NodeState,
    request: &RegistrationRequest,
    ledger: &TrustLedger,
    directory: &KeyDirectory,
    trust_threshold: f64,
    now: f64,
) -> GateDecision {
    let cert = &request.certificate;
    let cert_ok = cert.subject_id == request.node_id
        && cert.subject_public_key == request.presented_key
        && directory
            .get(&cert.issuer_id)
            .is_some_and(|pk| cert.verify(scheme, pk, now));
    let reason = if !cert_ok {
        Some(DetectionReason::ForgedCertificate)
    } else if ledger.trust(ra.id, request.node_id) < trust_threshold {
        Some(DetectionReason::LowTrust)
    } else if ledger.behaviour(request.node_id) > MISBEHAVIOUR_THRESHOLD {
        Some(DetectionReason::Misbehaviour)
    } else {
        None
    };
    match reason {
        None => GateDecision::ForwardToCa,
        Some(reason) => GateDecision::Reject(MaliciousAlert {
            ra_id: ra.id,
            suspect_id: request.node_id,
            reason,
        }),
    }
}
