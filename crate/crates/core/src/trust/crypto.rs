//! Signing identities behind a pluggable scheme.
//!
//! [`SimulatedScheme`] is a deterministic keyed-hash stand-in: a signature
//! is `SHA-256(secret || message)` and verification looks the secret up
//! from the public key. It gives real verify/forge semantics (nobody
//! without the secret can produce a valid tag) while keeping every run
//! reproducible.

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; 32]);

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SecretKey([u8; 32]);

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; 32]);

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", short_hex(&self.0))
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", short_hex(&self.0))
    }
}

fn short_hex(b: &[u8]) -> String {
    b[..4].iter().map(|x| format!("{x:02x}")).collect()
}

impl PublicKey {
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|x| format!("{x:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyPair {
    pub public: PublicKey,
    secret: SecretKey,
}

impl KeyPair {
    /// Deterministic key pair derived from `seed`.
    pub fn from_seed(seed: u64) -> Self {
        let secret: [u8; 32] = Sha256::new()
            .chain_update(b"manet-track/secret")
            .chain_update(seed.to_le_bytes())
            .finalize()
            .into();
        let public: [u8; 32] = Sha256::new()
            .chain_update(b"manet-track/public")
            .chain_update(secret)
            .finalize()
            .into();
        Self {
            public: PublicKey(public),
            secret: SecretKey(secret),
        }
    }
}

/// Sign/verify abstraction used by certificates and introducer replies.
pub trait SignatureScheme {
    /// Makes `key` verifiable by this scheme.
    fn register(&mut self, key: &KeyPair);
    fn sign(&self, key: &KeyPair, message: &[u8]) -> Signature;
    fn verify(&self, public: &PublicKey, message: &[u8], signature: &Signature) -> bool;
}

#[derive(Debug, Clone, Default)]
pub struct SimulatedScheme {
    secrets: BTreeMap<PublicKey, [u8; 32]>,
}

impl SimulatedScheme {
    pub fn new() -> Self {
        Self::default()
    }

    fn tag(secret: &[u8; 32], message: &[u8]) -> Signature {
        Signature(
            Sha256::new()
                .chain_update(secret)
                .chain_update(message)
                .finalize()
                .into(),
        )
    }
}

impl SignatureScheme for SimulatedScheme {
    fn register(&mut self, key: &KeyPair) {
        self.secrets.insert(key.public, key.secret.0);
    }

    fn sign(&self, key: &KeyPair, message: &[u8]) -> Signature {
        Self::tag(&key.secret.0, message)
    }

    fn verify(&self, public: &PublicKey, message: &[u8], signature: &Signature) -> bool {
        match self.secrets.get(public) {
            Some(secret) => Self::tag(secret, message) == *signature,
            None => false,
        }
    }
}
