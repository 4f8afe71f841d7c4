//! Key introduction through two RAs and the resulting verdicts for an
//! honest node and for one presenting a forged key.

use manet_track::sim::{NodeState, Role};
use manet_track::trust::{detect_malicious, introduce_bundle, KeyDirectory};
use manet_track::trust::{aggregate_paths, chain_trust, Aggregation, KeyPair, SignatureScheme, SimulatedScheme, TrustLedger};
use manet_track::Position;

fn main() {
    println!("chain 0.9 through 0.8 -> {:.3}", chain_trust(0.9, 0.8).unwrap());
    println!("mean of paths [0.72, 0.4] -> {:.3}", aggregate_paths(&[0.72, 0.4], Aggregation::Mean).unwrap());

    let mut scheme = SimulatedScheme::new();
    let mut directory = KeyDirectory::new();
    let mut nodes = Vec::new();
    for id in 0..8u32 {
        let keys = KeyPair::from_seed(100 + id as u64);
        scheme.register(&keys);
        directory.insert(id, keys.public);
        nodes.push(NodeState::new(id, Position::new(id as f64 * 10.0, 0.0), keys));
    }
    nodes[1].role = Role::Ra(1);
    nodes[2].role = Role::Ra(2);
    let mut ledger = TrustLedger::new();
    ledger.set_trust(0, 1, 0.9).unwrap();
    ledger.set_trust(0, 2, 0.85).unwrap();
    ledger.set_trust(1, 6, 0.95).unwrap();
    ledger.set_trust(2, 6, 0.9).unwrap();
    ledger.set_trust(1, 7, 0.9).unwrap();
    ledger.set_trust(2, 7, 0.9).unwrap();

    let forged = KeyPair::from_seed(999);
    let ras = [&nodes[1], &nodes[2]];
    for (target, presented) in [(6u32, directory[&6]), (7u32, forged.public)] {
        let replies = introduce_bundle(&scheme, &ras, 0, target, &ledger, &directory).unwrap();
        let votes: Vec<_> = (3..6).map(|v| (v, presented)).collect();
        let verdict = detect_malicious(&scheme, 0, target, &replies, &votes, 0.5, &ledger, &directory, Aggregation::Mean).unwrap();
        println!(
            "node {target}: {:?} ({}), trust {:.3}, votes {}/{}",
            verdict.kind,
            verdict.reason.map_or("-", |r| r.as_str()),
            verdict.aggregate_trust,
            verdict.votes_for,
            verdict.votes_total
        );
    }
}
