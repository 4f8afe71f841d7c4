use std::collections::{BTreeMap, BTreeSet};

use manet_track::harness::{export, run_scenario, AttackerConfig, Format, ScenarioConfig};

fn small(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        ..ScenarioConfig::small()
    }
}

#[test]
fn same_seed_same_trace_and_metrics() {
    let a = run_scenario(&small(11)).unwrap();
    let b = run_scenario(&small(11)).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(
        serde_json::to_string(&a.report).unwrap(),
        serde_json::to_string(&b.report).unwrap()
    );
}

#[test]
fn different_seeds_diverge() {
    let a = run_scenario(&small(1)).unwrap();
    let b = run_scenario(&small(2)).unwrap();
    assert_ne!(a.log, b.log);
}

#[test]
fn exports_are_byte_stable() {
    let out = run_scenario(&small(5)).unwrap();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for format in [Format::Csv, Format::Ndjson, Format::Plotdata] {
        let p1 = export(&out, format, d1.path()).unwrap();
        let p2 = export(&out, format, d2.path()).unwrap();
        for (x, y) in p1.iter().zip(&p2) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
        }
    }
}

#[test]
fn estimates_and_tracks_follow_their_evidence() {
    for seed in [3, 4] {
        let out = run_scenario(&small(seed)).unwrap();
        let mut measured: BTreeSet<u64> = BTreeSet::new();
        let mut observed: BTreeSet<u64> = BTreeSet::new();
        let mut estimates = 0;
        for e in out.log.events() {
            let target = e.payload.get("target").and_then(|v| v.as_u64());
            match e.kind.as_str() {
                "measurement" => {
                    measured.insert(target.unwrap());
                }
                "observation" => {
                    observed.insert(target.unwrap());
                }
                "estimate" => {
                    estimates += 1;
                    assert!(measured.contains(&target.unwrap()), "estimate before measurement: {e:?}");
                }
                "track" => {
                    assert!(observed.contains(&target.unwrap()), "track before observation: {e:?}");
                }
                _ => {}
            }
        }
        assert!(estimates > 0);
    }
}

#[test]
fn every_flag_has_exactly_one_flagged_localization() {
    let out = run_scenario(&small(9)).unwrap();
    assert!(!out.records.flags.is_empty());
    let mut attempts: BTreeMap<u64, usize> = BTreeMap::new();
    for e in out.log.of_kind("localize_attempt") {
        if e.payload["purpose"] == "flagged" {
            *attempts.entry(e.payload["target"].as_u64().unwrap()).or_default() += 1;
        }
    }
    for f in &out.records.flags {
        assert_eq!(attempts.get(&(f.node_id as u64)), Some(&1), "node {}", f.node_id);
    }
    assert_eq!(attempts.len(), out.records.flags.len());
}

#[test]
fn zero_duration_runs_only_the_first_elections() {
    let cfg = ScenarioConfig {
        duration: 0.0,
        ..small(1)
    };
    let out = run_scenario(&cfg).unwrap();
    assert_eq!(out.report.elections.len(), 1);
    assert_eq!(out.report.elections[0].epoch, 0);
    assert!(!out.records.elections.is_empty());
    assert!(out.records.elections.iter().all(|r| r.epoch == 0));
    assert!(out.records.measurements.is_empty());
    assert!(out.records.tracking.is_empty());
    assert!(out.records.detections.is_empty());
    assert!(out.records.flags.is_empty());
}

#[test]
fn no_attackers_reports_not_applicable() {
    let cfg = ScenarioConfig {
        attackers: AttackerConfig::none(),
        ..small(2)
    };
    let out = run_scenario(&cfg).unwrap();
    assert_eq!(out.report.attackers, 0);
    let json = serde_json::to_value(&out.report).unwrap();
    assert_eq!(json["detection_rate"], "N/A");
}

#[test]
fn honest_high_trust_nodes_are_not_flagged() {
    for seed in 1..=3 {
        let out = run_scenario(&small(seed)).unwrap();
        assert_eq!(out.report.false_positives_high_trust, 0);
        for f in out.records.flags.iter().filter(|f| !f.attacker) {
            assert!(f.trust_at_flag < 0.8, "{f:?}");
        }
    }
}

#[test]
fn invalid_config_is_rejected() {
    for text in [r#"{"clusters": 0}"#, r#"{"nope": 1}"#, r#"{"attackers": {"fraction": 1.5}}"#] {
        let err = ScenarioConfig::from_json(text).unwrap_err();
        assert!(matches!(err, manet_track::Error::InvalidConfig(_)), "{text}: {err:?}");
    }
}
