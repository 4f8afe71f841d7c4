//! Full scenario with scripted attackers; prints the metrics summary and
//! writes CSV traces to a temporary directory.

use manet_track::harness::{export, run_scenario, Format, ScenarioConfig};

fn main() {
    let small = std::env::args().any(|a| a == "--small");
    let cfg = if small { ScenarioConfig::small() } else { ScenarioConfig::default() };
    let out = run_scenario(&cfg).unwrap();
    let r = &out.report;
    println!("{} nodes, {} attackers, {} detected (rate {})", r.nodes, r.attackers, r.detected, r.detection_rate);
    println!("false positives {} ({} with trust >= 0.8)", r.false_positives, r.false_positives_high_trust);
    for (method, stats) in &r.tracking_error {
        println!("{method:<20} mean {:7.3} m  p95 {:7.3} m  n={}", stats.mean, stats.p95, stats.count);
    }
    let dir = std::env::temp_dir().join("manet-track-scenario");
    for path in export(&out, Format::Csv, &dir).unwrap() {
        println!("wrote {}", path.display());
    }
}
