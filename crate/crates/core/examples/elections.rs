//! Runs only the initial elections of a default scenario and prints who was
//! elected in each cluster.

use manet_track::harness::{run_scenario, ScenarioConfig};

fn main() {
    let cfg = ScenarioConfig { duration: 0.0, ..ScenarioConfig::default() };
    let out = run_scenario(&cfg).unwrap();
    for row in &out.records.elections {
        println!(
            "cluster {} {:<9} sector {:?}: {} (score {:.3?}, {} candidates, {} dropped)",
            row.cluster, row.kind, row.sector, row.elected, row.score, row.candidates, row.dropped
        );
    }
    println!("{:?}", out.report.elections[0]);
}
