//! Ranges one target from one reference with management packets, first
//! honestly and then against a node that replays stale ToD stamps.

use manet_track::harness::ScenarioConfig;
use manet_track::ranging::{accept_range, measure_range};
use manet_track::sim::seeded_rng;
use manet_track::Position;

fn main() {
    let cfg = ScenarioConfig::default();
    let radio = cfg.radio.model();
    let mut rng = seeded_rng(3);
    let reference = (1, Position::new(0.0, 0.0));
    let target = (2, Position::new(120.0, 90.0));
    println!("true distance {:.2} m", reference.1.distance(&target.1));

    let honest = measure_range(0.0, reference, target, &radio, &cfg.ranging, &mut |_| 0.0, &mut rng);
    println!(
        "honest:   readings {:.2?} -> {:?} {:.2?} m after {} attempt(s), AoA {:.1?}°",
        honest.readings, honest.status, honest.distance, honest.attempts, honest.aoa
    );

    let mut replay = |rng: &mut manet_track::sim::SimRng| {
        use rand::Rng;
        if rng.random::<bool>() { 200e-9 * rng.random::<f64>() } else { 0.0 }
    };
    let forged = measure_range(1.0, reference, target, &radio, &cfg.ranging, &mut replay, &mut rng);
    println!(
        "replayed: readings {:.2?} -> {:?} {:.2?} m after {} attempt(s)",
        forged.readings, forged.status, forged.distance, forged.attempts
    );

    for readings in [[100.0, 100.5, 101.0], [100.0, 101.5, 140.0], [100.0, 120.0, 140.0]] {
        let d = accept_range(readings, cfg.ranging.threshold);
        println!("accept {readings:?} -> {:?} {:?}", d.status, d.distance);
    }
}
