//! Tracking error against target speed on straight trajectories.

use manet_track::harness::{speed_study, ScenarioConfig};

fn main() {
    let speeds = [10.0, 30.0, 50.0, 100.0];
    let seeds: Vec<u64> = (1..=10).collect();
    let points = speed_study(&ScenarioConfig::default(), &speeds, &seeds).unwrap();
    for v in speeds {
        let errs: Vec<f64> = points.iter().filter(|p| p.speed == v).map(|p| p.mean_error).collect();
        println!("{v:>5} m/s: mean error {:.3} m", errs.iter().sum::<f64>() / errs.len() as f64);
    }
}
