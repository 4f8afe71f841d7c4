//! Paired tracker study: the same trajectories tracked from the elected
//! reference triple and from the four nearest neighbours.

use manet_track::harness::{compare_trackers, ScenarioConfig};

fn main() {
    let cfg = ScenarioConfig::default();
    let (mut a, mut b, mut wins) = (0.0, 0.0, 0);
    for seed in 1..=20 {
        let s = compare_trackers(&cfg, seed).unwrap();
        println!(
            "trajectory {seed:>2}: triangulation {:5.2} m  multilateration {:5.2} m  turns at {:?}",
            s.mean_triangulation, s.mean_multilateration, s.turns
        );
        a += s.mean_triangulation;
        b += s.mean_multilateration;
        wins += usize::from(s.mean_multilateration < s.mean_triangulation);
    }
    println!("multilateration better on {wins}/20, ratio of means {:.3}", b / a);
}
