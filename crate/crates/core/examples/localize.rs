//! Triangulation from three references and multilateration from four
//! neighbours, with and without ranging noise.

use manet_track::localization::{multilaterate, triangulate, ReferenceFix};
use manet_track::sim::seeded_rng;
use manet_track::Position;
use rand_distr::{Distribution, Normal};

fn fixes(anchors: &[Position], target: Position, sigma: f64, seed: u64) -> Vec<ReferenceFix> {
    let mut rng = seeded_rng(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    anchors
        .iter()
        .map(|a| ReferenceFix::new(*a, a.distance(&target) + noise.sample(&mut rng)))
        .collect()
}

fn main() {
    let target = Position::new(42.0, -17.0);
    let refs = [Position::new(0.0, 0.0), Position::new(150.0, 10.0), Position::new(60.0, 140.0)];
    let neighbours = [
        Position::new(20.0, -40.0),
        Position::new(70.0, -30.0),
        Position::new(50.0, 20.0),
        Position::new(10.0, 5.0),
    ];
    for sigma in [0.0, 1.5] {
        let a = triangulate(&fixes(&refs, target, sigma, 1)).unwrap();
        let b = multilaterate(&fixes(&neighbours, target, sigma, 2)).unwrap();
        println!(
            "σ = {sigma} m: triangulation error {:.3} m (residual {:.3}), multilateration error {:.3} m (residual {:.3})",
            a.position.distance(&target),
            a.residual,
            b.position.distance(&target),
            b.residual
        );
    }
}
