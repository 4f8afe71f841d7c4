//! Follows a target around a sharp turn with the contour-zone tracker and
//! prints one line per epoch.

use manet_track::geometry::Stamped;
use manet_track::harness::replay;
use manet_track::tracking::TrackerParams;
use manet_track::Position;

fn main() {
    let mut path: Vec<Stamped> = (0..15)
        .map(|i| Stamped { t: i as f64, position: Position::new(8.0 * i as f64, 0.0) })
        .collect();
    let corner = path.last().unwrap().position;
    path.extend((1..15).map(|i| Stamped {
        t: 14.0 + i as f64,
        position: corner + Position::polar(8.0 * i as f64, 100.0),
    }));

    let rows = replay(&path, TrackerParams::default(), 1.0, 2.0).unwrap();
    for r in rows {
        match r.error {
            Some(e) => println!("t={:>4.1} {:<9} error {:6.2} m", r.t, r.status, e),
            None => println!("t={:>4.1} {:<9} (re-acquiring)", r.t, r.status),
        }
    }
}
