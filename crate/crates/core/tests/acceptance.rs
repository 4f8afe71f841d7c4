//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use manet_track::elections::{bcf, elect_cluster_head, elect_ras, ocf, CaCandidate, CriteriaWeights, RaCandidate};
use manet_track::harness::{compare_on, compare_trackers, run_scenario, speed_study, ScenarioConfig, Shape};
use manet_track::localization::{multilaterate, triangulate, ReferenceFix};
use manet_track::ranging::{accept_range, RangeStatus};
use manet_track::sim::seeded_rng;
use manet_track::tracking::TrackingZone;
use manet_track::trust::chain_trust;
use manet_track::Position;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn triangle_area(a: &Position, b: &Position, c: &Position) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs()
}

fn random_point(rng: &mut impl Rng, half: f64) -> Position {
    Position::new(rng.random_range(-half..half), rng.random_range(-half..half))
}

fn exact_fixes(anchors: &[Position], target: &Position) -> Vec<ReferenceFix> {
    anchors.iter().map(|a| ReferenceFix::new(*a, a.distance(target))).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(0xACCE_0001);
    let (mut worst_tri, mut worst_mul) = (0.0f64, 0.0f64);
    let mut failures = 0;
    let mut done = 0;
    while done < 1000 {
        let anchors: Vec<Position> = (0..4).map(|_| random_point(&mut rng, 300.0)).collect();
        let target = random_point(&mut rng, 300.0);
        let tri = &anchors[..3];
        let well_spread = triangle_area(&tri[0], &tri[1], &tri[2]) > 5_000.0
            && triangle_area(&anchors[1], &anchors[2], &anchors[3]) > 5_000.0
            && anchors.iter().all(|a| a.distance(&target) > 1.0);
        if !well_spread {
            continue;
        }
        done += 1;
        match triangulate(&exact_fixes(tri, &target)) {
            Ok(e) => worst_tri = worst_tri.max(e.position.distance(&target)),
            Err(_) => failures += 1,
        }
        match multilaterate(&exact_fixes(&anchors, &target)) {
            Ok(e) => worst_mul = worst_mul.max(e.position.distance(&target)),
            Err(_) => failures += 1,
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && worst_tri <= 1e-6 && worst_mul <= 1e-6 && within(elapsed, 5.0),
        format!(
            "1000 geometries, worst error triangulation {worst_tri:.2e} m, multilateration {worst_mul:.2e} m, {failures} solver failures, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

/// One-sided exact sign test: P(X >= wins) for X ~ Binomial(n, 1/2).
fn sign_test_p(wins: u64, n: u64) -> f64 {
    let choose = |n: u64, k: u64| (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64);
    (wins..=n).map(|k| choose(n, k)).sum::<f64>() / 2f64.powi(n as i32)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let cfg = ScenarioConfig::default();
    let series: Vec<_> = (1..=20).map(|s| compare_trackers(&cfg, s).expect("paired run")).collect();
    let elapsed = start.elapsed();
    let wins = series.iter().filter(|s| s.mean_multilateration < s.mean_triangulation).count() as u64;
    let a: f64 = series.iter().map(|s| s.mean_triangulation).sum::<f64>() / 20.0;
    let b: f64 = series.iter().map(|s| s.mean_multilateration).sum::<f64>() / 20.0;
    let p = sign_test_p(wins, 20);
    outcome(
        b < a && p < 0.05 && b / a <= 0.7 && within(elapsed, 60.0),
        format!(
            "means triangulation {a:.3} m, multilateration {b:.3} m, ratio {:.3}, wins {wins}/20, sign-test p {p:.2e}, {:.2} s",
            b / a,
            elapsed.as_secs_f64()
        ),
    )
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_3() -> Outcome {
    let cfg = ScenarioConfig::default();
    let turn_at = 30;
    let mut ratios = [Vec::new(), Vec::new()];
    for seed in 1..=10 {
        let s = compare_on(&cfg, Shape::Turn90 { turn_at }, seed).expect("turn run");
        let (med_a, med_b) = s.straight_median(2);
        let (peak_a, peak_b) = s.peak_after(turn_at, 3);
        ratios[0].push(peak_a / med_a);
        ratios[1].push(peak_b / med_b);
    }
    let spiked = |r: &Vec<f64>| r.iter().filter(|x| **x > 2.0).count();
    let (na, nb) = (spiked(&ratios[0]), spiked(&ratios[1]));
    let (ma, mb) = (median(&mut ratios[0].clone()), median(&mut ratios[1].clone()));
    outcome(
        ma > 2.0 && mb > 2.0 && na >= 8 && nb >= 8,
        format!(
            "turn peak / straight median over 10 scripted turns: triangulation median {ma:.2} ({na}/10 above 2), multilateration median {mb:.2} ({nb}/10 above 2)"
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = seeded_rng(0xACCE_0004);
    let (mut area_dev, mut radius_dev) = (0.0f64, 0.0f64);
    for n in 1..=100 {
        let r1 = rng.random_range(0.5..50.0);
        let zone = TrackingZone::new(Position::ORIGIN, 0.0, r1, n, 45.0).expect("valid zone");
        let a1 = zone.annulus_area(1);
        for k in 1..=n {
            area_dev = area_dev.max((zone.annulus_area(k) - a1).abs() / a1);
            let expected = r1 * (k as f64).sqrt();
            radius_dev = radius_dev.max((zone.radii[k - 1] - expected).abs() / expected);
        }
    }
    outcome(
        area_dev <= 1e-9 && radius_dev <= 1e-12,
        format!("n = 1..=100: max annulus-area deviation {area_dev:.2e}, max radius deviation {radius_dev:.2e}"),
    )
}

fn criterion_5() -> Outcome {
    let grid: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
    let mut violations = 0;
    for (i, &a) in grid.iter().enumerate() {
        for (j, &b) in grid.iter().enumerate() {
            let v = chain_trust(a, b).expect("unit inputs");
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                violations += 1;
            }
            if i > 0 && chain_trust(grid[i - 1], b).unwrap() > v + 1e-12 {
                violations += 1;
            }
            if j > 0 && chain_trust(a, grid[j - 1]).unwrap() > v + 1e-12 {
                violations += 1;
            }
        }
        if (chain_trust(1.0, a).unwrap() - a).abs() > 1e-12 || chain_trust(a, 0.0).unwrap().abs() > 1e-12 {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("100x100 grid: {violations} violations of range, monotonicity or identities"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (mut attackers, mut detected, mut high_fp) = (0, 0, 0);
    let mut worst = 1.0f64;
    for seed in 1..=10 {
        let cfg = ScenarioConfig {
            seed,
            ..ScenarioConfig::default()
        };
        let r = run_scenario(&cfg).expect("scenario").report;
        attackers += r.attackers;
        detected += r.detected;
        high_fp += r.false_positives_high_trust;
        worst = worst.min(r.detected as f64 / r.attackers as f64);
    }
    let elapsed = start.elapsed();
    let rate = detected as f64 / attackers as f64;
    outcome(
        rate >= 0.90 && high_fp == 0 && within(elapsed, 120.0),
        format!(
            "10 seeds: {detected}/{attackers} attackers detected (rate {rate:.3}, worst seed {worst:.3}), {high_fp} high-trust false positives, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = seeded_rng(0xACCE_0007);
    let mut failures = Vec::new();
    let (ow, bw) = (CriteriaWeights::OCF_DEFAULT, CriteriaWeights::BCF_DEFAULT);
    if ow.as_array() != [0.46, 0.22, 0.22, 0.10] || bw.as_array() != [0.44, 0.23, 0.23, 0.10] {
        failures.push("default weights");
    }
    let unit4 = |rng: &mut rand_chacha::ChaCha8Rng| -> [f64; 4] { std::array::from_fn(|_| rng.random_range(0.0..=1.0)) };
    let mut linear_dev = 0.0f64;
    for _ in 0..1000 {
        let (x, y) = (unit4(&mut rng), unit4(&mut rng));
        let alpha: f64 = rng.random_range(0.0..=1.0);
        let mix: [f64; 4] = std::array::from_fn(|i| alpha * x[i] + (1.0 - alpha) * y[i]);
        for (f, w) in [(ocf as fn(_, &_) -> _, &ow), (bcf, &bw)] {
            let lhs = f(mix, w).unwrap();
            let rhs = alpha * f(x, w).unwrap() + (1.0 - alpha) * f(y, w).unwrap();
            linear_dev = linear_dev.max((lhs - rhs).abs());
        }
    }
    if linear_dev > 1e-12 {
        failures.push("linearity");
    }
    for _ in 0..200 {
        let mut cands: Vec<RaCandidate> = (0..12)
            .map(|id| RaCandidate {
                id,
                sector: rng.random_range(1..=6),
                metrics: std::array::from_fn(|_| rng.random_range(0.0..=0.5)),
            })
            .collect();
        let base = elect_ras(&cands, &ow).unwrap().elected;
        let shift: f64 = rng.random_range(0.0..=0.5);
        let shifted: Vec<RaCandidate> = cands
            .iter()
            .map(|c| RaCandidate {
                metrics: c.metrics.map(|m| m + shift),
                ..*c
            })
            .collect();
        let ids = |e: &std::collections::BTreeMap<u8, (u32, f64)>| e.iter().map(|(k, v)| (*k, v.0)).collect::<Vec<_>>();
        if ids(&elect_ras(&shifted, &ow).unwrap().elected) != ids(&base) {
            failures.push("argmax under common shift");
        }
        cands.shuffle(&mut rng);
        if ids(&elect_ras(&cands, &ow).unwrap().elected) != ids(&base) {
            failures.push("argmax under reordering");
        }

        let mut cas: Vec<CaCandidate> = (0..15)
            .map(|id| CaCandidate {
                id,
                mobility: rng.random_range(0..4) as f64,
                degree: rng.random_range(0..5),
                hop_count: Some(rng.random_range(1..6)),
            })
            .collect();
        let first = elect_cluster_head(&cas, 4).map(|e| e.elected);
        cas.shuffle(&mut rng);
        if elect_cluster_head(&cas, 4).map(|e| e.elected) != first {
            failures.push("CA order invariance");
        }
    }
    for bad in [[0.2, 0.3, 0.3, 0.2], [0.4, 0.3, 0.2, 0.1], [0.5, 0.2, 0.2, 0.2], [0.25, 0.25, 0.25, 0.25]] {
        if CriteriaWeights::new(bad).is_ok() {
            failures.push("ordering violation accepted");
        }
    }
    failures.dedup();
    outcome(
        failures.is_empty(),
        format!(
            "defaults, linearity (max deviation {linear_dev:.1e}), RA argmax invariance, CA order invariance, weight ordering: {}",
            if failures.is_empty() { "all hold".to_string() } else { failures.join(", ") }
        ),
    )
}

fn criterion_8() -> Outcome {
    let cases = [
        ([100.0, 100.5, 101.0], RangeStatus::Accepted, Some(100.5)),
        ([100.0, 101.5, 140.0], RangeStatus::PartialAccept, Some(100.75)),
        ([140.0, 100.0, 101.5], RangeStatus::PartialAccept, Some(100.75)),
        ([100.0, 120.0, 140.0], RangeStatus::Rejected, None),
        ([50.0, 52.0, 54.0], RangeStatus::Accepted, Some(52.0)),
    ];
    let mut bad = 0;
    for (readings, status, distance) in cases {
        let d = accept_range(readings, 2.0);
        let dist_ok = match (d.distance, distance) {
            (Some(x), Some(y)) => (x - y).abs() < 1e-12,
            (None, None) => true,
            _ => false,
        };
        if d.status != status || !dist_ok {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("all-accept, 2-of-3 and reject branches at 2 m: {bad} mismatches"))
}

fn files_identical(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = std::fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    names.sort();
    for name in &names {
        let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(name)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{} differs", name.to_string_lossy()));
        }
    }
    Ok(names.len())
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().expect("temp dir");
    let bin = env!("CARGO_BIN_EXE_manet-track");
    let run = |out: &Path, format: &str| {
        Command::new(bin)
            .args(["run", "--small", "--seed", "7", "--format", format, "--out"])
            .arg(out)
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    };
    let mut compared = 0;
    let mut problem = None;
    for format in ["csv", "ndjson"] {
        let (a, b) = (dir.path().join(format!("{format}-a")), dir.path().join(format!("{format}-b")));
        if !(run(&a, format) && run(&b, format)) {
            problem = Some(format!("{format} run failed"));
            break;
        }
        match files_identical(&a, &b) {
            Ok(n) => compared += n,
            Err(e) => {
                problem = Some(e);
                break;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        problem.is_none() && within(elapsed, 10.0),
        format!(
            "--small seed 7 twice: {compared} files compared, {}, {:.2} s",
            problem.unwrap_or_else(|| "byte-identical".into()),
            elapsed.as_secs_f64()
        ),
    )
}

/// Ranks with ties sharing their average rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn criterion_10() -> Outcome {
    let speeds = [10.0, 30.0, 50.0, 100.0];
    let seeds: Vec<u64> = (1..=10).collect();
    let points = speed_study(&ScenarioConfig::default(), &speeds, &seeds).expect("speed study");
    let xs: Vec<f64> = points.iter().map(|p| p.speed).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_error).collect();
    let rho = pearson(&ranks(&xs), &ranks(&ys));
    let means: Vec<f64> = speeds
        .iter()
        .map(|v| {
            let e: Vec<f64> = points.iter().filter(|p| p.speed == *v).map(|p| p.mean_error).collect();
            e.iter().sum::<f64>() / e.len() as f64
        })
        .collect();
    let monotone = means.windows(2).all(|w| w[1] >= w[0]);
    outcome(
        monotone && rho > 0.9,
        format!("mean error by speed {means:.3?} m, Spearman rho {rho:.3} over {} runs", points.len()),
    )
}

fn main() {
    // `cargo test` passes harness flags; a name filter selects criteria.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [Criterion; 10] = [
        ("noiseless localization exactness", criterion_1),
        ("tracker ordering", criterion_2),
        ("sharp-turn error spikes", criterion_3),
        ("equal-area contours", criterion_4),
        ("trust algebra", criterion_5),
        ("detection rate", criterion_6),
        ("election laws", criterion_7),
        ("range acceptance", criterion_8),
        ("determinism", criterion_9),
        ("speed-vs-error monotonicity", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let o = run();
        failed += usize::from(!o.pass);
        println!("{} criterion {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
