//! Writing reports and traces to disk.
//!
//! Every writer is a pure function of its input, so exporting the same
//! report twice yields byte-identical files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::compare::{PairedSeries, SpeedPoint};
use super::scenario::ScenarioOutput;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Ndjson,
    Plotdata,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "ndjson" => Ok(Format::Ndjson),
            "plotdata" => Ok(Format::Plotdata),
            other => Err(Error::InvalidArgument(format!(
                "unknown format {other:?} (expected csv, ndjson or plotdata)"
            ))),
        }
    }
}

/// One `(x, y)` series for plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSeries {
    pub plot: String,
    pub label: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

impl PlotSeries {
    pub fn new(plot: &str, label: &str, x_label: &str, y_label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            plot: plot.into(),
            label: label.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            points,
        }
    }
}

pub const MEASUREMENT_HEADERS: &[&str] = &[
    "t", "reference_id", "target_id", "n_packets", "attempts", "reading_1", "reading_2", "reading_3",
    "status", "distance", "aoa",
];
pub const ESTIMATE_HEADERS: &[&str] = &["t", "target_id", "method", "purpose", "x", "y", "z", "residual", "error"];
pub const TRACKING_HEADERS: &[&str] = &[
    "t", "target_id", "observer_id", "status", "est_x", "est_y", "true_x", "true_y", "error",
];
pub const DETECTION_HEADERS: &[&str] = &[
    "t", "cluster", "source", "observer_id", "target_id", "verdict", "reason", "aggregate_trust",
    "votes_for", "votes_total",
];
pub const ELECTION_HEADERS: &[&str] = &[
    "epoch", "t", "cluster", "kind", "sector", "candidates", "dropped", "elected", "score",
];
pub const FLAG_HEADERS: &[&str] = &["t", "cluster", "node_id", "attacker", "behavior", "reason", "trust_at_flag"];
pub const COMPARE_HEADERS: &[&str] = &[
    "seed", "step", "t", "true_x", "true_y", "heading_change", "triangulation", "multilateration",
];

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok((path, BufWriter::new(file)))
}

/// CSV with an explicit header row, so empty tables still carry headers.
pub fn write_csv<T: Serialize>(dir: &Path, name: &str, headers: &[&str], rows: &[T]) -> Result<PathBuf> {
    let (path, file) = create(dir, name)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(headers)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let (path, mut file) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(path)
}

/// Per-cluster detected-malicious counts, clusters numbered from 1.
pub fn detections_per_cluster(output: &ScenarioOutput) -> Vec<(usize, usize)> {
    output
        .report
        .clusters
        .iter()
        .map(|c| (c.cluster, c.detected))
        .collect()
}

/// Plot series of a scenario run: elections, detections and errors.
pub fn scenario_plotdata(output: &ScenarioOutput) -> Vec<PlotSeries> {
    let r = &output.records;
    let mut series = vec![PlotSeries::new(
        "ca_elections",
        "CA elections",
        "epoch",
        "clusters with a CA",
        output.report.elections.iter().map(|e| (e.epoch as f64, e.ca as f64)).collect(),
    )];
    series.push(PlotSeries::new(
        "ra_scores",
        "elected RA OCF",
        "sector",
        "OCF",
        r.elections
            .iter()
            .filter(|e| e.kind == "RA")
            .filter_map(|e| Some((e.sector? as f64, e.score?)))
            .collect(),
    ));
    series.push(PlotSeries::new(
        "reference_scores",
        "reference triple score",
        "epoch",
        "min distance - stddev (m)",
        r.elections
            .iter()
            .filter(|e| e.kind == "REF")
            .filter_map(|e| Some((e.epoch as f64, e.score?)))
            .collect(),
    ));
    series.push(PlotSeries::new(
        "detections_per_cluster",
        "detected malicious nodes",
        "cluster",
        "count",
        detections_per_cluster(output)
            .into_iter()
            .map(|(c, n)| (c as f64, n as f64))
            .collect(),
    ));
    let mut by_method: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for e in &r.estimates {
        by_method.entry(e.method).or_default().push((e.t, e.error));
    }
    for (method, points) in by_method {
        series.push(PlotSeries::new("localization_error", method, "t (s)", "error (m)", points));
    }
    series.push(PlotSeries::new(
        "flagged_tracking_error",
        "tracked flagged nodes",
        "t (s)",
        "error (m)",
        r.tracking.iter().filter_map(|t| Some((t.t, t.error?))).collect(),
    ));
    series
}

/// Writes a scenario's outputs in `format` under `dir`; returns the paths.
pub fn export(output: &ScenarioOutput, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    let r = &output.records;
    let mut paths = vec![write_json(dir, "metrics.json", &output.report)?];
    match format {
        Format::Csv => {
            paths.push(write_csv(dir, "measurements.csv", MEASUREMENT_HEADERS, &r.measurements)?);
            paths.push(write_csv(dir, "estimates.csv", ESTIMATE_HEADERS, &r.estimates)?);
            paths.push(write_csv(dir, "tracking.csv", TRACKING_HEADERS, &r.tracking)?);
            paths.push(write_csv(dir, "detections.csv", DETECTION_HEADERS, &r.detections)?);
            paths.push(write_csv(dir, "elections.csv", ELECTION_HEADERS, &r.elections)?);
            paths.push(write_csv(dir, "flags.csv", FLAG_HEADERS, &r.flags)?);
            paths.push(write_csv(
                dir,
                "detections_per_cluster.csv",
                &["cluster", "count"],
                &detections_per_cluster(output),
            )?);
        }
        Format::Ndjson => {
            let (path, mut file) = create(dir, "events.ndjson")?;
            output.log.write_ndjson(&mut file)?;
            file.flush()?;
            paths.push(path);
        }
        Format::Plotdata => paths.push(write_json(dir, "plotdata.json", &scenario_plotdata(output))?),
    }
    Ok(paths)
}

#[derive(Serialize)]
struct CompareRow {
    seed: u64,
    step: usize,
    t: f64,
    true_x: f64,
    true_y: f64,
    heading_change: f64,
    triangulation: f64,
    multilateration: f64,
}

#[derive(Serialize)]
struct CompareSummary {
    seed: u64,
    mean_triangulation: f64,
    mean_multilateration: f64,
    turns: Vec<usize>,
}

/// Writes paired tracker series; sorted by seed so the result does not
/// depend on the order runs finished in.
pub fn export_paired(series: &[PairedSeries], format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut sorted: Vec<&PairedSeries> = series.iter().collect();
    sorted.sort_by_key(|s| s.seed);
    let summary: Vec<CompareSummary> = sorted
        .iter()
        .map(|s| CompareSummary {
            seed: s.seed,
            mean_triangulation: s.mean_triangulation,
            mean_multilateration: s.mean_multilateration,
            turns: s.turns.clone(),
        })
        .collect();
    let mut paths = vec![write_json(dir, "compare_summary.json", &summary)?];
    match format {
        Format::Csv | Format::Ndjson => {
            let rows: Vec<CompareRow> = sorted
                .iter()
                .flat_map(|s| {
                    s.steps.iter().map(move |p| CompareRow {
                        seed: s.seed,
                        step: p.step,
                        t: p.t,
                        true_x: p.true_x,
                        true_y: p.true_y,
                        heading_change: p.heading_change,
                        triangulation: p.triangulation,
                        multilateration: p.multilateration,
                    })
                })
                .collect();
            if format == Format::Csv {
                paths.push(write_csv(dir, "compare.csv", COMPARE_HEADERS, &rows)?);
            } else {
                let (path, mut file) = create(dir, "compare.ndjson")?;
                for r in &rows {
                    serde_json::to_writer(&mut file, r)?;
                    file.write_all(b"\n")?;
                }
                file.flush()?;
                paths.push(path);
            }
        }
        Format::Plotdata => {
            let mut plots = Vec::new();
            for s in &sorted {
                for (label, pick) in [
                    ("triangulation", (|p: &super::compare::StepErrors| p.triangulation) as fn(&_) -> f64),
                    ("multilateration", |p| p.multilateration),
                ] {
                    plots.push(PlotSeries::new(
                        "paired_tracking_error",
                        &format!("{label} seed {}", s.seed),
                        "t (s)",
                        "error (m)",
                        s.steps.iter().map(|p| (p.t, pick(p))).collect(),
                    ));
                }
            }
            paths.push(write_json(dir, "plotdata.json", &plots)?);
        }
    }
    Ok(paths)
}

/// Writes a speed study as `speed.csv` plus a per-speed mean series.
pub fn export_speed(points: &[SpeedPoint], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.seed.cmp(&b.seed).then(a.speed.total_cmp(&b.speed)));
    let mut means: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for p in &sorted {
        let e = means.entry(p.speed.to_bits()).or_insert((p.speed, 0.0, 0));
        e.1 += p.mean_error;
        e.2 += 1;
    }
    let mut series: Vec<(f64, f64)> = means.values().map(|(s, sum, n)| (*s, sum / *n as f64)).collect();
    series.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(vec![
        write_csv(dir, "speed.csv", &["speed", "seed", "mean_error"], &sorted)?,
        write_json(
            dir,
            "speed_plotdata.json",
            &[PlotSeries::new("error_vs_speed", "mean tracking error", "speed (m/s)", "error (m)", series)],
        )?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::MetricsReport;
    use crate::harness::scenario::Records;
    use crate::sim::EventLog;

    fn empty() -> ScenarioOutput {
        ScenarioOutput {
            report: MetricsReport::empty(1),
            records: Records::default(),
            log: EventLog::new(),
        }
    }

    #[test]
    fn empty_report_gives_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        export(&empty(), Format::Csv, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("tracking.csv")).unwrap();
        assert_eq!(text, format!("{}\n", TRACKING_HEADERS.join(",")));
        let text = fs::read_to_string(dir.path().join("detections_per_cluster.csv")).unwrap();
        assert_eq!(text, "cluster,count\n");
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain-file");
        fs::write(&file, b"x").unwrap();
        assert!(export(&empty(), Format::Ndjson, &file.join("sub")).is_err());
    }

    #[test]
    fn format_parsing() {
        assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
        assert_eq!("plotdata".parse::<Format>().unwrap(), Format::Plotdata);
        assert!("xml".parse::<Format>().is_err());
    }
}
