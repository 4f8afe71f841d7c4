use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use manet_track::geometry::Stamped;
use manet_track::harness::compare::trajectory;
use manet_track::harness::export::{write_csv, write_json, PlotSeries};
use manet_track::harness::replay::REPLAY_HEADERS;
use manet_track::harness::{
    compare_trackers, export, export_paired, export_speed, replay, run_scenario, speed_study, Format, Sample,
    ScenarioConfig, Shape,
};
use manet_track::localization::{multilaterate, triangulate, Method, ReferenceFix};
use manet_track::sim::seeded_rng;
use manet_track::{Error, Result};

#[derive(Parser)]
#[command(name = "manet-track", version, about = "Cluster-based MANET detection, localization and tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (JSON); defaults apply to omitted fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Two clusters of twenty nodes for one minute.
    #[arg(long)]
    small: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Full scenario run.
    Run(Common),
    /// Elections only, one epoch.
    Elect(Common),
    /// One-shot fix from a fixes file.
    Localize {
        #[command(flatten)]
        common: Common,
        /// JSON: {"method": "triangulation"|"multilateration", "fixes": [...]}.
        #[arg(long)]
        fixes: PathBuf,
    },
    /// Replays a trajectory through a contour-zone tracker.
    Track {
        #[command(flatten)]
        common: Common,
        /// CSV with columns t,x,y; a random trajectory is generated if omitted.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Paired triangulation/multilateration tracker study.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        trajectories: u64,
        /// Also run the error-versus-speed study at these speeds (m/s).
        #[arg(long, value_delimiter = ',')]
        speeds: Vec<f64>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixesFile {
    method: Method,
    fixes: Vec<ReferenceFix>,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidConfig(_) => "invalid_config",
        Error::Io(_) => "io",
        Error::InvalidArgument(_) => "invalid_argument",
        _ => "simulation",
    }
}

fn config(c: &Common) -> Result<ScenarioConfig> {
    let mut cfg = match &c.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if c.small {
        let small = ScenarioConfig::small();
        cfg.clusters = small.clusters;
        cfg.nodes_per_cluster = small.nodes_per_cluster;
        cfg.duration = small.duration;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn read_samples(path: &Path) -> Result<Vec<Stamped>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    reader
        .deserialize::<Sample>()
        .map(|row| row.map(Stamped::from).map_err(|e| Error::InvalidArgument(e.to_string())))
        .collect()
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let cfg = config(&c)?;
            report(&export(&run_scenario(&cfg)?, c.format, &c.out)?);
        }
        Command::Elect(c) => {
            let mut cfg = config(&c)?;
            cfg.duration = 0.0;
            report(&export(&run_scenario(&cfg)?, c.format, &c.out)?);
        }
        Command::Localize { common, fixes } => {
            config(&common)?;
            let text = std::fs::read_to_string(&fixes).map_err(|e| Error::Io(format!("{}: {e}", fixes.display())))?;
            let file: FixesFile = serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let estimate = match file.method {
                Method::Triangulation => triangulate(&file.fixes)?,
                Method::Multilateration => multilaterate(&file.fixes)?,
            };
            println!("{}", serde_json::to_string(&estimate)?);
            report(&[write_json(&common.out, "estimate.json", &estimate)?]);
        }
        Command::Track { common, trajectory: path } => {
            let cfg = config(&common)?;
            let samples = match path {
                Some(p) => read_samples(&p)?,
                None => trajectory(&cfg, Shape::Random, cfg.compare.speed, &mut seeded_rng(cfg.seed)),
            };
            let rows = replay(&samples, cfg.tracker, cfg.radio.tx_energy, cfg.radio.path_loss_exponent)?;
            let path = match common.format {
                Format::Csv => write_csv(&common.out, "track.csv", REPLAY_HEADERS, &rows)?,
                Format::Ndjson => {
                    let text: String = rows
                        .iter()
                        .map(|r| serde_json::to_string(r).map(|s| s + "\n"))
                        .collect::<std::result::Result<_, _>>()?;
                    std::fs::create_dir_all(&common.out)?;
                    let p = common.out.join("track.ndjson");
                    std::fs::write(&p, text)?;
                    p
                }
                Format::Plotdata => {
                    let points = rows.iter().filter_map(|r| r.error.map(|e| (r.t, e))).collect();
                    let series = [PlotSeries::new("replay_error", "replay", "t (s)", "error (m)", points)];
                    write_json(&common.out, "plotdata.json", &series)?
                }
            };
            report(&[path]);
        }
        Command::Compare {
            common,
            trajectories,
            speeds,
        } => {
            let cfg = config(&common)?;
            let series = (cfg.seed..cfg.seed + trajectories)
                .map(|s| compare_trackers(&cfg, s))
                .collect::<Result<Vec<_>>>()?;
            let mut paths = export_paired(&series, common.format, &common.out)?;
            if !speeds.is_empty() {
                let seeds: Vec<u64> = (cfg.seed..cfg.seed + trajectories).collect();
                paths.extend(export_speed(&speed_study(&cfg, &speeds, &seeds)?, &common.out)?);
            }
            report(&paths);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = ErrorReport {
                error: kind(&e),
                message: e.to_string(),
            };
            eprintln!("{}", serde_json::to_string(&body).expect("plain strings serialize"));
            ExitCode::FAILURE
        }
    }
}
