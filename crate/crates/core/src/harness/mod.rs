//! Scenario orchestration: configuration, attacker scripts, the event loop,
//! the paired tracker study, metrics and export.

pub mod attacker;
pub mod compare;
pub mod config;
pub mod export;
pub mod metrics;
pub mod observe;
pub mod replay;
pub mod scenario;

pub use attacker::{AttackerConfig, Behavior, ScriptEntry};
pub use compare::{compare_on, compare_trackers, speed_study, PairedSeries, Shape, SpeedPoint};
pub use config::ScenarioConfig;
pub use export::{export, export_paired, export_speed, Format};
pub use metrics::{ErrorStats, MetricsReport, Rate};
pub use replay::{replay, ReplayRow, Sample};
pub use scenario::{run_scenario, Records, ScenarioOutput};
