//! Paired tracker study: one ground-truth trajectory, two trackers.
//!
//! Tracker (a) localizes with the cluster's three elected reference nodes
//! (triangulation) and tracker (b) with the four authenticated nodes
//! nearest the target (multilateration). Both then follow the target with
//! the contour-zone tracker, observing it each epoch from the nearest node
//! they localize with.

use rand::Rng;
use serde::Serialize;

use super::config::ScenarioConfig;
use super::metrics::median;
use super::observe::{observe, RangeSource};
use crate::elections::{bcf, connectivity_metric, elect_references, stability_metric, RefCandidate};
use crate::error::{Error, Result};
use crate::geometry::{angle_diff_deg, Bounds, Position, Stamped};
use crate::localization::{multilaterate, triangulate, Method, PositionEstimate, ReferenceFix};
use crate::ranging::measure_range;
use crate::sim::{seeded_rng, RadioModel, SimRng};
use crate::tracking::{contour_index, plt_step, sense, TrackStatus, TrackerState};

/// Static authenticated nodes around a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub nodes: Vec<Position>,
    /// Indices into `nodes` of the elected reference triple.
    pub references: Option<[usize; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Shape {
    /// Straight legs joined by sharp turns of 45° to 90°, kept inside the
    /// tracking box.
    Random,
    /// One straight line through the cluster centre.
    Straight,
    /// Straight, then a 90° left turn after `turn_at` epochs.
    Turn90 { turn_at: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepErrors {
    pub step: usize,
    pub t: f64,
    pub true_x: f64,
    pub true_y: f64,
    /// Absolute heading change entering this step, degrees.
    pub heading_change: f64,
    pub triangulation: f64,
    pub multilateration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedSeries {
    pub seed: u64,
    pub steps: Vec<StepErrors>,
    pub mean_triangulation: f64,
    pub mean_multilateration: f64,
    /// Steps whose heading changed by at least 45°.
    pub turns: Vec<usize>,
}

impl PairedSeries {
    fn from_errors(seed: u64, path: &[Stamped], a: &[f64], b: &[f64]) -> Self {
        let headings: Vec<Option<f64>> = (0..path.len())
            .map(|i| {
                (i > 0)
                    .then(|| path[i - 1].position.bearing_to(&path[i].position).ok())
                    .flatten()
            })
            .collect();
        let steps: Vec<StepErrors> = path
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let change = match (i.checked_sub(1).and_then(|j| headings[j]), headings[i]) {
                    (Some(h0), Some(h1)) => angle_diff_deg(h1, h0).abs(),
                    _ => 0.0,
                };
                StepErrors {
                    step: i,
                    t: s.t,
                    true_x: s.position.x,
                    true_y: s.position.y,
                    heading_change: change,
                    triangulation: a[i],
                    multilateration: b[i],
                }
            })
            .collect();
        let turns = steps.iter().filter(|s| s.heading_change >= 45.0).map(|s| s.step).collect();
        Self {
            seed,
            mean_triangulation: a.iter().sum::<f64>() / a.len() as f64,
            mean_multilateration: b.iter().sum::<f64>() / b.len() as f64,
            steps,
            turns,
        }
    }

    /// Largest error of each tracker within `window` steps after `step`.
    pub fn peak_after(&self, step: usize, window: usize) -> (f64, f64) {
        self.steps[step..(step + window + 1).min(self.steps.len())]
            .iter()
            .fold((0.0, 0.0), |(a, b), s| (a.max(s.triangulation), b.max(s.multilateration)))
    }

    /// Median error of each tracker over steps at least `margin` epochs
    /// away from every turn, skipping the two seeding steps.
    pub fn straight_median(&self, margin: usize) -> (f64, f64) {
        let straight: Vec<&StepErrors> = self
            .steps
            .iter()
            .filter(|s| s.step >= 2)
            .filter(|s| self.turns.iter().all(|&t| s.step + margin < t || s.step > t + margin))
            .collect();
        (
            median(&straight.iter().map(|s| s.triangulation).collect::<Vec<_>>()),
            median(&straight.iter().map(|s| s.multilateration).collect::<Vec<_>>()),
        )
    }
}

fn density(cfg: &ScenarioConfig) -> f64 {
    cfg.nodes_per_cluster as f64 / (cfg.bounds.width * cfg.bounds.height)
}

/// Uniform field of static nodes over `bounds` at the configured density.
pub fn field_over(cfg: &ScenarioConfig, bounds: &Bounds, rng: &mut SimRng) -> Vec<Position> {
    let n = ((density(cfg) * bounds.width() * bounds.height()).round() as usize).max(8);
    (0..n)
        .map(|_| {
            Position::new(
                rng.random_range(bounds.min_x..=bounds.max_x),
                rng.random_range(bounds.min_y..=bounds.max_y),
            )
        })
        .collect()
}

/// One cluster's worth of static nodes with an elected reference triple.
///
/// Reference candidates are the nodes within `compare.reference_radius`
/// of the cluster centre; their BCF uses the distance from the centre as
/// the distance metric.
pub fn cluster_field(cfg: &ScenarioConfig, rng: &mut SimRng) -> Result<Field> {
    let bounds = cfg.cluster_bounds();
    let center = bounds.center();
    let nodes = field_over(cfg, &bounds, rng);
    let radio = cfg.radio.model();
    let degrees: Vec<usize> = nodes
        .iter()
        .map(|p| nodes.iter().filter(|q| *q != p && radio.in_range(p, q)).count())
        .collect();
    let max_degree = degrees.iter().copied().max().unwrap_or(0);
    let radius = cfg.compare.reference_radius;
    let candidates: Vec<RefCandidate> = nodes
        .iter()
        .enumerate()
        .filter(|(_, p)| p.distance(&center) <= radius)
        .map(|(i, p)| {
            let energy: f64 = rng.random_range(0.6..=1.0);
            let y = [
                p.distance(&center) / radius,
                stability_metric(0.0),
                energy,
                connectivity_metric(degrees[i], max_degree),
            ];
            Ok(RefCandidate {
                id: i as u32,
                position: *p,
                bcf: bcf(y, &cfg.weights.bcf)?,
            })
        })
        .collect::<Result<_>>()?;
    let refs = elect_references(&candidates, cfg.thresholds.bcf)?;
    Ok(Field {
        nodes,
        references: Some(refs.ids.map(|i| i as usize)),
    })
}

/// Ground truth sampled once per tracker epoch.
pub fn trajectory(cfg: &ScenarioConfig, shape: Shape, speed: f64, rng: &mut SimRng) -> Vec<Stamped> {
    let c = &cfg.compare;
    let dt = cfg.tracker.epoch;
    let step = speed * dt;
    let center = cfg.cluster_bounds().center();
    let stamp = |i: usize, p: Position| Stamped { t: i as f64 * dt, position: p };
    match shape {
        Shape::Straight => {
            let heading: f64 = rng.random_range(0.0..360.0);
            let start = center - Position::polar(step * c.steps as f64 / 2.0, heading);
            (0..=c.steps)
                .map(|i| stamp(i, start + Position::polar(step * i as f64, heading)))
                .collect()
        }
        Shape::Turn90 { turn_at } => {
            let heading: f64 = rng.random_range(0.0..360.0);
            let after = c.steps.saturating_sub(turn_at);
            // centre the L on the cluster centre
            let corner = center + Position::polar(step * turn_at as f64 / 2.0, heading)
                - Position::polar(step * after as f64 / 2.0, heading + 90.0);
            let start = corner - Position::polar(step * turn_at as f64, heading);
            (0..=c.steps)
                .map(|i| {
                    let p = if i <= turn_at {
                        start + Position::polar(step * i as f64, heading)
                    } else {
                        corner + Position::polar(step * (i - turn_at) as f64, heading + 90.0)
                    };
                    stamp(i, p)
                })
                .collect()
        }
        Shape::Random => {
            let half = c.track_half_width;
            let inside = |p: &Position| (p.x - center.x).abs() <= half && (p.y - center.y).abs() <= half;
            let mut p = center
                + Position::new(rng.random_range(-half / 2.0..=half / 2.0), rng.random_range(-half / 2.0..=half / 2.0));
            let fits = |from: &Position, h: f64, n: usize| inside(&(*from + Position::polar(step * n as f64, h)));
            let mut heading: f64 = rng.random_range(0.0..360.0);
            let mut leg = 0;
            let mut out = vec![stamp(0, p)];
            for i in 1..=c.steps {
                if leg == 0 {
                    leg = rng.random_range(c.min_leg..=c.max_leg);
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    let turn: f64 = if i == 1 { 0.0 } else { rng.random_range(45.0..=90.0) };
                    heading = [heading + sign * turn, heading - sign * turn]
                        .into_iter()
                        .find(|&h| fits(&p, h, leg))
                        .unwrap_or_else(|| {
                            // boxed in: head back towards the centre
                            let h = p.bearing_to(&center).unwrap_or(heading);
                            leg = leg.min((p.distance(&center) / step).floor() as usize).max(1);
                            h
                        });
                }
                p = p + Position::polar(step, heading);
                leg -= 1;
                out.push(stamp(i, p));
            }
            out
        }
    }
}

struct Tracker<'a> {
    cfg: &'a ScenarioConfig,
    radio: RadioModel,
    field: &'a Field,
    method: Method,
}

impl Tracker<'_> {
    /// Nodes this method localizes with, given the latest estimate.
    fn anchors(&self, near: &Position, truth: &Position) -> Vec<usize> {
        match self.method {
            Method::Triangulation => self
                .field
                .references
                .expect("triangulation needs references")
                .to_vec(),
            Method::Multilateration => {
                let mut idx: Vec<usize> = (0..self.field.nodes.len())
                    .filter(|&i| self.radio.in_range(&self.field.nodes[i], truth))
                    .collect();
                idx.sort_by(|&a, &b| {
                    self.field.nodes[a]
                        .distance(near)
                        .total_cmp(&self.field.nodes[b].distance(near))
                        .then(a.cmp(&b))
                });
                idx.truncate(4);
                idx
            }
        }
    }

    fn fix(&self, t: f64, near: &Position, truth: &Position, rng: &mut SimRng) -> Result<PositionEstimate> {
        let mut fixes = Vec::new();
        for i in self.anchors(near, truth) {
            let p = self.field.nodes[i];
            let m = measure_range(t, (i as u32, p), (u32::MAX, *truth), &self.radio, &self.cfg.ranging, &mut |_| 0.0, rng);
            if let Some(d) = m.distance {
                let mut f = ReferenceFix::new(p, d);
                f.aoa = m.aoa;
                fixes.push(f);
            }
        }
        let est = match self.method {
            Method::Triangulation => triangulate(&fixes),
            Method::Multilateration => multilaterate(&fixes),
        }?;
        Ok(est.at(t))
    }

    fn observer(&self, apex: &Position, truth: &Position) -> Option<usize> {
        self.anchors(apex, truth)
            .into_iter()
            .filter(|&i| self.radio.in_range(&self.field.nodes[i], truth))
            .min_by(|&a, &b| {
                self.field.nodes[a]
                    .distance(apex)
                    .total_cmp(&self.field.nodes[b].distance(apex))
                    .then(a.cmp(&b))
            })
    }

    /// Error of the reported position at every sample of `path`.
    fn run(&self, path: &[Stamped], rng: &mut SimRng) -> Result<Vec<f64>> {
        let tx = self.cfg.radio.tx_energy;
        let exp = self.radio.path_loss_exponent;
        let mut errors = Vec::with_capacity(path.len());
        let mut last = path[0].position;
        let mut seeds: Vec<Stamped> = Vec::new();
        let mut state: Option<TrackerState> = None;

        for s in path {
            let reported = match state.take() {
                None => match self.fix(s.t, &last, &s.position, rng) {
                    Ok(est) => {
                        seeds.push(Stamped { t: s.t, position: est.position });
                        if seeds.len() >= 2 {
                            let n = seeds.len();
                            state = TrackerState::new(0, seeds[n - 2], seeds[n - 1], self.cfg.tracker, self.method).ok();
                        }
                        est.position
                    }
                    // no fix this epoch: the last report stands
                    Err(_) => last,
                },
                Some(st) => {
                    let observer = self
                        .observer(&st.zone.apex, &s.position)
                        .ok_or_else(|| Error::InvalidArgument("no observer in range".into()))?;
                    let seen = observe(
                        (observer as u32, self.field.nodes[observer]),
                        (u32::MAX, s.position),
                        RangeSource::Toa,
                        &self.radio,
                        &self.cfg.ranging,
                        &mut |_| 0.0,
                        rng,
                    )?;
                    let (bearing, energy) = sense(&st.zone, &seen, tx, exp);
                    let contour = contour_index(&st.zone, energy.max(f64::MIN_POSITIVE), tx, exp)?;
                    let (outcome, mut st) = plt_step(st, s.t, bearing, contour)?;
                    let position = match outcome.estimate {
                        Some(e) => e.position,
                        None => {
                            debug_assert_eq!(outcome.status, TrackStatus::Lost);
                            match self.fix(s.t, &last, &s.position, rng) {
                                Ok(est) => {
                                    st.reacquire(Stamped { t: s.t, position: est.position })?;
                                    est.position
                                }
                                Err(_) => {
                                    seeds.clear();
                                    state = None;
                                    errors.push(last.distance(&s.position));
                                    continue;
                                }
                            }
                        }
                    };
                    state = Some(st);
                    position
                }
            };
            errors.push(reported.distance(&s.position));
            last = reported;
        }
        Ok(errors)
    }
}

/// Errors of one tracker following `path` through `field`.
pub fn track_path(
    cfg: &ScenarioConfig,
    field: &Field,
    path: &[Stamped],
    method: Method,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    Tracker {
        cfg,
        radio: cfg.radio.model(),
        field,
        method,
    }
    .run(path, rng)
}

/// Both trackers on the same trajectory of the given shape.
pub fn compare_on(cfg: &ScenarioConfig, shape: Shape, trajectory_seed: u64) -> Result<PairedSeries> {
    cfg.validate()?;
    let mut world = seeded_rng(trajectory_seed);
    let field = deploy(cfg, &mut world)?;
    let path = trajectory(cfg, shape, cfg.compare.speed, &mut world);
    let a = track_path(cfg, &field, &path, Method::Triangulation, &mut seeded_rng(trajectory_seed ^ 0xA))?;
    let b = track_path(cfg, &field, &path, Method::Multilateration, &mut seeded_rng(trajectory_seed ^ 0xB))?;
    Ok(PairedSeries::from_errors(trajectory_seed, &path, &a, &b))
}

/// Redeploys the cluster until a reference triple can be elected.
fn deploy(cfg: &ScenarioConfig, rng: &mut SimRng) -> Result<Field> {
    let mut last = None;
    for _ in 0..DEPLOY_ATTEMPTS {
        match cluster_field(cfg, rng) {
            Ok(field) => return Ok(field),
            Err(e @ Error::NoCandidates(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one deployment attempt"))
}

const DEPLOY_ATTEMPTS: usize = 16;

/// Paired study on a random trajectory with sharp turns.
pub fn compare_trackers(cfg: &ScenarioConfig, trajectory_seed: u64) -> Result<PairedSeries> {
    compare_on(cfg, Shape::Random, trajectory_seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedPoint {
    pub speed: f64,
    pub seed: u64,
    pub mean_error: f64,
}

/// Mean multilateration-tracker error on straight trajectories at each
/// speed, one point per (speed, seed).
pub fn speed_study(cfg: &ScenarioConfig, speeds: &[f64], seeds: &[u64]) -> Result<Vec<SpeedPoint>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &seed in seeds {
        for &speed in speeds {
            let mut world = seeded_rng(seed);
            let path = trajectory(cfg, Shape::Straight, speed, &mut world);
            let margin = cfg.radio.transmission_range / 2.0;
            let (lo, hi) = path.iter().fold(
                (Position::new(f64::INFINITY, f64::INFINITY), Position::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
                |(lo, hi), s| {
                    (
                        Position::new(lo.x.min(s.position.x), lo.y.min(s.position.y)),
                        Position::new(hi.x.max(s.position.x), hi.y.max(s.position.y)),
                    )
                },
            );
            let bounds = Bounds {
                min_x: lo.x - margin,
                min_y: lo.y - margin,
                max_x: hi.x + margin,
                max_y: hi.y + margin,
            };
            let field = Field {
                nodes: field_over(cfg, &bounds, &mut world),
                references: None,
            };
            let errors = track_path(cfg, &field, &path, Method::Multilateration, &mut seeded_rng(seed ^ 0xB))?;
            out.push(SpeedPoint {
                speed,
                seed,
                mean_error: errors.iter().sum::<f64>() / errors.len() as f64,
            });
        }
    }
    Ok(out)
}
