//! Position fixes from reference geometry.
//!
//! Member nodes are fixed by triangulation against the cluster's three
//! reference nodes. Suspected malicious or out-of-range nodes are fixed by
//! multilateration against four or more authenticated neighbours. Both
//! solvers start from the closed-form linearized system (one reference's
//! range equation subtracted from the others) and polish the result with
//! Gauss–Newton on the range residuals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_diff_deg, Position};
use crate::ranging::{measure_range, RangeMeasurement, RangeStatus, RangingParams};
use crate::sim::{NodeId, RadioModel, SimRng};

/// Known reference position with a measured range (and optionally the
/// bearing the reference observed toward the target).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFix {
    pub position: Position,
    pub distance: f64,
    pub aoa: Option<f64>,
}

impl ReferenceFix {
    pub fn new(position: Position, distance: f64) -> Self {
        Self {
            position,
            distance,
            aoa: None,
        }
    }

    pub fn with_aoa(mut self, aoa: f64) -> Self {
        self.aoa = Some(aoa);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Triangulation,
    Multilateration,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Triangulation => "triangulation",
            Method::Multilateration => "multilateration",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub position: Position,
    /// RMS of `| |p - ref_i| - d_i |`, meters.
    pub residual: f64,
    pub method: Method,
    /// Simulation time of the fix, seconds.
    pub epoch: f64,
}

impl PositionEstimate {
    pub fn at(mut self, epoch: f64) -> Self {
        self.epoch = epoch;
        self
    }
}

/// Minimum triangle area (m²) / tetrahedron volume (m³) for a usable geometry.
pub const DEGENERACY_EPS: f64 = 1e-6;
const STEP_TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 50;

/// 2D fix from exactly three ranges.
pub fn triangulate(fixes: &[ReferenceFix]) -> Result<PositionEstimate> {
    if fixes.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "triangulation takes exactly 3 fixes, got {}",
            fixes.len()
        )));
    }
    check_distances(fixes)?;
    let area = triangle_area(&fixes[0].position, &fixes[1].position, &fixes[2].position);
    if area <= DEGENERACY_EPS {
        return Err(Error::DegenerateGeometry(format!(
            "reference triangle area {area:.3e} m² is collinear"
        )));
    }

    let linear = linearized_solution(fixes, 2)?;
    let mut starts = vec![linear];
    // Each AoA gives an independent start on the right side of any mirror.
    starts.extend(
        fixes
            .iter()
            .filter_map(|f| f.aoa.map(|a| f.position + Position::polar(f.distance, a))),
    );
    // The reflection of the linear start across each reference edge seeds
    // the mirror basin when one exists.
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        starts.push(reflect(&linear, &fixes[i].position, &fixes[j].position));
    }

    let mut candidates = Vec::with_capacity(starts.len());
    for s in starts {
        if let Ok(p) = gauss_newton(fixes, s, 2) {
            candidates.push(p);
        }
    }
    let best = pick_candidate(fixes, candidates)?;
    Ok(PositionEstimate {
        position: best,
        residual: rms_residual(fixes, &best),
        method: Method::Triangulation,
        epoch: 0.0,
    })
}

/// Least-squares fix from four or more ranges. 2D when every reference has
/// `z == 0`, otherwise 3D.
pub fn multilaterate(fixes: &[ReferenceFix]) -> Result<PositionEstimate> {
    if fixes.len() < 4 {
        return Err(Error::InsufficientFixes {
            need: 4,
            have: fixes.len(),
        });
    }
    check_distances(fixes)?;
    let dim = if fixes.iter().all(|f| f.position.z == 0.0) {
        2
    } else {
        3
    };
    check_span(fixes, dim)?;
    let start = linearized_solution(fixes, dim)?;
    let position = gauss_newton(fixes, start, dim)?;
    Ok(PositionEstimate {
        position,
        residual: rms_residual(fixes, &position),
        method: Method::Multilateration,
        epoch: 0.0,
    })
}

/// Re-solves with each fix left out in turn and keeps the subset with the
/// lowest residual. Returns the index of the dropped fix.
pub fn drop_worst_fix(fixes: &[ReferenceFix]) -> Result<(usize, PositionEstimate)> {
    if fixes.len() < 5 {
        return Err(Error::InsufficientFixes {
            need: 5,
            have: fixes.len(),
        });
    }
    let mut best: Option<(usize, PositionEstimate)> = None;
    for skip in 0..fixes.len() {
        let subset: Vec<_> = fixes
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, f)| *f)
            .collect();
        if let Ok(est) = multilaterate(&subset) {
            if best.as_ref().is_none_or(|(_, b)| est.residual < b.residual) {
                best = Some((skip, est));
            }
        }
    }
    best.ok_or_else(|| Error::DegenerateGeometry("every leave-one-out subset is degenerate".into()))
}

/// Mean one-way flight time of a packet batch, seconds.
pub fn mean_flight_time(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no packets".into()));
    }
    Ok(pairs.iter().map(|(tod, toa)| toa - tod).sum::<f64>() / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedDistance {
    pub distance: f64,
    /// The raw combination was negative and was clamped to zero.
    pub clamped: bool,
}

/// Distance between sender `m` and receiver `n` derived through a common
/// reference `C`: `s * (T_mn + T_mC - T_Cn)`, with the `T` terms given as
/// mean one-way flight times in seconds.
///
/// This is a diagnostic; it is not the Euclidean `m–n` distance for general
/// geometry.
pub fn derive_distance_via_origin(t_mn: f64, t_mc: f64, t_cn: f64, speed: f64) -> DerivedDistance {
    let raw = speed * (t_mn + t_mc - t_cn);
    if raw < 0.0 {
        DerivedDistance {
            distance: 0.0,
            clamped: true,
        }
    } else {
        DerivedDistance {
            distance: raw,
            clamped: false,
        }
    }
}

/// Parameters of [`localize_malicious`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaliciousLocalizationParams {
    pub ranging: RangingParams,
    /// RMS residual above which a neighbour set is considered tampered with.
    pub residual_threshold: f64,
    /// Neighbour sets tried before giving up on a clean fix.
    pub max_neighbor_sets: usize,
}

impl Default for MaliciousLocalizationParams {
    fn default() -> Self {
        Self {
            ranging: RangingParams::default(),
            residual_threshold: 10.0,
            max_neighbor_sets: 3,
        }
    }
}

/// Outcome of [`localize_malicious`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaliciousFix {
    pub estimate: PositionEstimate,
    /// Neighbours whose ranges produced `estimate`.
    pub neighbor_ids: Vec<NodeId>,
    /// Every ranging session run, in order.
    pub measurements: Vec<RangeMeasurement>,
    /// Neighbour sets tried.
    pub sets_tried: usize,
    /// `estimate.residual` still exceeds the threshold.
    pub suspect: bool,
}

/// Multilateration of a target from its nearest authenticated neighbours.
///
/// `neighbors` are authenticated nodes at known positions. Neighbours are
/// ranked by distance to `last_known` (ties by lower id), the target
/// itself and out-of-range nodes are skipped, and the four nearest with an
/// accepted range are used. A residual above the threshold swaps the
/// worst-fitting neighbour for the next candidate and re-measures.
///
/// `tod_skew(reference, rng)` models stale ToD stamps injected by the
/// target, in seconds.
#[allow(clippy::too_many_arguments)]
pub fn localize_malicious(
    t: f64,
    neighbors: &[(NodeId, Position)],
    target: (NodeId, Position),
    last_known: Position,
    radio: &RadioModel,
    params: &MaliciousLocalizationParams,
    tod_skew: &mut dyn FnMut(NodeId, &mut SimRng) -> f64,
    rng: &mut SimRng,
) -> Result<MaliciousFix> {
    let mut candidates: Vec<(f64, NodeId, Position)> = neighbors
        .iter()
        .filter(|(id, p)| *id != target.0 && radio.in_range(p, &target.1))
        .map(|(id, p)| (p.distance(&last_known), *id, *p))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut queue = candidates.into_iter().map(|(_, id, p)| (id, p));

    let mut measurements = Vec::new();
    let mut active: Vec<(NodeId, ReferenceFix)> = Vec::with_capacity(4);
    let mut best: Option<(PositionEstimate, Vec<NodeId>)> = None;
    let mut sets_tried = 0;

    loop {
        while active.len() < 4 {
            let Some((id, p)) = queue.next() else { break };
            let m = measure_range(
                t,
                (id, p),
                target,
                radio,
                &params.ranging,
                &mut |rng: &mut SimRng| tod_skew(id, rng),
                rng,
            );
            if m.status != RangeStatus::Rejected {
                let d = m.distance.expect("non-rejected ranges carry a distance");
                let mut fix = ReferenceFix::new(p, d);
                fix.aoa = m.aoa;
                active.push((id, fix));
            }
            measurements.push(m);
        }
        if active.len() < 4 {
            break;
        }
        sets_tried += 1;
        let fixes: Vec<_> = active.iter().map(|(_, f)| *f).collect();
        match multilaterate(&fixes) {
            Ok(est) => {
                let est = est.at(t);
                let ids = active.iter().map(|(id, _)| *id).collect();
                if best.as_ref().is_none_or(|(b, _)| est.residual < b.residual) {
                    best = Some((est, ids));
                }
                if est.residual <= params.residual_threshold {
                    break;
                }
                let worst = worst_fit(&fixes, &est.position);
                active.remove(worst);
            }
            Err(Error::DegenerateGeometry(_)) => {
                // swap the farthest neighbour for the next candidate
                active.pop();
            }
            Err(e) => return Err(e),
        }
        if sets_tried >= params.max_neighbor_sets {
            break;
        }
    }

    match best {
        Some((estimate, neighbor_ids)) => Ok(MaliciousFix {
            suspect: estimate.residual > params.residual_threshold,
            estimate,
            neighbor_ids,
            measurements,
            sets_tried,
        }),
        None => Err(Error::InsufficientFixes {
            need: 4,
            have: active.len(),
        }),
    }
}

fn worst_fit(fixes: &[ReferenceFix], p: &Position) -> usize {
    fixes
        .iter()
        .map(|f| (p.distance(&f.position) - f.distance).abs())
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn check_distances(fixes: &[ReferenceFix]) -> Result<()> {
    for f in fixes {
        if !(f.distance >= 0.0 && f.distance.is_finite()) || !f.position.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "fix at ({}, {}, {}) has distance {}",
                f.position.x, f.position.y, f.position.z, f.distance
            )));
        }
    }
    Ok(())
}

fn triangle_area(a: &Position, b: &Position, c: &Position) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs()
}

fn tetra_volume(a: &Position, b: &Position, c: &Position, d: &Position) -> f64 {
    let (u, v, w) = (*b - *a, *c - *a, *d - *a);
    let det = u.x * (v.y * w.z - v.z * w.y) - u.y * (v.x * w.z - v.z * w.x)
        + u.z * (v.x * w.y - v.y * w.x);
    det.abs() / 6.0
}

fn check_span(fixes: &[ReferenceFix], dim: usize) -> Result<()> {
    let p: Vec<_> = fixes.iter().map(|f| f.position).collect();
    let n = p.len();
    let mut span = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if dim == 2 {
                    span = span.max(triangle_area(&p[i], &p[j], &p[k]));
                } else {
                    for l in k + 1..n {
                        span = span.max(tetra_volume(&p[i], &p[j], &p[k], &p[l]));
                    }
                }
            }
        }
    }
    if span <= DEGENERACY_EPS {
        let what = if dim == 2 { "collinear" } else { "coplanar" };
        return Err(Error::DegenerateGeometry(format!("references are {what}")));
    }
    Ok(())
}

/// Closed-form least squares after subtracting the first range equation:
/// `2 (p_i - p_0) · x = |p_i|² - |p_0|² - d_i² + d_0²`.
fn linearized_solution(fixes: &[ReferenceFix], dim: usize) -> Result<Position> {
    // Work relative to the anchor to keep the normal equations well scaled.
    let anchor = fixes[0].position;
    let d0 = fixes[0].distance;
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for f in &fixes[1..] {
        let q = f.position - anchor;
        let row = [2.0 * q.x, 2.0 * q.y, 2.0 * q.z];
        let rhs = q.dot(&q) - f.distance * f.distance + d0 * d0;
        for r in 0..dim {
            atb[r] += row[r] * rhs;
            for c in 0..dim {
                ata[r][c] += row[r] * row[c];
            }
        }
    }
    let x = solve(ata, atb, dim)
        .ok_or_else(|| Error::DegenerateGeometry("linearized system is singular".into()))?;
    Ok(anchor + Position::new_3d(x[0], x[1], x[2]))
}

fn gauss_newton(fixes: &[ReferenceFix], start: Position, dim: usize) -> Result<Position> {
    let mut p = start;
    let mut cost = cost_of(fixes, &p);
    let mut last_step = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        if cost == 0.0 {
            return Ok(p);
        }
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for f in fixes {
            let diff = p - f.position;
            let range = diff.norm();
            if range < 1e-12 {
                continue;
            }
            let row = [diff.x / range, diff.y / range, diff.z / range];
            let r = range - f.distance;
            for a in 0..dim {
                jtr[a] += row[a] * r;
                for b in 0..dim {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let Some(delta) = solve(jtj, jtr.map(|v| -v), dim) else {
            break;
        };
        let step = Position::new_3d(delta[0], delta[1], delta[2]);
        // backtrack until the cost does not increase
        let mut scale = 1.0;
        let mut next = p + step;
        let mut next_cost = cost_of(fixes, &next);
        while next_cost > cost && scale > 1e-6 {
            scale *= 0.5;
            next = p + step * scale;
            next_cost = cost_of(fixes, &next);
        }
        if next_cost > cost {
            // no descent left along the Gauss-Newton direction: a minimum
            return Ok(p);
        }
        last_step = step.norm() * scale;
        p = next;
        cost = next_cost;
        if last_step < STEP_TOL {
            return Ok(p);
        }
    }
    if !p.is_finite() {
        return Err(Error::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual: f64::NAN,
        });
    }
    if last_step.is_finite() && last_step > 1e-6 {
        return Err(Error::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual: rms_residual(fixes, &p),
        });
    }
    Ok(p)
}

fn cost_of(fixes: &[ReferenceFix], p: &Position) -> f64 {
    fixes
        .iter()
        .map(|f| {
            let r = p.distance(&f.position) - f.distance;
            r * r
        })
        .sum()
}

/// RMS range residual of `p` against `fixes`.
pub fn rms_residual(fixes: &[ReferenceFix], p: &Position) -> f64 {
    (cost_of(fixes, p) / fixes.len() as f64).sqrt()
}

fn reflect(p: &Position, a: &Position, b: &Position) -> Position {
    let ab = *b - *a;
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return *p;
    }
    let ap = *p - *a;
    let t = (ap.x * ab.x + ap.y * ab.y) / len2;
    let foot = *a + ab * t;
    foot * 2.0 - *p
}

/// Chooses among Gauss–Newton endpoints: lowest residual, and among
/// near-ties the one that agrees best with any AoA, then the one inside
/// the reference triangle.
fn pick_candidate(fixes: &[ReferenceFix], candidates: Vec<Position>) -> Result<Position> {
    let scored: Vec<(f64, Position)> = candidates
        .into_iter()
        .map(|p| (rms_residual(fixes, &p), p))
        .collect();
    let min = scored
        .iter()
        .map(|(r, _)| *r)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual: min,
        });
    }
    let scale = fixes.iter().map(|f| f.distance).fold(1.0, f64::max);
    let tie = (min * 0.5).max(1e-9 * scale);
    let near: Vec<Position> = scored
        .iter()
        .filter(|(r, _)| *r <= min + tie)
        .map(|(_, p)| *p)
        .collect();

    let has_aoa = fixes.iter().any(|f| f.aoa.is_some());
    let key = |p: &Position| -> (f64, f64, f64) {
        let aoa_err = if has_aoa {
            fixes
                .iter()
                .filter_map(|f| {
                    let a = f.aoa?;
                    let b = f.position.bearing_to(p).ok()?;
                    Some(angle_diff_deg(a, b).abs())
                })
                .sum()
        } else {
            0.0
        };
        let outside = if inside_triangle(p, fixes) { 0.0 } else { 1.0 };
        (aoa_err, outside, rms_residual(fixes, p))
    };
    near.into_iter()
        .min_by(|a, b| {
            let (ka, kb) = (key(a), key(b));
            ka.0.total_cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(ka.2.total_cmp(&kb.2))
        })
        .ok_or(Error::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual: f64::NAN,
        })
}

fn inside_triangle(p: &Position, fixes: &[ReferenceFix]) -> bool {
    let (a, b, c) = (fixes[0].position, fixes[1].position, fixes[2].position);
    let s = |u: &Position, v: &Position| (v.x - u.x) * (p.y - u.y) - (v.y - u.y) * (p.x - u.x);
    let (s1, s2, s3) = (s(&a, &b), s(&b, &c), s(&c, &a));
    (s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0) || (s1 <= 0.0 && s2 <= 0.0 && s3 <= 0.0)
}

/// Gaussian elimination with partial pivoting on the leading `dim x dim` block.
fn solve(mut a: [[f64; 3]; 3], mut b: [f64; 3], dim: usize) -> Option<[f64; 3]> {
    let scale = (0..dim)
        .flat_map(|r| (0..dim).map(move |c| (r, c)))
        .map(|(r, c)| a[r][c].abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..dim {
        let pivot = (col..dim).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..dim {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[row][col..dim].iter_mut().zip(&pivot_row[col..dim]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..dim).rev() {
        let s: f64 = (row + 1..dim).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{exchange_packets, seeded_rng};

    fn exact(refs: &[Position], target: Position) -> Vec<ReferenceFix> {
        refs.iter()
            .map(|r| ReferenceFix::new(*r, r.distance(&target)))
            .collect()
    }

    fn close(a: &Position, b: &Position, tol: f64) -> bool {
        a.distance(b) <= tol
    }

    #[test]
    fn triangulation_example() {
        let refs = [Position::new(0.0, 0.0), Position::new(100.0, 0.0), Position::new(0.0, 100.0)];
        let fixes = exact(&refs, Position::new(30.0, 40.0));
        // frozen forward distances
        assert!((fixes[0].distance - 50.0).abs() < 1e-12);
        assert!((fixes[1].distance - 80.6226).abs() < 1e-4);
        assert!((fixes[2].distance - 67.0820).abs() < 1e-4);
        let est = triangulate(&fixes).unwrap();
        assert!(close(&est.position, &Position::new(30.0, 40.0), 1e-6));
        assert!(est.residual < 1e-9);
        assert_eq!(est.method, Method::Triangulation);
    }

    #[test]
    fn triangulation_at_reference() {
        let refs = [Position::new(0.0, 0.0), Position::new(100.0, 0.0), Position::new(0.0, 100.0)];
        let est = triangulate(&exact(&refs, refs[1])).unwrap();
        assert!(close(&est.position, &refs[1], 1e-6));
    }

    #[test]
    fn collinear_references_rejected() {
        let refs = [Position::new(0.0, 0.0), Position::new(50.0, 0.0), Position::new(100.0, 0.0)];
        assert!(matches!(
            triangulate(&exact(&refs, Position::new(10.0, 10.0))),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(triangulate(&exact(&refs[..2], Position::ORIGIN)).is_err());
    }

    #[test]
    fn aoa_breaks_near_mirror() {
        // A long thin reference triangle: without AoA the mirror image
        // across the long edge fits almost equally well.
        let refs = [Position::new(0.0, 0.0), Position::new(200.0, 0.0), Position::new(100.0, 0.5)];
        let truth = Position::new(80.0, -60.0);
        let fixes: Vec<_> = exact(&refs, truth)
            .into_iter()
            .map(|f| {
                let a = f.position.bearing_to(&truth).unwrap();
                f.with_aoa(a)
            })
            .collect();
        let est = triangulate(&fixes).unwrap();
        assert!(close(&est.position, &truth, 1e-6), "{:?}", est.position);
    }

    #[test]
    fn multilateration_3d_example() {
        let refs = [
            Position::new_3d(0.0, 0.0, 0.0),
            Position::new_3d(100.0, 0.0, 0.0),
            Position::new_3d(0.0, 100.0, 0.0),
            Position::new_3d(0.0, 0.0, 100.0),
        ];
        let truth = Position::new_3d(20.0, 30.0, 40.0);
        let fixes = exact(&refs, truth);
        for (f, d) in fixes.iter().zip([53.8516, 94.3398, 83.0662, 70.0]) {
            assert!((f.distance - d).abs() < 1e-4);
        }
        let est = multilaterate(&fixes).unwrap();
        assert!(close(&est.position, &truth, 1e-6));
    }

    #[test]
    fn multilateration_at_reference_and_errors() {
        let refs = [
            Position::new(0.0, 0.0),
            Position::new(100.0, 0.0),
            Position::new(100.0, 100.0),
            Position::new(0.0, 100.0),
        ];
        let est = multilaterate(&exact(&refs, refs[2])).unwrap();
        assert!(close(&est.position, &refs[2], 1e-6));
        assert!(matches!(
            multilaterate(&exact(&refs[..3], refs[0])),
            Err(Error::InsufficientFixes { need: 4, have: 3 })
        ));
        let line: Vec<_> = (0..4).map(|i| Position::new(i as f64 * 10.0, 0.0)).collect();
        assert!(matches!(
            multilaterate(&exact(&line, Position::new(5.0, 5.0))),
            Err(Error::DegenerateGeometry(_))
        ));
        let plane: Vec<_> = (0..4)
            .map(|i| Position::new_3d(i as f64 * 10.0, (i % 2) as f64 * 10.0, 5.0))
            .collect();
        assert!(matches!(
            multilaterate(&exact(&plane, Position::new_3d(5.0, 5.0, 20.0))),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn outlier_is_flagged_and_dropped() {
        let refs = [
            Position::new(0.0, 0.0),
            Position::new(100.0, 0.0),
            Position::new(100.0, 100.0),
            Position::new(0.0, 100.0),
            Position::new(50.0, 120.0),
        ];
        let truth = Position::new(37.0, 61.0);
        let mut fixes = exact(&refs, truth);
        fixes[3].distance += 20.0;
        let est = multilaterate(&fixes).unwrap();
        assert!(est.residual > 1.0);

        // leave-one-out oracle: the only consistent 4-subset excludes index 3
        let clean: Vec<_> = fixes.iter().enumerate().filter(|(i, _)| *i != 3).map(|(_, f)| *f).collect();
        assert!(multilaterate(&clean).unwrap().residual < 1e-9);

        let (dropped, est) = drop_worst_fix(&fixes).unwrap();
        assert_eq!(dropped, 3);
        assert!(close(&est.position, &truth, 1e-3));
    }

    #[test]
    fn via_origin_examples() {
        let c = 3.0e8;
        let d = derive_distance_via_origin(100e-9, 200e-9, 200e-9, c);
        assert!((d.distance - 30.0).abs() < 1e-6);
        let d = derive_distance_via_origin(0.0, 150e-9, 150e-9, c);
        assert!(d.distance.abs() < 1e-9);
        let d = derive_distance_via_origin(0.0, 100e-9, 200e-9, c);
        assert!(d.clamped);
        assert_eq!(d.distance, 0.0);
    }

    #[test]
    fn via_origin_differs_from_euclidean() {
        // m=(30,0), n=(0,40), C=origin; flight times from noiseless packets
        let radio = RadioModel::default();
        let (m, n, o) = (Position::new(30.0, 0.0), Position::new(0.0, 40.0), Position::ORIGIN);
        let mut rng = seeded_rng(0);
        let t = |a: &Position, b: &Position, rng: &mut SimRng| {
            mean_flight_time(&exchange_packets(a, b, 3, 0.0, 1e-3, &radio, rng)).unwrap()
        };
        let (t_mn, t_mc, t_cn) = (t(&m, &n, &mut rng), t(&m, &o, &mut rng), t(&o, &n, &mut rng));
        let d = derive_distance_via_origin(t_mn, t_mc, t_cn, radio.propagation_speed);
        assert!((d.distance - 40.0).abs() < 1e-6);
        assert!((m.distance(&n) - 50.0).abs() < 1e-12);
    }

    fn square_neighbors() -> Vec<(NodeId, Position)> {
        vec![
            (10, Position::new(20.0, 10.0)),
            (11, Position::new(100.0, 15.0)),
            (12, Position::new(95.0, 90.0)),
            (13, Position::new(25.0, 95.0)),
            (14, Position::new(140.0, 40.0)),
            (15, Position::new(-30.0, 60.0)),
        ]
    }

    #[test]
    fn malicious_fix_is_exact_without_noise() {
        let target = (99, Position::new(59.0, 41.0));
        let fix = localize_malicious(
            5.0,
            &square_neighbors(),
            target,
            target.1,
            &RadioModel::default(),
            &MaliciousLocalizationParams::default(),
            &mut |_, _| 0.0,
            &mut seeded_rng(1),
        )
        .unwrap();
        assert!(close(&fix.estimate.position, &target.1, 1e-6));
        assert_eq!(fix.estimate.method, Method::Multilateration);
        assert_eq!(fix.neighbor_ids.len(), 4);
        assert_eq!(fix.sets_tried, 1);
        assert!(!fix.suspect);
    }

    #[test]
    fn target_is_never_its_own_neighbor() {
        let target = (12, Position::new(95.0, 90.0));
        let fix = localize_malicious(
            0.0,
            &square_neighbors(),
            target,
            target.1,
            &RadioModel::default(),
            &MaliciousLocalizationParams::default(),
            &mut |_, _| 0.0,
            &mut seeded_rng(1),
        )
        .unwrap();
        assert!(!fix.neighbor_ids.contains(&12));
    }

    #[test]
    fn stale_stamps_trigger_new_neighbor_set() {
        let target = (99, Position::new(59.0, 41.0));
        // +50 m on every range toward neighbour 11
        let stale = 50.0 / 3.0e8;
        let fix = localize_malicious(
            0.0,
            &square_neighbors(),
            target,
            target.1,
            &RadioModel::default(),
            &MaliciousLocalizationParams::default(),
            &mut |id, _| if id == 11 { stale } else { 0.0 },
            &mut seeded_rng(1),
        )
        .unwrap();
        assert!(fix.sets_tried >= 2);
        assert!(!fix.neighbor_ids.contains(&11));
        assert!(close(&fix.estimate.position, &target.1, 1e-6));
    }

    #[test]
    fn too_few_neighbors() {
        let target = (99, Position::new(59.0, 41.0));
        let few = &square_neighbors()[..3];
        assert!(matches!(
            localize_malicious(
                0.0,
                few,
                target,
                target.1,
                &RadioModel::default(),
                &MaliciousLocalizationParams::default(),
                &mut |_, _| 0.0,
                &mut seeded_rng(1),
            ),
            Err(Error::InsufficientFixes { .. })
        ));
    }
}
