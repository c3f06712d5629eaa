//! Proposal generation.
//!
//! Base proposals enumerate a square grid of end points around a regressed
//! end point and, for each, a set of bend offsets `gamma`; every combination is
//! turned into a cubic through the observed history. Multimodal proposals do
//! the same on a grid laid out along each reference line, starting a
//! regressed distance `d_ep` ahead of the agent's projection onto the line.

use serde::{Deserialize, Serialize};

use crate::curve::{fit_from_controls, sample_curve, ControlGeometry, CubicCurve, TimedPoint, Trajectory};
use crate::{Error, Result, Vec2};

const STEP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Full extent of the grid along each axis, meters.
    pub range_m: f64,
    /// Spacing between neighbouring grid points, meters.
    pub interval_m: f64,
    /// Bend offsets tried for every end point, meters.
    pub gammas: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { range_m: 6.0, interval_m: 1.0, gammas: vec![-2.0, -1.0, 0.0, 1.0, 2.0] }
    }
}

impl GridConfig {
    pub fn new(range_m: f64, interval_m: f64, gammas: Vec<f64>) -> Result<Self> {
        let cfg = GridConfig { range_m, interval_m, gammas };
        cfg.validate()?;
        Ok(cfg)
    }

    /// A grid with `steps` intervals across `range_m`; zero steps is a single point.
    pub fn with_steps(range_m: f64, steps: u32, gammas: Vec<f64>) -> Result<Self> {
        if steps == 0 {
            return GridConfig::new(0.0, 1.0, gammas);
        }
        GridConfig::new(range_m, range_m / steps as f64, gammas)
    }

    /// Like [`GridConfig::new`] but snaps `interval_m` to the nearest value
    /// that divides `range_m` evenly, e.g. 10 m at 1.67 m becomes 6 steps.
    pub fn snapped(range_m: f64, interval_m: f64, gammas: Vec<f64>) -> Result<Self> {
        if !(interval_m > 0.0) || !(range_m >= 0.0) {
            return Err(Error::InvalidGrid(format!("range {range_m}, interval {interval_m}")));
        }
        let steps = (range_m / interval_m).round();
        if steps == 0.0 {
            return GridConfig::new(0.0, interval_m, gammas);
        }
        GridConfig::with_steps(range_m, steps as u32, gammas)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range_m.is_finite() && self.range_m >= 0.0) {
            return Err(Error::InvalidGrid(format!("range must be >= 0, got {}", self.range_m)));
        }
        if !(self.interval_m.is_finite() && self.interval_m > 0.0) {
            return Err(Error::InvalidGrid(format!("interval must be > 0, got {}", self.interval_m)));
        }
        let ratio = self.range_m / self.interval_m;
        if (ratio - ratio.round()).abs() > STEP_TOLERANCE {
            return Err(Error::InvalidGrid(format!(
                "range {} is not a whole number of {} m intervals",
                self.range_m, self.interval_m
            )));
        }
        if self.gammas.is_empty() {
            return Err(Error::InvalidGrid("gamma set is empty".into()));
        }
        if self.gammas.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidGrid("non-finite gamma".into()));
        }
        Ok(())
    }

    /// Number of intervals across the grid.
    pub fn steps(&self) -> usize {
        (self.range_m / self.interval_m).round() as usize
    }

    /// Grid points per axis.
    pub fn side_count(&self) -> usize {
        self.steps() + 1
    }

    pub fn end_point_count(&self) -> usize {
        self.side_count().pow(2)
    }

    pub fn anchor_count(&self) -> usize {
        self.end_point_count() * self.gammas.len()
    }

    /// Symmetric per-axis offsets from the grid center, ascending.
    pub fn axis_offsets(&self) -> Vec<f64> {
        let steps = self.steps();
        let half = steps as f64 / 2.0;
        (0..=steps).map(|k| (k as f64 - half) * self.interval_m).collect()
    }
}

/// Axis-aligned end-point grid centered at `center`, `i` (x) outer, `j` (y) inner.
pub fn generate_end_grid(center: Vec2, cfg: &GridConfig) -> Result<Vec<Vec2>> {
    generate_end_grid_oriented(center, Vec2::new(1.0, 0.0), cfg)
}

/// End-point grid whose first axis is `axis` (unit length) and second axis its left normal.
pub fn generate_end_grid_oriented(center: Vec2, axis: Vec2, cfg: &GridConfig) -> Result<Vec<Vec2>> {
    cfg.validate()?;
    let normal = axis.perp();
    let offsets = cfg.axis_offsets();
    let mut out = Vec::with_capacity(cfg.end_point_count());
    for &a in &offsets {
        for &b in &offsets {
            out.push(center + axis * a + normal * b);
        }
    }
    Ok(out)
}

/// A candidate future trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub end_point: Vec2,
    pub gamma: f64,
    pub curve: CubicCurve,
    pub future_points: Vec<TimedPoint>,
    /// Classification score in `[0, 1]`; `None` until scored.
    pub score: Option<f64>,
    pub refined: bool,
    pub reference_line_id: Option<String>,
    /// Center of the grid this proposal was generated from.
    pub anchor: Vec2,
}

impl Proposal {
    /// Fits and samples a proposal from its control points.
    pub fn build(
        history: &Trajectory,
        end_point: Vec2,
        gamma: f64,
        t_end: f64,
        pred_times: &[f64],
        anchor: Vec2,
        reference_line_id: Option<String>,
    ) -> Result<Self> {
        let geom = ControlGeometry::new(history.last(), end_point, t_end, gamma);
        let curve = fit_from_controls(history, &geom)?;
        let future_points = sample_curve(&curve, pred_times)?;
        Ok(Proposal {
            end_point,
            gamma,
            curve,
            future_points,
            score: None,
            refined: false,
            reference_line_id,
            anchor,
        })
    }

    pub fn future_positions(&self) -> Vec<Vec2> {
        self.future_points.iter().map(TimedPoint::pos).collect()
    }

    pub fn score_or_zero(&self) -> f64 {
        self.score.unwrap_or(0.0)
    }
}

fn check_pred_times(history: &Trajectory, t_end: f64, pred_times: &[f64]) -> Result<()> {
    if pred_times.is_empty() {
        return Err(Error::Empty("prediction times"));
    }
    let t_last = history.last().t;
    for &t in pred_times {
        if !(t > t_last && t <= t_end + 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "prediction time {t} outside ({t_last}, {t_end}]"
            )));
        }
    }
    Ok(())
}

/// The history's direction of travel; `+x` for an agent that never moved.
pub fn travel_direction(history: &Trajectory) -> Vec2 {
    history.last_heading().unwrap_or(Vec2::new(1.0, 0.0))
}

/// One proposal per grid end point and gamma, the grid centered at `p_e`.
///
/// The grid is laid out in the agent's frame (first axis along the direction
/// of travel), so generation commutes with rigid motions of the scene.
pub fn generate_base_proposals(
    history: &Trajectory,
    p_e: Vec2,
    cfg: &GridConfig,
    t_end: f64,
    pred_times: &[f64],
) -> Result<Vec<Proposal>> {
    check_pred_times(history, t_end, pred_times)?;
    let ends = generate_end_grid_oriented(p_e, travel_direction(history), cfg)?;
    let mut out = Vec::with_capacity(cfg.anchor_count());
    for end in ends {
        for &gamma in &cfg.gammas {
            out.push(Proposal::build(history, end, gamma, t_end, pred_times, p_e, None)?);
        }
    }
    Ok(out)
}

/// A lane centerline a vehicle may follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReferenceLineRaw", into = "ReferenceLineRaw")]
pub struct ReferenceLine {
    id: String,
    points: Vec<Vec2>,
    arc: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ReferenceLineRaw {
    id: String,
    points: Vec<[f64; 2]>,
}

impl TryFrom<ReferenceLineRaw> for ReferenceLine {
    type Error = Error;
    fn try_from(raw: ReferenceLineRaw) -> Result<Self> {
        ReferenceLine::new(raw.id, raw.points.into_iter().map(Vec2::from).collect())
    }
}

impl From<ReferenceLine> for ReferenceLineRaw {
    fn from(line: ReferenceLine) -> Self {
        ReferenceLineRaw { id: line.id, points: line.points.iter().map(|p| [p.x, p.y]).collect() }
    }
}

impl ReferenceLine {
    pub fn new(id: impl Into<String>, points: Vec<Vec2>) -> Result<Self> {
        let id = id.into();
        let bad = |reason: &str| Error::InvalidLine { id: id.clone(), reason: reason.into() };
        if points.len() < 2 {
            return Err(bad("needs at least 2 points"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite coordinate"));
        }
        let mut arc = Vec::with_capacity(points.len());
        arc.push(0.0);
        for w in points.windows(2) {
            let len = w[0].distance(w[1]);
            if len <= 0.0 {
                return Err(bad("consecutive duplicate points"));
            }
            arc.push(arc[arc.len() - 1] + len);
        }
        Ok(ReferenceLine { id, points, arc })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    /// Cumulative arc length at each vertex.
    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc
    }

    pub fn length(&self) -> f64 {
        self.arc[self.arc.len() - 1]
    }

    fn segment_dir(&self, k: usize) -> Vec2 {
        (self.points[k + 1] - self.points[k]) * (1.0 / (self.arc[k + 1] - self.arc[k]))
    }

    /// Point and tangent at arc length `s`, extrapolating linearly past either end.
    pub(crate) fn point_at_extended(&self, s: f64) -> (Vec2, Vec2) {
        let n_seg = self.points.len() - 1;
        let k = self.arc.partition_point(|&a| a <= s).saturating_sub(1).min(n_seg - 1);
        let dir = self.segment_dir(k);
        (self.points[k] + dir * (s - self.arc[k]), dir)
    }

    /// Arc lengths are recomputed from the moved points, so the result equals
    /// a line built (or loaded) from those points.
    pub fn transformed(&self, tr: &crate::Rigid2) -> ReferenceLine {
        let points: Vec<Vec2> = self.points.iter().map(|p| tr.apply(*p)).collect();
        match ReferenceLine::new(self.id.clone(), points.clone()) {
            Ok(line) => line,
            // rounding collapsed two vertices; keep the original spacing
            Err(_) => ReferenceLine { id: self.id.clone(), points, arc: self.arc.clone() },
        }
    }
}

/// Point at arc length `s` along the line and the unit tangent of its segment.
/// Beyond the last vertex the final segment is extended.
pub fn arclength_point(line: &ReferenceLine, s: f64) -> Result<(Vec2, Vec2)> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!("arc length must be finite and >= 0, got {s}")));
    }
    Ok(line.point_at_extended(s))
}

/// Arc length of the closest point on the line and the signed distance to it
/// (positive to the left of the tangent). Ties go to the smaller arc length.
pub fn project_to_polyline(p: Vec2, line: &ReferenceLine) -> (f64, f64) {
    let mut best: Option<(f64, f64, f64)> = None; // (distance, s, signed)
    for k in 0..line.points.len() - 1 {
        let a = line.points[k];
        let seg_len = line.arc[k + 1] - line.arc[k];
        let dir = line.segment_dir(k);
        let along = (p - a).dot(dir).clamp(0.0, seg_len);
        let closest = a + dir * along;
        let offset = p - closest;
        let dist = offset.norm();
        let signed = if dir.cross(offset) >= 0.0 { dist } else { -dist };
        let better = match best {
            None => true,
            Some((d, _, _)) => dist < d - 1e-12 * (1.0 + d),
        };
        if better {
            best = Some((dist, line.arc[k] + along, signed));
        }
    }
    let (_, s, lateral) = best.expect("reference line has at least one segment");
    (s, lateral)
}

/// Proposals on a line-following grid for every reference line.
///
/// For each line the grid starts at `s0 = s(current) + d_ep`; grid rows walk
/// along the line in arc length and columns step along the local left normal.
pub fn generate_multimodal_proposals(
    history: &Trajectory,
    lines: &[ReferenceLine],
    d_ep: f64,
    cfg: &GridConfig,
    t_end: f64,
    pred_times: &[f64],
) -> Result<Vec<Proposal>> {
    if lines.is_empty() {
        return Err(Error::Empty("reference lines"));
    }
    if !(d_ep >= 0.0) || !d_ep.is_finite() {
        return Err(Error::InvalidArgument(format!("d_ep must be finite and >= 0, got {d_ep}")));
    }
    cfg.validate()?;
    check_pred_times(history, t_end, pred_times)?;
    let current = history.last().pos();
    let offsets = cfg.axis_offsets();
    let mut out = Vec::with_capacity(lines.len() * cfg.anchor_count());
    for line in lines {
        let (s_cur, _) = project_to_polyline(current, line);
        let s0 = s_cur + d_ep;
        let (anchor, _) = line.point_at_extended(s0);
        for &a in &offsets {
            let (base, tangent) = line.point_at_extended(s0 + a);
            for &b in &offsets {
                let end = base + tangent.perp() * b;
                for &gamma in &cfg.gammas {
                    out.push(Proposal::build(
                        history,
                        end,
                        gamma,
                        t_end,
                        pred_times,
                        anchor,
                        Some(line.id.clone()),
                    )?);
                }
            }
        }
    }
    Ok(out)
}
