//! Cubic trajectory curves.
//!
//! A trajectory over a fixed horizon is represented by a pair of cubic
//! polynomials `x(u)`, `y(u)` in normalized time `u = (t - t_start) / (t_end - t_start)`.
//! Curves are obtained by an unweighted least-squares fit against observed
//! points, optionally augmented with two control points: an end point and a
//! "curvature point" that sits on the left normal of the chord midpoint at a
//! signed offset `gamma`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Rigid2, Vec2};

/// Slack used when checking that a time lies inside a curve's span.
const SPAN_EPS: f64 = 1e-9;
/// Chords shorter than this are treated as a stationary agent.
pub const MIN_CHORD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl TimedPoint {
    pub const fn new(t: f64, x: f64, y: f64) -> Self {
        TimedPoint { t, x, y }
    }

    pub fn at(t: f64, p: Vec2) -> Self {
        TimedPoint { t, x: p.x, y: p.y }
    }

    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Time-stamped positions of one agent with uniform spacing `dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    points: Vec<TimedPoint>,
    dt: f64,
}

impl Trajectory {
    /// Tolerance on the spacing between consecutive timestamps.
    pub const DT_TOLERANCE: f64 = 1e-9;

    pub fn new(points: Vec<TimedPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewPoints { required: 2, got: points.len() });
        }
        check_points(&points)?;
        let dt = points[1].t - points[0].t;
        for (i, w) in points.windows(2).enumerate() {
            if ((w[1].t - w[0].t) - dt).abs() > Self::DT_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "non-uniform time step at index {}: {} vs {}",
                    i + 1,
                    w[1].t - w[0].t,
                    dt
                )));
            }
        }
        Ok(Trajectory { points, dt })
    }

    /// Builds a trajectory from positions sampled every `dt` seconds from `t0`.
    pub fn from_positions(t0: f64, dt: f64, positions: &[Vec2]) -> Result<Self> {
        let points = positions
            .iter()
            .enumerate()
            .map(|(k, p)| TimedPoint::at(t0 + k as f64 * dt, *p))
            .collect();
        Trajectory::new(points)
    }

    pub fn points(&self) -> &[TimedPoint] {
        &self.points
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.points.iter().map(TimedPoint::pos).collect()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> TimedPoint {
        self.points[0]
    }

    pub fn last(&self) -> TimedPoint {
        self.points[self.points.len() - 1]
    }

    /// Unit direction of the most recent step with non-zero length.
    pub fn last_heading(&self) -> Option<Vec2> {
        self.points
            .windows(2)
            .rev()
            .find_map(|w| (w[1].pos() - w[0].pos()).normalized())
    }

    pub fn map_positions(&self, f: impl Fn(Vec2) -> Vec2) -> Trajectory {
        let points = self.points.iter().map(|p| TimedPoint::at(p.t, f(p.pos()))).collect();
        Trajectory { points, dt: self.dt }
    }

    /// Concatenates two trajectories sharing `dt`, e.g. a history and its future.
    pub fn concat(&self, other: &Trajectory) -> Result<Trajectory> {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        Trajectory::new(points)
    }
}

fn check_points(points: &[TimedPoint]) -> Result<()> {
    for (i, p) in points.iter().enumerate() {
        if !(p.t.is_finite() && p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::NonFinite("trajectory point"));
        }
        if i > 0 && p.t <= points[i - 1].t {
            return Err(Error::NonIncreasingTime { index: i });
        }
    }
    Ok(())
}

/// `x(u) = a0 + a1 u + a2 u^2 + a3 u^3` (likewise `y`), `u` normalized over `t_span`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCurve {
    pub coeffs_x: [f64; 4],
    pub coeffs_y: [f64; 4],
    pub t_span: (f64, f64),
}

impl CubicCurve {
    pub fn new(coeffs_x: [f64; 4], coeffs_y: [f64; 4], t_span: (f64, f64)) -> Result<Self> {
        if coeffs_x.iter().chain(&coeffs_y).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("curve coefficient"));
        }
        if !(t_span.0.is_finite() && t_span.1.is_finite() && t_span.1 > t_span.0) {
            return Err(Error::InvalidArgument(format!("bad curve span {t_span:?}")));
        }
        Ok(CubicCurve { coeffs_x, coeffs_y, t_span })
    }

    pub fn normalize(&self, t: f64) -> f64 {
        (t - self.t_span.0) / (self.t_span.1 - self.t_span.0)
    }

    /// Position at normalized time `u`; no span check.
    pub fn at_normalized(&self, u: f64) -> Vec2 {
        Vec2::new(horner(&self.coeffs_x, u), horner(&self.coeffs_y, u))
    }

    /// Position at time `t`; no span check.
    pub fn position(&self, t: f64) -> Vec2 {
        self.at_normalized(self.normalize(t))
    }

    pub fn contains_time(&self, t: f64) -> bool {
        t >= self.t_span.0 - SPAN_EPS && t <= self.t_span.1 + SPAN_EPS
    }

    /// The curve mapped through a rigid transform of the plane.
    pub fn transformed(&self, tr: &Rigid2) -> CubicCurve {
        let mut out = *self;
        for k in 0..4 {
            let c = Vec2::new(self.coeffs_x[k], self.coeffs_y[k]);
            let v = if k == 0 { tr.apply(c) } else { tr.apply_vector(c) };
            out.coeffs_x[k] = v.x;
            out.coeffs_y[k] = v.y;
        }
        out
    }
}

fn horner(c: &[f64; 4], u: f64) -> f64 {
    ((c[3] * u + c[2]) * u + c[1]) * u + c[0]
}

/// Least-squares cubic fit of `x` and `y` against normalized time.
///
/// The normal equations are assembled in the centered variable `w = 2u - 1`
/// and converted back to the monomial basis in `u`.
pub fn fit_cubic(points: &[TimedPoint]) -> Result<CubicCurve> {
    if points.len() < 4 {
        return Err(Error::TooFewPoints { required: 4, got: points.len() });
    }
    check_points(points)?;
    let t0 = points[0].t;
    let t1 = points[points.len() - 1].t;
    let span = t1 - t0;

    let mut moments = [0.0f64; 7];
    let mut rhs_x = [0.0f64; 4];
    let mut rhs_y = [0.0f64; 4];
    for p in points {
        let w = 2.0 * (p.t - t0) / span - 1.0;
        let mut pow = 1.0;
        for (k, m) in moments.iter_mut().enumerate() {
            *m += pow;
            if k < 4 {
                rhs_x[k] += pow * p.x;
                rhs_y[k] += pow * p.y;
            }
            pow *= w;
        }
    }
    let mut normal = [[0.0f64; 4]; 4];
    for (r, row) in normal.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = moments[r + c];
        }
    }
    let bx = solve4(normal, rhs_x)?;
    let by = solve4(normal, rhs_y)?;
    CubicCurve::new(centered_to_unit(bx), centered_to_unit(by), (t0, t1))
}

/// Re-expresses `b0 + b1 w + b2 w^2 + b3 w^3` with `w = 2u - 1` in powers of `u`.
fn centered_to_unit(b: [f64; 4]) -> [f64; 4] {
    [
        b[0] - b[1] + b[2] - b[3],
        2.0 * b[1] - 4.0 * b[2] + 6.0 * b[3],
        4.0 * b[2] - 12.0 * b[3],
        8.0 * b[3],
    ]
}

/// Gaussian elimination with partial pivoting.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Result<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::InvalidArgument("singular normal equations".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (v, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *v -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let mut s = b[row];
        for k in row + 1..4 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Evaluates the curve at each time. Times must lie within the curve's span.
pub fn sample_curve(curve: &CubicCurve, times: &[f64]) -> Result<Vec<TimedPoint>> {
    if times.is_empty() {
        return Err(Error::Empty("sample times"));
    }
    times
        .iter()
        .map(|&t| {
            if !curve.contains_time(t) {
                return Err(Error::OutOfSpan { t, start: curve.t_span.0, end: curve.t_span.1 });
            }
            Ok(TimedPoint::at(t, curve.position(t)))
        })
        .collect()
}

/// Control points that shape a proposal: the current (last observed) point,
/// the end point at `t_end`, and the signed bend `gamma` (positive = left of travel).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlGeometry {
    pub current: TimedPoint,
    pub end: Vec2,
    pub t_end: f64,
    pub gamma: f64,
}

impl ControlGeometry {
    pub fn new(current: TimedPoint, end: Vec2, t_end: f64, gamma: f64) -> Self {
        ControlGeometry { current, end, t_end, gamma }
    }

    fn frame(&self) -> Result<ChordFrame> {
        chord_frame(self.current, TimedPoint::at(self.t_end, self.end))
    }
}

struct ChordFrame {
    mid: Vec2,
    normal: Vec2,
    t_mid: f64,
}

fn chord_frame(current: TimedPoint, end: TimedPoint) -> Result<ChordFrame> {
    let chord = end.pos() - current.pos();
    if !chord.is_finite() {
        return Err(Error::NonFinite("chord"));
    }
    if chord.norm() <= MIN_CHORD {
        return Err(Error::DegenerateChord);
    }
    let dir = chord * (1.0 / chord.norm());
    Ok(ChordFrame {
        mid: current.pos().lerp(end.pos(), 0.5),
        normal: dir.perp(),
        t_mid: 0.5 * (current.t + end.t),
    })
}

/// The chord midpoint pushed `gamma` meters along the chord's left normal.
pub fn curvature_point(geom: &ControlGeometry) -> Result<TimedPoint> {
    if !geom.gamma.is_finite() {
        return Err(Error::NonFinite("gamma"));
    }
    let f = geom.frame()?;
    Ok(TimedPoint::at(f.t_mid, f.mid + f.normal * geom.gamma))
}

/// Fits a cubic through the history plus the curvature point and end point.
///
/// A stationary agent (degenerate chord) has no defined normal; the curvature
/// point is then left out and the fit uses the history and end point only.
pub fn fit_from_controls(history: &Trajectory, geom: &ControlGeometry) -> Result<CubicCurve> {
    let last = history.last();
    if !(geom.t_end > last.t) {
        return Err(Error::InvalidArgument(format!(
            "end time {} must follow the last history time {}",
            geom.t_end, last.t
        )));
    }
    if !geom.end.is_finite() {
        return Err(Error::NonFinite("end point"));
    }
    let mut pts = Vec::with_capacity(history.len() + 2);
    pts.extend_from_slice(history.points());
    match curvature_point(geom) {
        Ok(c) => pts.push(c),
        Err(Error::DegenerateChord) => {}
        Err(e) => return Err(e),
    }
    pts.push(TimedPoint::at(geom.t_end, geom.end));
    fit_cubic(&pts)
}

/// Signed offset of the curve from the chord midpoint, measured at the chord's
/// mid time along the left normal. Inverse of the curvature-point construction.
pub fn gamma_of(curve: &CubicCurve, current: TimedPoint, end: TimedPoint) -> Result<f64> {
    let f = chord_frame(current, end)?;
    Ok((curve.position(f.t_mid) - f.mid).dot(f.normal))
}
