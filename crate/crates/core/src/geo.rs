//! Map geometry and the movable-area prior.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::proposal::{project_to_polyline, Proposal, ReferenceLine};
use crate::{Error, Result, Rigid2, Vec2};

/// Points within this distance of an edge count as on the boundary.
const BOUNDARY_EPS: f64 = 1e-9;

/// A simple polygon, implicitly closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl TryFrom<Vec<[f64; 2]>> for Polygon {
    type Error = Error;
    fn try_from(raw: Vec<[f64; 2]>) -> Result<Self> {
        Polygon::new(raw.into_iter().map(Vec2::from).collect())
    }
}

impl From<Polygon> for Vec<[f64; 2]> {
    fn from(p: Polygon) -> Self {
        p.vertices.iter().map(|v| [v.x, v.y]).collect()
    }
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!("needs at least 3 vertices, got {}", vertices.len())));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(Error::InvalidPolygon(format!("duplicate consecutive vertex at index {i}")));
            }
        }
        Ok(Polygon { vertices })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Nonzero winding number test; boundary points are inside.
    pub fn contains(&self, p: Vec2) -> bool {
        let mut winding = 0i32;
        for (a, b) in self.edges() {
            if segment_distance(p, a, b) <= BOUNDARY_EPS {
                return true;
            }
            let side = (b - a).cross(p - a);
            if a.y <= p.y {
                if b.y > p.y && side > 0.0 {
                    winding += 1;
                }
            } else if b.y <= p.y && side < 0.0 {
                winding -= 1;
            }
        }
        winding != 0
    }

    /// Distance from `p` to the nearest edge.
    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        self.edges().map(|(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    pub fn transformed(&self, tr: &Rigid2) -> Polygon {
        Polygon { vertices: self.vertices.iter().map(|v| tr.apply(*v)).collect() }
    }
}

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.distance(a + ab * t)
}

/// Union of polygons the agent may occupy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MovableArea {
    pub polygons: Vec<Polygon>,
}

impl MovableArea {
    pub fn new(polygons: Vec<Polygon>) -> Result<Self> {
        if polygons.is_empty() {
            return Err(Error::InvalidPolygon("area has no polygons".into()));
        }
        Ok(MovableArea { polygons })
    }

    pub fn single(polygon: Polygon) -> Self {
        MovableArea { polygons: vec![polygon] }
    }

    /// Signed distance to the union's boundary: positive inside, negative outside.
    ///
    /// Inside, this is the distance to the boundary of the containing polygon
    /// nearest an edge, which is exact for disjoint polygons and a lower bound
    /// for overlapping ones.
    pub fn signed_boundary_distance(&self, p: Vec2) -> f64 {
        let d = self.polygons.iter().map(|poly| poly.boundary_distance(p)).fold(f64::INFINITY, f64::min);
        if point_in_area(p, self) {
            self.polygons
                .iter()
                .filter(|poly| poly.contains(p))
                .map(|poly| poly.boundary_distance(p))
                .fold(0.0, f64::max)
        } else {
            -d
        }
    }

    pub fn transformed(&self, tr: &Rigid2) -> MovableArea {
        MovableArea { polygons: self.polygons.iter().map(|p| p.transformed(tr)).collect() }
    }
}

pub fn point_in_area(p: Vec2, area: &MovableArea) -> bool {
    area.polygons.iter().any(|poly| poly.contains(p))
}

/// Fraction of `points` outside the area.
pub fn outside_ratio(points: &[Vec2], area: &MovableArea) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("points"));
    }
    let outside = points.iter().filter(|p| !point_in_area(**p, area)).count();
    Ok(outside as f64 / points.len() as f64)
}

/// `score * exp(-r^2 / sigma^2)`.
pub fn decay_score(score: f64, r: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
    }
    Ok(score * (-(r * r) / (sigma * sigma)).exp())
}

/// Decays each proposal's score by how much of its future leaves the area.
/// Unscored proposals are treated as scoring 0. Geometry is left untouched.
pub fn apply_safety_filter(proposals: &mut [Proposal], area: &MovableArea, sigma: f64) -> Result<()> {
    for p in proposals.iter_mut() {
        let r = outside_ratio(&p.future_positions(), area)?;
        p.score = Some(decay_score(p.score_or_zero(), r, sigma)?);
    }
    Ok(())
}

/// Drivable area compliance: share of all predicted positions inside the area.
pub fn dac(trajectories: &[Vec<Vec2>], drivable: &MovableArea) -> Result<f64> {
    let total: usize = trajectories.iter().map(Vec::len).sum();
    if trajectories.is_empty() || total == 0 {
        return Err(Error::Empty("predicted trajectories"));
    }
    let inside = trajectories.iter().flatten().filter(|p| point_in_area(**p, drivable)).count();
    Ok(inside as f64 / total as f64)
}

/// Road context around an agent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapContext {
    pub reference_lines: Vec<ReferenceLine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub movable_area: Option<MovableArea>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drivable_area: Option<MovableArea>,
}

impl MapContext {
    pub fn new(
        reference_lines: Vec<ReferenceLine>,
        movable_area: Option<MovableArea>,
        drivable_area: Option<MovableArea>,
    ) -> Result<Self> {
        let ctx = MapContext { reference_lines, movable_area, drivable_area };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for l in &self.reference_lines {
            if !seen.insert(l.id()) {
                return Err(Error::Schema(format!("duplicate reference line id `{}`", l.id())));
            }
        }
        for area in [&self.movable_area, &self.drivable_area].into_iter().flatten() {
            if area.polygons.is_empty() {
                return Err(Error::InvalidPolygon("area has no polygons".into()));
            }
        }
        Ok(())
    }

    /// Reference line closest to `p`, with its projection `(s, lateral)`.
    pub fn nearest_line(&self, p: Vec2) -> Option<(&ReferenceLine, f64, f64)> {
        self.reference_lines
            .iter()
            .map(|l| {
                let (s, lat) = project_to_polyline(p, l);
                (l, s, lat)
            })
            .min_by(|a, b| a.2.abs().total_cmp(&b.2.abs()))
    }

    pub fn transformed(&self, tr: &Rigid2) -> MapContext {
        MapContext {
            reference_lines: self.reference_lines.iter().map(|l| l.transformed(tr)).collect(),
            movable_area: self.movable_area.as_ref().map(|a| a.transformed(tr)),
            drivable_area: self.drivable_area.as_ref().map(|a| a.transformed(tr)),
        }
    }

    /// Reflection across the world x-axis.
    pub fn mirrored(&self) -> MapContext {
        let flip = |p: &Vec2| Vec2::new(p.x, -p.y);
        let area = |a: &MovableArea| MovableArea {
            polygons: a
                .polygons
                .iter()
                .map(|poly| Polygon { vertices: poly.vertices.iter().map(flip).collect() })
                .collect(),
        };
        MapContext {
            reference_lines: self
                .reference_lines
                .iter()
                .map(|l| {
                    ReferenceLine::new(l.id(), l.points().iter().map(flip).collect())
                        .expect("reflection preserves segment lengths")
                })
                .collect(),
            movable_area: self.movable_area.as_ref().map(area),
            drivable_area: self.drivable_area.as_ref().map(area),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{CubicCurve, TimedPoint};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poly(v: &[(f64, f64)]) -> Polygon {
        Polygon::new(v.iter().map(|&p| Vec2::from(p)).collect()).unwrap()
    }

    fn unit_square() -> MovableArea {
        MovableArea::single(poly(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]))
    }

    fn l_shape() -> Polygon {
        poly(&[(0.0, 0.0), (4.0, 0.0), (4.0, 1.0), (1.0, 1.0), (1.0, 4.0), (0.0, 4.0)])
    }

    /// Even-odd ray casting toward +x; only valid away from the boundary.
    fn ray_cast(p: Vec2, poly: &Polygon) -> bool {
        let v = poly.vertices();
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            if (v[i].y > p.y) != (v[j].y > p.y) {
                let x = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    #[test]
    fn containment_examples() {
        let sq = unit_square();
        assert!(point_in_area(Vec2::new(0.5, 0.5), &sq));
        assert!(!point_in_area(Vec2::new(2.0, 0.0), &sq));
        assert!(point_in_area(Vec2::new(1.0, 0.5), &sq));
        assert!(point_in_area(Vec2::new(0.0, 0.0), &sq));
        let l = MovableArea::single(l_shape());
        let notch = Vec2::new(3.0, 3.0);
        assert_eq!(point_in_area(notch, &l), ray_cast(notch, &l_shape()));
        assert!(!point_in_area(notch, &l));
    }

    #[test]
    fn polygon_validation() {
        assert!(Polygon::new(vec![Vec2::ZERO, Vec2::new(1.0, 0.0)]).is_err());
        assert!(Polygon::new(vec![Vec2::ZERO, Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]).is_err());
        assert!(MovableArea::new(vec![]).is_err());
    }

    #[test]
    fn outside_ratio_examples() {
        let sq = unit_square();
        let inside = [Vec2::new(0.1, 0.1), Vec2::new(0.5, 0.9)];
        assert_eq!(outside_ratio(&inside, &sq).unwrap(), 0.0);
        let mixed: Vec<Vec2> = (0..6).map(|k| Vec2::new(if k % 2 == 0 { 0.5 } else { 3.0 }, 0.5)).collect();
        assert_eq!(outside_ratio(&mixed, &sq).unwrap(), 0.5);
        assert!(outside_ratio(&[], &sq).is_err());

        // a straight walk across the L-shape's inner corner, checked point by point
        let l = l_shape();
        let walk: Vec<Vec2> = (0..40).map(|k| Vec2::new(0.53 + 0.1 * k as f64, 0.53 + 0.1 * k as f64)).collect();
        let oracle = walk.iter().filter(|p| !ray_cast(**p, &l)).count() as f64 / walk.len() as f64;
        let boundary_free = walk.iter().all(|p| l.boundary_distance(*p) > 1e-6);
        assert!(boundary_free);
        assert_eq!(outside_ratio(&walk, &MovableArea::single(l)).unwrap(), oracle);
    }

    #[test]
    fn decay_examples() {
        assert_eq!(decay_score(0.7, 0.0, 0.5).unwrap(), 0.7);
        assert!((decay_score(1.0, 0.5, 0.5).unwrap() - 0.367_879).abs() < 1e-6);
        assert!((decay_score(0.8, 1.0, 0.5).unwrap() - 0.014_652).abs() < 1e-6);
        assert!(decay_score(1.0, 0.5, 0.0).is_err());
    }

    fn proposal_through(points: &[Vec2], score: f64) -> Proposal {
        Proposal {
            end_point: points[points.len() - 1],
            gamma: 0.0,
            curve: CubicCurve::new([0.0; 4], [0.0; 4], (0.0, 10.0)).unwrap(),
            future_points: points.iter().enumerate().map(|(k, p)| TimedPoint::at(k as f64, *p)).collect(),
            score: Some(score),
            refined: false,
            reference_line_id: None,
            anchor: Vec2::ZERO,
        }
    }

    #[test]
    fn safety_filter_examples() {
        let sq = unit_square();
        let inside = [Vec2::new(0.2, 0.2), Vec2::new(0.4, 0.4)];
        let outside = [Vec2::new(2.2, 0.2), Vec2::new(2.4, 0.4)];
        let half = [Vec2::new(0.2, 0.2), Vec2::new(2.4, 0.4)];
        let mut props = vec![
            proposal_through(&inside, 0.9),
            proposal_through(&outside, 0.8),
            proposal_through(&half, 0.6),
            proposal_through(&half, 0.5),
        ];
        let before = props.clone();
        apply_safety_filter(&mut props, &sq, 0.5).unwrap();
        assert_eq!(props[0].score, Some(0.9));
        assert!((props[1].score.unwrap() - 0.8 * (-1.0f64 / 0.25).exp()).abs() < 1e-15);
        assert!(props[2].score > props[3].score);
        for (a, b) in props.iter().zip(&before) {
            assert_eq!(a.future_points, b.future_points);
            assert!(a.score <= b.score);
        }
    }

    #[test]
    fn dac_examples() {
        let sq = unit_square();
        let a = vec![Vec2::new(0.5, 0.5), Vec2::new(0.6, 0.6)];
        let b = vec![Vec2::new(5.0, 0.5), Vec2::new(5.0, 0.6)];
        assert_eq!(dac(std::slice::from_ref(&a), &sq).unwrap(), 1.0);
        assert_eq!(dac(&[a, b], &sq).unwrap(), 0.5);
        assert!(dac(&[], &sq).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let area = MovableArea::new(vec![l_shape(), poly(&[(5.0, 5.0), (7.0, 5.0), (6.0, 7.0)])]).unwrap();
        let trajs: Vec<Vec<Vec2>> = (0..20)
            .map(|_| (0..12).map(|_| Vec2::new(rng.random_range(-1.0..8.0), rng.random_range(-1.0..8.0))).collect())
            .collect();
        let inside = trajs
            .iter()
            .flatten()
            .filter(|p| area.polygons.iter().any(|poly| ray_cast(**p, poly)))
            .count();
        assert_eq!(dac(&trajs, &area).unwrap(), inside as f64 / 240.0);
    }

    #[test]
    fn signed_distance_sign() {
        let sq = unit_square();
        assert!((sq.signed_boundary_distance(Vec2::new(0.5, 0.25)) - 0.25).abs() < 1e-12);
        assert!((sq.signed_boundary_distance(Vec2::new(2.0, 0.5)) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn map_rejects_duplicate_ids() {
        let l = ReferenceLine::new("a", vec![Vec2::ZERO, Vec2::new(1.0, 0.0)]).unwrap();
        assert!(MapContext::new(vec![l.clone(), l], None, None).is_err());
    }

    proptest! {
        #[test]
        fn decay_is_monotone(score in 0.01f64..1.0, r1 in 0.0f64..1.0, r2 in 0.0f64..1.0, sigma in 0.05f64..2.0) {
            let a = decay_score(score, r1, sigma).unwrap();
            let b = decay_score(score, r2, sigma).unwrap();
            prop_assert!(a <= score);
            if r1 < r2 { prop_assert!(a >= b); }
            if r1 == 0.0 { prop_assert_eq!(a, score); }
        }
    }
}
