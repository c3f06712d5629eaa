//! Seeded synthetic scenes.
//!
//! Every scene holds one target agent (`"target"`). Scenes are built in a
//! local frame and then placed with a random rigid pose, so absolute
//! coordinates carry no information.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{TimedPoint, Trajectory};
use crate::geo::{MapContext, MovableArea, Polygon};
use crate::pipeline::scene::{Agent, AgentType, Scene};
use crate::proposal::ReferenceLine;
use crate::seed::mix_seed;
use crate::{Error, Horizon, Result, Rigid2, Vec2};

pub const TARGET_AGENT: &str = "target";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ConstantVelocity,
    ConstantAcceleration,
    LaneFollowing,
    /// Intersection approach with left, straight and right lanes.
    Turn,
    /// Intersection with two lanes and a history that does not reveal which is taken.
    TwoIntention,
    /// T-junction where the approach road ends; left or right, equally likely.
    TJunction,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::ConstantVelocity,
        Family::ConstantAcceleration,
        Family::LaneFollowing,
        Family::Turn,
        Family::TwoIntention,
        Family::TJunction,
    ];

    pub fn parse(s: &str) -> Result<Family> {
        Ok(match s {
            "cv" | "constant_velocity" => Family::ConstantVelocity,
            "ca" | "constant_acceleration" => Family::ConstantAcceleration,
            "lane" | "lane_following" => Family::LaneFollowing,
            "turn" => Family::Turn,
            "two_intention" => Family::TwoIntention,
            "t_junction" | "tee" => Family::TJunction,
            other => return Err(Error::InvalidArgument(format!("unknown scene family `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub scenes: usize,
    /// Scene `i` uses `families[i % families.len()]`.
    pub families: Vec<Family>,
    /// Standard deviation of coordinate noise, meters.
    pub noise_std: f64,
    pub seed: u64,
    pub horizon: Horizon,
    /// Place each scene with a random rotation and translation.
    pub random_pose: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            scenes: 100,
            families: vec![Family::ConstantVelocity, Family::ConstantAcceleration, Family::LaneFollowing, Family::Turn],
            noise_std: 0.0,
            seed: 0,
            horizon: Horizon::APOLLOSCAPE,
            random_pose: true,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 {
            return Err(Error::InvalidArgument("scene count must be >= 1".into()));
        }
        if self.families.is_empty() {
            return Err(Error::InvalidArgument("no scene families".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise must be >= 0, got {}", self.noise_std)));
        }
        self.horizon.validate()
    }
}

pub fn synth_dataset(spec: &SynthSpec) -> Result<Vec<Scene>> {
    spec.validate()?;
    (0..spec.scenes)
        .into_par_iter()
        .map(|i| {
            let family = spec.families[i % spec.families.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, i as u64, 0));
            synth_scene(format!("scene_{i:05}"), family, spec, &mut rng)
        })
        .collect()
}

/// Lane width and the half-width of an intersection arm.
const LANE: f64 = 3.5;
/// One lane per direction.
const ARM: f64 = LANE;
const CURB: f64 = 10.0;
/// Distance from the center at which the turn arcs begin.
const JUNCTION: f64 = ARM + CURB;
const ARM_LENGTH: f64 = 60.0;

struct Motion {
    agent_type: AgentType,
    /// Local-frame position at time `t` (seconds since the first frame).
    path: Box<dyn Fn(f64) -> Vec2>,
    map: Option<MapContext>,
}

fn synth_scene(scene_id: String, family: Family, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<Scene> {
    let hz = spec.horizon;
    let total = (hz.obs_frames + hz.pred_frames) as f64 * hz.dt;
    let t_cur = (hz.obs_frames - 1) as f64 * hz.dt;
    let motion = match family {
        Family::ConstantVelocity => constant_velocity(rng),
        Family::ConstantAcceleration => constant_acceleration(rng, total),
        Family::LaneFollowing => lane_following(rng, total)?,
        Family::Turn | Family::TwoIntention | Family::TJunction => intersection(rng, &hz, t_cur, family)?,
    };
    let pose = if spec.random_pose {
        Rigid2::new(rng.random_range(0.0..TAU), Vec2::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)))
    } else {
        Rigid2::new(0.0, Vec2::ZERO)
    };
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let n = hz.obs_frames + hz.pred_frames;
    let points: Vec<TimedPoint> = (0..n)
        .map(|k| {
            let t = k as f64 * hz.dt;
            let p = pose.apply((motion.path)(t));
            let jitter = if spec.noise_std > 0.0 { Vec2::new(noise.sample(rng), noise.sample(rng)) } else { Vec2::ZERO };
            TimedPoint::at(t, p + jitter)
        })
        .collect();
    let history = Trajectory::new(points[..hz.obs_frames].to_vec())?;
    let future = Trajectory::new(points[hz.obs_frames..].to_vec())?;
    let agent = Agent { agent_type: motion.agent_type, history, future: Some(future) };
    Ok(Scene {
        scene_id,
        agents: BTreeMap::from([(TARGET_AGENT.to_string(), agent)]),
        map: motion.map.map(|m| m.transformed(&pose)),
    })
}

fn constant_velocity(rng: &mut ChaCha8Rng) -> Motion {
    let (agent_type, speed) = match rng.random_range(0..3) {
        0 => (AgentType::Pedestrian, rng.random_range(0.8..1.8)),
        1 => (AgentType::Cyclist, rng.random_range(3.0..6.0)),
        _ => (AgentType::Vehicle, rng.random_range(5.0..15.0)),
    };
    Motion { agent_type, path: Box::new(move |t| Vec2::new(speed * t, 0.0)), map: None }
}

fn constant_acceleration(rng: &mut ChaCha8Rng, total: f64) -> Motion {
    let v0: f64 = rng.random_range(4.0..14.0);
    // keep moving forward until the last frame
    let a_min = ((0.5 - v0) / total).max(-2.0);
    let a = rng.random_range(a_min..2.0);
    Motion { agent_type: AgentType::Vehicle, path: Box::new(move |t| Vec2::new(v0 * t + 0.5 * a * t * t, 0.0)), map: None }
}

fn arc(center: Vec2, radius: f64, from: f64, to: f64, segments: usize) -> Vec<Vec2> {
    (0..=segments)
        .map(|k| {
            let phi = from + (to - from) * k as f64 / segments as f64;
            center + Vec2::new(phi.cos(), phi.sin()) * radius
        })
        .collect()
}

/// Closed strip of `half_width` on both sides of a polyline.
fn corridor(points: &[Vec2], half_width: f64) -> Result<Polygon> {
    let n = points.len();
    let normal = |i: usize| {
        let (a, b) = (points[i.saturating_sub(1)], points[(i + 1).min(n - 1)]);
        (b - a).normalized().map(Vec2::perp).unwrap_or(Vec2::new(0.0, 1.0))
    };
    let left = (0..n).map(|i| points[i] + normal(i) * half_width);
    let right: Vec<Vec2> = (0..n).map(|i| points[i] - normal(i) * half_width).collect();
    Polygon::new(left.chain(right.into_iter().rev()).collect())
}

/// Point at arc length `s` along a polyline, clamped to its ends.
fn along(points: &[Vec2], s: f64) -> Vec2 {
    let mut rest = s.max(0.0);
    for w in points.windows(2) {
        let len = w[0].distance(w[1]);
        if rest <= len {
            return w[0].lerp(w[1], rest / len);
        }
        rest -= len;
    }
    points[points.len() - 1]
}

fn polyline_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

fn lane_following(rng: &mut ChaCha8Rng, total: f64) -> Result<Motion> {
    let v0: f64 = rng.random_range(6.0..14.0);
    let a: f64 = rng.random_range(-0.5..0.5);
    let radius: f64 = rng.random_range(25.0..80.0);
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let start: f64 = rng.random_range(0.0..20.0);
    let travel = v0 * total + 0.5 * a.max(0.0) * total * total;
    let arc_len = start + travel + 30.0;
    let segments = (arc_len.ceil() as usize).max(8);
    let mut points = vec![Vec2::new(-20.0, 0.0)];
    // arc tangent to the x-axis at the origin, bending toward `side`
    let center = Vec2::new(0.0, side * radius);
    let phi0 = -side * FRAC_PI_2;
    points.extend(arc(center, radius, phi0, phi0 + side * arc_len / radius, segments));
    let line = ReferenceLine::new("lane", points.clone())?;
    // vehicles may use the whole road
    let road = MovableArea::single(corridor(&points, LANE)?);
    let map = MapContext::new(vec![line], Some(road.clone()), Some(road))?;
    let s0 = 20.0 + start;
    Ok(Motion {
        agent_type: AgentType::Vehicle,
        path: Box::new(move |t| along(&points, s0 + v0 * t + 0.5 * a * t * t)),
        map: Some(map),
    })
}

/// Cross-shaped road area: two arms of half-width `ARM` meeting at the origin,
/// with the block corners rounded by curbs of radius `CURB`. Without the
/// northern arm the road is a T-junction.
fn cross_polygon(north_arm: bool) -> Result<Polygon> {
    let (w, j, l) = (ARM, JUNCTION, ARM_LENGTH + 5.0);
    let fillet = |cx: f64, cy: f64, from: f64, to: f64| arc(Vec2::new(cx, cy), CURB, from, to, 8);
    let mut v = vec![Vec2::new(w, -l)];
    v.extend(fillet(j, -j, PI, FRAC_PI_2));
    v.extend([Vec2::new(l, -w), Vec2::new(l, w)]);
    if north_arm {
        v.extend(fillet(j, j, 1.5 * PI, PI));
        v.extend([Vec2::new(w, l), Vec2::new(-w, l)]);
        v.extend(fillet(-j, j, 0.0, -FRAC_PI_2));
    }
    v.extend([Vec2::new(-l, w), Vec2::new(-l, -w)]);
    v.extend(fillet(-j, -j, FRAC_PI_2, 0.0));
    v.push(Vec2::new(-w, -l));
    Polygon::new(v)
}

/// Lanes for an agent driving north in the right-hand lane of the southern arm.
fn intersection_lines() -> [(&'static str, Vec<Vec2>); 3] {
    let x = LANE / 2.0;
    let approach = [Vec2::new(x, -ARM_LENGTH), Vec2::new(x, -JUNCTION)];
    let straight = vec![approach[0], approach[1], Vec2::new(x, JUNCTION), Vec2::new(x, ARM_LENGTH)];
    let mut right = approach.to_vec();
    right.extend(arc(Vec2::new(JUNCTION, -JUNCTION), JUNCTION - x, PI, FRAC_PI_2, 16).into_iter().skip(1));
    right.push(Vec2::new(ARM_LENGTH, -x));
    let mut left = approach.to_vec();
    left.extend(arc(Vec2::new(-JUNCTION, -JUNCTION), JUNCTION + x, 0.0, FRAC_PI_2, 16).into_iter().skip(1));
    left.push(Vec2::new(-ARM_LENGTH, x));
    [("straight", straight), ("right", right), ("left", left)]
}

fn intersection(rng: &mut ChaCha8Rng, hz: &Horizon, t_cur: f64, family: Family) -> Result<Motion> {
    let [straight, right, left] = intersection_lines();
    let (lines, chosen, v_cur, a): (_, _, f64, f64) = match family {
        Family::TwoIntention => {
            let turn = if rng.random_bool(0.5) { right } else { left };
            let take_turn = rng.random_bool(0.5);
            let chosen = if take_turn { turn.1.clone() } else { straight.1.clone() };
            // same speed profile either way: the history does not reveal the choice
            (vec![straight, turn], chosen, rng.random_range(5.0..9.0), rng.random_range(-0.8..0.2))
        }
        Family::TJunction => {
            let chosen = if rng.random_bool(0.5) { right.1.clone() } else { left.1.clone() };
            (vec![right, left], chosen, rng.random_range(6.0..9.0), rng.random_range(-0.8..-0.2))
        }
        _ => {
            // speed and braking hint at the manoeuvre: slowest for the tight right turn
            let (chosen, v, a) = match rng.random_range(0..5) {
                0 => (straight.1.clone(), rng.random_range(7.5..10.0), rng.random_range(-0.25..0.5)),
                1 | 2 => (right.1.clone(), rng.random_range(4.0..5.0), rng.random_range(-1.2..-0.8)),
                _ => (left.1.clone(), rng.random_range(5.5..7.0), rng.random_range(-0.9..-0.45)),
            };
            (vec![straight, right, left], chosen, v, a)
        }
    };
    // at a T-junction the turn starts within the horizon
    let gap: f64 = if family == Family::TJunction { rng.random_range(0.0..4.0) } else { rng.random_range(2.0..12.0) };
    let s_cur = ARM_LENGTH - JUNCTION - gap;
    let t_pre = hz.t_pre();
    let s = move |t: f64| {
        let tau = t - t_cur;
        s_cur + v_cur * tau + 0.5 * a * tau * tau
    };
    debug_assert!(s(0.0) >= 0.0 && s(t_cur + t_pre) > s(t_cur));

    let mut refs = Vec::new();
    for (id, pts) in lines {
        refs.push(ReferenceLine::new(id, pts)?);
    }
    let length = polyline_length(&chosen);
    let road = MovableArea::single(cross_polygon(family != Family::TJunction)?);
    let map = MapContext::new(refs, Some(road.clone()), Some(road))?;
    Ok(Motion {
        agent_type: AgentType::Vehicle,
        path: Box::new(move |t| along(&chosen, s(t).min(length))),
        map: Some(map),
    })
}
