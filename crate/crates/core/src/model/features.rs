//! Hand-crafted features in the agent's frame.
//!
//! All features are expressed in the ego frame (origin at the last observed
//! position, x-axis along the direction of travel), which makes the networks
//! blind to where the scene sits in the world.
//!
//! History layout (`n` observed frames), version [`FEATURE_LAYOUT_VERSION`]:
//!
//! | entries    | content                                              |
//! |------------|------------------------------------------------------|
//! | `2(n-1)`   | per-step displacement `(dx, dy)`                      |
//! | `n-1`      | per-step speed                                        |
//! | `n-2`      | acceleration (speed change per second)                |
//! | `n-2`      | heading change between consecutive steps, radians     |
//! | 4          | has-map flag, lateral offset and heading offset to the nearest reference line, signed distance to the movable-area boundary |
//!
//! Proposal layout (`m` predicted frames), followed by the history layout:
//!
//! | entries | content                                                  |
//! |---------|----------------------------------------------------------|
//! | 2       | end point                                                |
//! | 2       | end point minus grid anchor (the stage-1 estimate)       |
//! | 1       | distance from the anchor                                 |
//! | 1       | gamma                                                    |
//! | `2m`    | per-step displacement of the sampled future              |
//! | 3       | lateral offset of the end point from the nearest reference line, heading offset of the final step to that line, arc-length travel along that line |

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::curve::Trajectory;
use crate::geo::MapContext;
use crate::proposal::{project_to_polyline, travel_direction, Proposal};
use crate::{Error, Result, Vec2};

pub const FEATURE_LAYOUT_VERSION: u32 = 2;

/// Map distances are clipped to this many meters.
const MAP_CLIP: f64 = 10.0;
/// Clip for arc-length travel along a line.
const TRAVEL_CLIP: f64 = 100.0;
const MIN_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature"));
        }
        Ok(FeatureVector(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Agent-centered frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoFrame {
    pub origin: Vec2,
    pub axis: Vec2,
}

impl EgoFrame {
    pub fn of(history: &Trajectory) -> Self {
        EgoFrame { origin: history.last().pos(), axis: travel_direction(history) }
    }

    pub fn to_local_vector(&self, v: Vec2) -> Vec2 {
        Vec2::new(v.dot(self.axis), v.dot(self.axis.perp()))
    }

    pub fn to_local(&self, p: Vec2) -> Vec2 {
        self.to_local_vector(p - self.origin)
    }

    pub fn to_world_vector(&self, v: Vec2) -> Vec2 {
        self.axis * v.x + self.axis.perp() * v.y
    }

    pub fn to_world(&self, p: Vec2) -> Vec2 {
        self.origin + self.to_world_vector(p)
    }
}

pub fn history_feature_len(obs_frames: usize) -> usize {
    let steps = obs_frames.saturating_sub(1);
    2 * steps + steps + 2 * steps.saturating_sub(1) + 4
}

pub fn proposal_feature_len(obs_frames: usize, pred_frames: usize) -> usize {
    6 + 2 * pred_frames + 3 + history_feature_len(obs_frames)
}

fn signed_angle(from: Vec2, to: Vec2) -> f64 {
    from.cross(to).atan2(from.dot(to))
}

pub fn extract_history_features(history: &Trajectory, map: Option<&MapContext>) -> Result<FeatureVector> {
    if history.len() < 2 {
        return Err(Error::TooFewPoints { required: 2, got: history.len() });
    }
    let frame = EgoFrame::of(history);
    let dt = history.dt();
    let steps: Vec<Vec2> = history
        .points()
        .windows(2)
        .map(|w| frame.to_local_vector(w[1].pos() - w[0].pos()))
        .collect();
    let speeds: Vec<f64> = steps.iter().map(|s| s.norm() / dt).collect();

    let mut f = Vec::with_capacity(history_feature_len(history.len()));
    for s in &steps {
        f.push(s.x);
        f.push(s.y);
    }
    f.extend_from_slice(&speeds);
    f.extend(speeds.windows(2).map(|w| (w[1] - w[0]) / dt));
    f.extend(steps.windows(2).map(|w| {
        if w[0].norm() > MIN_STEP && w[1].norm() > MIN_STEP {
            signed_angle(w[0], w[1])
        } else {
            0.0
        }
    }));
    f.extend(history_map_features(&frame, map));
    FeatureVector::new(f)
}

fn history_map_features(frame: &EgoFrame, map: Option<&MapContext>) -> [f64; 4] {
    let Some(map) = map else { return [0.0; 4] };
    let mut out = [1.0, 0.0, 0.0, 0.0];
    if let Some((line, s, lateral)) = map.nearest_line(frame.origin) {
        let (_, tangent) = line.point_at_extended(s);
        out[1] = lateral.clamp(-MAP_CLIP, MAP_CLIP);
        out[2] = signed_angle(tangent, frame.axis);
    }
    if let Some(area) = &map.movable_area {
        out[3] = area.signed_boundary_distance(frame.origin).clamp(-MAP_CLIP, MAP_CLIP);
    }
    out
}

/// Computes proposal features for many proposals of one history.
#[derive(Debug, Clone)]
pub struct ProposalFeaturizer<'a> {
    frame: EgoFrame,
    current: Vec2,
    history_features: FeatureVector,
    map: Option<&'a MapContext>,
}

impl<'a> ProposalFeaturizer<'a> {
    pub fn new(history: &Trajectory, map: Option<&'a MapContext>) -> Result<Self> {
        Ok(ProposalFeaturizer {
            frame: EgoFrame::of(history),
            current: history.last().pos(),
            history_features: extract_history_features(history, map)?,
            map,
        })
    }

    pub fn frame(&self) -> &EgoFrame {
        &self.frame
    }

    pub fn history_features(&self) -> &FeatureVector {
        &self.history_features
    }

    pub fn features(&self, proposal: &Proposal) -> Result<FeatureVector> {
        let fr = &self.frame;
        let end = fr.to_local(proposal.end_point);
        let offset = fr.to_local_vector(proposal.end_point - proposal.anchor);
        let mut f = Vec::with_capacity(9 + 2 * proposal.future_points.len() + self.history_features.len());
        f.extend_from_slice(&[end.x, end.y, offset.x, offset.y, offset.norm(), proposal.gamma]);
        let mut prev = self.current;
        let mut last_step = Vec2::ZERO;
        for p in &proposal.future_points {
            let step = fr.to_local_vector(p.pos() - prev);
            f.push(step.x);
            f.push(step.y);
            if step.norm() > MIN_STEP {
                last_step = step;
            }
            prev = p.pos();
        }
        let mut map_f = [0.0; 3];
        if let Some((line, s, lateral)) = self.map.and_then(|m| m.nearest_line(proposal.end_point)) {
            let (_, tangent) = line.point_at_extended(s);
            map_f[0] = lateral.clamp(-MAP_CLIP, MAP_CLIP);
            if last_step.norm() > MIN_STEP {
                map_f[1] = signed_angle(fr.to_local_vector(tangent), last_step);
            }
            let (s_cur, _) = project_to_polyline(self.current, line);
            map_f[2] = (s - s_cur).clamp(-TRAVEL_CLIP, TRAVEL_CLIP);
        }
        f.extend_from_slice(&map_f);
        f.extend_from_slice(&self.history_features);
        FeatureVector::new(f)
    }
}

pub fn extract_proposal_features(
    history: &Trajectory,
    proposal: &Proposal,
    map: Option<&MapContext>,
) -> Result<FeatureVector> {
    ProposalFeaturizer::new(history, map)?.features(proposal)
}

/// Arc-length displacement of `to` relative to `from` along the line nearest `to`.
pub fn displacement_along_nearest_line(map: &MapContext, from: Vec2, to: Vec2) -> Option<f64> {
    let (line, s_to, _) = map.nearest_line(to)?;
    let (s_from, _) = project_to_polyline(from, line);
    Some(s_to - s_from)
}
