//! Training labels for proposals.
//!
//! A proposal is positive when its average displacement (AD) from the ground
//! truth, measured at the prediction timestamps, is strictly below a
//! threshold. Positives carry refinement targets: the additive corrections from
//! the proposal's end point and bend to the ground truth's.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{fit_cubic, gamma_of, TimedPoint, Trajectory};
use crate::proposal::Proposal;
use crate::{Error, Result, Vec2};

/// Timestamps closer than this are considered the same frame.
const TIME_MATCH: f64 = 1e-6;

/// Mean Euclidean distance between time-aligned points.
pub fn average_displacement(gt: &[Vec2], pp: &[Vec2]) -> Result<f64> {
    if gt.len() != pp.len() {
        return Err(Error::LengthMismatch { left: gt.len(), right: pp.len() });
    }
    if gt.is_empty() {
        return Err(Error::Empty("point sequence"));
    }
    Ok(gt.iter().zip(pp).map(|(a, b)| a.distance(*b)).sum::<f64>() / gt.len() as f64)
}

/// Corrections `(t_x, t_y, t_gamma)` from a proposal to the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RefinementTargets {
    pub dx: f64,
    pub dy: f64,
    pub dgamma: f64,
}

impl RefinementTargets {
    pub fn as_array(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dgamma]
    }
}

pub fn refinement_targets(proposal: &Proposal, gt_end: Vec2, gt_gamma: f64) -> RefinementTargets {
    RefinementTargets {
        dx: gt_end.x - proposal.end_point.x,
        dy: gt_end.y - proposal.end_point.y,
        dgamma: gt_gamma - proposal.gamma,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalLabel {
    pub is_positive: bool,
    pub ad: f64,
    pub targets: Option<RefinementTargets>,
    pub selected_for_training: bool,
}

/// Ground truth reduced to what labeling needs.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Last observed point.
    pub current: TimedPoint,
    /// Ground-truth positions at the prediction timestamps.
    pub future: Vec<TimedPoint>,
    /// Bend of the ground truth, measured on its own cubic fit.
    pub gamma: f64,
}

impl GroundTruth {
    /// `full` spans history and future; `pred_times` selects the future frames.
    pub fn from_trajectory(full: &Trajectory, pred_times: &[f64]) -> Result<Self> {
        if pred_times.is_empty() {
            return Err(Error::Empty("prediction times"));
        }
        let future = pred_times
            .iter()
            .map(|&t| find_at(full.points(), t))
            .collect::<Result<Vec<_>>>()?;
        let current = full
            .points()
            .iter()
            .rev()
            .find(|p| p.t < pred_times[0] - TIME_MATCH)
            .copied()
            .ok_or_else(|| Error::InvalidArgument("ground truth has no observed point".into()))?;
        let end = future[future.len() - 1];
        let gamma = match fit_cubic(full.points()) {
            Ok(curve) => match gamma_of(&curve, current, end) {
                Ok(g) => g,
                Err(Error::DegenerateChord) => 0.0,
                Err(e) => return Err(e),
            },
            // fewer than 4 points: no bend to speak of
            Err(Error::TooFewPoints { .. }) => 0.0,
            Err(e) => return Err(e),
        };
        Ok(GroundTruth { current, future, gamma })
    }

    pub fn end(&self) -> Vec2 {
        self.future[self.future.len() - 1].pos()
    }

    pub fn future_positions(&self) -> Vec<Vec2> {
        self.future.iter().map(TimedPoint::pos).collect()
    }
}

fn find_at(points: &[TimedPoint], t: f64) -> Result<TimedPoint> {
    points
        .iter()
        .find(|p| (p.t - t).abs() <= TIME_MATCH)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("ground truth has no frame at t = {t}")))
}

/// Labels each proposal against the ground truth. Positive iff `AD < ad_threshold`.
pub fn assign_labels(proposals: &[Proposal], gt: &GroundTruth, ad_threshold: f64) -> Result<Vec<ProposalLabel>> {
    let gt_pos = gt.future_positions();
    proposals
        .iter()
        .map(|p| {
            if p.future_points.len() != gt.future.len() {
                return Err(Error::LengthMismatch { left: gt.future.len(), right: p.future_points.len() });
            }
            for (a, b) in p.future_points.iter().zip(&gt.future) {
                if (a.t - b.t).abs() > TIME_MATCH {
                    return Err(Error::InvalidArgument(format!(
                        "proposal frame at t = {} does not match ground truth t = {}",
                        a.t, b.t
                    )));
                }
            }
            let ad = average_displacement(&gt_pos, &p.future_positions())?;
            let is_positive = ad < ad_threshold;
            Ok(ProposalLabel {
                is_positive,
                ad,
                targets: is_positive.then(|| refinement_targets(p, gt.end(), gt.gamma)),
                selected_for_training: false,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSummary {
    pub positives: usize,
    pub negatives: usize,
    /// No positives, hence nothing selected.
    pub degenerate: bool,
}

/// Selects every positive and `min(floor(ratio * N_pos), N_neg)` negatives
/// drawn uniformly without replacement.
pub fn sample_negatives(labels: &mut [ProposalLabel], ratio: f64, seed: u64) -> Result<SampleSummary> {
    sample_negatives_with(labels, ratio, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_negatives_with<R: Rng + ?Sized>(
    labels: &mut [ProposalLabel],
    ratio: f64,
    rng: &mut R,
) -> Result<SampleSummary> {
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::InvalidArgument(format!("negative ratio must be > 0, got {ratio}")));
    }
    let mut negatives = Vec::new();
    let mut positives = 0;
    for (i, l) in labels.iter_mut().enumerate() {
        l.selected_for_training = l.is_positive;
        if l.is_positive {
            positives += 1;
        } else {
            negatives.push(i);
        }
    }
    let wanted = ((ratio * positives as f64).floor() as usize).min(negatives.len());
    for k in index::sample(rng, negatives.len(), wanted) {
        labels[negatives[k]].selected_for_training = true;
    }
    Ok(SampleSummary { positives, negatives: wanted, degenerate: positives == 0 })
}
