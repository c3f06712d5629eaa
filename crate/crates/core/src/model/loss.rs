//! Multi-task objective on network outputs.
//!
//! `L = L_ep + (1/N) sum BCE(c_i, c*_i) + alpha * sum_pos |t_i - t*_i| / (N_pos + beta N_neg)`
//!
//! with Euclidean (unsquared) distances for the end-point and refinement
//! terms, and `N` the number of selected proposals.

use crate::model::mlp::logistic;
use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the cross entropy.
pub const PROB_CLAMP: f64 = 1e-7;

/// Network outputs and labels for one selected proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossProposal {
    pub logit: f64,
    pub refine: [f64; 3],
    pub positive: bool,
    /// Present for positives.
    pub target: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossInputs<'a> {
    pub endpoint_pred: &'a [f64],
    pub endpoint_target: &'a [f64],
    pub proposals: &'a [LossProposal],
}

/// Loss value split by term, plus gradients with respect to every input.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub total: f64,
    pub endpoint: f64,
    pub classification: f64,
    pub refinement: f64,
    pub d_endpoint: Vec<f64>,
    pub d_logits: Vec<f64>,
    pub d_refine: Vec<[f64; 3]>,
}

/// `|pred - target|` and its gradient; the gradient at zero is taken as zero.
pub fn euclidean(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let diff: Vec<f64> = pred.iter().zip(target).map(|(a, b)| a - b).collect();
    let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    let grad = if norm > 0.0 { diff.iter().map(|d| d / norm).collect() } else { vec![0.0; diff.len()] };
    (norm, grad)
}

/// Binary cross entropy of `logistic(logit)` with clamping, and its derivative in `logit`.
pub fn clamped_bce(logit: f64, positive: bool) -> (f64, f64) {
    let p = logistic(logit);
    let clamped = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let loss = if positive { -clamped.ln() } else { -(1.0 - clamped).ln() };
    let grad = if p == clamped { p - if positive { 1.0 } else { 0.0 } } else { 0.0 };
    (loss, grad)
}

pub fn endpoint_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Dimension { expected: target.len(), got: pred.len() });
    }
    Ok(euclidean(pred, target))
}

pub fn multitask_loss(inputs: &LossInputs<'_>, alpha: f64, beta: f64) -> Result<LossOutput> {
    if inputs.proposals.is_empty() {
        return Err(Error::Empty("loss batch"));
    }
    let (endpoint, d_endpoint) = endpoint_loss(inputs.endpoint_pred, inputs.endpoint_target)?;

    let n = inputs.proposals.len() as f64;
    let n_pos = inputs.proposals.iter().filter(|p| p.positive).count() as f64;
    let n_neg = n - n_pos;
    let norm = n_pos + beta * n_neg;

    let mut classification = 0.0;
    let mut refinement_sum = 0.0;
    let mut d_logits = Vec::with_capacity(inputs.proposals.len());
    let mut d_refine = Vec::with_capacity(inputs.proposals.len());
    for p in inputs.proposals {
        let (l, g) = clamped_bce(p.logit, p.positive);
        classification += l / n;
        d_logits.push(g / n);
        match (p.positive, p.target) {
            (true, Some(t)) if norm > 0.0 => {
                let (l, g) = euclidean(&p.refine, &t);
                refinement_sum += l;
                d_refine.push([g[0] * alpha / norm, g[1] * alpha / norm, g[2] * alpha / norm]);
            }
            (true, None) => {
                return Err(Error::InvalidArgument("positive proposal without refinement targets".into()))
            }
            _ => d_refine.push([0.0; 3]),
        }
    }
    let refinement = if norm > 0.0 { alpha * refinement_sum / norm } else { 0.0 };
    Ok(LossOutput {
        total: endpoint + classification + refinement,
        endpoint,
        classification,
        refinement,
        d_endpoint,
        d_logits,
        d_refine,
    })
}
