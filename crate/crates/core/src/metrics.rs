//! Displacement metrics for trajectory forecasts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec2};

/// Default number of hypotheses considered by minADE/minFDE.
pub const DEFAULT_K: usize = 6;

fn check_lengths(pred: &[Vec2], gt: &[Vec2]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: gt.len() });
    }
    if gt.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    Ok(())
}

/// Average displacement error.
pub fn ade(pred: &[Vec2], gt: &[Vec2]) -> Result<f64> {
    check_lengths(pred, gt)?;
    Ok(pred.iter().zip(gt).map(|(a, b)| a.distance(*b)).sum::<f64>() / gt.len() as f64)
}

/// Final displacement error.
pub fn fde(pred: &[Vec2], gt: &[Vec2]) -> Result<f64> {
    check_lengths(pred, gt)?;
    Ok(pred[pred.len() - 1].distance(gt[gt.len() - 1]))
}

/// Best ADE and best FDE over a set of hypotheses; the two minima may come
/// from different hypotheses.
pub fn min_ade_fde(preds: &[Vec<Vec2>], gt: &[Vec2], k_max: usize) -> Result<(f64, f64)> {
    if preds.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    if preds.len() > k_max {
        return Err(Error::InvalidArgument(format!("{} predictions exceed K = {k_max}", preds.len())));
    }
    let mut best = (f64::INFINITY, f64::INFINITY);
    for p in preds {
        best.0 = best.0.min(ade(p, gt)?);
        best.1 = best.1.min(fde(p, gt)?);
    }
    Ok(best)
}

/// `sum(weights[type] * values[type])` over the types present in `values`.
pub fn weighted_sum(values: &BTreeMap<String, f64>, weights: &BTreeMap<String, f64>) -> Result<f64> {
    let mut total = 0.0;
    for (ty, v) in values {
        let w = *weights.get(ty).ok_or_else(|| Error::MissingWeight(ty.clone()))?;
        if !(w >= 0.0) {
            return Err(Error::InvalidArgument(format!("weight for `{ty}` must be >= 0, got {w}")));
        }
        total += w * v;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeMetrics {
    pub ade: f64,
    pub fde: f64,
    pub min_ade: f64,
    pub min_fde: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Top-1 ADE averaged over agents.
    pub ade: f64,
    pub fde: f64,
    pub min_ade: f64,
    pub min_fde: f64,
    pub k: usize,
    /// Drivable area compliance of the top-1 predictions, when areas are known.
    pub dac: Option<f64>,
    pub per_type: BTreeMap<String, TypeMetrics>,
    pub wsade: Option<f64>,
    pub wsfde: Option<f64>,
    /// Type weights used for WSADE/WSFDE.
    pub weights: Option<BTreeMap<String, f64>>,
    pub agents: usize,
}

#[derive(Debug, Default, Clone, Copy)]
struct Sums {
    ade: f64,
    fde: f64,
    min_ade: f64,
    min_fde: f64,
    count: usize,
}

impl Sums {
    fn add(&mut self, ade: f64, fde: f64, min_ade: f64, min_fde: f64) {
        self.ade += ade;
        self.fde += fde;
        self.min_ade += min_ade;
        self.min_fde += min_fde;
        self.count += 1;
    }

    fn mean(&self) -> TypeMetrics {
        let n = self.count.max(1) as f64;
        TypeMetrics {
            ade: self.ade / n,
            fde: self.fde / n,
            min_ade: self.min_ade / n,
            min_fde: self.min_fde / n,
            count: self.count,
        }
    }
}

/// Accumulates per-agent errors in insertion order.
#[derive(Debug, Clone)]
pub struct MetricAccumulator {
    k: usize,
    total: Sums,
    per_type: BTreeMap<String, Sums>,
}

impl MetricAccumulator {
    pub fn new(k: usize) -> Self {
        MetricAccumulator { k, total: Sums::default(), per_type: BTreeMap::new() }
    }

    /// `ranked` holds the agent's predictions best-first; at most `k` are used.
    pub fn add(&mut self, agent_type: &str, ranked: &[Vec<Vec2>], gt: &[Vec2]) -> Result<()> {
        if ranked.is_empty() {
            return Err(Error::Empty("predictions"));
        }
        let top = &ranked[0];
        let a = ade(top, gt)?;
        let f = fde(top, gt)?;
        let (ma, mf) = min_ade_fde(&ranked[..ranked.len().min(self.k)], gt, self.k)?;
        self.total.add(a, f, ma, mf);
        self.per_type.entry(agent_type.to_string()).or_default().add(a, f, ma, mf);
        Ok(())
    }

    pub fn agents(&self) -> usize {
        self.total.count
    }

    pub fn finish(&self, weights: Option<&BTreeMap<String, f64>>, dac: Option<f64>) -> Result<MetricReport> {
        if self.total.count == 0 {
            return Err(Error::Empty("evaluated agents"));
        }
        let total = self.total.mean();
        let per_type: BTreeMap<String, TypeMetrics> =
            self.per_type.iter().map(|(k, v)| (k.clone(), v.mean())).collect();
        let (wsade, wsfde) = match weights {
            Some(w) => {
                let ades = per_type.iter().map(|(k, v)| (k.clone(), v.ade)).collect();
                let fdes = per_type.iter().map(|(k, v)| (k.clone(), v.fde)).collect();
                (Some(weighted_sum(&ades, w)?), Some(weighted_sum(&fdes, w)?))
            }
            None => (None, None),
        };
        Ok(MetricReport {
            ade: total.ade,
            fde: total.fde,
            min_ade: total.min_ade,
            min_fde: total.min_fde,
            k: self.k,
            dac,
            per_type,
            wsade,
            wsfde,
            weights: weights.cloned(),
            agents: total.count,
        })
    }
}
