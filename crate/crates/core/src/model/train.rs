use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::labeling::{sample_negatives_with, ProposalLabel};
use crate::model::mlp::Adam;
use crate::seed::mix_seed;
use crate::model::{ModelGrads, TrainingExample, TwoStageModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Multiplied into the learning rate after every epoch.
    pub lr_decay: f64,
    pub alpha: f64,
    pub beta: f64,
    pub ad_threshold_m: f64,
    pub negative_ratio: f64,
    pub seed: u64,
    pub augment: bool,
    /// Spread of the training-time grid center around the true end point.
    pub anchor_jitter_m: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            epochs: 50,
            learning_rate: 1e-3,
            lr_decay: 0.9,
            alpha: 1.0,
            beta: 1.0,
            ad_threshold_m: 3.0,
            negative_ratio: 3.0,
            seed: 0,
            augment: false,
            anchor_jitter_m: 1.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("train.{what}")));
        if self.batch_size == 0 {
            return bad("batch_size must be > 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must be in (0, 1]");
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return bad("alpha and beta must be >= 0");
        }
        if !(self.ad_threshold_m > 0.0) {
            return bad("ad_threshold_m must be > 0");
        }
        if !(self.negative_ratio > 0.0 && self.negative_ratio.is_finite()) {
            return bad("negative_ratio must be > 0");
        }
        if !(self.anchor_jitter_m >= 0.0 && self.anchor_jitter_m.is_finite()) {
            return bad("anchor_jitter_m must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss: f64,
    pub endpoint: f64,
    pub classification: f64,
    pub refinement: f64,
    /// Examples without any positive proposal this epoch.
    pub degenerate: usize,
}

/// Per-(epoch, example) seed so that sampling is independent of thread scheduling.
fn example_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    mix_seed(seed, epoch as u64, index as u64)
}

struct Step {
    loss: [f64; 4],
    degenerate: bool,
    grads: ModelGrads,
}

fn example_step(model: &TwoStageModel, ex: &TrainingExample, cfg: &TrainConfig, seed: u64) -> Result<Step> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ex = match (&ex.mirrored, cfg.augment) {
        (Some(m), true) if rng.random_bool(0.5) => m.as_ref(),
        _ => ex,
    };
    let mut labels: Vec<ProposalLabel> = ex.proposals.iter().map(|p| p.label.clone()).collect();
    let summary = sample_negatives_with(&mut labels, cfg.negative_ratio, &mut rng)?;
    let selected: Vec<bool> = labels.iter().map(|l| l.selected_for_training).collect();
    let (out, grads) = model.example_loss(ex, &selected, cfg.alpha, cfg.beta)?;
    Ok(Step {
        loss: [out.total, out.endpoint, out.classification, out.refinement],
        degenerate: summary.degenerate,
        grads,
    })
}

/// Mini-batch Adam over `data`. Results depend only on the inputs and `cfg.seed`.
///
/// Normalizers are fitted before the first epoch when the model is untrained.
/// With `cfg.epochs == 0` the model is returned unchanged.
pub fn train(data: &[TrainingExample], mut model: TwoStageModel, cfg: &TrainConfig) -> Result<(TwoStageModel, Vec<EpochLog>)> {
    cfg.validate()?;
    if cfg.epochs == 0 {
        return Ok((model, Vec::new()));
    }
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if !model.trained {
        model.fit_normalizers(data);
    }
    let mut adam = Adam::new(model.param_count());
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut lr = cfg.learning_rate;
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut order_rng);
        let mut totals = [0.0; 4];
        let mut degenerate = 0;
        for batch in order.chunks(cfg.batch_size) {
            let steps: Vec<Step> = batch
                .par_iter()
                .map(|&i| example_step(&model, &data[i], cfg, example_seed(cfg.seed, epoch, i)))
                .collect::<Result<_>>()?;
            let mut grads = model.zero_grads();
            for s in &steps {
                grads.add_assign(&s.grads);
                for (t, l) in totals.iter_mut().zip(s.loss) {
                    *t += l;
                }
                degenerate += s.degenerate as usize;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(lr, model.params_mut(), grads.iter());
        }
        let n = data.len() as f64;
        logs.push(EpochLog {
            epoch,
            learning_rate: lr,
            loss: totals[0] / n,
            endpoint: totals[1] / n,
            classification: totals[2] / n,
            refinement: totals[3] / n,
            degenerate,
        });
        lr *= cfg.lr_decay;
    }
    model.trained = true;
    Ok((model, logs))
}
