//! The learnable part: a stage-1 end-point regressor and a stage-2 proposal
//! scorer/refiner, both small feed-forward networks over ego-frame features.

pub mod checkpoint;
pub mod features;
pub mod loss;
pub mod mlp;
pub mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{TimedPoint, Trajectory};
use crate::geo::MapContext;
use crate::labeling::{assign_labels, GroundTruth, ProposalLabel, RefinementTargets};
use crate::proposal::Proposal;
use crate::{Error, Horizon, Result, Vec2};

use features::{
    displacement_along_nearest_line, extract_history_features, history_feature_len, proposal_feature_len, EgoFrame,
    ProposalFeaturizer, FEATURE_LAYOUT_VERSION,
};
use loss::{endpoint_loss, multitask_loss, LossInputs, LossOutput, LossProposal};
use mlp::{logistic, Activation, Mlp, MlpGrads, Trace};

pub use train::{train, EpochLog, TrainConfig};

/// Which quantity stage 1 regresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// A 2D end point; proposals on a grid around it.
    Base,
    /// A 1D displacement along reference lines; proposals on every line.
    Multimodal,
}

impl Mode {
    fn endpoint_arity(self) -> usize {
        match self {
            Mode::Base => 2,
            Mode::Multimodal => 1,
        }
    }
}

/// Stage-1 output in world terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOne {
    EndPoint(Vec2),
    Displacement(f64),
}

/// Per-feature affine standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(n: usize) -> Self {
        Standardizer { mean: vec![0.0; n], std: vec![1.0; n] }
    }

    /// Fits mean and standard deviation per column; flat columns keep unit scale.
    pub fn fit<'a>(n: usize, rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut sum = vec![0.0; n];
        let mut sq = vec![0.0; n];
        let mut count = 0usize;
        for r in rows {
            for (k, v) in r.iter().enumerate().take(n) {
                sum[k] += v;
                sq[k] += v * v;
            }
            count += 1;
        }
        if count == 0 {
            return Standardizer::identity(n);
        }
        let c = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / c).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let var = (s / c - m * m).max(0.0);
                if var.sqrt() > 1e-8 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }
}

/// One labeled proposal. Refinement targets are expressed in the agent frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSample {
    pub features: Vec<f64>,
    pub label: ProposalLabel,
}

/// Everything the loss needs for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub history_features: Vec<f64>,
    /// Constant-velocity guess the regressor corrects.
    pub endpoint_baseline: Vec<f64>,
    pub endpoint_target: Vec<f64>,
    pub proposals: Vec<ProposalSample>,
    /// Mirror image of the same scene, used when augmentation is on.
    pub mirrored: Option<Box<TrainingExample>>,
}

/// Constant-velocity stage-1 guess: the ego-frame end point, or the distance travelled.
pub fn endpoint_baseline(mode: Mode, history: &Trajectory, horizon: &Horizon) -> Vec<f64> {
    let pts = history.points();
    let n = pts.len();
    let speed = pts[n - 1].pos().distance(pts[n - 2].pos()) / history.dt();
    let travel = speed * horizon.t_pre();
    match mode {
        Mode::Base => vec![travel, 0.0],
        Mode::Multimodal => vec![travel],
    }
}

impl TrainingExample {
    /// Labels `proposals` against the ground truth and computes all features.
    pub fn build(
        mode: Mode,
        horizon: &Horizon,
        history: &Trajectory,
        future: &Trajectory,
        map: Option<&MapContext>,
        proposals: &[Proposal],
        ad_threshold: f64,
    ) -> Result<Self> {
        let full = history.concat(future)?;
        let pred_times = horizon.pred_times(history.last().t);
        let gt = GroundTruth::from_trajectory(&full, &pred_times)?;
        let featurizer = ProposalFeaturizer::new(history, map)?;
        let frame = *featurizer.frame();
        let endpoint_target = match mode {
            Mode::Base => {
                let e = frame.to_local(gt.end());
                vec![e.x, e.y]
            }
            Mode::Multimodal => {
                let map = map.ok_or_else(|| Error::InvalidArgument("multimodal training needs a map".into()))?;
                let d = displacement_along_nearest_line(map, history.last().pos(), gt.end())
                    .ok_or_else(|| Error::InvalidArgument("multimodal training needs reference lines".into()))?;
                vec![d]
            }
        };
        let labels = assign_labels(proposals, &gt, ad_threshold)?;
        let proposals = proposals
            .iter()
            .zip(labels)
            .map(|(p, mut label)| {
                label.targets = label.targets.map(|t| {
                    let v = frame.to_local_vector(Vec2::new(t.dx, t.dy));
                    RefinementTargets { dx: v.x, dy: v.y, dgamma: t.dgamma }
                });
                Ok(ProposalSample { features: featurizer.features(p)?.into_inner(), label })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingExample {
            history_features: featurizer.history_features().to_vec(),
            endpoint_baseline: endpoint_baseline(mode, history, horizon),
            endpoint_target,
            proposals,
            mirrored: None,
        })
    }

    pub fn positives(&self) -> usize {
        self.proposals.iter().filter(|p| p.label.is_positive).count()
    }
}

/// Gradients for both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub endpoint: MlpGrads,
    pub scorer: MlpGrads,
}

impl ModelGrads {
    pub fn add_assign(&mut self, other: &ModelGrads) {
        self.endpoint.add_assign(&other.endpoint);
        self.scorer.add_assign(&other.scorer);
    }

    pub fn scale(&mut self, s: f64) {
        self.endpoint.scale(s);
        self.scorer.scale(s);
    }

    /// Endpoint-network gradients first, then scorer gradients.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.endpoint.iter().chain(self.scorer.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageModel {
    pub mode: Mode,
    pub horizon: Horizon,
    pub feature_layout_version: u32,
    pub endpoint_regressor: Mlp,
    /// Outputs: confidence logit, then refinement `(dx, dy, dgamma)`.
    pub scorer_refiner: Mlp,
    pub history_norm: Standardizer,
    pub proposal_norm: Standardizer,
    /// Meters per unit of regressor output.
    pub endpoint_scale: f64,
    /// Meters per unit of refinement output.
    pub refine_scale: f64,
    pub trained: bool,
}

/// Refinement outputs in world terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub dx: f64,
    pub dy: f64,
    pub dgamma: f64,
}

impl TwoStageModel {
    /// Fresh model with `hidden` layer widths for both networks.
    pub fn new(mode: Mode, horizon: Horizon, hidden: &[usize], seed: u64) -> Result<Self> {
        horizon.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h_len = history_feature_len(horizon.obs_frames);
        let p_len = proposal_feature_len(horizon.obs_frames, horizon.pred_frames);
        let sizes = |input: usize, output: usize| -> Vec<usize> {
            std::iter::once(input).chain(hidden.iter().copied()).chain(std::iter::once(output)).collect()
        };
        let mut endpoint_regressor =
            Mlp::new(&sizes(h_len, mode.endpoint_arity()), Activation::Relu, Activation::Identity, &mut rng)?;
        let mut scorer_refiner = Mlp::new(&sizes(p_len, 4), Activation::Relu, Activation::Identity, &mut rng)?;
        // start both heads near zero output
        for net in [&mut endpoint_regressor, &mut scorer_refiner] {
            let last = net.layers_mut().last_mut().expect("at least one layer");
            last.weights.iter_mut().for_each(|w| *w *= 0.1);
        }
        Ok(TwoStageModel {
            mode,
            horizon,
            feature_layout_version: FEATURE_LAYOUT_VERSION,
            endpoint_regressor,
            scorer_refiner,
            history_norm: Standardizer::identity(h_len),
            proposal_norm: Standardizer::identity(p_len),
            endpoint_scale: 1.0,
            refine_scale: 1.0,
            trained: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_layout_version != FEATURE_LAYOUT_VERSION {
            return Err(Error::Checkpoint(format!(
                "feature layout version {} does not match supported version {}",
                self.feature_layout_version, FEATURE_LAYOUT_VERSION
            )));
        }
        self.horizon.validate()?;
        let h_len = history_feature_len(self.horizon.obs_frames);
        let p_len = proposal_feature_len(self.horizon.obs_frames, self.horizon.pred_frames);
        let checks = [
            (self.endpoint_regressor.input_dim(), h_len),
            (self.endpoint_regressor.output_dim(), self.mode.endpoint_arity()),
            (self.scorer_refiner.input_dim(), p_len),
            (self.scorer_refiner.output_dim(), 4),
            (self.history_norm.mean.len(), h_len),
            (self.history_norm.std.len(), h_len),
            (self.proposal_norm.mean.len(), p_len),
            (self.proposal_norm.std.len(), p_len),
        ];
        for (got, expected) in checks {
            if got != expected {
                return Err(Error::Dimension { expected, got });
            }
        }
        Mlp::from_layers(self.endpoint_regressor.layers().to_vec())?;
        Mlp::from_layers(self.scorer_refiner.layers().to_vec())?;
        if !(self.endpoint_scale > 0.0 && self.refine_scale > 0.0) {
            return Err(Error::Checkpoint("output scales must be positive".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.endpoint_regressor.param_count() + self.scorer_refiner.param_count()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.endpoint_regressor.params_mut().chain(self.scorer_refiner.params_mut())
    }

    pub fn zero_grads(&self) -> ModelGrads {
        ModelGrads { endpoint: self.endpoint_regressor.zero_grads(), scorer: self.scorer_refiner.zero_grads() }
    }

    /// Fits input standardization and output scales to a training set.
    pub fn fit_normalizers(&mut self, data: &[TrainingExample]) {
        let h_len = self.history_norm.mean.len();
        let p_len = self.proposal_norm.mean.len();
        self.history_norm = Standardizer::fit(h_len, data.iter().map(|e| e.history_features.as_slice()));
        self.proposal_norm =
            Standardizer::fit(p_len, data.iter().flat_map(|e| e.proposals.iter().map(|p| p.features.as_slice())));
        let rms = |values: &mut dyn Iterator<Item = f64>| {
            let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
            if n == 0 {
                1.0
            } else {
                (s / n as f64).sqrt()
            }
        };
        let residuals = &mut data
            .iter()
            .flat_map(|e| e.endpoint_target.iter().zip(&e.endpoint_baseline).map(|(t, b)| t - b));
        self.endpoint_scale = rms(residuals).max(0.5);
        let targets = &mut data.iter().flat_map(|e| {
            e.proposals.iter().filter_map(|p| p.label.targets).flat_map(|t| [t.dx, t.dy])
        });
        self.refine_scale = rms(targets).max(0.1);
    }

    fn check_history(&self, history: &Trajectory) -> Result<()> {
        if history.len() != self.horizon.obs_frames {
            return Err(Error::Dimension { expected: self.horizon.obs_frames, got: history.len() });
        }
        Ok(())
    }

    fn decode_endpoint(&self, baseline: &[f64], out: &[f64]) -> Vec<f64> {
        baseline.iter().zip(out).map(|(b, o)| b + o * self.endpoint_scale).collect()
    }

    /// Stage 1 on raw history features; returns the decoded ego-frame output.
    pub fn endpoint_from_features(&self, history_features: &[f64], baseline: &[f64]) -> Result<Vec<f64>> {
        let out = self.endpoint_regressor.forward(&self.history_norm.apply(history_features))?;
        Ok(self.decode_endpoint(baseline, &out))
    }

    pub fn predict_endpoint(&self, history: &Trajectory, map: Option<&MapContext>) -> Result<StageOne> {
        self.check_history(history)?;
        let feats = extract_history_features(history, map)?;
        let baseline = endpoint_baseline(self.mode, history, &self.horizon);
        let decoded = self.endpoint_from_features(&feats, &baseline)?;
        Ok(match self.mode {
            Mode::Base => StageOne::EndPoint(EgoFrame::of(history).to_world(Vec2::new(decoded[0], decoded[1]))),
            Mode::Multimodal => StageOne::Displacement(decoded[0].max(0.0)),
        })
    }

    /// Raw scorer outputs `(logit, dx, dy, dgamma)` for one proposal feature vector,
    /// with refinement already scaled to meters (agent frame).
    pub fn scorer_outputs(&self, features: &[f64]) -> Result<[f64; 4]> {
        let o = self.scorer_refiner.forward(&self.proposal_norm.apply(features))?;
        let s = self.refine_scale;
        Ok([o[0], o[1] * s, o[2] * s, o[3] * s])
    }

    /// Sets each proposal's score and returns its world-frame refinement.
    pub fn score_proposals(
        &self,
        history: &Trajectory,
        map: Option<&MapContext>,
        proposals: &mut [Proposal],
    ) -> Result<Vec<Refinement>> {
        self.check_history(history)?;
        let feat = ProposalFeaturizer::new(history, map)?;
        let frame = *feat.frame();
        proposals
            .iter_mut()
            .map(|p| {
                let o = self.scorer_outputs(&feat.features(p)?)?;
                p.score = Some(logistic(o[0]));
                let d = frame.to_world_vector(Vec2::new(o[1], o[2]));
                Ok(Refinement { dx: d.x, dy: d.y, dgamma: o[3] })
            })
            .collect()
    }

    /// Scores every proposal and applies its refinement.
    pub fn score_and_refine(
        &self,
        history: &Trajectory,
        map: Option<&MapContext>,
        mut proposals: Vec<Proposal>,
    ) -> Result<Vec<Proposal>> {
        let deltas = self.score_proposals(history, map, &mut proposals)?;
        proposals.iter().zip(deltas).map(|(p, d)| apply_refinement(history, p, d)).collect()
    }

    /// Loss of one example over the `selected` proposals and its gradients.
    pub fn example_loss(
        &self,
        ex: &TrainingExample,
        selected: &[bool],
        alpha: f64,
        beta: f64,
    ) -> Result<(LossOutput, ModelGrads)> {
        let mut grads = self.zero_grads();
        let ep_trace = self.endpoint_regressor.forward_trace(&self.history_norm.apply(&ex.history_features))?;
        let ep_pred = self.decode_endpoint(&ex.endpoint_baseline, ep_trace.output());

        let mut traces: Vec<Trace> = Vec::new();
        let mut inputs: Vec<LossProposal> = Vec::new();
        for (p, _) in ex.proposals.iter().zip(selected).filter(|(_, s)| **s) {
            let trace = self.scorer_refiner.forward_trace(&self.proposal_norm.apply(&p.features))?;
            let o = trace.output();
            let s = self.refine_scale;
            inputs.push(LossProposal {
                logit: o[0],
                refine: [o[1] * s, o[2] * s, o[3] * s],
                positive: p.label.is_positive,
                target: p.label.targets.map(|t| t.as_array()),
            });
            traces.push(trace);
        }

        let out = if inputs.is_empty() {
            let (l, g) = endpoint_loss(&ep_pred, &ex.endpoint_target)?;
            LossOutput {
                total: l,
                endpoint: l,
                classification: 0.0,
                refinement: 0.0,
                d_endpoint: g,
                d_logits: vec![],
                d_refine: vec![],
            }
        } else {
            multitask_loss(
                &LossInputs { endpoint_pred: &ep_pred, endpoint_target: &ex.endpoint_target, proposals: &inputs },
                alpha,
                beta,
            )?
        };

        let up: Vec<f64> = out.d_endpoint.iter().map(|g| g * self.endpoint_scale).collect();
        self.endpoint_regressor.backward_into(&ep_trace, &up, &mut grads.endpoint)?;
        let s = self.refine_scale;
        for ((trace, dl), dr) in traces.iter().zip(&out.d_logits).zip(&out.d_refine) {
            let up = [*dl, dr[0] * s, dr[1] * s, dr[2] * s];
            self.scorer_refiner.backward_into(trace, &up, &mut grads.scorer)?;
        }
        Ok((out, grads))
    }
}

/// Applies a world-frame refinement and re-fits the proposal's curve.
pub fn apply_refinement(history: &Trajectory, p: &Proposal, d: Refinement) -> Result<Proposal> {
    let pred_times: Vec<f64> = p.future_points.iter().map(|q: &TimedPoint| q.t).collect();
    let mut out = Proposal::build(
        history,
        p.end_point + Vec2::new(d.dx, d.dy),
        p.gamma + d.dgamma,
        p.curve.t_span.1,
        &pred_times,
        p.anchor,
        p.reference_line_id.clone(),
    )?;
    out.score = p.score;
    out.refined = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proposal::{generate_base_proposals, GridConfig};

    fn history() -> Trajectory {
        let pos: Vec<Vec2> = (0..6).map(|k| Vec2::new(2.0 * k as f64, 0.05 * (k * k) as f64)).collect();
        Trajectory::from_positions(0.0, 0.5, &pos).unwrap()
    }

    fn proposals(h: &Trajectory) -> Vec<Proposal> {
        let hz = Horizon::APOLLOSCAPE;
        let t = h.last().t;
        generate_base_proposals(h, Vec2::new(22.0, 2.0), &GridConfig::default(), hz.t_end(t), &hz.pred_times(t)).unwrap()
    }

    #[test]
    fn scores_lie_in_unit_interval() {
        let model = TwoStageModel::new(Mode::Base, Horizon::APOLLOSCAPE, &[16, 16], 1).unwrap();
        let h = history();
        let out = model.score_and_refine(&h, None, proposals(&h)).unwrap();
        assert_eq!(out.len(), 245);
        assert!(out.iter().all(|p| p.refined && (0.0..=1.0).contains(&p.score.unwrap())));
    }

    #[test]
    fn zero_refinement_keeps_geometry() {
        let mut model = TwoStageModel::new(Mode::Base, Horizon::APOLLOSCAPE, &[8], 1).unwrap();
        let last = model.scorer_refiner.layers_mut().last_mut().unwrap();
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        last.bias.iter_mut().for_each(|b| *b = 0.0);
        let h = history();
        let props = proposals(&h);
        let out = model.score_and_refine(&h, None, props.clone()).unwrap();
        for (a, b) in out.iter().zip(&props) {
            assert_eq!(a.end_point, b.end_point);
            assert_eq!(a.gamma, b.gamma);
            for (x, y) in a.future_points.iter().zip(&b.future_points) {
                assert!(x.pos().distance(y.pos()) < 1e-12);
            }
            assert_eq!(a.score, Some(0.5));
        }
    }

    #[test]
    fn wrong_history_length_is_rejected() {
        let model = TwoStageModel::new(Mode::Base, Horizon::ETH_UCY_12, &[8], 1).unwrap();
        assert!(matches!(model.predict_endpoint(&history(), None), Err(Error::Dimension { .. })));
    }

    #[test]
    fn example_gradients_match_finite_differences() {
        let hz = Horizon::APOLLOSCAPE;
        let h = history();
        let fut_pos: Vec<Vec2> = (1..=6).map(|k| Vec2::new(10.0 + 2.2 * k as f64, 1.25 + 0.4 * k as f64)).collect();
        let fut = Trajectory::from_positions(h.last().t + 0.5, 0.5, &fut_pos).unwrap();
        let t = h.last().t;
        let cfg = GridConfig::new(2.0, 1.0, vec![-1.0, 0.0, 1.0]).unwrap();
        let props = generate_base_proposals(&h, Vec2::new(22.0, 3.0), &cfg, hz.t_end(t), &hz.pred_times(t)).unwrap();
        let ex = TrainingExample::build(Mode::Base, &hz, &h, &fut, None, &props, 1.5).unwrap();
        assert!(ex.positives() > 0 && ex.positives() < ex.proposals.len());
        // fitted normalizers would map a lone example to the zero vector, right on every ReLU kink
        let mut model = TwoStageModel::new(Mode::Base, hz, &[6, 5], 9).unwrap();
        model.refine_scale = 0.7;
        model.endpoint_scale = 2.0;
        let selected = vec![true; ex.proposals.len()];
        let (_, grads) = model.example_loss(&ex, &selected, 1.0, 1.0).unwrap();
        let analytic: Vec<f64> = grads.iter().collect();
        let h_step = 1e-5;
        for (k, a) in analytic.iter().enumerate() {
            let eval = |delta: f64| {
                let mut m = model.clone();
                *m.params_mut().nth(k).unwrap() += delta;
                m.example_loss(&ex, &selected, 1.0, 1.0).unwrap().0.total
            };
            let n = (eval(h_step) - eval(-h_step)) / (2.0 * h_step);
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
            assert!(rel < 1e-4, "param {k}: {a} vs {n}");
        }
    }
}
