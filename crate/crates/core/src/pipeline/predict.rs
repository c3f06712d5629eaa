//! Two-stage inference for one agent.

use serde::{Deserialize, Serialize};

use crate::curve::Trajectory;
use crate::geo::{apply_safety_filter, MapContext};
use crate::model::{apply_refinement, Mode, StageOne, TwoStageModel};
use crate::pipeline::config::EvalConfig;
use crate::pipeline::scene::{AgentType, PredictionSet, RankedTrajectory};
use crate::proposal::{generate_base_proposals, generate_multimodal_proposals, travel_direction, GridConfig, Proposal, ReferenceLine};
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictOptions {
    pub k: usize,
    pub sigma: f64,
    /// Feed map features and reference lines to the model.
    pub use_map: bool,
    /// Decay scores outside the movable area; independent of `use_map`.
    pub use_safety: bool,
    /// Must match the model's mode.
    pub multimodal: bool,
    pub no_refine: bool,
    /// Rank by distance to the stage-1 estimate instead of by score.
    pub no_classify: bool,
    pub base_fallback: bool,
    pub line_match_radius_m: f64,
}

impl PredictOptions {
    pub fn from_eval(cfg: &EvalConfig, mode: Mode) -> Self {
        PredictOptions {
            k: cfg.k,
            sigma: cfg.sigma,
            use_map: cfg.use_map,
            use_safety: cfg.use_safety,
            multimodal: mode == Mode::Multimodal,
            no_refine: cfg.no_refine,
            no_classify: cfg.no_classify,
            base_fallback: cfg.base_fallback,
            line_match_radius_m: cfg.line_match_radius_m,
        }
    }
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions::from_eval(&EvalConfig::default(), Mode::Base)
    }
}

/// Reference lines passing within `radius` of `p`.
pub fn matching_lines(map: &MapContext, p: Vec2, radius: f64) -> Vec<&ReferenceLine> {
    map.reference_lines
        .iter()
        .filter(|l| crate::proposal::project_to_polyline(p, l).1.abs() <= radius)
        .collect()
}

/// Stage 1 plus proposal generation; also returns the stage-1 output.
pub fn generate_candidates(
    model: &TwoStageModel,
    history: &Trajectory,
    map: Option<&MapContext>,
    grid: &GridConfig,
    opts: &PredictOptions,
) -> Result<(StageOne, Vec<Proposal>)> {
    let map = map.filter(|_| opts.use_map);
    let stage_one = model.predict_endpoint(history, map)?;
    let hz = &model.horizon;
    let t_cur = history.last().t;
    let (t_end, times) = (hz.t_end(t_cur), hz.pred_times(t_cur));
    let proposals = match stage_one {
        StageOne::EndPoint(p_e) => generate_base_proposals(history, p_e, grid, t_end, &times)?,
        StageOne::Displacement(d_ep) => {
            let lines: Vec<ReferenceLine> = map
                .map(|m| matching_lines(m, history.last().pos(), opts.line_match_radius_m))
                .unwrap_or_default()
                .into_iter()
                .cloned()
                .collect();
            if !lines.is_empty() {
                generate_multimodal_proposals(history, &lines, d_ep, grid, t_end, &times)?
            } else if opts.base_fallback {
                let center = history.last().pos() + travel_direction(history) * d_ep;
                generate_base_proposals(history, center, grid, t_end, &times)?
            } else {
                return Err(Error::InvalidArgument("no reference lines near the agent for multimodal prediction".into()));
            }
        }
    };
    Ok((stage_one, proposals))
}

/// Runs the full two-stage prediction and returns the top-`k` trajectories.
#[allow(clippy::too_many_arguments)]
pub fn predict(
    model: &TwoStageModel,
    scene_id: &str,
    agent_id: &str,
    agent_type: AgentType,
    history: &Trajectory,
    map: Option<&MapContext>,
    grid: &GridConfig,
    opts: &PredictOptions,
) -> Result<PredictionSet> {
    if !model.trained {
        return Err(Error::InvalidArgument("model is untrained".into()));
    }
    if opts.multimodal != (model.mode == Mode::Multimodal) {
        return Err(Error::InvalidArgument(format!(
            "multimodal option is {} but the model was trained in {:?} mode",
            opts.multimodal, model.mode
        )));
    }
    if opts.k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let (stage_one, mut proposals) = generate_candidates(model, history, map, grid, opts)?;
    let model_map = map.filter(|_| opts.use_map);
    let refinements = model.score_proposals(history, model_map, &mut proposals)?;

    if opts.no_classify {
        // closeness to the stage-1 estimate, then the least bent, then generation order
        let dist: Vec<f64> = proposals.iter().map(|p| p.end_point.distance(p.anchor)).collect();
        let mut order: Vec<usize> = (0..proposals.len()).collect();
        order.sort_by(|&a, &b| {
            dist[a]
                .total_cmp(&dist[b])
                .then(proposals[a].gamma.abs().total_cmp(&proposals[b].gamma.abs()))
                .then(a.cmp(&b))
        });
        let n = order.len() as f64;
        for (rank, &i) in order.iter().enumerate() {
            proposals[i].score = Some(1.0 - rank as f64 / n);
        }
    }
    if !opts.no_refine {
        proposals = proposals
            .iter()
            .zip(refinements)
            .map(|(p, r)| apply_refinement(history, p, r))
            .collect::<Result<_>>()?;
    }
    let area = map.and_then(|m| m.movable_area.as_ref());
    let safety_filtered = opts.use_safety && area.is_some();
    if let (true, Some(area)) = (opts.use_safety, area) {
        apply_safety_filter(&mut proposals, area, opts.sigma)?;
    }

    let mut order: Vec<usize> = (0..proposals.len()).collect();
    // stable: equal scores keep generation order
    order.sort_by(|&a, &b| proposals[b].score_or_zero().total_cmp(&proposals[a].score_or_zero()));
    let trajectories = order
        .into_iter()
        .take(opts.k)
        .map(|i| {
            let p = &proposals[i];
            RankedTrajectory {
                score: p.score_or_zero(),
                gamma: p.gamma,
                end_point: p.end_point,
                reference_line_id: p.reference_line_id.clone(),
                points: p.future_points.clone(),
            }
        })
        .collect();
    Ok(PredictionSet {
        scene_id: scene_id.to_string(),
        agent_id: agent_id.to_string(),
        agent_type,
        stage_one,
        safety_filtered,
        multimodal: model.mode == Mode::Multimodal,
        trajectories,
    })
}
