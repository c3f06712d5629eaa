//! Training and evaluation drivers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::Trajectory;
use crate::geo::{dac, MapContext};
use crate::metrics::{MetricAccumulator, MetricReport};
use crate::model::checkpoint;
use crate::model::features::displacement_along_nearest_line;
use crate::model::{train, EpochLog, Mode, TrainConfig, TrainingExample, TwoStageModel};
use crate::pipeline::config::Config;
use crate::pipeline::io::{load_dataset, save_json, save_text};
use crate::pipeline::predict::{matching_lines, predict, PredictOptions};
use crate::pipeline::scene::{PredictionSet, Scene};
use crate::proposal::{generate_base_proposals, generate_multimodal_proposals, GridConfig, Proposal, ReferenceLine};
use crate::seed::mix_seed;
use crate::{Error, Horizon, Result, Vec2};

/// How training proposals are generated around the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleOptions {
    pub mode: Mode,
    pub horizon: Horizon,
    pub grid: GridConfig,
    pub use_map: bool,
    pub line_match_radius_m: f64,
}

fn mirror(t: &Trajectory) -> Trajectory {
    t.map_positions(|p| Vec2::new(p.x, -p.y))
}

fn training_proposals(
    opts: &ExampleOptions,
    history: &Trajectory,
    future: &Trajectory,
    map: Option<&MapContext>,
    jitter: Vec2,
) -> Result<Option<Vec<Proposal>>> {
    let hz = &opts.horizon;
    let t_cur = history.last().t;
    let (t_end, times) = (hz.t_end(t_cur), hz.pred_times(t_cur));
    let gt_end = future.last().pos();
    match opts.mode {
        Mode::Base => Ok(Some(generate_base_proposals(history, gt_end + jitter, &opts.grid, t_end, &times)?)),
        Mode::Multimodal => {
            let Some(map) = map else { return Ok(None) };
            let lines: Vec<ReferenceLine> =
                matching_lines(map, history.last().pos(), opts.line_match_radius_m).into_iter().cloned().collect();
            let Some(d) = displacement_along_nearest_line(map, history.last().pos(), gt_end) else { return Ok(None) };
            if lines.is_empty() {
                return Ok(None);
            }
            let d_ep = (d + jitter.x).max(0.0);
            Ok(Some(generate_multimodal_proposals(history, &lines, d_ep, &opts.grid, t_end, &times)?))
        }
    }
}

fn build_example(
    opts: &ExampleOptions,
    train: &TrainConfig,
    history: &Trajectory,
    future: &Trajectory,
    map: Option<&MapContext>,
    jitter: Vec2,
) -> Result<Option<TrainingExample>> {
    let map = map.filter(|_| opts.use_map);
    let Some(proposals) = training_proposals(opts, history, future, map, jitter)? else { return Ok(None) };
    TrainingExample::build(opts.mode, &opts.horizon, history, future, map, &proposals, train.ad_threshold_m).map(Some)
}

/// Labeled examples for every target agent, in scene and agent order.
///
/// Agents that cannot be used in the chosen mode (no matching reference line
/// in multimodal mode) are skipped.
pub fn build_training_set(scenes: &[Scene], opts: &ExampleOptions, train: &TrainConfig) -> Result<Vec<TrainingExample>> {
    let jitter = Normal::new(0.0, train.anchor_jitter_m).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let agents: Vec<(&Scene, &Trajectory, &Trajectory)> = scenes
        .iter()
        .flat_map(|s| s.targets().map(move |(_, a)| (s, &a.history, a.future.as_ref().expect("target has a future"))))
        .collect();
    let built: Vec<Option<TrainingExample>> = agents
        .par_iter()
        .enumerate()
        .map(|(i, (scene, history, future))| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(train.seed, i as u64, 1));
            let j = Vec2::new(jitter.sample(&mut rng), jitter.sample(&mut rng));
            let Some(mut ex) = build_example(opts, train, history, future, scene.map.as_ref(), j)? else {
                return Ok(None);
            };
            if train.augment {
                let map = scene.map.as_ref().map(MapContext::mirrored);
                let j = Vec2::new(j.x, -j.y);
                ex.mirrored = build_example(opts, train, &mirror(history), &mirror(future), map.as_ref(), j)?.map(Box::new);
            }
            Ok(Some(ex))
        })
        .collect::<Result<_>>()?;
    Ok(built.into_iter().flatten().collect())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TwoStageModel,
    pub logs: Vec<EpochLog>,
    pub examples: usize,
}

/// Trains on already-loaded scenes.
pub fn train_on_scenes(scenes: &[Scene], cfg: &Config) -> Result<TrainOutcome> {
    cfg.validate()?;
    let horizon = cfg.horizon.resolve()?;
    let opts = ExampleOptions {
        mode: cfg.model.mode,
        horizon,
        grid: cfg.grid.resolve()?,
        use_map: cfg.eval.use_map,
        line_match_radius_m: cfg.eval.line_match_radius_m,
    };
    if scenes.iter().all(|s| s.targets().next().is_none()) {
        return Err(Error::Empty("training scenes with a ground-truth future"));
    }
    let data = build_training_set(scenes, &opts, &cfg.train)?;
    if data.is_empty() {
        return Err(Error::Empty("usable training examples"));
    }
    let model = TwoStageModel::new(cfg.model.mode, horizon, &cfg.model.hidden, cfg.model.seed)?;
    let (mut model, logs) = train(&data, model, &cfg.train)?;
    // a zero-epoch run still yields a usable (if naive) model
    model.trained = true;
    Ok(TrainOutcome { model, logs, examples: data.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub examples: usize,
    pub epochs: Vec<EpochLog>,
}

/// Loads the training data named in `cfg`, trains, and writes the checkpoint and log.
pub fn run_train(cfg: &Config) -> Result<TrainOutcome> {
    cfg.validate()?;
    let path = cfg
        .data
        .train_trajectories
        .as_ref()
        .ok_or_else(|| Error::Config("data.train_trajectories is required for training".into()))?;
    let scenes = load_dataset(path, cfg.data.train_maps.as_deref(), &cfg.horizon.resolve()?)?;
    let outcome = train_on_scenes(&scenes, cfg)?;
    checkpoint::save(&outcome.model, &cfg.data.checkpoint)?;
    save_json(&cfg.data.train_log, &TrainLog { examples: outcome.examples, epochs: outcome.logs.clone() })?;
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricReport,
    pub predictions: Vec<PredictionSet>,
}

/// Predicts every target agent (in scene and agent order) and scores the results.
pub fn evaluate(
    model: &TwoStageModel,
    scenes: &[Scene],
    grid: &GridConfig,
    opts: &PredictOptions,
    weights: Option<&BTreeMap<String, f64>>,
) -> Result<Evaluation> {
    let jobs: Vec<_> = scenes.iter().flat_map(|s| s.targets().map(move |(id, a)| (s, id, a))).collect();
    let predictions: Vec<PredictionSet> = jobs
        .par_iter()
        .map(|(s, id, a)| predict(model, &s.scene_id, id, a.agent_type, &a.history, s.map.as_ref(), grid, opts))
        .collect::<Result<_>>()?;
    let mut acc = MetricAccumulator::new(opts.k);
    let (mut inside, mut total) = (0.0, 0usize);
    for ((scene, _, agent), pred) in jobs.iter().zip(&predictions) {
        let gt = agent.ground_truth().expect("target has a future");
        let ranked = pred.ranked_positions();
        acc.add(agent.agent_type.as_str(), &ranked, &gt)?;
        if let Some(area) = scene.map.as_ref().and_then(|m| m.drivable_area.as_ref()) {
            let top = &ranked[..1];
            inside += dac(top, area)? * top[0].len() as f64;
            total += top[0].len();
        }
    }
    let dac = (total > 0).then(|| inside / total as f64);
    Ok(Evaluation { report: acc.finish(weights, dac)?, predictions })
}

pub fn report_to_csv(report: &MetricReport) -> String {
    let mut s = String::from("scope,metric,value\n");
    let mut row = |scope: &str, metric: &str, value: f64| {
        let _ = writeln!(s, "{scope},{metric},{value}");
    };
    row("all", "ade", report.ade);
    row("all", "fde", report.fde);
    row("all", "min_ade", report.min_ade);
    row("all", "min_fde", report.min_fde);
    row("all", "k", report.k as f64);
    row("all", "agents", report.agents as f64);
    if let Some(d) = report.dac {
        row("all", "dac", d);
    }
    if let (Some(a), Some(f)) = (report.wsade, report.wsfde) {
        row("all", "wsade", a);
        row("all", "wsfde", f);
    }
    for (t, m) in &report.per_type {
        row(t, "ade", m.ade);
        row(t, "fde", m.fde);
        row(t, "min_ade", m.min_ade);
        row(t, "min_fde", m.min_fde);
        row(t, "count", m.count as f64);
    }
    s
}

/// Loads the checkpoint and evaluation data named in `cfg`, evaluates, and writes the reports.
pub fn run_eval(cfg: &Config) -> Result<Evaluation> {
    cfg.validate()?;
    let horizon = cfg.horizon.resolve()?;
    if !cfg.data.checkpoint.exists() {
        return Err(Error::Config(format!("checkpoint {} does not exist", cfg.data.checkpoint.display())));
    }
    let model = checkpoint::load(&cfg.data.checkpoint)?;
    if model.horizon != horizon {
        return Err(Error::Config(format!(
            "checkpoint horizon {:?} does not match data horizon {:?}",
            model.horizon, horizon
        )));
    }
    let d = &cfg.data;
    let (traj, maps) = match &d.eval_trajectories {
        Some(t) => (t, d.eval_maps.as_deref()),
        None => (
            d.train_trajectories.as_ref().ok_or_else(|| Error::Config("no evaluation trajectories configured".into()))?,
            d.train_maps.as_deref(),
        ),
    };
    let scenes = load_dataset(traj, maps, &horizon)?;
    let opts = PredictOptions::from_eval(&cfg.eval, model.mode);
    let eval = evaluate(&model, &scenes, &cfg.grid.resolve()?, &opts, cfg.eval.type_weights.as_ref())?;
    save_json(&d.report, &eval.report)?;
    save_text(&d.report_csv, &report_to_csv(&eval.report))?;
    Ok(eval)
}
