use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tpnet::model::checkpoint;
use tpnet::pipeline::config::HorizonConfig;
use tpnet::pipeline::io::{load_dataset, load_predictions, save_dataset, save_predictions};
use tpnet::pipeline::{emit_svg, predict, run_eval, run_train, synth_dataset, Config, Family, PredictOptions, SynthSpec};

#[derive(Parser)]
#[command(name = "tpnet", version, about = "Two-stage proposal-based trajectory prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (trajectories.csv and maps.json).
    Synth(SynthArgs),
    /// Train a model from a config file and write a checkpoint.
    Train(TrainArgs),
    /// Predict the future of every agent in a trajectory file.
    Predict(PredictArgs),
    /// Evaluate a checkpoint and write JSON and CSV reports.
    Eval(EvalArgs),
    /// Render one scene (and optionally its predictions) as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    scenes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of position noise in meters.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Comma-separated: cv, ca, lane, turn, two_intention, t_junction.
    #[arg(long, value_delimiter = ',', default_value = "cv,ca,lane,turn")]
    families: Vec<String>,
    /// Horizon preset: apolloscape, eth_ucy_8, eth_ucy_12, argoverse.
    #[arg(long, default_value = "apolloscape")]
    horizon: String,
    /// Keep every scene in the canonical pose instead of a random rigid one.
    #[arg(long)]
    canonical_pose: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    train_log: Option<PathBuf>,
    #[arg(long)]
    trajectories: Option<PathBuf>,
    #[arg(long)]
    maps: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    trajectories: PathBuf,
    #[arg(long)]
    maps: Option<PathBuf>,
    /// Config supplying grid and evaluation defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    no_safety: bool,
    #[arg(long)]
    no_map: bool,
    #[arg(long, default_value = "predictions.json")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    trajectories: Option<PathBuf>,
    #[arg(long)]
    maps: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    no_safety: bool,
    #[arg(long)]
    no_refine: bool,
    #[arg(long)]
    no_classify: bool,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV report path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    trajectories: PathBuf,
    #[arg(long)]
    maps: Option<PathBuf>,
    #[arg(long)]
    scene: String,
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Horizon preset of the trajectory file.
    #[arg(long, default_value = "apolloscape")]
    horizon: String,
    #[arg(long)]
    out: PathBuf,
}

fn horizon(preset: &str) -> Result<tpnet::Horizon> {
    Ok(HorizonConfig { preset: preset.into(), ..HorizonConfig::default() }.resolve()?)
}

fn load_config(path: &Path) -> Result<Config> {
    Config::load(path).with_context(|| format!("loading config {}", path.display()))
}

fn synth(a: SynthArgs) -> Result<()> {
    let families = a.families.iter().map(|f| Family::parse(f.trim())).collect::<tpnet::Result<Vec<_>>>()?;
    let spec = SynthSpec {
        scenes: a.scenes,
        families,
        noise_std: a.noise,
        seed: a.seed,
        horizon: horizon(&a.horizon)?,
        random_pose: !a.canonical_pose,
    };
    let scenes = synth_dataset(&spec)?;
    let (traj, maps) = (a.out_dir.join("trajectories.csv"), a.out_dir.join("maps.json"));
    save_dataset(&traj, &maps, &scenes)?;
    println!("wrote {} scenes to {} and {}", scenes.len(), traj.display(), maps.display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
        cfg.model.seed = s;
    }
    if let Some(p) = a.checkpoint {
        cfg.data.checkpoint = p;
    }
    if let Some(p) = a.train_log {
        cfg.data.train_log = p;
    }
    if let Some(p) = a.trajectories {
        cfg.data.train_trajectories = Some(p);
    }
    if let Some(p) = a.maps {
        cfg.data.train_maps = Some(p);
    }
    let outcome = run_train(&cfg)?;
    for log in &outcome.logs {
        println!(
            "epoch {:>3}  lr {:.2e}  loss {:.4}  (endpoint {:.4}, cls {:.4}, refine {:.4})",
            log.epoch, log.learning_rate, log.loss, log.endpoint, log.classification, log.refinement
        );
    }
    println!("trained on {} examples; checkpoint {}", outcome.examples, cfg.data.checkpoint.display());
    Ok(())
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => load_config(p)?,
        None => Config::default(),
    };
    let model = checkpoint::load(&a.checkpoint).with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    let scenes = load_dataset(&a.trajectories, a.maps.as_deref(), &model.horizon)?;
    let mut opts = PredictOptions::from_eval(&cfg.eval, model.mode);
    if let Some(k) = a.k {
        opts.k = k;
    }
    if let Some(s) = a.sigma {
        opts.sigma = s;
    }
    opts.use_safety &= !a.no_safety;
    opts.use_map &= !a.no_map;
    let grid = cfg.grid.resolve()?;
    let mut out = Vec::new();
    for scene in &scenes {
        for (id, agent) in &scene.agents {
            out.push(predict(&model, &scene.scene_id, id, agent.agent_type, &agent.history, scene.map.as_ref(), &grid, &opts)?);
        }
    }
    save_predictions(&a.out, &out)?;
    println!("wrote {} prediction sets to {}", out.len(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(p) = a.checkpoint {
        cfg.data.checkpoint = p;
    }
    if let Some(p) = a.trajectories {
        cfg.data.eval_trajectories = Some(p);
        cfg.data.eval_maps = a.maps;
    } else if a.maps.is_some() {
        bail!("--maps needs --trajectories");
    }
    if let Some(k) = a.k {
        cfg.eval.k = k;
    }
    if let Some(s) = a.sigma {
        cfg.eval.sigma = s;
    }
    cfg.eval.use_safety &= !a.no_safety;
    cfg.eval.no_refine |= a.no_refine;
    cfg.eval.no_classify |= a.no_classify;
    if let Some(p) = a.out {
        cfg.data.report = p;
    }
    if let Some(p) = a.csv {
        cfg.data.report_csv = p;
    }
    let r = run_eval(&cfg)?.report;
    println!("agents {}  ADE {:.4}  FDE {:.4}  minADE@{k} {:.4}  minFDE@{k} {:.4}", r.agents, r.ade, r.fde, r.min_ade, r.min_fde, k = r.k);
    if let Some(d) = r.dac {
        println!("DAC {d:.4}");
    }
    println!("reports: {} and {}", cfg.data.report.display(), cfg.data.report_csv.display());
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let scenes = load_dataset(&a.trajectories, a.maps.as_deref(), &horizon(&a.horizon)?)?;
    let Some(scene) = scenes.iter().find(|s| s.scene_id == a.scene) else {
        bail!("scene {} not found in {}", a.scene, a.trajectories.display());
    };
    let predictions = match &a.predictions {
        Some(p) => load_predictions(p)?,
        None => Vec::new(),
    };
    emit_svg(scene, &predictions, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
