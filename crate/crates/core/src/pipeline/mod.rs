//! End-to-end data handling, prediction and evaluation.

pub mod config;
pub mod io;
pub mod predict;
pub mod runner;
pub mod scene;
pub mod svg;
pub mod synth;

pub use config::Config;
pub use predict::{predict, PredictOptions};
pub use runner::{evaluate, run_eval, run_train, train_on_scenes, Evaluation, TrainOutcome};
pub use scene::{Agent, AgentType, PredictionSet, RankedTrajectory, Scene};
pub use svg::{emit_svg, render_svg};
pub use synth::{synth_dataset, Family, SynthSpec};
