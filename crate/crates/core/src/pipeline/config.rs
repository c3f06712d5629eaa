//! JSON experiment configuration. Every section and key is optional; missing
//! keys take the defaults below. Relative paths resolve against the config
//! file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{Mode, TrainConfig};
use crate::proposal::GridConfig;
use crate::{Error, Horizon, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataConfig,
    pub horizon: HorizonConfig,
    pub grid: GridSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train_trajectories: Option<PathBuf>,
    pub train_maps: Option<PathBuf>,
    /// Defaults to the training files.
    pub eval_trajectories: Option<PathBuf>,
    pub eval_maps: Option<PathBuf>,
    pub checkpoint: PathBuf,
    pub train_log: PathBuf,
    pub report: PathBuf,
    pub report_csv: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train_trajectories: None,
            train_maps: None,
            eval_trajectories: None,
            eval_maps: None,
            checkpoint: "model.json".into(),
            train_log: "train_log.json".into(),
            report: "report.json".into(),
            report_csv: "report.csv".into(),
        }
    }
}

/// A named preset, optionally with individual fields overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorizonConfig {
    pub preset: String,
    pub obs_frames: Option<usize>,
    pub pred_frames: Option<usize>,
    pub dt: Option<f64>,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        HorizonConfig { preset: "apolloscape".into(), obs_frames: None, pred_frames: None, dt: None }
    }
}

impl HorizonConfig {
    pub fn resolve(&self) -> Result<Horizon> {
        let base = Horizon::preset(&self.preset)?;
        Horizon::new(
            self.obs_frames.unwrap_or(base.obs_frames),
            self.pred_frames.unwrap_or(base.pred_frames),
            self.dt.unwrap_or(base.dt),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub range_m: f64,
    pub interval_m: f64,
    pub gammas: Vec<f64>,
    /// Round the interval so that it divides the range.
    pub snap_interval: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridConfig::default();
        GridSection { range_m: g.range_m, interval_m: g.interval_m, gammas: g.gammas, snap_interval: false }
    }
}

impl GridSection {
    pub fn resolve(&self) -> Result<GridConfig> {
        if self.snap_interval {
            GridConfig::snapped(self.range_m, self.interval_m, self.gammas.clone())
        } else {
            GridConfig::new(self.range_m, self.interval_m, self.gammas.clone())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub mode: Mode,
    pub hidden: Vec<usize>,
    /// Seeds parameter initialization.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { mode: Mode::Base, hidden: vec![64, 64], seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
    pub sigma: f64,
    /// Feed map features to the model and use map lines for generation,
    /// in training and at inference alike.
    pub use_map: bool,
    pub use_safety: bool,
    pub no_refine: bool,
    pub no_classify: bool,
    /// In multimodal mode, fall back to a base grid when no line is near the agent.
    pub base_fallback: bool,
    /// Lines farther than this from the agent's position are ignored.
    pub line_match_radius_m: f64,
    /// Per agent-type weights for the weighted-sum metrics.
    pub type_weights: Option<BTreeMap<String, f64>>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: crate::metrics::DEFAULT_K,
            sigma: 0.5,
            use_map: true,
            use_safety: true,
            no_refine: false,
            no_classify: false,
            base_fallback: true,
            line_match_radius_m: 4.0,
            type_weights: None,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut cfg = Config::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let d = &mut self.data;
        for p in [&mut d.train_trajectories, &mut d.train_maps, &mut d.eval_trajectories, &mut d.eval_maps]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        for p in [&mut d.checkpoint, &mut d.train_log, &mut d.report, &mut d.report_csv] {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.horizon.resolve()?;
        self.grid.resolve()?;
        self.train.validate()?;
        if self.model.hidden.contains(&0) {
            return Err(Error::Config("model.hidden widths must be > 0".into()));
        }
        let e = &self.eval;
        if e.k == 0 {
            return Err(Error::Config("eval.k must be >= 1".into()));
        }
        if !(e.sigma > 0.0 && e.sigma.is_finite()) {
            return Err(Error::Config("eval.sigma must be > 0".into()));
        }
        if !(e.line_match_radius_m > 0.0) {
            return Err(Error::Config("eval.line_match_radius_m must be > 0".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_the_published_hyperparameters() {
        let c = Config::from_json("{}").unwrap();
        assert_eq!(c.train.ad_threshold_m, 3.0);
        assert_eq!(c.train.negative_ratio, 3.0);
        assert_eq!(c.train.batch_size, 128);
        assert_eq!(c.train.epochs, 50);
        assert_eq!(c.eval.k, 6);
        assert_eq!(c.grid.resolve().unwrap().anchor_count(), 245);
        assert_eq!(c.horizon.resolve().unwrap(), Horizon::APOLLOSCAPE);
    }

    #[test]
    fn overrides_and_errors() {
        let c = Config::from_json(r#"{"horizon": {"preset": "eth_ucy_12", "dt": 0.5}, "grid": {"range_m": 10, "interval_m": 1.67, "snap_interval": true}}"#).unwrap();
        assert_eq!(c.horizon.resolve().unwrap(), Horizon { obs_frames: 8, pred_frames: 12, dt: 0.5 });
        assert_eq!(c.grid.resolve().unwrap().steps(), 6);
        assert!(Config::from_json(r#"{"grid": {"range_m": 10, "interval_m": 1.67}}"#).is_err());
        assert!(Config::from_json(r#"{"trian": {}}"#).is_err());
        assert!(Config::from_json(r#"{"horizon": {"preset": "nope"}}"#).is_err());
        assert!(Config::from_json(r#"{"eval": {"k": 0}}"#).is_err());
    }

    #[test]
    fn json_round_trip_and_relative_paths() {
        let mut c = Config::default();
        c.data.train_trajectories = Some("data/train.csv".into());
        assert_eq!(Config::from_json(&c.to_json().unwrap()).unwrap(), c);
        c.resolve_paths(Path::new("/exp"));
        assert_eq!(c.data.train_trajectories.unwrap(), PathBuf::from("/exp/data/train.csv"));
        assert_eq!(c.data.checkpoint, PathBuf::from("/exp/model.json"));
    }
}
