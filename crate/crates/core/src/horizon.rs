use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Observation/prediction frame counts and the sampling step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub obs_frames: usize,
    pub pred_frames: usize,
    pub dt: f64,
}

impl Horizon {
    pub const ETH_UCY_8: Horizon = Horizon { obs_frames: 8, pred_frames: 8, dt: 0.4 };
    pub const ETH_UCY_12: Horizon = Horizon { obs_frames: 8, pred_frames: 12, dt: 0.4 };
    pub const APOLLOSCAPE: Horizon = Horizon { obs_frames: 6, pred_frames: 6, dt: 0.5 };
    pub const ARGOVERSE: Horizon = Horizon { obs_frames: 20, pred_frames: 30, dt: 0.1 };

    pub fn new(obs_frames: usize, pred_frames: usize, dt: f64) -> Result<Self> {
        let h = Horizon { obs_frames, pred_frames, dt };
        h.validate()?;
        Ok(h)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "eth_ucy_8" => Ok(Self::ETH_UCY_8),
            "eth_ucy_12" | "eth_ucy" => Ok(Self::ETH_UCY_12),
            "apolloscape" => Ok(Self::APOLLOSCAPE),
            "argoverse" => Ok(Self::ARGOVERSE),
            other => Err(Error::Config(format!(
                "unknown horizon preset `{other}` (expected eth_ucy_8, eth_ucy_12, apolloscape or argoverse)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.obs_frames < 2 || self.pred_frames < 1 || !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("invalid horizon {self:?}")));
        }
        Ok(())
    }

    pub fn t_obs(&self) -> f64 {
        self.obs_frames as f64 * self.dt
    }

    pub fn t_pre(&self) -> f64 {
        self.pred_frames as f64 * self.dt
    }

    /// Prediction timestamps following an observation that ends at `t_current`.
    pub fn pred_times(&self, t_current: f64) -> Vec<f64> {
        (1..=self.pred_frames).map(|k| t_current + k as f64 * self.dt).collect()
    }

    pub fn t_end(&self, t_current: f64) -> f64 {
        t_current + self.pred_frames as f64 * self.dt
    }
}
