use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curve::{TimedPoint, Trajectory};
use crate::geo::MapContext;
use crate::model::StageOne;
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentType {
    Vehicle,
    Pedestrian,
    Cyclist,
}

impl AgentType {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentType::Vehicle => "vehicle",
            AgentType::Pedestrian => "pedestrian",
            AgentType::Cyclist => "cyclist",
        }
    }
}

impl fmt::Display for AgentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vehicle" => Ok(AgentType::Vehicle),
            "pedestrian" => Ok(AgentType::Pedestrian),
            "cyclist" => Ok(AgentType::Cyclist),
            other => Err(Error::Schema(format!("unknown agent type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub agent_type: AgentType,
    pub history: Trajectory,
    /// Absent for agents observed only up to the current frame.
    pub future: Option<Trajectory>,
}

impl Agent {
    pub fn ground_truth(&self) -> Option<Vec<Vec2>> {
        self.future.as_ref().map(Trajectory::positions)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scene_id: String,
    pub agents: BTreeMap<String, Agent>,
    pub map: Option<MapContext>,
}

impl Scene {
    /// Agents with a future, in id order.
    pub fn targets(&self) -> impl Iterator<Item = (&String, &Agent)> {
        self.agents.iter().filter(|(_, a)| a.future.is_some())
    }
}

/// One ranked prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTrajectory {
    pub score: f64,
    pub gamma: f64,
    pub end_point: Vec2,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_line_id: Option<String>,
    pub points: Vec<TimedPoint>,
}

impl RankedTrajectory {
    pub fn positions(&self) -> Vec<Vec2> {
        self.points.iter().map(TimedPoint::pos).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub scene_id: String,
    pub agent_id: String,
    pub agent_type: AgentType,
    pub stage_one: StageOne,
    pub safety_filtered: bool,
    pub multimodal: bool,
    /// Best first; scores are non-increasing.
    pub trajectories: Vec<RankedTrajectory>,
}

impl PredictionSet {
    pub fn ranked_positions(&self) -> Vec<Vec<Vec2>> {
        self.trajectories.iter().map(RankedTrajectory::positions).collect()
    }
}
