//! Trajectory CSV, map JSON and prediction JSON files.
//!
//! Trajectory CSV columns, one row per observation:
//! `scene_id,agent_id,agent_type,frame_index,t_seconds,x_m,y_m`.
//! Rows of one agent must appear in increasing frame order.
//!
//! A map file is either a single map object
//! `{"reference_lines": [{"id", "points": [[x, y], ..]}], "movable_area": [[[x, y], ..], ..], "drivable_area": ..}`
//! shared by every scene, or an object keyed by scene id whose values are map objects.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::curve::{TimedPoint, Trajectory};
use crate::geo::MapContext;
use crate::pipeline::scene::{Agent, AgentType, PredictionSet, Scene};
use crate::{Error, Horizon, Result};

pub const CSV_HEADER: [&str; 7] = ["scene_id", "agent_id", "agent_type", "frame_index", "t_seconds", "x_m", "y_m"];

/// Timestamps of one agent must sit on the horizon's `dt` to this tolerance.
const DT_TOLERANCE: f64 = 1e-6;

struct Row {
    line: usize,
    agent_type: AgentType,
    frame: u64,
    point: TimedPoint,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Parses trajectory CSV text; `path` is only used in error messages.
pub fn parse_trajectories(text: &str, path: &Path, horizon: &Horizon) -> Result<Vec<Scene>> {
    horizon.validate()?;
    let parse_err = |line: usize, reason: String| Error::Parse { path: path.to_path_buf(), line, reason };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(parse_err(1, format!("expected header `{}`", CSV_HEADER.join(","))));
    }

    let mut agents: BTreeMap<(String, String), Vec<Row>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != CSV_HEADER.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", CSV_HEADER.len(), record.len())));
        }
        let num = |k: usize| -> Result<f64> {
            let v: f64 = record[k].parse().map_err(|_| parse_err(line, format!("{} `{}` is not a number", CSV_HEADER[k], &record[k])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("{} is not finite", CSV_HEADER[k])));
            }
            Ok(v)
        };
        let agent_type: AgentType = record[2].parse().map_err(|e: Error| parse_err(line, e.to_string()))?;
        let frame: u64 = record[3]
            .parse()
            .map_err(|_| parse_err(line, format!("frame_index `{}` is not a non-negative integer", &record[3])))?;
        let point = TimedPoint::new(num(4)?, num(5)?, num(6)?);
        let key = (record[0].to_string(), record[1].to_string());
        if key.0.is_empty() || key.1.is_empty() {
            return Err(parse_err(line, "empty scene_id or agent_id".into()));
        }
        let rows = agents.entry(key).or_default();
        if let Some(prev) = rows.last() {
            if rows.iter().any(|r| r.frame == frame) {
                return Err(parse_err(line, format!("duplicate frame {frame} for agent `{}`", &record[1])));
            }
            if frame < prev.frame {
                return Err(parse_err(line, format!("frame {frame} after frame {} for agent `{}`", prev.frame, &record[1])));
            }
            if prev.agent_type != agent_type {
                return Err(parse_err(line, format!("agent `{}` changes type", &record[1])));
            }
        }
        rows.push(Row { line, agent_type, frame, point });
    }

    let mut scenes: BTreeMap<String, Scene> = BTreeMap::new();
    for ((scene_id, agent_id), rows) in agents {
        let agent = build_agent(&rows, horizon).map_err(|reason| parse_err(rows[0].line, format!("agent `{agent_id}` in scene `{scene_id}`: {reason}")))?;
        scenes
            .entry(scene_id.clone())
            .or_insert_with(|| Scene { scene_id, agents: BTreeMap::new(), map: None })
            .agents
            .insert(agent_id, agent);
    }
    Ok(scenes.into_values().collect())
}

fn build_agent(rows: &[Row], horizon: &Horizon) -> std::result::Result<Agent, String> {
    let (obs, pred) = (horizon.obs_frames, horizon.pred_frames);
    for w in rows.windows(2) {
        if w[1].frame != w[0].frame + 1 {
            return Err(format!("frames {} and {} are not consecutive", w[0].frame, w[1].frame));
        }
        let dt = w[1].point.t - w[0].point.t;
        if (dt - horizon.dt).abs() > DT_TOLERANCE {
            return Err(format!("time step {dt} at frame {} does not match dt {}", w[1].frame, horizon.dt));
        }
    }
    let points: Vec<TimedPoint> = rows.iter().map(|r| r.point).collect();
    let traj = |pts: &[TimedPoint]| Trajectory::new(pts.to_vec()).map_err(|e| e.to_string());
    let future = match points.len() {
        n if n == obs => None,
        n if n == obs + pred => Some(traj(&points[obs..])?),
        n if n < obs => return Err(format!("{n} frames, fewer than the {obs} observed frames")),
        n => return Err(format!("{n} frames; expected {obs} (history only) or {} (history and future)", obs + pred)),
    };
    Ok(Agent { agent_type: rows[0].agent_type, history: traj(&points[..obs])?, future })
}

pub fn load_trajectories(path: &Path, horizon: &Horizon) -> Result<Vec<Scene>> {
    parse_trajectories(&read_text(path)?, path, horizon)
}

pub fn trajectories_to_csv(scenes: &[Scene]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Schema(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for scene in scenes {
        for (agent_id, agent) in &scene.agents {
            let points = agent.history.points().iter().chain(agent.future.iter().flat_map(|f| f.points()));
            for (k, p) in points.enumerate() {
                w.write_record([
                    scene.scene_id.as_str(),
                    agent_id,
                    agent.agent_type.as_str(),
                    &k.to_string(),
                    &p.t.to_string(),
                    &p.x.to_string(),
                    &p.y.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Schema(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn save_trajectories(path: &Path, scenes: &[Scene]) -> Result<()> {
    write_text(path, &trajectories_to_csv(scenes)?)
}

fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn load_map(path: &Path) -> Result<MapContext> {
    let map: MapContext = parse_json(&read_text(path)?, path)?;
    map.validate()?;
    Ok(map)
}

pub fn save_map(path: &Path, map: &MapContext) -> Result<()> {
    write_text(path, &to_json(map)?)
}

/// Maps for a dataset: one shared map or one per scene.
#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    Shared(MapContext),
    PerScene(BTreeMap<String, MapContext>),
}

pub fn load_maps(path: &Path) -> Result<MapSource> {
    let text = read_text(path)?;
    let value: serde_json::Value = parse_json(&text, path)?;
    if value.get("reference_lines").is_some() {
        let map: MapContext = parse_json(&text, path)?;
        map.validate()?;
        return Ok(MapSource::Shared(map));
    }
    let maps: BTreeMap<String, MapContext> = parse_json(&text, path)?;
    for m in maps.values() {
        m.validate()?;
    }
    Ok(MapSource::PerScene(maps))
}

pub fn save_map_bundle(path: &Path, scenes: &[Scene]) -> Result<()> {
    let maps: BTreeMap<&str, &MapContext> =
        scenes.iter().filter_map(|s| s.map.as_ref().map(|m| (s.scene_id.as_str(), m))).collect();
    write_text(path, &to_json(&maps)?)
}

/// Attaches maps to scenes; scenes missing from a per-scene bundle keep no map.
pub fn attach_maps(scenes: &mut [Scene], source: &MapSource) {
    for s in scenes {
        s.map = match source {
            MapSource::Shared(m) => Some(m.clone()),
            MapSource::PerScene(maps) => maps.get(&s.scene_id).cloned(),
        };
    }
}

/// Trajectories plus optional maps.
pub fn load_dataset(trajectories: &Path, maps: Option<&Path>, horizon: &Horizon) -> Result<Vec<Scene>> {
    let mut scenes = load_trajectories(trajectories, horizon)?;
    if let Some(m) = maps {
        attach_maps(&mut scenes, &load_maps(m)?);
    }
    Ok(scenes)
}

pub fn save_dataset(trajectories: &Path, maps: &Path, scenes: &[Scene]) -> Result<()> {
    save_trajectories(trajectories, scenes)?;
    save_map_bundle(maps, scenes)
}

pub fn predictions_to_json(predictions: &[PredictionSet]) -> Result<String> {
    to_json(predictions)
}

pub fn save_predictions(path: &Path, predictions: &[PredictionSet]) -> Result<()> {
    write_text(path, &predictions_to_json(predictions)?)
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionSet>> {
    parse_json(&read_text(path)?, path)
}

pub(crate) fn save_json<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub(crate) fn save_text(path: &Path, text: &str) -> Result<()> {
    write_text(path, text)
}
