//! Static SVG rendering of a scene and its predictions.

use std::fmt::Write as _;
use std::path::Path;

use crate::pipeline::io::save_text;
use crate::pipeline::scene::{PredictionSet, Scene};
use crate::{Error, Result, Vec2};

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 20.0;
const LEGEND_HEIGHT: f64 = 110.0;

const PALETTE: [&str; 6] = ["#d62728", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Frame {
    min: Vec2,
    scale: f64,
    height: f64,
}

impl Frame {
    fn fit(points: &[Vec2]) -> Frame {
        let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in points {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if points.is_empty() {
            lo = Vec2::ZERO;
            hi = Vec2::new(1.0, 1.0);
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(1.0);
        let scale = (WIDTH - 2.0 * MARGIN) / span;
        Frame { min: lo, scale, height: (hi.y - lo.y) * scale + 2.0 * MARGIN }
    }

    /// Screen coordinates; y points down.
    fn map(&self, p: Vec2) -> (f64, f64) {
        (MARGIN + (p.x - self.min.x) * self.scale, self.height - MARGIN - (p.y - self.min.y) * self.scale)
    }

    fn points_attr(&self, pts: &[Vec2]) -> String {
        pts.iter()
            .map(|p| {
                let (x, y) = self.map(*p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders `scene` (all agents) and, optionally, predictions for its agents.
///
/// Drawn trajectories are `<polyline>` elements with class `history`,
/// `ground-truth` or `prediction`; reference lines use class `reference-line`.
pub fn render_svg(scene: &Scene, predictions: &[PredictionSet]) -> Result<String> {
    let preds: Vec<&PredictionSet> = predictions.iter().filter(|p| p.scene_id == scene.scene_id).collect();
    let mut all: Vec<Vec2> = Vec::new();
    for a in scene.agents.values() {
        all.extend(a.history.positions());
        all.extend(a.ground_truth().unwrap_or_default());
    }
    for p in &preds {
        all.extend(p.ranked_positions().into_iter().flatten());
    }
    if all.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::NonFinite("svg coordinate"));
    }
    // frame the agents, not the whole map
    let frame = Frame::fit(&all);
    let height = frame.height + LEGEND_HEIGHT;

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"#
    );
    let _ = writeln!(w, "<title>{}</title>", escape(&scene.scene_id));
    let _ = writeln!(w, r##"<rect x="0" y="0" width="{WIDTH:.0}" height="{height:.0}" fill="#ffffff"/>"##);
    let _ = writeln!(w, r#"<clipPath id="plot"><rect x="0" y="0" width="{WIDTH:.0}" height="{:.2}"/></clipPath>"#, frame.height);
    let _ = writeln!(w, r#"<g clip-path="url(#plot)">"#);
    if let Some(map) = &scene.map {
        for poly in map.drivable_area.iter().flat_map(|a| &a.polygons) {
            let _ = writeln!(w, r##"<polygon class="drivable-area" points="{}" fill="#e8e8e8" stroke="#bbbbbb"/>"##, frame.points_attr(poly.vertices()));
        }
        for poly in map.movable_area.iter().flat_map(|a| &a.polygons) {
            let _ = writeln!(w, r##"<polygon class="movable-area" points="{}" fill="#cfe8cf" fill-opacity="0.6" stroke="none"/>"##, frame.points_attr(poly.vertices()));
        }
        for line in &map.reference_lines {
            let _ = writeln!(
                w,
                r##"<polyline class="reference-line" data-id="{}" points="{}" fill="none" stroke="#888888" stroke-dasharray="4 3"/>"##,
                escape(line.id()),
                frame.points_attr(line.points())
            );
        }
    }
    let _ = writeln!(w, "</g>");
    for (id, a) in &scene.agents {
        let mut hist = a.history.positions();
        let _ = writeln!(
            w,
            r##"<polyline class="history" data-agent="{}" points="{}" fill="none" stroke="#1f77b4" stroke-width="2.5"/>"##,
            escape(id),
            frame.points_attr(&hist)
        );
        if let Some(mut gt) = a.ground_truth() {
            gt.insert(0, *hist.last().expect("history is non-empty"));
            let _ = writeln!(
                w,
                r##"<polyline class="ground-truth" data-agent="{}" points="{}" fill="none" stroke="#2ca02c" stroke-width="2.5"/>"##,
                escape(id),
                frame.points_attr(&gt)
            );
        }
        hist.clear();
    }
    for p in &preds {
        let origin = scene.agents.get(&p.agent_id).map(|a| a.history.last().pos());
        for (rank, t) in p.trajectories.iter().enumerate() {
            let mut pts = t.positions();
            if let Some(o) = origin {
                pts.insert(0, o);
            }
            let width = if rank == 0 { 2.0 } else { 1.2 };
            let _ = writeln!(
                w,
                r#"<polyline class="prediction" data-agent="{}" data-rank="{}" data-score="{:.4}" points="{}" fill="none" stroke="{}" stroke-width="{width}"/>"#,
                escape(&p.agent_id),
                rank + 1,
                t.score,
                frame.points_attr(&pts),
                PALETTE[rank % PALETTE.len()]
            );
        }
    }
    let y0 = frame.height + 10.0;
    let _ = writeln!(w, r#"<g class="legend" font-family="sans-serif" font-size="12">"#);
    let entries = [
        ("history", "#1f77b4", ""),
        ("ground truth", "#2ca02c", ""),
        ("prediction (rank 1)", PALETTE[0], ""),
        ("prediction (rank 2+)", PALETTE[1], ""),
        ("reference line", "#888888", r#" stroke-dasharray="4 3""#),
    ];
    for (k, (label, color, dash)) in entries.iter().enumerate() {
        let y = y0 + 18.0 * k as f64;
        let _ = writeln!(w, r#"<line x1="{MARGIN}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"{dash}/>"#, y + 6.0, MARGIN + 30.0, y + 6.0);
        let _ = writeln!(w, r#"<text x="{:.1}" y="{:.1}">{label}</text>"#, MARGIN + 38.0, y + 10.0);
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, "</svg>");
    Ok(s)
}

pub fn emit_svg(scene: &Scene, predictions: &[PredictionSet], path: &Path) -> Result<()> {
    save_text(path, &render_svg(scene, predictions)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::Trajectory;
    use crate::pipeline::scene::RankedTrajectory;
    use crate::pipeline::synth::{synth_dataset, Family, SynthSpec, TARGET_AGENT};
    use crate::model::StageOne;

    fn scene() -> Scene {
        synth_dataset(&SynthSpec { scenes: 4, families: vec![Family::Turn], seed: 1, ..SynthSpec::default() }).unwrap().remove(0)
    }

    fn predictions(scene: &Scene, n: usize) -> PredictionSet {
        let future: &Trajectory = scene.agents[TARGET_AGENT].future.as_ref().unwrap();
        PredictionSet {
            scene_id: scene.scene_id.clone(),
            agent_id: TARGET_AGENT.into(),
            agent_type: crate::pipeline::AgentType::Vehicle,
            stage_one: StageOne::EndPoint(future.last().pos()),
            safety_filtered: false,
            multimodal: false,
            trajectories: (0..n)
                .map(|k| RankedTrajectory {
                    score: 1.0 / (k + 1) as f64,
                    gamma: 0.0,
                    end_point: future.last().pos(),
                    reference_line_id: None,
                    points: future.points().to_vec(),
                })
                .collect(),
        }
    }

    fn count(svg: &str, class: &str) -> usize {
        svg.matches(&format!(r#"<polyline class="{class}""#)).count()
    }

    #[test]
    fn draws_one_polyline_per_trajectory() {
        let s = scene();
        let svg = render_svg(&s, &[predictions(&s, 3)]).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(count(&svg, "history"), 1);
        assert_eq!(count(&svg, "ground-truth"), 1);
        assert_eq!(count(&svg, "prediction"), 3);
        assert_eq!(count(&svg, "reference-line"), s.map.as_ref().unwrap().reference_lines.len());
        assert!(svg.contains(r#"data-rank="3""#));
        assert_eq!(svg.matches("<g").count(), svg.matches("</g>").count());
    }

    #[test]
    fn ignores_other_scenes_and_rejects_non_finite() {
        let s = scene();
        let mut other = predictions(&s, 2);
        other.scene_id = "elsewhere".into();
        assert_eq!(count(&render_svg(&s, &[other]).unwrap(), "prediction"), 0);
        let mut bad = predictions(&s, 1);
        bad.trajectories[0].points[0].x = f64::NAN;
        assert!(render_svg(&s, &[bad]).is_err());
        let mut named = s.clone();
        named.scene_id = "info & <notes>".into();
        assert!(render_svg(&named, &[]).unwrap().contains("info &amp; &lt;notes&gt;"));
    }
}
