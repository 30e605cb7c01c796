//! Renderers for artifacts other tools consume: PPM images for the wire
//! protocol and SVG overviews regenerated from episode logs.
//!
//! Every renderer is a pure function of its inputs with fixed float
//! formatting, so regenerating an artifact from the same log yields the
//! same bytes.

use crate::mapping::{detect_frontiers, Occupancy, OccupancyMap};
use crate::trajectory::TrajectoryLog;
use crate::views::Patch;
use crate::world::{spec_from_doc, Cell};
use std::collections::HashSet;
use std::fmt::Write as _;
use std::io;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("log scenario is invalid: {0}")]
    Scenario(#[from] crate::world::ScenarioError),
    #[error("log belief map is invalid: {0}")]
    Belief(#[from] crate::mapping::MappingError),
}

/// Pixels per meter in rendered SVGs.
const SVG_SCALE: f64 = 40.0;

const COLOR_FREE: &str = "#ffffff";
const COLOR_OCCUPIED: &str = "#30343a";
const COLOR_UNKNOWN: &str = "#cfd4da";
const COLOR_FRONTIER: &str = "#ff8c00";
const COLOR_WAYPOINT: &str = "#1f6fd6";
const COLOR_TRAJECTORY: &str = "#d62728";
const COLOR_GOAL: &str = "#2ca02c";
const COLOR_START: &str = "#6a51a3";

/// Writes `bytes` to `path` through a temporary sibling plus rename, so a
/// crash never leaves a half-written artifact behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

fn ppm_header(out: &mut Vec<u8>, width: usize, height: usize) {
    out.extend_from_slice(format!("P6\n{width} {height}\n255\n").as_bytes());
}

fn occupancy_rgb(state: Occupancy) -> [u8; 3] {
    match state {
        Occupancy::Unknown => [128, 128, 128],
        Occupancy::Free => [255, 255, 255],
        Occupancy::Occupied => [20, 20, 20],
    }
}

/// Renders the belief map as a binary PPM, top row first, with the given
/// frontier cells overlaid in orange.
pub fn map_to_ppm(map: &OccupancyMap, frontier_cells: &[Cell]) -> Vec<u8> {
    let frontier: HashSet<Cell> = frontier_cells.iter().copied().collect();
    let (width, height) = (map.width(), map.height());
    let mut out = Vec::with_capacity(width * height * 3 + 32);
    ppm_header(&mut out, width, height);
    for y in (0..height).rev() {
        for x in 0..width {
            let cell = Cell::new(x, y);
            let rgb = if frontier.contains(&cell) {
                [255, 140, 0]
            } else {
                occupancy_rgb(map.state(cell))
            };
            out.extend_from_slice(&rgb);
        }
    }
    out
}

/// Renders an egocentric view patch as a binary PPM. Row 0 of the patch is
/// the farthest-forward row and becomes the top image row.
pub fn patch_to_ppm(patch: &Patch) -> Vec<u8> {
    let size = patch.size;
    let mut out = Vec::with_capacity(size * size * 3 + 32);
    ppm_header(&mut out, size, size);
    for &state in &patch.cells {
        out.extend_from_slice(&occupancy_rgb(state));
    }
    out
}

/// Rebuilds an episode picture from its log: the world (belief layer when
/// the log carries one), recomputed frontiers, waypoint paths, and the
/// driven trajectory. Deterministic: the same log renders to the same
/// bytes.
pub fn episode_svg(log: &TrajectoryLog) -> Result<String, ExportError> {
    let spec = spec_from_doc(&log.header.scenario)?;
    let grid = &spec.grid;
    let res = grid.resolution_m();
    let width_px = grid.width_m() * SVG_SCALE;
    let height_px = grid.height_m() * SVG_SCALE;
    let px = |x: f64| x * SVG_SCALE;
    let py = |y: f64| (grid.height_m() - y) * SVG_SCALE;

    let belief = match &log.result {
        Some(result) if !result.final_map.is_empty() => {
            Some(OccupancyMap::from_rows(&result.final_map, res)?)
        }
        _ => None,
    };
    let frontier_cells: HashSet<Cell> = belief
        .as_ref()
        .map(|map| {
            detect_frontiers(map, log.header.config.min_cluster)
                .into_iter()
                .flat_map(|f| f.cells)
                .collect()
        })
        .unwrap_or_default();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width_px:.3}\" height=\"{height_px:.3}\" viewBox=\"0 0 {width_px:.3} {height_px:.3}\">",
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"{COLOR_FREE}\"/>");

    // Cell layer, row-major from the top for a stable byte order.
    for y in (0..grid.height()).rev() {
        for x in 0..grid.width() {
            let cell = Cell::new(x, y);
            let fill = if frontier_cells.contains(&cell) {
                COLOR_FRONTIER
            } else {
                match &belief {
                    Some(map) => match map.state(cell) {
                        Occupancy::Unknown => COLOR_UNKNOWN,
                        Occupancy::Free => continue,
                        Occupancy::Occupied => COLOR_OCCUPIED,
                    },
                    None => {
                        if grid.is_free(cell) {
                            continue;
                        }
                        COLOR_OCCUPIED
                    }
                }
            };
            let (cx, cy) = (x as f64 * res, (y as f64 + 1.0) * res);
            let _ = writeln!(
                svg,
                "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{fill}\"/>",
                px(cx),
                py(cy),
                res * SVG_SCALE,
                res * SVG_SCALE,
            );
        }
    }

    // Goal region and start marker under the paths.
    let _ = writeln!(
        svg,
        "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" fill=\"{COLOR_GOAL}\" fill-opacity=\"0.15\" stroke=\"{COLOR_GOAL}\"/>",
        px(spec.goal.0),
        py(spec.goal.1),
        spec.success_radius_m * SVG_SCALE,
    );
    let _ = writeln!(
        svg,
        "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"4\" fill=\"{COLOR_GOAL}\"/>",
        px(spec.goal.0),
        py(spec.goal.1),
    );
    let _ = writeln!(
        svg,
        "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"4\" fill=\"{COLOR_START}\"/>",
        px(spec.start.x),
        py(spec.start.y),
    );

    // Waypoint paths handed to the agent, in issue order.
    for event in &log.events {
        if let crate::scheduler::TraceEvent::WaypointBegin { path, .. } = event {
            let points = polyline_points(path, px, py);
            let _ = writeln!(
                svg,
                "<polyline points=\"{points}\" fill=\"none\" stroke=\"{COLOR_WAYPOINT}\" stroke-width=\"2\" stroke-opacity=\"0.7\"/>",
            );
        }
    }

    // The trajectory actually driven: start plus one point per action.
    let mut driven = vec![(spec.start.x, spec.start.y)];
    for event in &log.events {
        match event {
            crate::scheduler::TraceEvent::FastAction { pose, .. }
            | crate::scheduler::TraceEvent::WaypointStep { pose, .. }
            | crate::scheduler::TraceEvent::Stop { pose, .. } => driven.push((pose.x, pose.y)),
            _ => {}
        }
    }
    let points = polyline_points(&driven, px, py);
    let _ = writeln!(
        svg,
        "<polyline id=\"trajectory\" points=\"{points}\" fill=\"none\" stroke=\"{COLOR_TRAJECTORY}\" stroke-width=\"2.5\"/>",
    );

    svg.push_str("</svg>\n");
    Ok(svg)
}

fn polyline_points(
    path: &[(f64, f64)],
    px: impl Fn(f64) -> f64,
    py: impl Fn(f64) -> f64,
) -> String {
    let mut out = String::new();
    for (i, &(x, y)) in path.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{:.3},{:.3}", px(x), py(y));
    }
    out
}
