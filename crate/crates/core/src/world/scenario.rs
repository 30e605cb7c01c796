//! Scenario file format: strict JSON describing a grid, a task, and
//! optional overrides.
//!
//! ```json
//! {
//!   "grid": ["#####", "#...#", "#####"],
//!   "resolution_m": 0.25,
//!   "start": { "x": 0.375, "y": 0.375, "heading": 0 },
//!   "goal": { "x": 1.125, "y": 0.375 },
//!   "instruction": "walk to the east end",
//!   "max_steps": 500,
//!   "success_radius_m": 3.0,
//!   "reference_path": [[0.375, 0.375], [1.125, 0.375]]
//! }
//! ```
//!
//! Grid rows are listed top row first and may only contain `#` (occupied)
//! and `.` (free). `max_steps`, `success_radius_m`, and `reference_path`
//! are optional; unknown fields are rejected.

use super::{
    Cell, EpisodeSpec, GroundTruthGrid, Heading, Pose, DEFAULT_MAX_STEPS,
    DEFAULT_SUCCESS_RADIUS_M,
};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid scenario JSON at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid row {row} has {got} cells, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("grid row {row}, column {column} holds {found:?}; only '#' and '.' are allowed")]
    BadGridChar { row: usize, column: usize, found: char },
    #[error("boundary cell ({x}, {y}) is not occupied; the world must be walled")]
    OpenBoundary { x: usize, y: usize },
    #[error("resolution_m must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("heading {0} is not a multiple of 15 in [0, 360)")]
    BadHeading(u16),
    #[error("{field} position ({x}, {y}) lies outside the grid")]
    OutOfBounds { field: &'static str, x: f64, y: f64 },
    #[error("{field} position ({x}, {y}) falls on an occupied cell")]
    Blocked { field: &'static str, x: f64, y: f64 },
    #[error("max_steps must be at least 1")]
    BadMaxSteps,
    #[error("success_radius_m must be positive and finite, got {0}")]
    BadSuccessRadius(f64),
    #[error("reference_path point {index} ({x}, {y}) lies outside the grid")]
    ReferenceOutOfBounds { index: usize, x: f64, y: f64 },
}

/// Serialized form of a scenario. This is the exact on-disk schema; the
/// richer [`EpisodeSpec`] is derived from it by validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub grid: Vec<String>,
    pub resolution_m: f64,
    pub start: StartField,
    pub goal: GoalField,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_radius_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_path: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartField {
    pub x: f64,
    pub y: f64,
    pub heading: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalField {
    pub x: f64,
    pub y: f64,
}

pub(super) fn grid_from_rows<S: AsRef<str>>(
    rows: &[S],
    resolution_m: f64,
) -> Result<GroundTruthGrid, ScenarioError> {
    if !(resolution_m.is_finite() && resolution_m > 0.0) {
        return Err(ScenarioError::BadResolution(resolution_m));
    }
    if rows.is_empty() || rows[0].as_ref().is_empty() {
        return Err(ScenarioError::EmptyGrid);
    }
    let height = rows.len();
    let width = rows[0].as_ref().chars().count();
    let mut occupied = vec![false; width * height];
    for (r, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        let got = row.chars().count();
        if got != width {
            return Err(ScenarioError::RaggedRow { row: r, got, expected: width });
        }
        // Row 0 of the text is the top of the map, i.e. the highest y.
        let y = height - 1 - r;
        for (x, ch) in row.chars().enumerate() {
            occupied[y * width + x] = match ch {
                '#' => true,
                '.' => false,
                found => return Err(ScenarioError::BadGridChar { row: r, column: x, found }),
            };
        }
    }
    let grid = GroundTruthGrid::from_parts(width, height, resolution_m, occupied);
    for c in grid.cells() {
        let on_boundary =
            c.x == 0 || c.y == 0 || c.x == grid.width() - 1 || c.y == grid.height() - 1;
        if on_boundary && grid.is_free(c) {
            return Err(ScenarioError::OpenBoundary { x: c.x, y: c.y });
        }
    }
    Ok(grid)
}

fn require_free(
    grid: &GroundTruthGrid,
    field: &'static str,
    x: f64,
    y: f64,
) -> Result<Cell, ScenarioError> {
    let c = grid
        .cell_of(x, y)
        .ok_or(ScenarioError::OutOfBounds { field, x, y })?;
    if grid.is_occupied(c) {
        return Err(ScenarioError::Blocked { field, x, y });
    }
    Ok(c)
}

/// Validates a parsed document into an executable spec.
pub fn spec_from_doc(doc: &ScenarioDoc) -> Result<EpisodeSpec, ScenarioError> {
    let grid = grid_from_rows(&doc.grid, doc.resolution_m)?;
    require_free(&grid, "start", doc.start.x, doc.start.y)?;
    require_free(&grid, "goal", doc.goal.x, doc.goal.y)?;
    let heading =
        Heading::new(doc.start.heading).map_err(|_| ScenarioError::BadHeading(doc.start.heading))?;
    let max_steps = doc.max_steps.unwrap_or(DEFAULT_MAX_STEPS);
    if max_steps == 0 {
        return Err(ScenarioError::BadMaxSteps);
    }
    let success_radius_m = doc.success_radius_m.unwrap_or(DEFAULT_SUCCESS_RADIUS_M);
    if !(success_radius_m.is_finite() && success_radius_m > 0.0) {
        return Err(ScenarioError::BadSuccessRadius(success_radius_m));
    }
    let reference_path = match &doc.reference_path {
        None => None,
        Some(points) => {
            for (index, p) in points.iter().enumerate() {
                if grid.cell_of(p[0], p[1]).is_none() {
                    return Err(ScenarioError::ReferenceOutOfBounds {
                        index,
                        x: p[0],
                        y: p[1],
                    });
                }
            }
            Some(points.iter().map(|p| (p[0], p[1])).collect())
        }
    };
    Ok(EpisodeSpec {
        grid,
        start: Pose { x: doc.start.x, y: doc.start.y, heading },
        goal: (doc.goal.x, doc.goal.y),
        instruction: doc.instruction.clone(),
        max_steps,
        success_radius_m,
        reference_path,
    })
}

/// Re-serializes a spec into the document schema.
pub fn doc_from_spec(spec: &EpisodeSpec) -> ScenarioDoc {
    ScenarioDoc {
        grid: spec.grid.rows(),
        resolution_m: spec.grid.resolution_m(),
        start: StartField { x: spec.start.x, y: spec.start.y, heading: spec.start.heading.deg() },
        goal: GoalField { x: spec.goal.0, y: spec.goal.1 },
        instruction: spec.instruction.clone(),
        max_steps: Some(spec.max_steps),
        success_radius_m: Some(spec.success_radius_m),
        reference_path: spec
            .reference_path
            .as_ref()
            .map(|pts| pts.iter().map(|&(x, y)| [x, y]).collect()),
    }
}

pub fn parse_scenario(json: &str) -> Result<EpisodeSpec, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(json).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    spec_from_doc(&doc)
}

pub fn load_scenario(path: &Path) -> Result<EpisodeSpec, ScenarioError> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

/// Canonical pretty-printed JSON for a scenario; stable byte-for-byte for
/// identical specs.
pub fn scenario_to_json(spec: &EpisodeSpec) -> String {
    let mut s = serde_json::to_string_pretty(&doc_from_spec(spec))
        .expect("scenario serialization cannot fail");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        serde_json::json!({
            "grid": ["#####", "#...#", "#...#", "#####"],
            "resolution_m": 0.25,
            "start": { "x": 0.375, "y": 0.375, "heading": 0 },
            "goal": { "x": 0.875, "y": 0.625 },
            "instruction": "cross the room"
        })
        .to_string()
    }

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let spec = parse_scenario(&minimal_json()).unwrap();
        assert_eq!(spec.max_steps, DEFAULT_MAX_STEPS);
        assert_eq!(spec.success_radius_m, DEFAULT_SUCCESS_RADIUS_M);
        assert_eq!(spec.grid.width(), 5);
        assert_eq!(spec.grid.height(), 4);
        assert!(spec.reference_path.is_none());
        // Top text row maps to the highest y row.
        assert!(spec.grid.is_occupied(Cell::new(2, 3)));
        assert!(spec.grid.is_free(Cell::new(2, 1)));
    }

    #[test]
    fn unknown_field_is_rejected_with_its_name() {
        let json = minimal_json().replacen("\"grid\"", "\"speed\": 3, \"grid\"", 1);
        let err = parse_scenario(&json).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("speed"), "error should name the stray field: {msg}");
    }

    #[test]
    fn ragged_grid_is_rejected() {
        let json = minimal_json().replacen("\"#...#\"", "\"#..#\"", 1);
        let err = parse_scenario(&json).unwrap_err();
        assert!(matches!(err, ScenarioError::RaggedRow { row: 1, got: 4, expected: 5 }));
    }

    #[test]
    fn stray_grid_character_is_rejected() {
        let json = minimal_json().replacen("#...#", "#.x.#", 1);
        let err = parse_scenario(&json).unwrap_err();
        assert!(matches!(err, ScenarioError::BadGridChar { found: 'x', .. }));
    }

    #[test]
    fn open_boundary_is_rejected() {
        let json = minimal_json().replacen("\"#####\",\"#...#\"", "\"##.##\",\"#...#\"", 1);
        let err = parse_scenario(&json).unwrap_err();
        assert!(matches!(err, ScenarioError::OpenBoundary { .. }));
    }

    #[test]
    fn blocked_start_is_rejected() {
        let json = minimal_json().replace("\"x\":0.375,\"y\":0.375", "\"x\":0.1,\"y\":0.1");
        let err = parse_scenario(&json).unwrap_err();
        assert!(matches!(err, ScenarioError::Blocked { field: "start", .. }));
    }

    #[test]
    fn off_lattice_heading_is_rejected() {
        let json = minimal_json().replacen("\"heading\":0", "\"heading\":17", 1);
        let err = parse_scenario(&json).unwrap_err();
        assert!(matches!(err, ScenarioError::BadHeading(17)));
    }

    #[test]
    fn parse_error_reports_line_and_column() {
        let err = parse_scenario("{\n  \"grid\": [,]\n}").unwrap_err();
        match err {
            ScenarioError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn scenario_roundtrips_through_json() {
        let spec = parse_scenario(&minimal_json()).unwrap();
        let json = scenario_to_json(&spec);
        let again = parse_scenario(&json).unwrap();
        assert_eq!(scenario_to_json(&again), json);
        assert_eq!(again.grid.rows(), spec.grid.rows());
    }
}
