//! Discrete-action agent kinematics on a walled occupancy grid.
//!
//! The agent lives at a continuous position but acts in quanta: a forward
//! step of 0.25 m along its heading, in-place turns of 15 degrees, and a
//! terminal `Stop`. Headings are always multiples of 15 degrees in
//! `[0, 360)`, measured counterclockwise from the +x axis. The grid is the
//! ground truth the simulator steps against; agents normally perceive it
//! only through [`observe`].
//!
//! Visibility rule: a cell is visible when its center lies within sensor
//! range and field of view, and the straight segment from the agent to that
//! center, sampled every `resolution / 8` meters, touches no occupied cell
//! other than the target itself. The agent's own cell is always visible.

mod scenario;

pub use scenario::{
    doc_from_spec, load_scenario, parse_scenario, scenario_to_json, spec_from_doc, GoalField,
    ScenarioDoc, ScenarioError, StartField,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Forward displacement of a single `MoveForward`, in meters.
pub const FORWARD_STEP_M: f64 = 0.25;
/// In-place rotation of a single turn action, in degrees.
pub const TURN_STEP_DEG: u16 = 15;
/// Step budget used when a scenario does not override it.
pub const DEFAULT_MAX_STEPS: u32 = 500;
/// Success radius used when a scenario does not override it, in meters.
pub const DEFAULT_SUCCESS_RADIUS_M: f64 = 3.0;
/// Grid resolution used when a scenario does not override it, in meters per cell.
pub const DEFAULT_RESOLUTION_M: f64 = 0.25;

/// Slack added to sensor range/field-of-view comparisons so that cells
/// sitting exactly on the boundary are included regardless of rounding.
const SENSOR_EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("heading {0} is not a multiple of {TURN_STEP_DEG} in [0, 360)")]
    InvalidHeading(u16),
    #[error("episode has not terminated (no Stop issued and step budget not exhausted)")]
    EpisodeNotTerminated,
}

/// The four agent actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    MoveForward,
    TurnLeft,
    TurnRight,
    Stop,
}

/// Grid cell index: `x` is the column, `y` the row, both zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }
}

// Row-major order: scan rows bottom-up, columns left-to-right within a row.
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Agent heading: degrees counterclockwise from +x, always a multiple of
/// 15 in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct Heading(u16);

impl Heading {
    pub fn new(deg: u16) -> Result<Self, WorldError> {
        if deg >= 360 || deg % TURN_STEP_DEG != 0 {
            return Err(WorldError::InvalidHeading(deg));
        }
        Ok(Heading(deg))
    }

    pub fn deg(self) -> u16 {
        self.0
    }

    pub fn left(self) -> Self {
        Heading((self.0 + TURN_STEP_DEG) % 360)
    }

    pub fn right(self) -> Self {
        Heading((self.0 + 360 - TURN_STEP_DEG) % 360)
    }

    pub fn radians(self) -> f64 {
        f64::from(self.0).to_radians()
    }

    /// Unit direction vector. Axis-aligned headings are exact so that
    /// repeated forward steps do not drift off the grid axes.
    pub fn unit(self) -> (f64, f64) {
        match self.0 {
            0 => (1.0, 0.0),
            90 => (0.0, 1.0),
            180 => (-1.0, 0.0),
            270 => (0.0, -1.0),
            _ => (self.radians().cos(), self.radians().sin()),
        }
    }
}

impl TryFrom<u16> for Heading {
    type Error = WorldError;
    fn try_from(deg: u16) -> Result<Self, WorldError> {
        Heading::new(deg)
    }
}

impl From<Heading> for u16 {
    fn from(h: Heading) -> u16 {
        h.0
    }
}

/// Continuous agent pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: Heading,
}

impl Pose {
    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// Ground-truth cell state. Unknownness is a property of agent belief, not
/// of the world; see the mapping module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Occupied,
}

/// Ground-truth occupancy grid. The outer boundary is always occupied, so
/// every position the agent can reach stays strictly inside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthGrid {
    width: usize,
    height: usize,
    resolution_m: f64,
    occupied: Vec<bool>,
}

impl GroundTruthGrid {
    /// Builds a grid from row strings of `#` (occupied) and `.` (free),
    /// listed top row first so the text reads like a map.
    pub fn from_rows<S: AsRef<str>>(rows: &[S], resolution_m: f64) -> Result<Self, ScenarioError> {
        scenario::grid_from_rows(rows, resolution_m)
    }

    pub(crate) fn from_parts(
        width: usize,
        height: usize,
        resolution_m: f64,
        occupied: Vec<bool>,
    ) -> Self {
        debug_assert_eq!(occupied.len(), width * height);
        GroundTruthGrid { width, height, resolution_m, occupied }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution_m(&self) -> f64 {
        self.resolution_m
    }

    pub fn width_m(&self) -> f64 {
        self.width as f64 * self.resolution_m
    }

    pub fn height_m(&self) -> f64 {
        self.height as f64 * self.resolution_m
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.occupied[c.y * self.width + c.x]
    }

    pub fn is_free(&self, c: Cell) -> bool {
        !self.is_occupied(c)
    }

    pub fn state(&self, c: Cell) -> CellState {
        if self.is_occupied(c) {
            CellState::Occupied
        } else {
            CellState::Free
        }
    }

    /// Cell containing a world position, or `None` outside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<Cell> {
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let cx = (x / self.resolution_m).floor() as usize;
        let cy = (y / self.resolution_m).floor() as usize;
        let c = Cell::new(cx, cy);
        self.in_bounds(c).then_some(c)
    }

    /// World position of a cell's center.
    pub fn cell_center(&self, c: Cell) -> (f64, f64) {
        (
            (c.x as f64 + 0.5) * self.resolution_m,
            (c.y as f64 + 0.5) * self.resolution_m,
        )
    }

    /// Re-emits the grid as row strings, top row first.
    pub fn rows(&self) -> Vec<String> {
        (0..self.height)
            .rev()
            .map(|y| {
                (0..self.width)
                    .map(|x| if self.is_occupied(Cell::new(x, y)) { '#' } else { '.' })
                    .collect()
            })
            .collect()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
    }
}

/// One navigation task: a world plus start, goal, and success conditions.
#[derive(Debug, Clone)]
pub struct EpisodeSpec {
    pub grid: GroundTruthGrid,
    pub start: Pose,
    pub goal: (f64, f64),
    pub instruction: String,
    pub max_steps: u32,
    pub success_radius_m: f64,
    /// Annotated reference trajectory for path-fidelity scoring; when
    /// absent, callers fall back to the geodesic start-to-goal path.
    pub reference_path: Option<Vec<(f64, f64)>>,
}

/// Agent progress within an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub pose: Pose,
    pub steps: u32,
    pub stopped: bool,
    /// Set when the latest action was a `MoveForward` into a blocked cell.
    pub collided: bool,
}

impl AgentState {
    pub fn at_start(spec: &EpisodeSpec) -> Self {
        AgentState { pose: spec.start, steps: 0, stopped: false, collided: false }
    }
}

/// Applies one action. A blocked `MoveForward` leaves the position
/// unchanged and raises the collision flag; every action, including `Stop`,
/// consumes one step of budget.
pub fn step(state: &AgentState, action: Action, grid: &GroundTruthGrid) -> AgentState {
    let mut next = *state;
    next.collided = false;
    match action {
        Action::TurnLeft => next.pose.heading = next.pose.heading.left(),
        Action::TurnRight => next.pose.heading = next.pose.heading.right(),
        Action::Stop => next.stopped = true,
        Action::MoveForward => {
            let (dx, dy) = next.pose.heading.unit();
            let nx = next.pose.x + FORWARD_STEP_M * dx;
            let ny = next.pose.y + FORWARD_STEP_M * dy;
            match grid.cell_of(nx, ny) {
                Some(c) if grid.is_free(c) => {
                    next.pose.x = nx;
                    next.pose.y = ny;
                }
                _ => next.collided = true,
            }
        }
    }
    next.steps += 1;
    next
}

/// Whether a terminated episode succeeded: the agent issued `Stop` within
/// the success radius of the goal without exceeding the step budget.
/// Errors if the episode is still running.
pub fn is_success(state: &AgentState, spec: &EpisodeSpec) -> Result<bool, WorldError> {
    if !state.stopped && state.steps < spec.max_steps {
        return Err(WorldError::EpisodeNotTerminated);
    }
    let d = dist(state.pose.position(), spec.goal);
    Ok(state.stopped && state.steps <= spec.max_steps && d <= spec.success_radius_m)
}

pub fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    (dx * dx + dy * dy).sqrt()
}

/// Strict sign of `v`: zero stays zero, unlike `f64::signum`.
fn axis_sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Bearing from `from` to `to` in degrees, normalized to `[0, 360)`.
pub fn bearing_deg(from: (f64, f64), to: (f64, f64)) -> f64 {
    let d = (to.1 - from.1).atan2(to.0 - from.0).to_degrees();
    d.rem_euclid(360.0)
}

/// Smallest signed rotation from `from_deg` to `to_deg`, in `(-180, 180]`.
pub fn signed_delta_deg(from_deg: f64, to_deg: f64) -> f64 {
    let mut d = (to_deg - from_deg).rem_euclid(360.0);
    if d > 180.0 {
        d -= 360.0;
    }
    d
}

/// Greedy steering used by path followers: turn toward the target until the
/// heading error drops under half a turn quantum, then move forward.
pub fn steer_toward(pose: &Pose, target: (f64, f64)) -> Action {
    let desired = bearing_deg(pose.position(), target);
    let delta = signed_delta_deg(f64::from(pose.heading.deg()), desired);
    if delta.abs() < f64::from(TURN_STEP_DEG) / 2.0 {
        Action::MoveForward
    } else if delta > 0.0 {
        Action::TurnLeft
    } else {
        Action::TurnRight
    }
}

/// Sensor cone: field of view centered on the heading, plus a max range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub fov_deg: f64,
    pub range_m: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig { fov_deg: 90.0, range_m: 5.0 }
    }
}

/// One sensor sweep: the visible cells and their true states, in row-major
/// order, taken from the pose stored alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub pose: Pose,
    pub cells: Vec<(Cell, CellState)>,
}

/// Casts the sensor cone from the agent's pose. Deterministic: identical
/// inputs produce the identical observation.
pub fn observe(state: &AgentState, grid: &GroundTruthGrid, sensor: &SensorConfig) -> Observation {
    let pos = state.pose.position();
    let own = grid
        .cell_of(pos.0, pos.1)
        .expect("agent position must stay inside the walled grid");
    let res = grid.resolution_m;
    let range = sensor.range_m;
    let full_circle = sensor.fov_deg >= 360.0;
    let half_fov = sensor.fov_deg / 2.0;
    let heading_deg = f64::from(state.pose.heading.deg());

    // Bounding box of the range disc, clamped to the grid.
    let x_lo = (((pos.0 - range) / res).floor().max(0.0)) as usize;
    let y_lo = (((pos.1 - range) / res).floor().max(0.0)) as usize;
    let x_hi = (((pos.0 + range) / res).ceil() as usize).min(grid.width);
    let y_hi = (((pos.1 + range) / res).ceil() as usize).min(grid.height);

    let mut cells = Vec::new();
    for y in y_lo..y_hi {
        for x in x_lo..x_hi {
            let c = Cell::new(x, y);
            if c == own {
                cells.push((c, grid.state(c)));
                continue;
            }
            let center = grid.cell_center(c);
            if dist(pos, center) > range + SENSOR_EDGE_EPS {
                continue;
            }
            if !full_circle {
                let delta = signed_delta_deg(heading_deg, bearing_deg(pos, center));
                if delta.abs() > half_fov + SENSOR_EDGE_EPS {
                    continue;
                }
            }
            if line_of_sight(grid, pos, own, c) {
                cells.push((c, grid.state(c)));
            }
        }
    }
    Observation { pose: state.pose, cells }
}

/// Sampled ray march from `pos` to the center of `target`. Samples landing
/// in the start or target cell never block; any other occupied sample does.
/// Each sample is nudged a hair back toward the origin before it is
/// classified, so a sample landing exactly on a cell boundary counts
/// against the cell the ray is leaving and grazing a lattice corner never
/// blocks. An agent in a one-cell room therefore sees all eight walls.
fn line_of_sight(grid: &GroundTruthGrid, pos: (f64, f64), own: Cell, target: Cell) -> bool {
    let center = grid.cell_center(target);
    let d = dist(pos, center);
    let step = grid.resolution_m / 8.0;
    let n = (d / step).ceil().max(1.0) as usize;
    let nudge = grid.resolution_m * 1e-6;
    let bx = nudge * axis_sign(center.0 - pos.0);
    let by = nudge * axis_sign(center.1 - pos.1);
    for k in 1..=n {
        let t = k as f64 / n as f64;
        let x = pos.0 + t * (center.0 - pos.0) - bx;
        let y = pos.1 + t * (center.1 - pos.1) - by;
        let c = match grid.cell_of(x, y) {
            Some(c) => c,
            None => return false,
        };
        if c == target {
            // Cells are convex, so once the ray enters the target cell it
            // stays there until the endpoint.
            return true;
        }
        if c != own && grid.is_occupied(c) {
            return false;
        }
    }
    true
}
