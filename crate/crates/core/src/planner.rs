//! Grid path planning over the belief map, plus geodesic distance fields
//! over ground-truth grids.
//!
//! Costs are held exactly: a path cost is a pair of step counts (straight,
//! diagonal) and only becomes a float at the final `straight + diag * sqrt(2)`
//! evaluation. Two searches that find equal-cost paths therefore produce
//! bit-identical float costs, with no dependence on summation order.
//!
//! Movement is 8-connected with no corner cutting: a diagonal step requires
//! both adjacent orthogonal cells to be traversable. Unknown belief cells
//! are treated as obstacles.

use crate::mapping::{Occupancy, OccupancyMap};
use crate::world::{Cell, GroundTruthGrid};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

/// Waypoint spacing used when a caller does not override it.
pub const DEFAULT_SPACING_M: f64 = 0.5;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("start cell ({x}, {y}) is not traversable")]
    InvalidStart { x: usize, y: usize },
    #[error("target cell ({x}, {y}) is not traversable")]
    InvalidTarget { x: usize, y: usize },
    #[error("no path from ({}, {}) to ({}, {})", from.x, from.y, to.x, to.y)]
    NoPath { from: Cell, to: Cell },
}

/// Exact path cost: counts of straight and diagonal steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SearchCost {
    pub straight: u32,
    pub diag: u32,
}

impl SearchCost {
    pub const ZERO: SearchCost = SearchCost { straight: 0, diag: 0 };

    pub fn step(self, diagonal: bool) -> SearchCost {
        if diagonal {
            SearchCost { straight: self.straight, diag: self.diag + 1 }
        } else {
            SearchCost { straight: self.straight + 1, diag: self.diag }
        }
    }

    /// Cost in cell units, evaluated in one expression so equal step counts
    /// give bitwise-equal floats.
    pub fn value(self) -> f64 {
        self.straight as f64 + self.diag as f64 * std::f64::consts::SQRT_2
    }
}

impl PartialOrd for SearchCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SearchCost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value().total_cmp(&other.value())
    }
}

/// Octile distance between cells, as an exact step-count pair.
pub fn octile(a: Cell, b: Cell) -> SearchCost {
    let dx = a.x.abs_diff(b.x) as u32;
    let dy = a.y.abs_diff(b.y) as u32;
    SearchCost { straight: dx.abs_diff(dy), diag: dx.min(dy) }
}

/// A planned path in world coordinates. `nodes` runs from the start cell
/// center to the target cell center; `cost_m` is the exact search cost
/// scaled by the map resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub nodes: Vec<(f64, f64)>,
    pub cost_m: f64,
}

impl PlannedPath {
    pub fn length_m(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| {
                let (ax, ay) = w[0];
                let (bx, by) = w[1];
                ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt()
            })
            .sum()
    }
}

trait SearchGrid {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn traversable(&self, c: Cell) -> bool;
}

impl SearchGrid for OccupancyMap {
    fn width(&self) -> usize {
        self.width()
    }
    fn height(&self) -> usize {
        self.height()
    }
    fn traversable(&self, c: Cell) -> bool {
        self.state(c) == Occupancy::Free
    }
}

impl SearchGrid for GroundTruthGrid {
    fn width(&self) -> usize {
        self.width()
    }
    fn height(&self) -> usize {
        self.height()
    }
    fn traversable(&self, c: Cell) -> bool {
        self.is_free(c)
    }
}

const NEIGHBOR_STEPS: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, 1),
    (1, -1),
    (-1, -1),
];

fn successors<G: SearchGrid>(grid: &G, c: Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
    NEIGHBOR_STEPS.iter().filter_map(move |&(dx, dy)| {
        let nx = c.x as i64 + dx;
        let ny = c.y as i64 + dy;
        if nx < 0 || ny < 0 || nx as usize >= grid.width() || ny as usize >= grid.height() {
            return None;
        }
        let n = Cell::new(nx as usize, ny as usize);
        if !grid.traversable(n) {
            return None;
        }
        let diagonal = dx != 0 && dy != 0;
        if diagonal {
            // No corner cutting: both orthogonal cells must be open.
            let a = Cell::new(n.x, c.y);
            let b = Cell::new(c.x, n.y);
            if !grid.traversable(a) || !grid.traversable(b) {
                return None;
            }
        }
        Some((n, diagonal))
    })
}

#[derive(PartialEq)]
struct HeapEntry {
    f: f64,
    h: f64,
    id: usize,
    cell: Cell,
    g: SearchCost,
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the smallest (f, h, id) pops
        // first. The id component pins expansion order, making the search
        // fully deterministic.
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.id.cmp(&self.id))
    }
}

fn astar_cells<G: SearchGrid>(
    grid: &G,
    start: Cell,
    target: Cell,
) -> Result<(Vec<Cell>, SearchCost), PlanError> {
    if !grid.traversable(start) {
        return Err(PlanError::InvalidStart { x: start.x, y: start.y });
    }
    if !grid.traversable(target) {
        return Err(PlanError::InvalidTarget { x: target.x, y: target.y });
    }
    let width = grid.width();
    let id_of = |c: Cell| c.y * width + c.x;
    let mut best: Vec<Option<SearchCost>> = vec![None; width * grid.height()];
    let mut parent: Vec<Option<Cell>> = vec![None; width * grid.height()];
    let mut heap = BinaryHeap::new();
    let h0 = octile(start, target).value();
    best[id_of(start)] = Some(SearchCost::ZERO);
    heap.push(HeapEntry { f: h0, h: h0, id: id_of(start), cell: start, g: SearchCost::ZERO });

    while let Some(entry) = heap.pop() {
        if best[entry.id] != Some(entry.g) {
            continue; // stale entry superseded by a cheaper one
        }
        if entry.cell == target {
            let mut path = vec![target];
            let mut cur = target;
            while let Some(p) = parent[id_of(cur)] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Ok((path, entry.g));
        }
        for (n, diagonal) in successors(grid, entry.cell) {
            let g = entry.g.step(diagonal);
            let nid = id_of(n);
            if best[nid].is_none_or(|b| g < b) {
                best[nid] = Some(g);
                parent[nid] = Some(entry.cell);
                let h = octile(n, target).value();
                heap.push(HeapEntry { f: g.value() + h, h, id: nid, cell: n, g });
            }
        }
    }
    Err(PlanError::NoPath { from: start, to: target })
}

/// A* over the belief map from `start` to `target` cell. Only known-free
/// cells are traversable. Ties on f break on h, then on row-major cell id,
/// so the result is deterministic.
pub fn astar(map: &OccupancyMap, start: Cell, target: Cell) -> Result<PlannedPath, PlanError> {
    let (cells, cost) = astar_cells(map, start, target)?;
    Ok(PlannedPath {
        nodes: cells.into_iter().map(|c| map.cell_center(c)).collect(),
        cost_m: cost.value() * map.resolution_m(),
    })
}

/// Interpolation parameters for waypoint densification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationConfig {
    /// Strict upper bound on the spacing of consecutive output nodes, meters.
    pub spacing_m: f64,
}

impl Default for InterpolationConfig {
    fn default() -> Self {
        InterpolationConfig { spacing_m: DEFAULT_SPACING_M }
    }
}

/// Densifies a path so every consecutive node pair is strictly closer than
/// `spacing_m`, by splitting each segment into equal parts. Original nodes
/// are kept and total length is unchanged.
pub fn interpolate(path: &PlannedPath, cfg: &InterpolationConfig) -> PlannedPath {
    let d = cfg.spacing_m;
    let mut nodes = Vec::with_capacity(path.nodes.len());
    if let Some(&first) = path.nodes.first() {
        nodes.push(first);
    }
    for w in path.nodes.windows(2) {
        let (ax, ay) = w[0];
        let (bx, by) = w[1];
        let len = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
        let mut n = ((len / d).ceil() as usize).max(1);
        // ceil can land exactly on the bound; the contract is strict.
        while len / (n as f64) >= d {
            n += 1;
        }
        for i in 1..n {
            let t = i as f64 / n as f64;
            nodes.push((ax + t * (bx - ax), ay + t * (by - ay)));
        }
        nodes.push((bx, by));
    }
    PlannedPath { nodes, cost_m: path.cost_m }
}

/// Exact geodesic distances from one source over a ground-truth grid, with
/// the Dijkstra parent tree for path reconstruction.
#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    resolution_m: f64,
    dist: Vec<Option<SearchCost>>,
    parent: Vec<Option<Cell>>,
}

impl DistanceField {
    pub fn cost(&self, c: Cell) -> Option<SearchCost> {
        self.dist[c.y * self.width + c.x]
    }

    pub fn distance_m(&self, c: Cell) -> Option<f64> {
        self.cost(c).map(|g| g.value() * self.resolution_m)
    }

    /// The neighbor one step closer to the source, if `c` is reachable and
    /// not the source itself. With the field rooted at a goal cell this is
    /// the next hop toward the goal.
    pub fn toward_source(&self, c: Cell) -> Option<Cell> {
        self.parent[c.y * self.width + c.x]
    }
}

/// Dijkstra over `grid` from `source`, with the same cost algebra and
/// corner rule as the planner.
pub fn geodesic_field(grid: &GroundTruthGrid, source: Cell) -> Result<DistanceField, PlanError> {
    if !grid.is_free(source) {
        return Err(PlanError::InvalidStart { x: source.x, y: source.y });
    }
    let width = grid.width();
    let id_of = |c: Cell| c.y * width + c.x;
    let mut dist: Vec<Option<SearchCost>> = vec![None; width * grid.height()];
    let mut parent: Vec<Option<Cell>> = vec![None; width * grid.height()];
    let mut heap = BinaryHeap::new();
    dist[id_of(source)] = Some(SearchCost::ZERO);
    heap.push(HeapEntry { f: 0.0, h: 0.0, id: id_of(source), cell: source, g: SearchCost::ZERO });
    while let Some(entry) = heap.pop() {
        if dist[entry.id] != Some(entry.g) {
            continue;
        }
        for (n, diagonal) in successors(grid, entry.cell) {
            let g = entry.g.step(diagonal);
            let nid = id_of(n);
            if dist[nid].is_none_or(|b| g < b) {
                dist[nid] = Some(g);
                parent[nid] = Some(entry.cell);
                heap.push(HeapEntry { f: g.value(), h: 0.0, id: nid, cell: n, g });
            }
        }
    }
    Ok(DistanceField { width, resolution_m: grid.resolution_m(), dist, parent })
}

/// Shortest-path distance in meters between two free cells of a
/// ground-truth grid, if connected.
pub fn geodesic_distance_m(grid: &GroundTruthGrid, from: Cell, to: Cell) -> Option<f64> {
    let field = geodesic_field(grid, from).ok()?;
    field.distance_m(to)
}

/// Cell-center geodesic path between two free cells, if connected.
pub fn geodesic_path(grid: &GroundTruthGrid, from: Cell, to: Cell) -> Option<Vec<(f64, f64)>> {
    let field = geodesic_field(grid, from).ok()?;
    field.cost(to)?;
    let mut cells = vec![to];
    let mut cur = to;
    while let Some(p) = field.toward_source(cur) {
        cells.push(p);
        cur = p;
    }
    cells.reverse();
    Some(cells.into_iter().map(|c| grid.cell_center(c)).collect())
}
