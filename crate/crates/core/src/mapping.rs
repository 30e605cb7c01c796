//! Agent belief: a three-state occupancy map accumulated from observations,
//! plus frontier extraction over it.
//!
//! A frontier cell is a known-free cell with at least one 4-adjacent unknown
//! cell. Frontier cells are clustered by 8-connectivity; clusters below a
//! minimum size are discarded as sensor slivers. Every query is
//! deterministic: cells and clusters come out in row-major order.

use crate::world::{Cell, CellState, Observation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cluster size threshold used when a caller does not override it.
pub const DEFAULT_MIN_CLUSTER: usize = 2;

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("observation touches cell ({x}, {y}) outside the {width}x{height} map")]
    OutOfBounds { x: usize, y: usize, width: usize, height: usize },
    #[error("belief rows are empty")]
    EmptyRows,
    #[error("belief row {row} has {found} glyphs, expected {expected}")]
    RaggedRows { row: usize, expected: usize, found: usize },
    #[error("belief row {row}, column {column} holds {glyph:?}, expected one of '?', '.', '#'")]
    UnknownGlyph { row: usize, column: usize, glyph: char },
}

/// Belief state of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Occupancy {
    Unknown,
    Free,
    Occupied,
}

/// Accumulated belief map. Starts fully unknown; once a cell is observed its
/// state is fixed (the sensor is noise-free, so revisits agree).
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMap {
    width: usize,
    height: usize,
    resolution_m: f64,
    cells: Vec<Occupancy>,
}

impl OccupancyMap {
    pub fn new(width: usize, height: usize, resolution_m: f64) -> Self {
        OccupancyMap { width, height, resolution_m, cells: vec![Occupancy::Unknown; width * height] }
    }

    /// An unknown map with the same shape as a ground-truth grid.
    pub fn matching(grid: &crate::world::GroundTruthGrid) -> Self {
        Self::new(grid.width(), grid.height(), grid.resolution_m())
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

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn state(&self, c: Cell) -> Occupancy {
        self.cells[c.y * self.width + c.x]
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<Cell> {
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let c = Cell::new(
            (x / self.resolution_m).floor() as usize,
            (y / self.resolution_m).floor() as usize,
        );
        self.in_bounds(c).then_some(c)
    }

    pub fn cell_center(&self, c: Cell) -> (f64, f64) {
        ((c.x as f64 + 0.5) * self.resolution_m, (c.y as f64 + 0.5) * self.resolution_m)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
    }

    /// (unknown, free, occupied) cell counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut n = (0, 0, 0);
        for s in &self.cells {
            match s {
                Occupancy::Unknown => n.0 += 1,
                Occupancy::Free => n.1 += 1,
                Occupancy::Occupied => n.2 += 1,
            }
        }
        n
    }

    fn set(&mut self, c: Cell, s: Occupancy) {
        self.cells[c.y * self.width + c.x] = s;
    }

    /// Renders the belief as glyph rows, top row first: `?` unknown, `.`
    /// free, `#` occupied. Inverse of [`OccupancyMap::from_rows`].
    pub fn to_rows(&self) -> Vec<String> {
        (0..self.height)
            .rev()
            .map(|y| {
                (0..self.width)
                    .map(|x| match self.state(Cell::new(x, y)) {
                        Occupancy::Unknown => '?',
                        Occupancy::Free => '.',
                        Occupancy::Occupied => '#',
                    })
                    .collect()
            })
            .collect()
    }

    /// Rebuilds a belief map from glyph rows produced by
    /// [`OccupancyMap::to_rows`].
    pub fn from_rows(rows: &[String], resolution_m: f64) -> Result<Self, MappingError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(MappingError::EmptyRows);
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut map = OccupancyMap::new(width, height, resolution_m);
        for (i, row) in rows.iter().enumerate() {
            let found = row.chars().count();
            if found != width {
                return Err(MappingError::RaggedRows { row: i, expected: width, found });
            }
            let y = height - 1 - i;
            for (x, glyph) in row.chars().enumerate() {
                let state = match glyph {
                    '?' => Occupancy::Unknown,
                    '.' => Occupancy::Free,
                    '#' => Occupancy::Occupied,
                    other => {
                        return Err(MappingError::UnknownGlyph { row: i, column: x, glyph: other })
                    }
                };
                map.set(Cell::new(x, y), state);
            }
        }
        Ok(map)
    }
}

/// Folds one observation into the map. Cells already known keep their
/// state, which makes re-applying an observation a no-op.
pub fn update_occupancy(map: &mut OccupancyMap, obs: &Observation) -> Result<(), MappingError> {
    for &(c, _) in &obs.cells {
        if !map.in_bounds(c) {
            return Err(MappingError::OutOfBounds {
                x: c.x,
                y: c.y,
                width: map.width,
                height: map.height,
            });
        }
    }
    for &(c, state) in &obs.cells {
        if map.state(c) == Occupancy::Unknown {
            map.set(
                c,
                match state {
                    CellState::Free => Occupancy::Free,
                    CellState::Occupied => Occupancy::Occupied,
                },
            );
        }
    }
    Ok(())
}

/// One frontier cluster. `cells` is row-major sorted; the representative is
/// the member cell closest to the cluster centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub cells: Vec<Cell>,
    pub representative_cell: Cell,
    /// Center of the representative cell in world meters.
    pub representative: (f64, f64),
}

/// Whether `c` is frontier: known-free with an unknown 4-neighbor.
pub fn is_frontier_cell(map: &OccupancyMap, c: Cell) -> bool {
    if map.state(c) != Occupancy::Free {
        return false;
    }
    neighbors4(map.width, map.height, c)
        .into_iter()
        .any(|n| map.state(n) == Occupancy::Unknown)
}

fn neighbors4(width: usize, height: usize, c: Cell) -> Vec<Cell> {
    let mut out = Vec::with_capacity(4);
    if c.x + 1 < width {
        out.push(Cell::new(c.x + 1, c.y));
    }
    if c.x > 0 {
        out.push(Cell::new(c.x - 1, c.y));
    }
    if c.y + 1 < height {
        out.push(Cell::new(c.x, c.y + 1));
    }
    if c.y > 0 {
        out.push(Cell::new(c.x, c.y - 1));
    }
    out
}

/// Extracts frontier clusters of at least `min_cluster` cells, sorted by
/// representative cell in row-major order.
pub fn detect_frontiers(map: &OccupancyMap, min_cluster: usize) -> Vec<Frontier> {
    let width = map.width;
    let height = map.height;
    let mut is_frontier = vec![false; width * height];
    for c in map.cells() {
        if is_frontier_cell(map, c) {
            is_frontier[c.y * width + c.x] = true;
        }
    }

    // 8-connected components over the frontier mask, BFS in row-major order.
    let mut seen = vec![false; width * height];
    let mut clusters: Vec<Vec<Cell>> = Vec::new();
    for start in map.cells() {
        let idx = start.y * width + start.x;
        if !is_frontier[idx] || seen[idx] {
            continue;
        }
        let mut members = Vec::new();
        let mut queue = std::collections::VecDeque::from([start]);
        seen[idx] = true;
        while let Some(c) = queue.pop_front() {
            members.push(c);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = c.x as i64 + dx;
                    let ny = c.y as i64 + dy;
                    if nx < 0 || ny < 0 || nx as usize >= width || ny as usize >= height {
                        continue;
                    }
                    let n = Cell::new(nx as usize, ny as usize);
                    let nidx = n.y * width + n.x;
                    if is_frontier[nidx] && !seen[nidx] {
                        seen[nidx] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        if members.len() >= min_cluster {
            members.sort();
            clusters.push(members);
        }
    }

    let mut frontiers: Vec<Frontier> = clusters
        .into_iter()
        .map(|cells| {
            let n = cells.len() as f64;
            let (sx, sy) = cells.iter().fold((0.0, 0.0), |(ax, ay), &c| {
                let (x, y) = map.cell_center(c);
                (ax + x, ay + y)
            });
            let centroid = (sx / n, sy / n);
            // Nearest member to the centroid; ties fall to the lowest
            // row-major cell because the scan respects that order.
            let mut best = cells[0];
            let mut best_d2 = f64::INFINITY;
            for &c in &cells {
                let (x, y) = map.cell_center(c);
                let d2 = (x - centroid.0).powi(2) + (y - centroid.1).powi(2);
                if d2 < best_d2 {
                    best_d2 = d2;
                    best = c;
                }
            }
            Frontier {
                representative: map.cell_center(best),
                representative_cell: best,
                cells,
            }
        })
        .collect();
    frontiers.sort_by(|a, b| a.representative_cell.cmp(&b.representative_cell));
    frontiers
}
