//! Deterministic maze scenario generation.
//!
//! Mazes are carved on a pitch-2 lattice: corridor cells live at odd
//! coordinates, connected through the wall cell between them. A
//! self-avoiding random walk lays the main corridor, so every cell on it
//! has at most two open neighbors; short side branches are then attached
//! at chosen interior nodes, each adding exactly one junction. That makes
//! the junction count a construction input rather than an accident, which
//! matters because junctions are where the scripted fast policy can take a
//! wrong turn.
//!
//! Generation is a pure function of the parameter set: the same [`GenSpec`]
//! always yields byte-identical scenario JSON. Failed attempts (walk too
//! short, not enough room for branches) re-roll a derived sub-seed a
//! bounded number of times before giving up.

use crate::planner::{geodesic_distance_m, geodesic_field, geodesic_path};
use crate::world::{
    Cell, EpisodeSpec, GroundTruthGrid, Heading, Pose, DEFAULT_MAX_STEPS,
    DEFAULT_SUCCESS_RADIUS_M,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAZE_SIZE: usize = 49;
pub const DEFAULT_JUNCTION_TARGET: usize = 4;
pub const DEFAULT_MIN_GEODESIC_M: f64 = 10.0;

const MAX_ATTEMPTS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("maze size must be odd and at least 7, got {size}")]
    BadSize { size: usize },
    #[error("resolution must be positive, got {resolution_m}")]
    BadResolution { resolution_m: f64 },
    #[error("corridor width must be at least 1")]
    BadCorridorWidth,
    #[error("no maze satisfied the constraints for seed {seed:#018x} after {attempts} attempts")]
    Exhausted { seed: u64, attempts: u64 },
}

/// Maze parameters. Junction and length constraints are hard: generation
/// fails rather than silently relaxing them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub seed: u64,
    /// Side length in cells, odd.
    pub size: usize,
    /// Open rectangular rooms carved over the corridor.
    pub room_count: usize,
    /// Corridor width in cells. Widths above 1 dilate the carved maze.
    pub corridor_width: usize,
    /// Exact number of junction cells (three or more open orthogonal
    /// neighbors) in the width-1 corridor skeleton. Rooms and dilation
    /// widen passages afterward without adding decision points, so the
    /// count is audited on the skeleton.
    pub junction_target: usize,
    /// Minimum start-to-goal geodesic distance.
    pub min_geodesic_m: f64,
    pub resolution_m: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            seed: 0,
            size: DEFAULT_MAZE_SIZE,
            room_count: 0,
            corridor_width: 1,
            junction_target: DEFAULT_JUNCTION_TARGET,
            min_geodesic_m: DEFAULT_MIN_GEODESIC_M,
            resolution_m: crate::world::DEFAULT_RESOLUTION_M,
        }
    }
}

/// A generated scenario plus its canonical name.
#[derive(Debug, Clone)]
pub struct GeneratedScenario {
    pub name: String,
    pub spec: EpisodeSpec,
}

pub fn generate(gen: &GenSpec) -> Result<GeneratedScenario, GenError> {
    if gen.size < 7 || gen.size % 2 == 0 {
        return Err(GenError::BadSize { size: gen.size });
    }
    if !(gen.resolution_m > 0.0) {
        return Err(GenError::BadResolution { resolution_m: gen.resolution_m });
    }
    if gen.corridor_width == 0 {
        return Err(GenError::BadCorridorWidth);
    }
    for attempt in 0..MAX_ATTEMPTS {
        let sub_seed = gen.seed ^ attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
        if let Some(spec) = try_generate(gen, &mut rng) {
            return Ok(GeneratedScenario { name: format!("maze_{:08x}", gen.seed), spec });
        }
    }
    Err(GenError::Exhausted { seed: gen.seed, attempts: MAX_ATTEMPTS })
}

/// Lattice node index to its grid cell.
fn node_cell(i: usize, j: usize) -> Cell {
    Cell::new(2 * i + 1, 2 * j + 1)
}

struct Carver {
    size: usize,
    free: Vec<bool>,
}

impl Carver {
    fn new(size: usize) -> Self {
        Carver { size, free: vec![false; size * size] }
    }

    fn carve(&mut self, c: Cell) {
        self.free[c.y * self.size + c.x] = true;
    }

    fn carve_hop(&mut self, a: (usize, usize), b: (usize, usize)) {
        let (ca, cb) = (node_cell(a.0, a.1), node_cell(b.0, b.1));
        self.carve(ca);
        self.carve(cb);
        self.carve(Cell::new((ca.x + cb.x) / 2, (ca.y + cb.y) / 2));
    }

    fn rows(&self) -> Vec<String> {
        (0..self.size)
            .rev()
            .map(|y| {
                (0..self.size)
                    .map(|x| if self.free[y * self.size + x] { '.' } else { '#' })
                    .collect()
            })
            .collect()
    }
}

const LATTICE_DIRS: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

fn lattice_neighbor(
    (i, j): (usize, usize),
    (di, dj): (isize, isize),
    n: usize,
) -> Option<(usize, usize)> {
    let ni = i.checked_add_signed(di)?;
    let nj = j.checked_add_signed(dj)?;
    (ni < n && nj < n).then_some((ni, nj))
}

fn try_generate(gen: &GenSpec, rng: &mut ChaCha8Rng) -> Option<EpisodeSpec> {
    let n = (gen.size - 1) / 2;
    let mut visited = vec![false; n * n];
    let mut carver = Carver::new(gen.size);

    // Main corridor: a self-avoiding walk, carved hop by hop.
    let head = (rng.gen_range(0..n), rng.gen_range(0..n));
    visited[head.1 * n + head.0] = true;
    let mut walk = vec![head];
    loop {
        let current = *walk.last().expect("walk starts nonempty");
        let mut dirs = LATTICE_DIRS;
        dirs.shuffle(rng);
        let next = dirs.iter().find_map(|&d| {
            lattice_neighbor(current, d, n).filter(|&(i, j)| !visited[j * n + i])
        });
        match next {
            Some(node) => {
                visited[node.1 * n + node.0] = true;
                carver.carve_hop(current, node);
                walk.push(node);
            }
            None => break,
        }
    }
    let hops_needed =
        (gen.min_geodesic_m / (2.0 * gen.resolution_m)).ceil().max(1.0) as usize;
    if walk.len() < hops_needed + 1 || walk.len() < 3 {
        return None;
    }

    // Branches: one junction each, attached at distinct interior nodes.
    let mut junctions_made = 0;
    let mut attach_order: Vec<usize> = (1..walk.len() - 1).collect();
    attach_order.shuffle(rng);
    for &wi in &attach_order {
        if junctions_made == gen.junction_target {
            break;
        }
        let mut current = walk[wi];
        let mut hops = 0;
        for _ in 0..rng.gen_range(1..=3usize) {
            let mut dirs = LATTICE_DIRS;
            dirs.shuffle(rng);
            let next = dirs.iter().find_map(|&d| {
                lattice_neighbor(current, d, n).filter(|&(i, j)| !visited[j * n + i])
            });
            let Some(node) = next else { break };
            visited[node.1 * n + node.0] = true;
            carver.carve_hop(current, node);
            current = node;
            hops += 1;
        }
        if hops > 0 {
            junctions_made += 1;
        }
    }
    if junctions_made != gen.junction_target {
        return None;
    }

    // Junction audit on the carved skeleton, before rooms and dilation
    // widen it: every junction must come from a deliberate branch.
    let skeleton = GroundTruthGrid::from_rows(&carver.rows(), gen.resolution_m).ok()?;
    let mut junction_count = 0;
    for c in skeleton.cells() {
        if !skeleton.is_free(c) {
            continue;
        }
        let open = LATTICE_DIRS
            .iter()
            .filter_map(|&(dx, dy)| {
                let x = c.x.checked_add_signed(dx)?;
                let y = c.y.checked_add_signed(dy)?;
                let nc = Cell::new(x, y);
                (x < gen.size && y < gen.size && skeleton.is_free(nc)).then_some(())
            })
            .count();
        if open >= 3 {
            junction_count += 1;
        }
    }
    if junction_count != gen.junction_target {
        return None;
    }

    // Rooms: open rectangles centered on interior corridor nodes.
    let mut room_interiors: Vec<(Cell, Cell)> = Vec::new();
    for _ in 0..gen.room_count {
        let center = walk[rng.gen_range(1..walk.len() - 1)];
        let cc = node_cell(center.0, center.1);
        let (hx, hy) = (rng.gen_range(1..=2usize), rng.gen_range(1..=2usize));
        let lo = Cell::new(cc.x.saturating_sub(hx).max(1), cc.y.saturating_sub(hy).max(1));
        let hi =
            Cell::new((cc.x + hx).min(gen.size - 2), (cc.y + hy).min(gen.size - 2));
        for y in lo.y..=hi.y {
            for x in lo.x..=hi.x {
                carver.carve(Cell::new(x, y));
            }
        }
        room_interiors.push((lo, hi));
    }

    // Wider corridors by dilation toward positive x and y.
    if gen.corridor_width > 1 {
        let base = carver.free.clone();
        for y in 0..gen.size {
            for x in 0..gen.size {
                if !base[y * gen.size + x] {
                    continue;
                }
                for dy in 0..gen.corridor_width {
                    for dx in 0..gen.corridor_width {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx <= gen.size - 2 && ny <= gen.size - 2 {
                            carver.carve(Cell::new(nx, ny));
                        }
                    }
                }
            }
        }
    }

    let grid = GroundTruthGrid::from_rows(&carver.rows(), gen.resolution_m).ok()?;

    // Start at the walk head facing its first hop; goal at the tail.
    let head_cell = node_cell(head.0, head.1);
    let tail = *walk.last().expect("walk has at least 3 nodes");
    let tail_cell = node_cell(tail.0, tail.1);
    let heading = match (
        walk[1].0 as isize - walk[0].0 as isize,
        walk[1].1 as isize - walk[0].1 as isize,
    ) {
        (1, 0) => 0,
        (0, 1) => 90,
        (-1, 0) => 180,
        _ => 270,
    };
    let (sx, sy) = grid.cell_center(head_cell);
    let goal = grid.cell_center(tail_cell);

    // Every carved cell must be reachable and the route long enough.
    let field = geodesic_field(&grid, head_cell).ok()?;
    if grid.cells().any(|c| grid.is_free(c) && field.cost(c).is_none()) {
        return None;
    }
    let geodesic = geodesic_distance_m(&grid, head_cell, tail_cell)?;
    if geodesic < gen.min_geodesic_m {
        return None;
    }
    let reference = geodesic_path(&grid, head_cell, tail_cell)?;

    let turns = walk
        .windows(3)
        .filter(|w| {
            let a = (w[1].0 as isize - w[0].0 as isize, w[1].1 as isize - w[0].1 as isize);
            let b = (w[2].0 as isize - w[1].0 as isize, w[2].1 as isize - w[1].1 as isize);
            a != b
        })
        .count();
    let facing = match heading {
        0 => "east",
        90 => "north",
        180 => "west",
        _ => "south",
    };
    let instruction = format!(
        "Start facing {facing}. Follow the main corridor through {turns} turns, \
         keep to the through passage past {} side openings, and stop at the dead \
         end where the corridor closes.",
        gen.junction_target
    );

    Some(EpisodeSpec {
        start: Pose {
            x: sx,
            y: sy,
            heading: Heading::new(heading).expect("lattice headings are axis-aligned"),
        },
        goal,
        instruction,
        max_steps: DEFAULT_MAX_STEPS,
        success_radius_m: DEFAULT_SUCCESS_RADIUS_M,
        reference_path: Some(reference),
        grid,
    })
}
