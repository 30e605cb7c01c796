//! Reference implementations the acceptance suite checks the shipped
//! algorithms against. Each is written the plain way, independent of the
//! library code paths, sharing only the arithmetic both sides are
//! contracted to agree on (step values, cell centers, cosine form).

use dualnav_core::mapping::{Frontier, Occupancy, OccupancyMap};
use dualnav_core::world::Cell;
use rand::Rng;
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// Exact cost of a move mix: straight steps count 1, diagonal steps
/// count sqrt(2). The planner reports costs through this same expression,
/// and no two distinct step mixes on a desk-scale map collide in f64, so
/// agreement can be checked bitwise.
pub fn step_value(straight: u32, diag: u32) -> f64 {
    straight as f64 + diag as f64 * std::f64::consts::SQRT_2
}

#[derive(PartialEq)]
struct TotalF64(f64);

impl Eq for TotalF64 {}

impl PartialOrd for TotalF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TotalF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Exhaustive single-source shortest paths under the movement rules the
/// planner is specified against: 8-connected moves between free cells,
/// diagonals only when both flanking orthogonal cells are also free.
/// Returns the optimal (straight, diagonal) step mix per reachable cell.
pub fn dijkstra_octile(map: &OccupancyMap, start: Cell) -> Vec<Option<(u32, u32)>> {
    let (w, h) = (map.width(), map.height());
    let free = |x: usize, y: usize| map.state(Cell::new(x, y)) == Occupancy::Free;
    let mut best: Vec<Option<(u32, u32)>> = vec![None; w * h];
    if !free(start.x, start.y) {
        return best;
    }
    let mut heap = BinaryHeap::new();
    best[start.y * w + start.x] = Some((0u32, 0u32));
    heap.push(Reverse((TotalF64(0.0), 0u32, 0u32, start.x, start.y)));
    while let Some(Reverse((_, s, d, x, y))) = heap.pop() {
        if best[y * w + x] != Some((s, d)) {
            continue;
        }
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)]
        {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if !free(nx, ny) {
                continue;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal && !(free(nx, y) && free(x, ny)) {
                continue;
            }
            let cand = if diagonal { (s, d + 1) } else { (s + 1, d) };
            let keep = match best[ny * w + nx] {
                None => true,
                Some(old) => step_value(cand.0, cand.1) < step_value(old.0, old.1),
            };
            if keep {
                best[ny * w + nx] = Some(cand);
                heap.push(Reverse((TotalF64(step_value(cand.0, cand.1)), cand.0, cand.1, nx, ny)));
            }
        }
    }
    best
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Frontier clustering recomputed from the definition: a frontier cell is
/// known free with at least one unknown 4-neighbor; clusters are
/// 8-connected components joined with a union-find; small clusters are
/// dropped; the representative is the member nearest the cluster centroid,
/// earliest row-major cell on a tie.
pub fn frontier_oracle(map: &OccupancyMap, min_cluster: usize) -> Vec<Frontier> {
    let (w, h) = (map.width(), map.height());
    let res = map.resolution_m();
    let frontier = |x: usize, y: usize| {
        if map.state(Cell::new(x, y)) != Occupancy::Free {
            return false;
        }
        let mut unknown = false;
        if x + 1 < w {
            unknown |= map.state(Cell::new(x + 1, y)) == Occupancy::Unknown;
        }
        if x > 0 {
            unknown |= map.state(Cell::new(x - 1, y)) == Occupancy::Unknown;
        }
        if y + 1 < h {
            unknown |= map.state(Cell::new(x, y + 1)) == Occupancy::Unknown;
        }
        if y > 0 {
            unknown |= map.state(Cell::new(x, y - 1)) == Occupancy::Unknown;
        }
        unknown
    };

    let mut uf = UnionFind::new(w * h);
    for y in 0..h {
        for x in 0..w {
            if !frontier(x, y) {
                continue;
            }
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if (dx == 0 && dy == 0) || nx < 0 || ny < 0 {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if nx < w && ny < h && frontier(nx, ny) {
                        uf.union(y * w + x, ny * w + nx);
                    }
                }
            }
        }
    }

    let mut groups: std::collections::BTreeMap<usize, Vec<Cell>> = Default::default();
    for y in 0..h {
        for x in 0..w {
            if frontier(x, y) {
                let root = uf.find(y * w + x);
                groups.entry(root).or_default().push(Cell::new(x, y));
            }
        }
    }

    let center = |c: Cell| ((c.x as f64 + 0.5) * res, (c.y as f64 + 0.5) * res);
    let mut out: Vec<Frontier> = groups
        .into_values()
        .filter(|cells| cells.len() >= min_cluster)
        .map(|mut cells| {
            cells.sort_by_key(|c| (c.y, c.x));
            let n = cells.len() as f64;
            let (sx, sy) = cells.iter().fold((0.0, 0.0), |(ax, ay), &c| {
                let (x, y) = center(c);
                (ax + x, ay + y)
            });
            let centroid = (sx / n, sy / n);
            let mut best = cells[0];
            let mut best_d2 = f64::INFINITY;
            for &c in &cells {
                let (x, y) = center(c);
                let d2 = (x - centroid.0).powi(2) + (y - centroid.1).powi(2);
                if d2 < best_d2 {
                    best_d2 = d2;
                    best = c;
                }
            }
            Frontier { representative: center(best), representative_cell: best, cells }
        })
        .collect();
    out.sort_by_key(|f| (f.representative_cell.y, f.representative_cell.x));
    out
}

/// Plain cosine similarity over raw slices, zero when either norm is zero.
pub fn cos_sim(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Reference pruning scan. The first view is kept; each later view is
/// compared against the last kept view (`last_kept` true) or its immediate
/// predecessor (`last_kept` false) and kept when the similarity is
/// strictly below `tau`.
pub fn prune_scan(embeddings: &[Vec<f64>], tau: f64, last_kept: bool) -> Vec<usize> {
    if embeddings.is_empty() {
        return Vec::new();
    }
    let mut kept = vec![0usize];
    for k in 1..embeddings.len() {
        let reference = if last_kept { *kept.last().unwrap() } else { k - 1 };
        if cos_sim(&embeddings[reference], &embeddings[k]) < tau {
            kept.push(k);
        }
    }
    kept
}

/// Dynamic time warping by the full table, no rolling storage.
pub fn dtw_table(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut dp = vec![vec![0.0f64; m]; n];
    for i in 0..n {
        for j in 0..m {
            let d = ((a[i].0 - b[j].0).powi(2) + (a[i].1 - b[j].1).powi(2)).sqrt();
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => dp[0][j - 1],
                (_, 0) => dp[i - 1][0],
                _ => dp[i - 1][j].min(dp[i][j - 1]).min(dp[i - 1][j - 1]),
            };
            dp[i][j] = d + best;
        }
    }
    dp[n - 1][m - 1]
}

/// Loss recomputed by direct summation: mean misalignment of every row
/// pair, cosines clamped, weighted and added to the action term.
pub fn direct_loss(
    v: &[Vec<f64>],
    s: &[Vec<f64>],
    p: &[Vec<f64>],
    alpha: f64,
    l_action: f64,
) -> f64 {
    let mut sum = 0.0;
    for t in 0..v.len() {
        let u: Vec<f64> = s[t].iter().zip(&p[t]).map(|(a, b)| a + b).collect();
        sum += 1.0 - cos_sim(&v[t], &u).clamp(-1.0, 1.0);
    }
    l_action + alpha * sum / v.len() as f64
}

/// Fourth-order central difference of `f` at `x`:
/// `(8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h`. Truncation falls
/// off as `h^4`, so `h = 1e-4` leaves roundoff (about `eps |f| / h`) as
/// the dominant error, a little under 1e-10 for losses of order one.
pub fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
}

/// Random occupancy rows over the belief glyphs. `p_free` and `p_occupied`
/// are cell probabilities; the rest stays unknown.
pub fn random_belief_rows(
    rng: &mut impl Rng,
    width: usize,
    height: usize,
    p_free: f64,
    p_occupied: f64,
) -> Vec<String> {
    (0..height)
        .map(|_| {
            (0..width)
                .map(|_| {
                    let roll: f64 = rng.gen();
                    if roll < p_free {
                        '.'
                    } else if roll < p_free + p_occupied {
                        '#'
                    } else {
                        '?'
                    }
                })
                .collect()
        })
        .collect()
}

/// Partially explored map in the shape episodes produce: unknown
/// everywhere except a few sensor-like discs of known cells with occupied
/// speckle.
pub fn blob_belief_rows(
    rng: &mut impl Rng,
    width: usize,
    height: usize,
    discs: usize,
) -> Vec<String> {
    let mut grid = vec![vec!['?'; width]; height];
    for _ in 0..discs {
        let cx = rng.gen_range(0..width) as f64;
        let cy = rng.gen_range(0..height) as f64;
        let r = rng.gen_range(2.0..6.0);
        for (y, row) in grid.iter_mut().enumerate() {
            for (x, cell) in row.iter_mut().enumerate() {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                if d2 <= r * r {
                    *cell = if rng.gen_bool(0.15) { '#' } else { '.' };
                }
            }
        }
    }
    grid.into_iter().map(|row| row.into_iter().collect()).collect()
}

/// Builds an occupancy map from glyph rows, panicking on bad input.
pub fn belief_from_rows(rows: &[String], resolution_m: f64) -> OccupancyMap {
    OccupancyMap::from_rows(rows, resolution_m).expect("generated rows use valid glyphs")
}
