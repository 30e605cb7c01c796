//! Egocentric view rendering along a planned path, view embedding, and
//! similarity-based pruning of near-duplicate views.
//!
//! Each waypoint of a path yields a square belief-map patch centered on the
//! waypoint and rotated into the local frame (forward is up). Patches embed
//! into unit vectors; consecutive views whose cosine similarity exceeds a
//! threshold are dropped so a downstream consumer sees only views that add
//! information.

use crate::mapping::{Occupancy, OccupancyMap};
use crate::planner::PlannedPath;
use crate::world::{Heading, Pose, TURN_STEP_DEG};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Patch side length in cells used when a caller does not override it.
pub const DEFAULT_PATCH_SIZE: usize = 16;
/// Similarity threshold above which a view counts as redundant.
pub const DEFAULT_TAU: f64 = 0.92;

#[derive(Debug, Error)]
pub enum ViewError {
    #[error("{views} views but {embeddings} embeddings")]
    LengthMismatch { views: usize, embeddings: usize },
}

/// Which earlier view a candidate is compared against during pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneMode {
    /// Compare against the most recently kept view.
    LastKept,
    /// Compare against the immediately preceding view, kept or not.
    Consecutive,
}

/// Rendering and pruning parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewConfig {
    pub patch_size: usize,
    pub tau: f64,
    pub prune_mode: PruneMode,
}

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig { patch_size: DEFAULT_PATCH_SIZE, tau: DEFAULT_TAU, prune_mode: PruneMode::LastKept }
    }
}

/// A square belief patch, row-major, top row farthest ahead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub size: usize,
    pub cells: Vec<Occupancy>,
}

/// One rendered view: the pose it was rendered from plus its patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedView {
    pub pose: Pose,
    pub patch: Patch,
}

/// Unit-norm embedding of a patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(pub Vec<f64>);

fn snap_heading(dx: f64, dy: f64) -> Option<Heading> {
    if dx == 0.0 && dy == 0.0 {
        return None;
    }
    let deg = dy.atan2(dx).to_degrees();
    let step = TURN_STEP_DEG as f64;
    let snapped = ((deg / step).round() * step).rem_euclid(360.0);
    Some(Heading::new(snapped as u16).expect("snapped heading is a turn multiple"))
}

/// Renders one patch centered at `pose`, axes rotated so the pose heading
/// points up. Cells outside the map read as unknown.
pub fn render_patch(map: &OccupancyMap, pose: &Pose, patch_size: usize) -> Patch {
    let theta = pose.heading.radians();
    let (fx, fy) = (theta.cos(), theta.sin());
    let (lx, ly) = (-theta.sin(), theta.cos());
    let res = map.resolution_m();
    let half = (patch_size as f64 - 1.0) / 2.0;
    let mut cells = Vec::with_capacity(patch_size * patch_size);
    for i in 0..patch_size {
        for j in 0..patch_size {
            // Row 0 is farthest forward; column grows to the right.
            let forward = (half - i as f64) * res;
            let left = (half - j as f64) * res;
            let wx = pose.x + forward * fx + left * lx;
            let wy = pose.y + forward * fy + left * ly;
            let state = map.cell_of(wx, wy).map_or(Occupancy::Unknown, |c| map.state(c));
            cells.push(state);
        }
    }
    Patch { size: patch_size, cells }
}

/// Renders a view at every node of `path`. The heading at a node points
/// along the segment leaving it, snapped to the turn step; the final node
/// inherits the previous heading, and a single-node path uses
/// `current_heading`.
pub fn render_views(
    map: &OccupancyMap,
    path: &PlannedPath,
    current_heading: Heading,
    cfg: &ViewConfig,
) -> Vec<RenderedView> {
    let mut views = Vec::with_capacity(path.nodes.len());
    let mut heading = current_heading;
    for (idx, &(x, y)) in path.nodes.iter().enumerate() {
        if let Some(&(nx, ny)) = path.nodes.get(idx + 1) {
            if let Some(h) = snap_heading(nx - x, ny - y) {
                heading = h;
            }
        }
        let pose = Pose { x, y, heading };
        views.push(RenderedView { patch: render_patch(map, &pose, cfg.patch_size), pose });
    }
    views
}

/// Embeds a patch: occupied -1, unknown 0, free +1, flattened row-major and
/// L2-normalized. An all-unknown patch has no direction of its own and maps
/// to the first basis vector.
pub fn embed(patch: &Patch) -> Embedding {
    let mut v: Vec<f64> = patch
        .cells
        .iter()
        .map(|s| match s {
            Occupancy::Occupied => -1.0,
            Occupancy::Unknown => 0.0,
            Occupancy::Free => 1.0,
        })
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        for x in &mut v {
            *x /= norm;
        }
    }
    Embedding(v)
}

/// Cosine similarity of two equal-length vectors.
pub fn cosine(a: &Embedding, b: &Embedding) -> f64 {
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let na = a.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Returns indices of views that survive pruning, in order. The first view
/// is always kept; a later view is kept only when its similarity to the
/// reference view (per `mode`) is strictly below `tau`.
pub fn prune(
    views: &[RenderedView],
    embeddings: &[Embedding],
    tau: f64,
    mode: PruneMode,
) -> Result<Vec<usize>, ViewError> {
    if views.len() != embeddings.len() {
        return Err(ViewError::LengthMismatch { views: views.len(), embeddings: embeddings.len() });
    }
    if views.is_empty() {
        return Ok(Vec::new());
    }
    let mut kept = vec![0];
    for k in 1..views.len() {
        let reference = match mode {
            PruneMode::LastKept => *kept.last().expect("kept starts nonempty"),
            PruneMode::Consecutive => k - 1,
        };
        if cosine(&embeddings[reference], &embeddings[k]) < tau {
            kept.push(k);
        }
    }
    Ok(kept)
}
