//! Upper-bound slow planner: picks the frontier whose representative cell
//! minimizes the ground-truth geodesic distance to the goal.
//!
//! It stands in for the instruction-following planner when measuring what
//! frontier-level guidance is worth at all; a wrapper adds artificial
//! wall-clock latency so timing comparisons have a nonzero slow cost.

use super::{FrontierChoice, PlanFailure, PlanRequest, SlowPlanner};
use crate::planner::{geodesic_field, DistanceField, PlanError};
use crate::world::EpisodeSpec;
use std::time::Duration;

/// Geodesic-oracle planner. Precomputes the goal-rooted distance field.
pub struct OracleSlow {
    field: DistanceField,
}

impl OracleSlow {
    pub fn new(spec: &EpisodeSpec) -> Result<Self, PlanError> {
        let goal_cell = spec
            .grid
            .cell_of(spec.goal.0, spec.goal.1)
            .ok_or(PlanError::InvalidStart { x: usize::MAX, y: usize::MAX })?;
        Ok(OracleSlow { field: geodesic_field(&spec.grid, goal_cell)? })
    }
}

impl SlowPlanner for OracleSlow {
    fn plan(&mut self, request: &PlanRequest) -> Result<FrontierChoice, PlanFailure> {
        if request.candidates.is_empty() {
            return Err(PlanFailure::NoCandidates);
        }
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, cand) in request.candidates.iter().enumerate() {
            let d = self
                .field
                .distance_m(cand.frontier.representative_cell)
                .unwrap_or(f64::INFINITY);
            // Strict improvement only: ties resolve to the lowest index.
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        Ok(FrontierChoice::new(best, "oracle geodesic"))
    }
}

/// Wraps a planner with a fixed wall-clock delay before each call. The
/// delay is invisible to the logical schedule (latency there is counted in
/// fast steps) but shows up in the wall-time metric.
pub struct WithLatency<P> {
    inner: P,
    delay: Duration,
}

impl<P> WithLatency<P> {
    pub fn new(inner: P, delay: Duration) -> Self {
        WithLatency { inner, delay }
    }
}

impl<P: SlowPlanner> SlowPlanner for WithLatency<P> {
    fn plan(&mut self, request: &PlanRequest) -> Result<FrontierChoice, PlanFailure> {
        std::thread::sleep(self.delay);
        self.inner.plan(request)
    }
}
