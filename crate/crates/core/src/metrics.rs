//! Episode and suite evaluation: navigation error, success, oracle
//! success, path-length-weighted success, and normalized dynamic time
//! warping against a reference path.
//!
//! Wall-clock time is tracked per episode but kept out of the metrics
//! files, which must be byte-identical across reruns; timings get their
//! own file.

use crate::planner::{geodesic_distance_m, geodesic_path};
use crate::scheduler::EpisodeResult;
use crate::world::EpisodeSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no episodes to aggregate")]
    EmptySuite,
    #[error("empty trajectory")]
    EmptyPath,
    #[error("empty reference path")]
    EmptyReference,
    #[error("start cell is outside the grid")]
    StartOutsideGrid,
    #[error("goal cell is outside the grid")]
    GoalOutsideGrid,
    #[error("goal is unreachable from the start")]
    UnreachableGoal,
}

/// Per-episode metric row. `at_s` is wall-clock and never serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scenario: String,
    pub seed: u64,
    pub ne_m: f64,
    pub success: bool,
    pub oracle_success: bool,
    pub spl: f64,
    pub ndtw: f64,
    pub steps: usize,
    #[serde(skip)]
    pub at_s: f64,
}

/// Suite-level means. `at_s` is wall-clock and never serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_episodes: usize,
    pub ne_m: f64,
    pub sr: f64,
    pub os: f64,
    pub spl: f64,
    pub ndtw: f64,
    pub steps: f64,
    #[serde(skip)]
    pub at_s: f64,
}

fn euclid(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()
}

fn path_length(path: &[(f64, f64)]) -> f64 {
    path.windows(2).map(|w| euclid(w[0], w[1])).sum()
}

/// The reference trajectory for an episode: the annotated path when the
/// scenario carries one, otherwise the geodesic cell-center path from start
/// to goal.
pub fn reference_path(spec: &EpisodeSpec) -> Result<Vec<(f64, f64)>, MetricsError> {
    if let Some(annotated) = &spec.reference_path {
        if annotated.is_empty() {
            return Err(MetricsError::EmptyReference);
        }
        return Ok(annotated.clone());
    }
    let start = spec
        .grid
        .cell_of(spec.start.x, spec.start.y)
        .ok_or(MetricsError::StartOutsideGrid)?;
    let goal = spec
        .grid
        .cell_of(spec.goal.0, spec.goal.1)
        .ok_or(MetricsError::GoalOutsideGrid)?;
    geodesic_path(&spec.grid, start, goal).ok_or(MetricsError::UnreachableGoal)
}

/// Dynamic-time-warping distance between two point sequences under the
/// Euclidean metric, computed with a rolling DP row.
pub fn dtw_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyPath);
    }
    let mut prev = vec![0.0f64; b.len()];
    let mut cur = vec![0.0f64; b.len()];
    for (i, &pa) in a.iter().enumerate() {
        for (j, &pb) in b.iter().enumerate() {
            let d = euclid(pa, pb);
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(cur[j - 1]).min(prev[j - 1]),
            };
            cur[j] = d + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[b.len() - 1])
}

/// `exp(-DTW / (|reference| * radius))`, in `(0, 1]`.
pub fn ndtw(path: &[(f64, f64)], reference: &[(f64, f64)], radius_m: f64) -> Result<f64, MetricsError> {
    let dtw = dtw_distance(path, reference)?;
    Ok((-dtw / (reference.len() as f64 * radius_m)).exp())
}

/// Computes the metric row for one finished episode.
pub fn episode_metrics(
    scenario: &str,
    seed: u64,
    spec: &EpisodeSpec,
    result: &EpisodeResult,
) -> Result<EpisodeRecord, MetricsError> {
    if result.path.is_empty() {
        return Err(MetricsError::EmptyPath);
    }
    let goal = spec.goal;
    let last = *result.path.last().expect("checked nonempty");
    let ne_m = euclid(last, goal);
    let oracle_success = result
        .path
        .iter()
        .any(|&p| euclid(p, goal) <= spec.success_radius_m);

    let start = spec
        .grid
        .cell_of(spec.start.x, spec.start.y)
        .ok_or(MetricsError::StartOutsideGrid)?;
    let goal_cell = spec
        .grid
        .cell_of(goal.0, goal.1)
        .ok_or(MetricsError::GoalOutsideGrid)?;
    let shortest = geodesic_distance_m(&spec.grid, start, goal_cell)
        .ok_or(MetricsError::UnreachableGoal)?;
    let traveled = path_length(&result.path);
    let denom = traveled.max(shortest);
    let spl = if !result.success {
        0.0
    } else if denom == 0.0 {
        1.0
    } else {
        shortest / denom
    };

    let reference = reference_path(spec)?;
    let ndtw = ndtw(&result.path, &reference, spec.success_radius_m)?;

    Ok(EpisodeRecord {
        scenario: scenario.to_string(),
        seed,
        ne_m,
        success: result.success,
        oracle_success,
        spl,
        ndtw,
        steps: result.step_count as usize,
        at_s: result.wall_time_s,
    })
}

/// Unweighted means over episode rows.
pub fn aggregate(records: &[EpisodeRecord]) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptySuite);
    }
    let n = records.len() as f64;
    let mean = |f: &dyn Fn(&EpisodeRecord) -> f64| records.iter().map(|r| f(r)).sum::<f64>() / n;
    Ok(MetricsReport {
        n_episodes: records.len(),
        ne_m: mean(&|r| r.ne_m),
        sr: mean(&|r| f64::from(u8::from(r.success))),
        os: mean(&|r| f64::from(u8::from(r.oracle_success))),
        spl: mean(&|r| r.spl),
        ndtw: mean(&|r| r.ndtw),
        steps: mean(&|r| r.steps as f64),
        at_s: mean(&|r| r.at_s),
    })
}

/// One CSV row per episode plus a trailing aggregate row; no wall-clock
/// columns, fixed six-decimal floats, so reruns produce identical bytes.
/// In the aggregate row the success columns hold the SR and OS fractions.
pub fn render_metrics_csv(records: &[EpisodeRecord], report: &MetricsReport) -> String {
    let mut out = String::from("scenario,seed,ne_m,success,oracle_success,spl,ndtw,steps\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{:.6},{},{},{:.6},{:.6},{}\n",
            r.scenario,
            r.seed,
            r.ne_m,
            u8::from(r.success),
            u8::from(r.oracle_success),
            r.spl,
            r.ndtw,
            r.steps
        ));
    }
    out.push_str(&format!(
        "aggregate,,{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
        report.ne_m, report.sr, report.os, report.spl, report.ndtw, report.steps
    ));
    out
}

/// Episode rows plus the aggregate summary as pretty JSON. Wall-clock
/// fields are skipped during serialization, keeping the bytes stable.
pub fn render_metrics_json(
    records: &[EpisodeRecord],
    report: &MetricsReport,
) -> Result<String, serde_json::Error> {
    #[derive(Serialize)]
    struct Doc<'a> {
        episodes: &'a [EpisodeRecord],
        summary: &'a MetricsReport,
    }
    let mut s = serde_json::to_string_pretty(&Doc { episodes: records, summary: report })?;
    s.push('\n');
    Ok(s)
}

/// Wall-clock per episode, isolated in its own file.
pub fn render_timings_csv(records: &[EpisodeRecord]) -> String {
    let mut out = String::from("scenario,seed,at_s\n");
    for r in records {
        out.push_str(&format!("{},{},{:.6}\n", r.scenario, r.seed, r.at_s));
    }
    out
}
