//! Policy interfaces: the fast low-level action policy and the slow
//! frontier-level planner, plus the shared request/choice types that flow
//! between the scheduler and planner implementations.
//!
//! Implementations live in submodules: a scripted fast policy with a
//! tunable junction error rate, an oracle slow planner (with an optional
//! latency wrapper), a remote slow planner speaking newline-delimited JSON
//! over TCP, and a replay fixture server for offline protocol tests.

pub mod fixture;
pub mod oracle;
pub mod remote;
pub mod scripted;

use crate::mapping::{Frontier, OccupancyMap};
use crate::planner::PlannedPath;
use crate::views::RenderedView;
use crate::world::{Action, EpisodeSpec, Observation, Pose};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Everything a fast policy may consult when deciding its next actions.
pub struct FastContext<'a> {
    pub pose: Pose,
    pub steps: usize,
    pub instruction: &'a str,
    /// Most recent observations, newest last.
    pub recent: &'a [Observation],
    pub belief: &'a OccupancyMap,
}

/// The fast, low-level policy: consumes context, emits short action chunks.
pub trait FastPolicy {
    /// Re-seeds per-episode randomness. Called once before the first step.
    fn reset(&mut self, _seed: u64) {}

    /// Returns the next action chunk: non-empty, at most the configured
    /// chunk limit.
    fn decide(&mut self, ctx: &FastContext<'_>) -> Vec<Action>;

    /// Polled in slow-only coordination, where the policy never acts but
    /// retains stop authority.
    fn wants_stop(&mut self, _ctx: &FastContext<'_>) -> bool {
        false
    }
}

/// One frontier candidate prepared for the slow planner: its cluster, the
/// planned and interpolated paths to it, and the rendered views with the
/// surviving (kept) indices after pruning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub label: String,
    pub frontier: Frontier,
    pub path: PlannedPath,
    pub interpolated: PlannedPath,
    pub views: Vec<RenderedView>,
    pub kept: Vec<usize>,
    pub cost_m: f64,
}

/// A snapshot handed to the slow planner. Owns its data so it can cross a
/// thread boundary while the episode loop keeps stepping.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub instruction: String,
    pub map: OccupancyMap,
    pub agent: Pose,
    pub candidates: Vec<Candidate>,
}

/// The slow planner's answer: which candidate to pursue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierChoice {
    pub selected_index: usize,
    pub selected_label: String,
    pub reasoning: String,
}

impl FrontierChoice {
    pub fn new(selected_index: usize, reasoning: impl Into<String>) -> Self {
        FrontierChoice {
            selected_index,
            selected_label: candidate_label(selected_index),
            reasoning: reasoning.into(),
        }
    }
}

/// Stage-1 remote reply: a structured summary of the environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSummary {
    #[serde(rename = "Location")]
    pub location: String,
    #[serde(rename = "Relationship")]
    pub relationship: String,
    #[serde(rename = "Possible directions")]
    pub possible_directions: String,
}

/// Ways a slow-planner call can fail. Every variant resolves to a
/// scheduler-side fallback; none aborts the episode.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanFailure {
    #[error("no frontier candidates")]
    NoCandidates,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("remote planner timed out")]
    Timeout,
    #[error("malformed reply: missing or invalid field {field:?}")]
    MalformedReply { field: String },
    #[error("selected label {label:?} does not name a candidate")]
    InvalidSelection { label: String },
}

/// The wire label for candidate index `i`: "F1", "F2", ...
pub fn candidate_label(index: usize) -> String {
    format!("F{}", index + 1)
}

/// Inverse of [`candidate_label`]; `None` when the text is not a label.
pub fn parse_candidate_label(label: &str) -> Option<usize> {
    let digits = label.strip_prefix('F')?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse::<usize>().ok().map(|n| n - 1)
}

/// The slow planner. Implementations must be safe to drive from a worker
/// thread; all state they need arrives in the request.
pub trait SlowPlanner {
    fn plan(&mut self, request: &PlanRequest) -> Result<FrontierChoice, PlanFailure>;
}

/// Builds per-episode policy instances for suite runs.
pub trait PolicyProvider: Sync {
    fn fast(&self, spec: &EpisodeSpec, seed: u64) -> Box<dyn FastPolicy + Send>;
    fn slow(&self, spec: &EpisodeSpec) -> Option<Box<dyn SlowPlanner + Send>>;
}

/// Which slow planner a [`ScriptedSuiteProvider`] attaches.
#[derive(Debug, Clone)]
pub enum SlowKind {
    /// Pure fast policy, no planner.
    None,
    /// Ground-truth geodesic oracle.
    Oracle,
    /// The oracle behind an artificial wall-clock delay, for timing runs.
    OracleWithLatency(std::time::Duration),
    /// External planner over the wire protocol.
    Remote(remote::RemoteConfig),
}

/// The standard provider: scripted fast policy plus a configurable slow
/// planner. Shared by the CLI and the integration tests.
#[derive(Debug, Clone)]
pub struct ScriptedSuiteProvider {
    pub fast_cfg: scripted::ScriptedFastConfig,
    pub slow: SlowKind,
}

impl PolicyProvider for ScriptedSuiteProvider {
    fn fast(&self, spec: &EpisodeSpec, _seed: u64) -> Box<dyn FastPolicy + Send> {
        Box::new(
            scripted::ScriptedFast::new(spec, self.fast_cfg)
                .expect("validated scenarios have a reachable free goal cell"),
        )
    }

    fn slow(&self, spec: &EpisodeSpec) -> Option<Box<dyn SlowPlanner + Send>> {
        match &self.slow {
            SlowKind::None => None,
            SlowKind::Oracle => Some(Box::new(
                oracle::OracleSlow::new(spec).expect("validated scenarios have a free goal cell"),
            )),
            SlowKind::OracleWithLatency(delay) => Some(Box::new(oracle::WithLatency::new(
                oracle::OracleSlow::new(spec).expect("validated scenarios have a free goal cell"),
                *delay,
            ))),
            SlowKind::Remote(cfg) => Some(Box::new(remote::RemoteSlow::new(cfg.clone()))),
        }
    }
}
