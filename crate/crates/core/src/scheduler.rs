//! Episode coordination: runs the fast policy at step frequency and the
//! slow planner at a fixed multiple of it.
//!
//! The cadence is anchored on fast actions, not wall time. Every `ratio_k`
//! fast actions a planning request is issued; its reply is applied after
//! `latency_l` further fast actions, modeling the planner's thinking time
//! in agent steps. While a chosen waypoint path is being followed the fast
//! counter freezes, so waypoint traversal never triggers new requests.
//! A slow-only mode replaces fast progress with in-place rotation while a
//! request is outstanding.
//!
//! Every run produces a deterministic event trace. The planner executes on
//! a worker thread so the wall clock reflects real planning latency, but
//! replies are applied only at their scheduled step, so traces are
//! identical no matter how fast the planner answers.

use crate::mapping::{detect_frontiers, update_occupancy, OccupancyMap, DEFAULT_MIN_CLUSTER};
use crate::planner::{astar, interpolate, InterpolationConfig, PlannedPath};
use crate::policy::{
    candidate_label, Candidate, FastContext, FastPolicy, FrontierChoice, PlanRequest, SlowPlanner,
};
use crate::views::{embed, prune, render_views, Embedding, ViewConfig};
use crate::world::{
    dist, observe, steer_toward, Action, AgentState, Cell, EpisodeSpec, Observation, Pose,
    SensorConfig,
};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::sync::mpsc;
use std::thread;
use std::time::Instant;
use thiserror::Error;

/// Fast actions per slow planning request.
pub const DEFAULT_RATIO_K: u32 = 20;

/// Fast actions between a request and the application of its reply.
pub const DEFAULT_LATENCY_L: u32 = 8;

/// How many recent observations the fast policy may look back over.
const RECENT_OBSERVATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("ratio_k must be at least 1")]
    ZeroRatio,
    #[error("latency_l ({latency_l}) must be strictly below ratio_k ({ratio_k})")]
    LatencyNotBelowRatio { latency_l: u32, ratio_k: u32 },
    #[error("slow-only coordination requires a slow planner")]
    SlowOnlyWithoutPlanner,
}

/// What to do when waypoint following hits an obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaypointFollow {
    /// Abandon the waypoint and hand control back to the fast policy.
    Strict,
    /// Replan to the same target once, then abandon on the next block.
    ReplanOnBlock,
}

/// Which systems drive the episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinationMode {
    /// Fast policy steps continuously; slow planner cuts in on cadence.
    Dual,
    /// Only the planner produces movement; the agent rotates in place
    /// while a request is outstanding.
    SlowOnly,
}

/// Cadence and coordination parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub ratio_k: u32,
    pub latency_l: u32,
    pub follow: WaypointFollow,
    pub mode: CoordinationMode,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            ratio_k: DEFAULT_RATIO_K,
            latency_l: DEFAULT_LATENCY_L,
            follow: WaypointFollow::Strict,
            mode: CoordinationMode::Dual,
        }
    }
}

impl ScheduleConfig {
    /// A reply must land before the next request would be issued.
    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.ratio_k == 0 {
            return Err(ScheduleError::ZeroRatio);
        }
        if self.latency_l >= self.ratio_k {
            return Err(ScheduleError::LatencyNotBelowRatio {
                latency_l: self.latency_l,
                ratio_k: self.ratio_k,
            });
        }
        Ok(())
    }
}

/// Everything an episode run needs besides the scenario and the policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub schedule: ScheduleConfig,
    pub sensor: SensorConfig,
    pub views: ViewConfig,
    pub interpolation: InterpolationConfig,
    /// Minimum frontier cluster size considered a candidate.
    pub min_cluster: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            schedule: ScheduleConfig::default(),
            sensor: SensorConfig::default(),
            views: ViewConfig::default(),
            interpolation: InterpolationConfig::default(),
            min_cluster: DEFAULT_MIN_CLUSTER,
        }
    }
}

/// Compact per-candidate record embedded in the request trace event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub label: String,
    pub representative: (f64, f64),
    pub cost_m: f64,
    /// Views surviving pruning.
    pub kept: usize,
}

impl CandidateSummary {
    fn of(c: &Candidate) -> Self {
        CandidateSummary {
            label: c.label.clone(),
            representative: c.frontier.representative,
            cost_m: c.cost_m,
            kept: c.kept.len(),
        }
    }
}

/// One entry in the episode event log. `step` is the world step count at
/// the time of the event; action events record the state after the action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    FastAction { step: u32, action: Action, pose: Pose, collision: bool },
    SlowRequest { step: u32, fast_steps: u32, candidates: Vec<CandidateSummary> },
    SlowArrival { step: u32, choice: FrontierChoice },
    WaypointBegin { step: u32, target: (f64, f64), path: Vec<(f64, f64)> },
    WaypointStep { step: u32, action: Action, pose: Pose, collision: bool },
    WaypointEnd { step: u32, reached: bool },
    /// A planning round that ended without a usable reply; `choice` is the
    /// substitute the scheduler installed, if any.
    Fallback { step: u32, reason: String, choice: Option<FrontierChoice> },
    Stop { step: u32, pose: Pose },
}

/// Outcome of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub success: bool,
    pub final_pose: Pose,
    pub step_count: u32,
    /// Agent position before the first step and after every step:
    /// `step_count + 1` entries.
    pub path: Vec<(f64, f64)>,
    pub wall_time_s: f64,
    pub trace: Vec<TraceEvent>,
    /// Belief map at episode end as glyph rows, top row first.
    pub final_map: Vec<String>,
}

/// Moves the planner to a worker thread. Requests go out as owned
/// snapshots; replies are pulled with a blocking receive at the step where
/// the schedule applies them.
struct SlowWorker {
    req_tx: Option<mpsc::Sender<PlanRequest>>,
    resp_rx: mpsc::Receiver<Result<FrontierChoice, crate::policy::PlanFailure>>,
    handle: Option<thread::JoinHandle<()>>,
}

impl SlowWorker {
    fn spawn(mut planner: Box<dyn SlowPlanner + Send>) -> Self {
        let (req_tx, req_rx) = mpsc::channel::<PlanRequest>();
        let (resp_tx, resp_rx) = mpsc::channel();
        let handle = thread::spawn(move || {
            while let Ok(request) = req_rx.recv() {
                if resp_tx.send(planner.plan(&request)).is_err() {
                    break;
                }
            }
        });
        SlowWorker { req_tx: Some(req_tx), resp_rx, handle: Some(handle) }
    }

    fn send(&self, request: PlanRequest) {
        if let Some(tx) = &self.req_tx {
            let _ = tx.send(request);
        }
    }

    fn recv(&self) -> Result<FrontierChoice, crate::policy::PlanFailure> {
        self.resp_rx
            .recv()
            .unwrap_or_else(|_| Err(crate::policy::PlanFailure::Transport("planner thread ended".into())))
    }
}

impl Drop for SlowWorker {
    fn drop(&mut self) {
        self.req_tx.take();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

struct PendingRequest {
    due_fast_count: u32,
    candidates: Vec<Candidate>,
}

struct WaypointState {
    target_cell: Cell,
    nodes: Vec<(f64, f64)>,
    next: usize,
    replanned: bool,
}

struct Runner<'a> {
    spec: &'a EpisodeSpec,
    cfg: &'a EpisodeConfig,
    fast: &'a mut dyn FastPolicy,
    worker: Option<SlowWorker>,
    state: AgentState,
    map: OccupancyMap,
    recent: Vec<Observation>,
    chunk: VecDeque<Action>,
    pending: Option<PendingRequest>,
    waypoint: Option<WaypointState>,
    fast_count: u32,
    path: Vec<(f64, f64)>,
    trace: Vec<TraceEvent>,
}

impl Runner<'_> {
    fn observe_and_update(&mut self) {
        let obs = observe(&self.state, &self.spec.grid, &self.cfg.sensor);
        update_occupancy(&mut self.map, &obs).expect("observations stay inside the grid");
        if self.recent.len() == RECENT_OBSERVATIONS {
            self.recent.remove(0);
        }
        self.recent.push(obs);
    }

    /// Applies one world action and records the common bookkeeping. The
    /// caller appends the matching trace event.
    fn apply(&mut self, action: Action) {
        self.state = crate::world::step(&self.state, action, &self.spec.grid);
        self.observe_and_update();
        self.path.push(self.state.pose.position());
    }

    fn stop_here(&mut self) {
        self.abandon_pending();
        self.apply(Action::Stop);
        self.trace.push(TraceEvent::Stop { step: self.state.steps, pose: self.state.pose });
    }

    fn abandon_pending(&mut self) {
        if self.pending.take().is_some() {
            self.trace.push(TraceEvent::Fallback {
                step: self.state.steps,
                reason: "episode ended before the planner replied".into(),
                choice: None,
            });
        }
    }

    fn fast_wants_stop(&mut self) -> bool {
        let ctx = FastContext {
            pose: self.state.pose,
            steps: self.state.steps as usize,
            instruction: &self.spec.instruction,
            recent: &self.recent,
            belief: &self.map,
        };
        self.fast.wants_stop(&ctx)
    }

    fn refill_chunk(&mut self) {
        let ctx = FastContext {
            pose: self.state.pose,
            steps: self.state.steps as usize,
            instruction: &self.spec.instruction,
            recent: &self.recent,
            belief: &self.map,
        };
        let actions = self.fast.decide(&ctx);
        self.chunk.extend(actions);
        if self.chunk.is_empty() {
            // The contract says chunks are non-empty; an empty one reads as
            // the policy having nothing left to do.
            self.chunk.push_back(Action::Stop);
        }
    }

    fn fast_step(&mut self) {
        if self.chunk.is_empty() {
            self.refill_chunk();
        }
        let action = self.chunk.pop_front().expect("refill guarantees an action");
        if action == Action::Stop {
            self.stop_here();
            return;
        }
        self.apply(action);
        self.trace.push(TraceEvent::FastAction {
            step: self.state.steps,
            action,
            pose: self.state.pose,
            collision: self.state.collided,
        });
        self.fast_count += 1;
        self.resolve_if_due();
        self.issue_if_scheduled();
        self.resolve_if_due();
    }

    fn slow_only_step(&mut self) {
        if self.fast_wants_stop() {
            self.stop_here();
            return;
        }
        if self.pending.is_none() {
            self.issue_request();
            self.resolve_if_due();
            if self.waypoint.is_some() {
                return;
            }
        }
        // No movement while the planner thinks: rotate to sweep the sensor.
        self.apply(Action::TurnLeft);
        self.trace.push(TraceEvent::FastAction {
            step: self.state.steps,
            action: Action::TurnLeft,
            pose: self.state.pose,
            collision: false,
        });
        self.fast_count += 1;
        self.resolve_if_due();
    }

    /// In dual mode requests fire every `ratio_k` fast actions.
    fn issue_if_scheduled(&mut self) {
        if self.worker.is_some()
            && self.pending.is_none()
            && self.fast_count > 0
            && self.fast_count % self.cfg.schedule.ratio_k == 0
        {
            self.issue_request();
        }
    }

    fn issue_request(&mut self) {
        let candidates = self.build_candidates();
        self.trace.push(TraceEvent::SlowRequest {
            step: self.state.steps,
            fast_steps: self.fast_count,
            candidates: candidates.iter().map(CandidateSummary::of).collect(),
        });
        if candidates.is_empty() {
            self.trace.push(TraceEvent::Fallback {
                step: self.state.steps,
                reason: "no frontier candidates".into(),
                choice: None,
            });
            return;
        }
        let request = PlanRequest {
            instruction: self.spec.instruction.clone(),
            map: self.map.clone(),
            agent: self.state.pose,
            candidates: candidates.clone(),
        };
        self.worker.as_ref().expect("issue sites check for a worker").send(request);
        self.pending = Some(PendingRequest {
            due_fast_count: self.fast_count + self.cfg.schedule.latency_l,
            candidates,
        });
    }

    fn resolve_if_due(&mut self) {
        let due = self.pending.as_ref().is_some_and(|p| self.fast_count >= p.due_fast_count);
        if !due {
            return;
        }
        let pending = self.pending.take().expect("checked above");
        let outcome = self.worker.as_ref().expect("pending implies a worker").recv();
        match outcome {
            Ok(choice) if choice.selected_index < pending.candidates.len() => {
                self.trace.push(TraceEvent::SlowArrival {
                    step: self.state.steps,
                    choice: choice.clone(),
                });
                if let Err(reason) = self.begin_waypoint(&pending.candidates[choice.selected_index])
                {
                    self.fallback_chain(&pending.candidates, reason);
                }
            }
            Ok(choice) => {
                let reason = format!(
                    "selected index {} out of range for {} candidates",
                    choice.selected_index,
                    pending.candidates.len()
                );
                self.fallback_chain(&pending.candidates, reason);
            }
            Err(failure) => {
                self.fallback_chain(&pending.candidates, failure.to_string());
            }
        }
    }

    /// Replans to the candidate on the current map and enters waypoint mode.
    fn begin_waypoint(&mut self, candidate: &Candidate) -> Result<(), String> {
        let plan = self.prepare_waypoint(candidate)?;
        self.install_waypoint(candidate, plan);
        Ok(())
    }

    fn prepare_waypoint(&mut self, candidate: &Candidate) -> Result<PlannedPath, String> {
        let agent_cell = self
            .map
            .cell_of(self.state.pose.x, self.state.pose.y)
            .ok_or_else(|| "agent outside the mapped area".to_string())?;
        let path = astar(&self.map, agent_cell, candidate.frontier.representative_cell)
            .map_err(|e| e.to_string())?;
        Ok(interpolate(&path, &self.cfg.interpolation))
    }

    fn install_waypoint(&mut self, candidate: &Candidate, interpolated: PlannedPath) {
        self.trace.push(TraceEvent::WaypointBegin {
            step: self.state.steps,
            target: candidate.frontier.representative,
            path: interpolated.nodes.clone(),
        });
        self.waypoint = Some(WaypointState {
            target_cell: candidate.frontier.representative_cell,
            nodes: interpolated.nodes,
            next: 0,
            replanned: false,
        });
        self.chunk.clear();
    }

    /// Installs the cheapest reachable candidate after a failed round.
    fn fallback_chain(&mut self, candidates: &[Candidate], reason: String) {
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| {
            candidates[a].cost_m.total_cmp(&candidates[b].cost_m).then(a.cmp(&b))
        });
        for index in order {
            if let Ok(plan) = self.prepare_waypoint(&candidates[index]) {
                let choice = FrontierChoice {
                    selected_index: index,
                    selected_label: candidates[index].label.clone(),
                    reasoning: "fallback: nearest frontier by path cost".into(),
                };
                self.trace.push(TraceEvent::Fallback {
                    step: self.state.steps,
                    reason,
                    choice: Some(choice),
                });
                self.install_waypoint(&candidates[index], plan);
                return;
            }
        }
        self.trace.push(TraceEvent::Fallback { step: self.state.steps, reason, choice: None });
    }

    fn end_waypoint(&mut self, reached: bool) {
        self.trace.push(TraceEvent::WaypointEnd { step: self.state.steps, reached });
        self.waypoint = None;
        self.chunk.clear();
    }

    fn waypoint_step(&mut self) {
        // The fast system keeps stop authority even while a waypoint path
        // is being followed.
        if self.fast_wants_stop() {
            self.end_waypoint(false);
            self.stop_here();
            return;
        }
        let pos = self.state.pose.position();
        let radius = self.map.resolution_m() * 0.5;
        {
            let wp = self.waypoint.as_mut().expect("waypoint mode has a state");
            while wp.next < wp.nodes.len() && dist(pos, wp.nodes[wp.next]) <= radius {
                wp.next += 1;
            }
        }
        let agent_cell = self.map.cell_of(pos.0, pos.1);
        let wp = self.waypoint.as_ref().expect("waypoint mode has a state");
        let arrived = agent_cell.is_some_and(|c| {
            c.x.abs_diff(wp.target_cell.x) <= 1 && c.y.abs_diff(wp.target_cell.y) <= 1
        });
        if arrived {
            self.end_waypoint(true);
            return;
        }
        if wp.next >= wp.nodes.len() {
            // Path consumed without getting adjacent to the target.
            self.end_waypoint(false);
            return;
        }
        let node = wp.nodes[wp.next];
        let action = steer_toward(&self.state.pose, node);
        self.apply(action);
        self.trace.push(TraceEvent::WaypointStep {
            step: self.state.steps,
            action,
            pose: self.state.pose,
            collision: self.state.collided,
        });
        if self.state.collided {
            match self.cfg.schedule.follow {
                WaypointFollow::Strict => self.end_waypoint(false),
                WaypointFollow::ReplanOnBlock => {
                    let wp = self.waypoint.as_ref().expect("still in waypoint mode");
                    let already = wp.replanned;
                    let target_cell = wp.target_cell;
                    if already {
                        self.end_waypoint(false);
                    } else {
                        match self.replan_to(target_cell) {
                            Some(nodes) => {
                                let wp = self.waypoint.as_mut().expect("still in waypoint mode");
                                wp.nodes = nodes;
                                wp.next = 0;
                                wp.replanned = true;
                            }
                            None => self.end_waypoint(false),
                        }
                    }
                }
            }
        }
    }

    fn replan_to(&mut self, target_cell: Cell) -> Option<Vec<(f64, f64)>> {
        let agent_cell = self.map.cell_of(self.state.pose.x, self.state.pose.y)?;
        let path = astar(&self.map, agent_cell, target_cell).ok()?;
        Some(interpolate(&path, &self.cfg.interpolation).nodes)
    }

    /// Plans a path to every reachable frontier and packages the rendered,
    /// pruned view sequences. Labels are assigned after unreachable
    /// frontiers are dropped, so they are contiguous.
    fn build_candidates(&self) -> Vec<Candidate> {
        let Some(agent_cell) = self.map.cell_of(self.state.pose.x, self.state.pose.y) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for frontier in detect_frontiers(&self.map, self.cfg.min_cluster) {
            let Ok(path) = astar(&self.map, agent_cell, frontier.representative_cell) else {
                continue;
            };
            let interpolated = interpolate(&path, &self.cfg.interpolation);
            let views =
                render_views(&self.map, &interpolated, self.state.pose.heading, &self.cfg.views);
            let embeddings: Vec<Embedding> = views.iter().map(|v| embed(&v.patch)).collect();
            let kept = prune(&views, &embeddings, self.cfg.views.tau, self.cfg.views.prune_mode)
                .expect("views and embeddings are built together");
            let cost_m = path.cost_m;
            out.push(Candidate {
                label: String::new(),
                frontier,
                path,
                interpolated,
                views,
                kept,
                cost_m,
            });
        }
        for (index, candidate) in out.iter_mut().enumerate() {
            candidate.label = candidate_label(index);
        }
        out
    }
}

/// Runs one episode to termination and returns its outcome and trace.
///
/// `slow` may be `None` for a pure fast-policy run (in dual mode no
/// requests are issued then). The seed is forwarded to the fast policy.
pub fn run_episode(
    spec: &EpisodeSpec,
    fast: &mut dyn FastPolicy,
    slow: Option<Box<dyn SlowPlanner + Send>>,
    cfg: &EpisodeConfig,
    seed: u64,
) -> Result<EpisodeResult, ScheduleError> {
    cfg.schedule.validate()?;
    if cfg.schedule.mode == CoordinationMode::SlowOnly && slow.is_none() {
        return Err(ScheduleError::SlowOnlyWithoutPlanner);
    }
    let started = Instant::now();
    fast.reset(seed);
    let mut runner = Runner {
        spec,
        cfg,
        fast,
        worker: slow.map(SlowWorker::spawn),
        state: AgentState::at_start(spec),
        map: OccupancyMap::matching(&spec.grid),
        recent: Vec::new(),
        chunk: VecDeque::new(),
        pending: None,
        waypoint: None,
        fast_count: 0,
        path: Vec::new(),
        trace: Vec::new(),
    };
    runner.observe_and_update();
    runner.path.push(runner.state.pose.position());

    while !runner.state.stopped && runner.state.steps < spec.max_steps {
        if runner.waypoint.is_some() {
            runner.waypoint_step();
        } else {
            match cfg.schedule.mode {
                CoordinationMode::Dual => runner.fast_step(),
                CoordinationMode::SlowOnly => runner.slow_only_step(),
            }
        }
    }
    runner.abandon_pending();

    let wall_time_s = started.elapsed().as_secs_f64();
    let success = crate::world::is_success(&runner.state, spec)
        .expect("the loop runs episodes to termination");
    let result = EpisodeResult {
        success,
        final_pose: runner.state.pose,
        step_count: runner.state.steps,
        path: runner.path,
        wall_time_s,
        trace: runner.trace,
        final_map: runner.map.to_rows(),
    };
    drop(runner.worker.take());
    Ok(result)
}

/// One suite row: an episode of a named scenario under one seed.
#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub scenario: String,
    pub seed: u64,
    pub result: EpisodeResult,
}

/// Whether `run_suite` fans episodes out across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    /// Use the thread pool when the `parallel` feature is enabled;
    /// otherwise identical to `Sequential`.
    Parallel,
    Sequential,
}

#[cfg(feature = "parallel")]
fn map_jobs<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_jobs<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Runs every scenario under every seed. Output order is the scenario
/// order crossed with the seed order, independent of parallelism.
pub fn run_suite(
    episodes: &[(String, EpisodeSpec)],
    provider: &dyn crate::policy::PolicyProvider,
    cfg: &EpisodeConfig,
    seeds: &[u64],
    parallelism: Parallelism,
) -> Result<Vec<SuiteEntry>, ScheduleError> {
    cfg.schedule.validate()?;
    let jobs: Vec<(&String, &EpisodeSpec, u64)> = episodes
        .iter()
        .flat_map(|(name, spec)| seeds.iter().map(move |&seed| (name, spec, seed)))
        .collect();
    let run_one = |&(name, spec, seed): &(&String, &EpisodeSpec, u64)| -> SuiteEntry {
        let mut fast = provider.fast(spec, seed);
        let slow = provider.slow(spec);
        let result =
            run_episode(spec, fast.as_mut(), slow, cfg, seed).expect("config validated up front");
        SuiteEntry { scenario: name.clone(), seed, result }
    };
    Ok(match parallelism {
        Parallelism::Sequential => jobs.iter().map(run_one).collect(),
        Parallelism::Parallel => map_jobs(&jobs, run_one),
    })
}
