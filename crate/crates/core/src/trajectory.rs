//! Episode logs as newline-delimited JSON.
//!
//! A log is one header line (scenario document, seed, run configuration),
//! one line per trace event, and one closing result line. The header makes
//! the log self-contained: a renderer can rebuild the episode without the
//! original scenario file. A log whose process died mid-episode simply
//! lacks the result line; readers accept that and report the log as
//! incomplete.

use crate::scheduler::{EpisodeConfig, EpisodeResult, TraceEvent};
use crate::world::{doc_from_spec, EpisodeSpec, Pose, ScenarioDoc};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("log is empty")]
    Empty,
    #[error("line 1 must be the header line")]
    MissingHeader,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: content after the result line")]
    AfterResult { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// First line of every log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub scenario_name: String,
    pub scenario: ScenarioDoc,
    pub seed: u64,
    pub config: EpisodeConfig,
}

/// Last line of a complete log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogResult {
    pub success: bool,
    pub step_count: u32,
    pub final_pose: Pose,
    /// Belief rows at episode end: `?` unknown, `.` free, `#` occupied,
    /// top row first.
    pub final_map: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Header(LogHeader),
    Event(TraceEvent),
    Result(LogResult),
}

/// An episode log in memory. `result` is `None` for a truncated log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub header: LogHeader,
    pub events: Vec<TraceEvent>,
    pub result: Option<LogResult>,
}

impl TrajectoryLog {
    pub fn is_complete(&self) -> bool {
        self.result.is_some()
    }
}

/// Packages a finished episode for logging.
pub fn log_from_episode(
    scenario_name: &str,
    spec: &EpisodeSpec,
    seed: u64,
    config: &EpisodeConfig,
    result: &EpisodeResult,
) -> TrajectoryLog {
    TrajectoryLog {
        header: LogHeader {
            scenario_name: scenario_name.to_string(),
            scenario: doc_from_spec(spec),
            seed,
            config: *config,
        },
        events: result.trace.clone(),
        result: Some(LogResult {
            success: result.success,
            step_count: result.step_count,
            final_pose: result.final_pose,
            final_map: result.final_map.clone(),
        }),
    }
}

/// Serializes a log, one JSON object per line, with a trailing newline.
pub fn render_jsonl(log: &TrajectoryLog) -> String {
    let mut out = String::new();
    let mut push = |line: &LogLine| {
        out.push_str(&serde_json::to_string(line).expect("log lines serialize"));
        out.push('\n');
    };
    push(&LogLine::Header(log.header.clone()));
    for event in &log.events {
        push(&LogLine::Event(event.clone()));
    }
    if let Some(result) = &log.result {
        push(&LogLine::Result(result.clone()));
    }
    out
}

/// Parses a log. A missing result line yields `result: None`; any
/// malformed line is an error naming its 1-based line number.
pub fn parse_jsonl(text: &str) -> Result<TrajectoryLog, TrajectoryError> {
    let mut header: Option<LogHeader> = None;
    let mut events = Vec::new();
    let mut result: Option<LogResult> = None;
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        if raw.trim().is_empty() {
            return Err(TrajectoryError::Parse { line, message: "empty line".into() });
        }
        if result.is_some() {
            return Err(TrajectoryError::AfterResult { line });
        }
        let parsed: LogLine = serde_json::from_str(raw)
            .map_err(|e| TrajectoryError::Parse { line, message: e.to_string() })?;
        match parsed {
            LogLine::Header(h) => {
                if line != 1 {
                    return Err(TrajectoryError::Parse {
                        line,
                        message: "header allowed only on line 1".into(),
                    });
                }
                header = Some(h);
            }
            LogLine::Event(event) => {
                if header.is_none() {
                    return Err(TrajectoryError::MissingHeader);
                }
                events.push(event);
            }
            LogLine::Result(r) => {
                if header.is_none() {
                    return Err(TrajectoryError::MissingHeader);
                }
                result = Some(r);
            }
        }
    }
    let header = header.ok_or(if text.trim().is_empty() {
        TrajectoryError::Empty
    } else {
        TrajectoryError::MissingHeader
    })?;
    Ok(TrajectoryLog { header, events, result })
}

pub fn save_jsonl(path: &Path, log: &TrajectoryLog) -> Result<(), TrajectoryError> {
    crate::export::write_atomic(path, render_jsonl(log).as_bytes())?;
    Ok(())
}

pub fn load_jsonl(path: &Path) -> Result<TrajectoryLog, TrajectoryError> {
    parse_jsonl(&std::fs::read_to_string(path)?)
}
