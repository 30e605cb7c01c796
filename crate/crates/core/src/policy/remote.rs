//! Slow planner backed by an external service over a line-oriented JSON
//! protocol.
//!
//! Each planning round makes two calls, one connection per call. Stage 1
//! sends the top-down belief map and asks for a structured environment
//! summary; stage 2 sends that summary plus per-candidate view images and
//! asks for a waypoint selection. Requests and replies are single JSON
//! lines; images travel as base64 PPM.
//!
//! Request fields: `stage`, `prompt` (the fixed template below),
//! `instruction`, `topdown_image` (stage 1), `summary` and `candidates`
//! (stage 2), and `auth` when credentials are configured. Stage-1 replies
//! carry `Location`, `Relationship`, `Possible directions`; stage-2
//! replies carry `Selected waypoint` and `Reasoning`.

use super::{
    parse_candidate_label, EnvSummary, FrontierChoice, PlanFailure, PlanRequest, SlowPlanner,
};
use crate::export::{map_to_ppm, patch_to_ppm};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde_json::{json, Value};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

/// Prompt sent with every stage-1 request.
pub const STAGE1_PROMPT: &str = "Task: You are an Environment Understanding Assistant. Analyze the 3D Top-Down map and the accompanying language instruction. Summarize the environment information for navigation planning.

Input: [3D Top-Down Map + Language Instruction]

Constraints:
- Extract the key spatial information of the environment.
- Focus on Location, Relationship, and Possible directions.
- Keep the output concise and structured.

Model Output: JSON with keys \"Location\", \"Relationship\", \"Possible directions\".";

/// Prompt sent with every stage-2 request.
pub const STAGE2_PROMPT: &str = "Task: You are a Navigation Planner Assistant. Analyze the images of each waypoint (Frontier 1, Frontier 2, Frontier 3, etc.) and select the most suitable waypoint for the agent to proceed. Provide clear reasoning for your choice based on visual cues such as corridor alignment, furniture arrangement, and spatial orientation.

Input: [Waypoint Images for Frontier 1, Frontier 2, Frontier 3, ...]

Constraints:
- Evaluate each frontier marked in the images.
- Explicitly explain why the selected waypoint has the highest probability.
- Keep reasoning concise (2-3 sentences max).
- Do not suggest waypoints not shown in the images.

Model Output: JSON with keys \"Selected waypoint\", \"Reasoning\".";

/// Connection settings for the external planner.
#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// `host:port` of the planning service.
    pub endpoint: String,
    /// Per-call connect/read/write timeout.
    pub timeout: Duration,
    /// Optional credential forwarded verbatim in the `auth` field.
    pub auth: Option<String>,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig { endpoint: endpoint.into(), timeout: Duration::from_secs(60), auth: None }
    }
}

/// The wire client. Stateless between calls; every request carries its
/// full context.
pub struct RemoteSlow {
    cfg: RemoteConfig,
}

impl RemoteSlow {
    pub fn new(cfg: RemoteConfig) -> Self {
        RemoteSlow { cfg }
    }

    fn exchange(&self, payload: &Value) -> Result<Value, PlanFailure> {
        let transport = |e: std::io::Error| match e.kind() {
            std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => PlanFailure::Timeout,
            _ => PlanFailure::Transport(e.to_string()),
        };
        let stream = TcpStream::connect(&self.cfg.endpoint)
            .map_err(|e| PlanFailure::Transport(e.to_string()))?;
        stream.set_read_timeout(Some(self.cfg.timeout)).map_err(transport)?;
        stream.set_write_timeout(Some(self.cfg.timeout)).map_err(transport)?;
        let mut writer = stream.try_clone().map_err(transport)?;
        let mut line = serde_json::to_string(payload).expect("request values serialize");
        line.push('\n');
        writer.write_all(line.as_bytes()).map_err(transport)?;
        writer.flush().map_err(transport)?;

        let mut reply = String::new();
        BufReader::new(stream).read_line(&mut reply).map_err(transport)?;
        if reply.trim().is_empty() {
            return Err(PlanFailure::Transport("connection closed before reply".into()));
        }
        serde_json::from_str(&reply)
            .map_err(|_| PlanFailure::MalformedReply { field: "reply body".into() })
    }

    fn request_string(reply: &Value, field: &str) -> Result<String, PlanFailure> {
        reply
            .get(field)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| PlanFailure::MalformedReply { field: field.into() })
    }

    fn stage1(&self, request: &PlanRequest) -> Result<EnvSummary, PlanFailure> {
        let frontier_cells: Vec<_> = request
            .candidates
            .iter()
            .flat_map(|c| c.frontier.cells.iter().copied())
            .collect();
        let image = BASE64.encode(map_to_ppm(&request.map, &frontier_cells));
        let mut payload = json!({
            "stage": 1,
            "prompt": STAGE1_PROMPT,
            "instruction": request.instruction,
            "topdown_image": image,
        });
        if let Some(auth) = &self.cfg.auth {
            payload["auth"] = Value::String(auth.clone());
        }
        let reply = self.exchange(&payload)?;
        Ok(EnvSummary {
            location: Self::request_string(&reply, "Location")?,
            relationship: Self::request_string(&reply, "Relationship")?,
            possible_directions: Self::request_string(&reply, "Possible directions")?,
        })
    }

    fn stage2(
        &self,
        request: &PlanRequest,
        summary: &EnvSummary,
    ) -> Result<FrontierChoice, PlanFailure> {
        let candidates: Vec<Value> = request
            .candidates
            .iter()
            .map(|cand| {
                let views: Vec<String> = cand
                    .kept
                    .iter()
                    .map(|&i| BASE64.encode(patch_to_ppm(&cand.views[i].patch)))
                    .collect();
                json!({ "label": cand.label, "views": views })
            })
            .collect();
        let mut payload = json!({
            "stage": 2,
            "prompt": STAGE2_PROMPT,
            "instruction": request.instruction,
            "summary": summary,
            "candidates": candidates,
        });
        if let Some(auth) = &self.cfg.auth {
            payload["auth"] = Value::String(auth.clone());
        }
        let reply = self.exchange(&payload)?;
        let label = Self::request_string(&reply, "Selected waypoint")?;
        let reasoning = Self::request_string(&reply, "Reasoning")?;
        let index = parse_candidate_label(&label)
            .filter(|&i| i < request.candidates.len())
            .ok_or(PlanFailure::InvalidSelection { label: label.clone() })?;
        Ok(FrontierChoice { selected_index: index, selected_label: label, reasoning })
    }
}

impl SlowPlanner for RemoteSlow {
    fn plan(&mut self, request: &PlanRequest) -> Result<FrontierChoice, PlanFailure> {
        if request.candidates.is_empty() {
            return Err(PlanFailure::NoCandidates);
        }
        let summary = self.stage1(request)?;
        self.stage2(request, &summary)
    }
}
