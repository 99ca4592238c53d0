//! Append-only execution trace: one JSON document per step, newline
//! delimited, with a closing summary line. Every line embeds the schema
//! version; the metrics module rejects drift. Field names are stable and
//! documented in `docs/formats.md`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendCallRecord, MetaInstruction};
use crate::grounding::{GroundingResult, TacticalFailure};
use crate::sim::{Action, SystemEvent, TaskCategory};

pub const TRACE_SCHEMA: &str = "adec-trace/1";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("trace line {0} failed to parse: {1}")]
    Parse(usize, String),

    #[error("trace line {line} has schema '{found}', expected '{expected}'")]
    SchemaMismatch {
        line: usize,
        found: String,
        expected: String,
    },

    #[error("trace is truncated: no summary line")]
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Planning,
    Executing,
    FinalMilestone,
    Terminated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationSource {
    HitPriority1,
    HitPriority2,
    HitPriority3,
    Explicit,
    ReplanExhausted,
}

impl TerminationSource {
    /// Cascade priority, for terminations fired by the cascade.
    pub fn priority(&self) -> Option<u8> {
        match self {
            TerminationSource::HitPriority1 => Some(1),
            TerminationSource::HitPriority2 => Some(2),
            TerminationSource::HitPriority3 => Some(3),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Termination {
    pub source: TerminationSource,
    pub payload: String,
}

/// Grounding outcome as recorded: either the per-candidate breakdown of a
/// successful decision or the tactical failure signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum GroundingTrace {
    Grounded(GroundingResult),
    TacticalFailure(TacticalFailure),
}

impl GroundingTrace {
    pub fn is_failure(&self) -> bool {
        matches!(self, GroundingTrace::TacticalFailure(_))
    }
}

/// One step of the execution log. Append-only; every cloud call recorded here
/// belongs to step 0 (initial plan) or a replan step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub milestone_index: usize,
    /// Plan length at this step (replans may change it).
    #[serde(default)]
    pub plan_len: usize,
    pub phase: Phase,
    pub s_value: f64,
    /// The gate passed and the cursor moved at this step.
    #[serde(default)]
    pub advanced: bool,
    pub state_summary: String,
    /// Node count of the observed hierarchy (the monolithic-upload baseline
    /// for element-reduction accounting).
    pub tree_size: u32,
    #[serde(default)]
    pub meta: Option<MetaInstruction>,
    #[serde(default)]
    pub grounding: Option<GroundingTrace>,
    #[serde(default)]
    pub action: Option<Action>,
    pub outcome_ok: bool,
    #[serde(default)]
    pub outcome_message: Option<String>,
    #[serde(default)]
    pub events: Vec<SystemEvent>,
    #[serde(default)]
    pub backend_calls: Vec<BackendCallRecord>,
    pub success_now: bool,
    /// Strategic failure fired at this step.
    #[serde(default)]
    pub f_k: bool,
    /// The failure came from inner-loop exhaustion before the step budget.
    #[serde(default)]
    pub exhausted: bool,
    /// A replan was requested (and granted) at this step.
    #[serde(default)]
    pub replanned: bool,
    #[serde(default)]
    pub h_fail_tokens: Option<u64>,
    #[serde(default)]
    pub h_fail_bytes: Option<u64>,
    /// Number of UI-element texts inside the transmitted failure context.
    #[serde(default)]
    pub h_fail_elements: Option<u32>,
    /// Labeled correct node for this grounding decision, when the task
    /// declares ground truth.
    #[serde(default)]
    pub ground_truth_index: Option<u32>,
    #[serde(default)]
    pub termination: Option<Termination>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl StepRecord {
    pub fn new(step: u32, milestone_index: usize, phase: Phase) -> Self {
        Self {
            step,
            milestone_index,
            plan_len: 0,
            phase,
            s_value: 0.0,
            advanced: false,
            state_summary: String::new(),
            tree_size: 0,
            meta: None,
            grounding: None,
            action: None,
            outcome_ok: true,
            outcome_message: None,
            events: vec![],
            backend_calls: vec![],
            success_now: false,
            f_k: false,
            exhausted: false,
            replanned: false,
            h_fail_tokens: None,
            h_fail_bytes: None,
            h_fail_elements: None,
            ground_truth_index: None,
            termination: None,
            warnings: vec![],
        }
    }

    pub fn cloud_calls(&self) -> impl Iterator<Item = &BackendCallRecord> {
        self.backend_calls
            .iter()
            .filter(|c| c.location == crate::backends::Location::Cloud)
    }

    /// True when this step hit a tactical failure: grounding found nothing or
    /// the world rejected the action.
    pub fn is_tactical_failure(&self) -> bool {
        self.grounding.as_ref().is_some_and(|g| g.is_failure()) || !self.outcome_ok
    }
}

/// Task-level closing line of the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub task_id: String,
    pub seed: u64,
    pub instruction: String,
    pub instruction_tokens: u64,
    pub category: TaskCategory,
    pub success: bool,
    #[serde(default)]
    pub termination: Option<Termination>,
    pub steps: u32,
    pub cloud_calls: u32,
    pub cloud_prompt_tokens: u64,
    pub cloud_completion_tokens: u64,
    pub uplink_bytes: u64,
    pub replans: u32,
    #[serde(default)]
    pub failure_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<StepRecord>,
    pub summary: TraceSummary,
}

fn tagged_line<T: Serialize>(kind: &str, value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("trace types serialize");
    let obj = v.as_object_mut().expect("trace lines are objects");
    obj.insert("schema".into(), TRACE_SCHEMA.into());
    obj.insert("kind".into(), kind.into());
    serde_json::to_string(&v).expect("trace lines serialize")
}

pub fn trace_to_jsonl(trace: &Trace) -> String {
    let mut out = String::new();
    for record in &trace.records {
        out.push_str(&tagged_line("step", record));
        out.push('\n');
    }
    out.push_str(&tagged_line("summary", &trace.summary));
    out.push('\n');
    out
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<(), TraceError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(trace_to_jsonl(trace).as_bytes())?;
    Ok(())
}

pub fn trace_from_jsonl(raw: &str) -> Result<Trace, TraceError> {
    let mut records = Vec::new();
    let mut summary = None;
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| TraceError::Parse(i + 1, e.to_string()))?;
        let schema = value["schema"].as_str().unwrap_or("").to_string();
        if schema != TRACE_SCHEMA {
            return Err(TraceError::SchemaMismatch {
                line: i + 1,
                found: schema,
                expected: TRACE_SCHEMA.into(),
            });
        }
        let kind = value["kind"].as_str().unwrap_or("").to_string();
        let obj = value.as_object_mut().unwrap();
        obj.remove("schema");
        obj.remove("kind");
        match kind.as_str() {
            "step" => records.push(
                serde_json::from_value(value)
                    .map_err(|e| TraceError::Parse(i + 1, e.to_string()))?,
            ),
            "summary" => {
                summary = Some(
                    serde_json::from_value(value)
                        .map_err(|e| TraceError::Parse(i + 1, e.to_string()))?,
                )
            }
            other => {
                return Err(TraceError::Parse(
                    i + 1,
                    format!("unknown line kind '{other}'"),
                ))
            }
        }
    }
    match summary {
        Some(summary) => Ok(Trace { records, summary }),
        None => Err(TraceError::Truncated),
    }
}

pub fn read_trace(path: &Path) -> Result<Trace, TraceError> {
    let raw = std::fs::read_to_string(path)?;
    trace_from_jsonl(&raw)
}
