//! Pluggable contracts for the three intelligences: the cloud designer, the
//! edge vision orchestrator, and the edge text executor's node scorer.
//!
//! Two implementations ship: a deterministic oracle family used by tests and
//! benches, and a remote family speaking a chat-completions wire protocol.
//! Every call is logged as a [`BackendCallRecord`]; by construction only
//! designer calls are cloud-bound.

mod oracle;
pub mod prompts;
mod remote;

use std::cell::RefCell;
use std::rc::Rc;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::sim::{AppMetadata, UiNode, UiTree, VisualState};

pub use oracle::{
    oracle_backends, OracleDesigner, OracleOrchestrator, OracleScorer, DEPLETION_FEEDBACK,
    HOME_APP, SUCCESS_TOKEN,
};
pub use remote::{remote_backends, RemoteClient, RemoteConfig};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("instruction must be non-empty")]
    EmptyInstruction,

    #[error("designer returned an empty milestone list")]
    EmptyPlan,

    #[error("no workflow path satisfies the instruction: {0}")]
    PlanningInfeasible(String),

    #[error("response could not be parsed: {0}")]
    Parse(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("backend call timed out after {0} s")]
    Timeout(f64),

    #[error("http error: {0}")]
    Http(String),

    #[error("remote backend not configured: {0}")]
    Config(String),
}

// ---------------------------------------------------------------------------
// Plan types.
// ---------------------------------------------------------------------------

/// Imperative verbs an expectation must not begin with: expectations describe
/// screen states, never actions.
pub const EXPECTATION_VERB_DENYLIST: &[&str] = &[
    "tap", "click", "open", "type", "press", "scroll", "swipe", "navigate", "long", "enter",
    "select", "fill", "launch", "go",
];

/// One strategic subgoal plus the visual invariant certifying its completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestone {
    pub instruction: String,
    pub expectation: String,
}

impl Milestone {
    pub fn new(instruction: impl Into<String>, expectation: impl Into<String>) -> Self {
        Self {
            instruction: instruction.into(),
            expectation: expectation.into(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.instruction.trim().is_empty() || self.expectation.trim().is_empty() {
            return Err(BackendError::ContractViolation(
                "milestone instruction and expectation must be non-empty".into(),
            ));
        }
        let first = self
            .expectation
            .split_whitespace()
            .next()
            .unwrap_or("")
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase();
        if EXPECTATION_VERB_DENYLIST.contains(&first.as_str()) {
            return Err(BackendError::ContractViolation(format!(
                "expectation must describe a state, not an action: starts with '{first}'"
            )));
        }
        Ok(())
    }
}

/// The cloud's milestone sequence with the execution cursor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub milestones: Vec<Milestone>,
    pub cursor: usize,
    pub revision: u32,
}

impl Plan {
    pub fn new(milestones: Vec<Milestone>) -> Self {
        Self {
            milestones,
            cursor: 0,
            revision: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.milestones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.milestones.is_empty()
    }

    pub fn active(&self) -> Option<&Milestone> {
        self.milestones.get(self.cursor)
    }

    pub fn depleted(&self) -> bool {
        self.cursor >= self.milestones.len()
    }
}

fn coordinate_like() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[\s*\d+\s*,\s*\d+\s*\]|\bindex\s+\d+\b|#\d+").unwrap())
}

/// Milestones are UI-agnostic: they must not name element indices or screen
/// coordinates, and every expectation must read as a state.
pub fn validate_plan(plan: &Plan) -> Result<(), BackendError> {
    if plan.is_empty() {
        return Err(BackendError::EmptyPlan);
    }
    for m in &plan.milestones {
        m.validate()?;
        if coordinate_like().is_match(&m.instruction) || coordinate_like().is_match(&m.expectation)
        {
            return Err(BackendError::ContractViolation(format!(
                "milestone contains element indices or coordinates: '{}'",
                m.instruction
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Meta-instruction and failure context.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaStatus {
    Ongoing,
    Finished,
    AnswerReady,
}

/// The orchestrator's corrective directive: a textual target description plus
/// an optional normalized spatial reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaInstruction {
    pub text: String,
    pub spatial_reference: Option<Point>,
    pub raw_observation: String,
    pub status: MetaStatus,
    pub answer_payload: Option<String>,
}

impl MetaInstruction {
    /// Builds an ongoing meta-instruction, extracting any embedded `[x, y]`
    /// coordinates into the spatial reference.
    pub fn ongoing(
        text: impl Into<String>,
        observation: impl Into<String>,
        pixel: (u32, u32),
    ) -> Self {
        let text = text.into();
        let spatial_reference = parse_spatial_reference(&text, pixel).map(|s| s.point);
        Self {
            text,
            spatial_reference,
            raw_observation: observation.into(),
            status: MetaStatus::Ongoing,
            answer_payload: None,
        }
    }

    pub fn answer_ready(payload: impl Into<String>, observation: impl Into<String>) -> Self {
        Self {
            text: String::new(),
            spatial_reference: None,
            raw_observation: observation.into(),
            status: MetaStatus::AnswerReady,
            answer_payload: Some(payload.into()),
        }
    }
}

/// One `(Q_t, a_t)` trajectory entry. Text-only by construction: the privacy
/// constraint is structural, not a policy check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub state_summary: String,
    pub action: String,
}

/// Diagnostic payload transmitted to the cloud on strategic failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureContext {
    pub failed_milestone: Milestone,
    pub trajectory: Vec<TrajectoryStep>,
    pub reason: String,
}

impl FailureContext {
    pub fn to_payload_json(&self) -> String {
        serde_json::to_string(self).expect("failure context serializes")
    }
}

/// Serialized designer uplink payload. This is the only code path that builds
/// cloud-bound bytes, which keeps the locality invariant inspectable: the
/// payload carries the instruction, the app schema, and failure text only.
pub fn designer_payload(
    instruction: &str,
    failure: Option<&FailureContext>,
    metadata: &AppMetadata,
) -> String {
    serde_json::json!({
        "instruction": instruction,
        "metadata": metadata,
        "failure": failure,
    })
    .to_string()
}

// ---------------------------------------------------------------------------
// Call accounting.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Designer,
    Orchestrator,
    Executor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Cloud,
    Edge,
}

/// Accounting record for one backend invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendCallRecord {
    pub role: Role,
    pub location: Location,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub payload_bytes: u64,
    pub wall_latency_model_s: f64,
}

/// Modeled per-call latencies, split by modality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyParams {
    pub cloud_text_s: f64,
    pub cloud_visual_s: f64,
    pub edge_s: f64,
}

impl Default for LatencyParams {
    fn default() -> Self {
        Self {
            cloud_text_s: 2.0,
            cloud_visual_s: 4.0,
            edge_s: 0.0,
        }
    }
}

/// Per-task call log. Backends push records as they run; the pilot drains the
/// log after every step. One recorder per task, never shared across tasks.
#[derive(Debug, Clone, Default)]
pub struct Recorder(Rc<RefCell<Vec<BackendCallRecord>>>);

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, record: BackendCallRecord) {
        self.0.borrow_mut().push(record);
    }

    pub fn drain(&self) -> Vec<BackendCallRecord> {
        self.0.borrow_mut().drain(..).collect()
    }
}

// ---------------------------------------------------------------------------
// Traits.
// ---------------------------------------------------------------------------

/// Cloud strategic designer: instruction + app schema (+ failure context on
/// replans) in, UI-agnostic milestone sequence out. Never sees observations.
pub trait Designer {
    fn plan(
        &mut self,
        instruction: &str,
        failure: Option<&FailureContext>,
        metadata: &AppMetadata,
    ) -> Result<Plan, BackendError>;
}

/// Edge vision orchestrator: alignment scoring, corrective suggestion, and
/// answer extraction for question-answer tasks.
pub trait Orchestrator {
    /// Visual alignment score of the current screen against the milestone's
    /// expectation, in `[0, 1]`.
    fn align(&mut self, visual: &VisualState, milestone: &Milestone) -> Result<f64, BackendError>;

    fn suggest(
        &mut self,
        visual: &VisualState,
        milestone: &Milestone,
        feedback: Option<&str>,
        history: &[String],
    ) -> Result<MetaInstruction, BackendError>;

    /// Extracts the textual answer payload once the final question-answer
    /// milestone has aligned.
    fn answer(
        &mut self,
        visual: &VisualState,
        milestone: &Milestone,
    ) -> Result<Option<String>, BackendError>;
}

/// Log-probabilities over the pruned candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidates {
    /// One log-probability per candidate, aligned with the pruned list;
    /// exponentiating sums to 1 for the oracle backend.
    pub log_probs: Vec<f64>,
    /// False when no candidate had any lexical affinity with the target (the
    /// distribution is a vacuous uniform).
    pub anchored: bool,
}

/// Edge text executor's scoring surface over interactable candidates.
pub trait NodeScorer {
    fn score_candidates(
        &mut self,
        meta: &MetaInstruction,
        tree: &UiTree,
        pruned: &[&UiNode],
    ) -> Result<ScoredCandidates, BackendError>;
}

/// Log-probability of a single candidate, normalized over the pruned set.
pub fn score_node(
    scorer: &mut dyn NodeScorer,
    meta: &MetaInstruction,
    tree: &UiTree,
    candidate_index: u32,
) -> Result<f64, BackendError> {
    let pruned = crate::grounding::prune_candidates(tree);
    let pos = pruned
        .iter()
        .position(|n| n.index == candidate_index)
        .ok_or_else(|| BackendError::ContractViolation("candidate not in pruned set".into()))?;
    let scored = scorer.score_candidates(meta, tree, &pruned)?;
    Ok(scored.log_probs[pos])
}

/// The full backend bundle wired into one pilot run.
pub struct Backends {
    pub designer: Box<dyn Designer>,
    pub orchestrator: Box<dyn Orchestrator>,
    pub scorer: Box<dyn NodeScorer>,
    pub recorder: Recorder,
}

// ---------------------------------------------------------------------------
// Spatial reference extraction.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialParse {
    pub point: Point,
    /// True when the raw coordinates fell outside the pixel bounds and were
    /// clamped.
    pub clamped: bool,
}

/// Extracts the first bracketed integer pair `[x, y]` from free text and
/// normalizes it by the screen size into `[0,1]^2`. Out-of-bounds coordinates
/// are clamped and flagged.
pub fn parse_spatial_reference(text: &str, pixel_size: (u32, u32)) -> Option<SpatialParse> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\[\s*(\d+)\s*,\s*(\d+)\s*\]").unwrap());
    let caps = re.captures(text)?;
    let x: f64 = caps[1].parse().ok()?;
    let y: f64 = caps[2].parse().ok()?;
    let nx = x / pixel_size.0.max(1) as f64;
    let ny = y / pixel_size.1.max(1) as f64;
    let clamped = Point::needs_clamp(nx, ny);
    Some(SpatialParse {
        point: Point::clamped(nx, ny),
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spatial_reference_midpoint() {
        let p = parse_spatial_reference("target near [540, 1200]", (1080, 2400)).unwrap();
        assert_eq!((p.point.x, p.point.y), (0.5, 0.5));
        assert!(!p.clamped);
    }

    #[test]
    fn spatial_reference_absent() {
        assert!(parse_spatial_reference("no coordinates here", (1080, 2400)).is_none());
    }

    #[test]
    fn spatial_reference_clamps_out_of_bounds() {
        let p = parse_spatial_reference("[99999, 10]", (1080, 2400)).unwrap();
        assert_eq!(p.point.x, 1.0);
        assert!(p.clamped);
    }

    #[test]
    fn expectation_denylist() {
        assert!(Milestone::new("Open the app.", "Tap the blue button")
            .validate()
            .is_err());
        assert!(Milestone::new("Open the app.", "The main list is visible.")
            .validate()
            .is_ok());
        assert!(Milestone::new("Open the app.", "").validate().is_err());
    }

    #[test]
    fn plan_lexical_check_rejects_coordinates() {
        let plan = Plan::new(vec![Milestone::new(
            "Tap at [10, 20].",
            "The form is visible.",
        )]);
        assert!(validate_plan(&plan).is_err());
        let plan = Plan::new(vec![Milestone::new("Tap index 4.", "The form is visible.")]);
        assert!(validate_plan(&plan).is_err());
        let plan = Plan::new(vec![]);
        assert!(matches!(validate_plan(&plan), Err(BackendError::EmptyPlan)));
    }

    #[test]
    fn designer_payload_is_text_only() {
        let meta = AppMetadata::default();
        let payload = designer_payload("Create a contact", None, &meta);
        let value: serde_json::Value = serde_json::from_str(&payload).unwrap();
        let keys: Vec<&String> = value.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["failure", "instruction", "metadata"]);
        assert!(!payload.contains("visible_texts"));
        assert!(!payload.contains("bounds"));
    }
}
