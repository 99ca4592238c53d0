//! The hierarchical control loop.
//!
//! One pilot drives one task in one world: plan once in the cloud, then per
//! step observe, align the screen against the active milestone, and either
//! advance the cursor or suggest-ground-act. Tactical failures re-suggest
//! locally with feedback (no cloud traffic); exhausting the per-milestone
//! step budget synthesizes a failure context and buys at most `R` strategic
//! replans. Termination is governed by a three-priority cascade restricted to
//! the final milestone phase.

pub mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use trace::{
    read_trace, trace_from_jsonl, trace_to_jsonl, write_trace, GroundingTrace, Phase, StepRecord,
    Termination, TerminationSource, Trace, TraceError, TraceSummary,
};

use crate::backends::{
    validate_plan, Backends, FailureContext, Location, MetaInstruction, MetaStatus, Milestone,
    Plan, TrajectoryStep, DEPLETION_FEEDBACK, SUCCESS_TOKEN,
};
use crate::grounding::{ground, parse_intent, GroundOutcome, GroundingConfig, Intent};
use crate::sim::{
    check_success, Action, SimError, SystemEvent, TaskCategory, TaskSpec, UiTree, World,
};
use crate::tokens::TokenCounter;

#[derive(Debug, Error)]
pub enum PilotError {
    #[error("configuration error: {0}")]
    Config(String),
}

/// Component-removal switches mirroring the architecture ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AblationSet {
    #[serde(default)]
    pub no_executor: bool,
    #[serde(default)]
    pub no_orchestrator: bool,
    #[serde(default)]
    pub no_expectation: bool,
    #[serde(default)]
    pub no_hit: bool,
}

impl AblationSet {
    pub fn parse_list(list: &str) -> Result<Self, PilotError> {
        let mut set = AblationSet::default();
        for flag in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match flag {
                "no_executor" => set.no_executor = true,
                "no_orchestrator" => set.no_orchestrator = true,
                "no_expectation" => set.no_expectation = true,
                "no_hit" => set.no_hit = true,
                other => {
                    return Err(PilotError::Config(format!(
                        "unknown ablation flag '{other}'"
                    )))
                }
            }
        }
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), PilotError> {
        if self.no_executor && self.no_orchestrator {
            return Err(PilotError::Config(
                "no_executor and no_orchestrator are mutually contradictory".into(),
            ));
        }
        Ok(())
    }

    pub fn is_default(&self) -> bool {
        *self == AblationSet::default()
    }

    pub fn to_list(&self) -> String {
        let mut flags = vec![];
        if self.no_executor {
            flags.push("no_executor");
        }
        if self.no_orchestrator {
            flags.push("no_orchestrator");
        }
        if self.no_expectation {
            flags.push("no_expectation");
        }
        if self.no_hit {
            flags.push("no_hit");
        }
        flags.join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotConfig {
    /// Visual alignment gate.
    pub tau: f64,
    /// Gate for the final milestone of question-answer tasks.
    pub tau_qa: f64,
    /// Per-milestone tactical step budget.
    pub t_replan: u32,
    /// Global step limit.
    pub t_max: u32,
    /// Strategic replanning rounds.
    pub replan_rounds: u32,
    /// Maximum consecutive tactical failures before early strategic failure.
    pub inner_retries: u32,
    pub hit_enabled: bool,
    pub ablation: AblationSet,
}

impl Default for PilotConfig {
    fn default() -> Self {
        Self {
            tau: 0.85,
            tau_qa: 0.9,
            t_replan: 8,
            t_max: 30,
            replan_rounds: 1,
            inner_retries: 3,
            hit_enabled: true,
            ablation: AblationSet::default(),
        }
    }
}

impl PilotConfig {
    pub fn validate(&self) -> Result<(), PilotError> {
        if !(0.0 < self.tau && self.tau <= 1.0) || !(0.0 < self.tau_qa && self.tau_qa <= 1.0) {
            return Err(PilotError::Config(
                "tau and tau_qa must lie in (0, 1]".into(),
            ));
        }
        if self.t_replan < 1 {
            return Err(PilotError::Config("t_replan must be at least 1".into()));
        }
        if self.t_replan > self.t_max {
            return Err(PilotError::Config("t_replan must not exceed t_max".into()));
        }
        self.ablation.validate()
    }
}

/// Live state of one pilot run.
#[derive(Debug, Clone)]
pub struct PilotState {
    pub plan: Plan,
    pub step: u32,
    pub milestone_steps: u32,
    pub phase: Phase,
    pub termination: Option<Termination>,
    pub failures: Vec<usize>,
}

#[derive(Debug)]
pub struct TaskResult {
    pub success: bool,
    pub termination: Option<Termination>,
    pub trace: Trace,
    pub final_world: World,
}

/// Builds the text-only failure context from the failed milestone and the
/// current attempt's step records (at most `budget` most recent entries).
pub fn synthesize_failure_context(
    milestone: &Milestone,
    window: &[&StepRecord],
    reason: &str,
    budget: usize,
) -> FailureContext {
    let skip = window.len().saturating_sub(budget);
    let trajectory = window[skip..]
        .iter()
        .map(|r| TrajectoryStep {
            state_summary: r.state_summary.clone(),
            action: record_action_text(r),
        })
        .collect();
    FailureContext {
        failed_milestone: milestone.clone(),
        trajectory,
        reason: reason.into(),
    }
}

fn record_action_text(record: &StepRecord) -> String {
    if let Some(action) = &record.action {
        return action.describe();
    }
    if let Some(GroundingTrace::TacticalFailure(tf)) = &record.grounding {
        return format!("F_tact: {}", tf.message);
    }
    if record
        .meta
        .as_ref()
        .is_some_and(|m| m.status == MetaStatus::AnswerReady)
    {
        return "(answer asserted)".into();
    }
    "(no action)".into()
}

fn count_summary_elements(summary: &str) -> u32 {
    summary
        .split_once(" | ")
        .map(|(_, texts)| texts.split(", ").filter(|t| !t.is_empty()).count() as u32)
        .unwrap_or(0)
}

/// Evaluates the termination cascade in strict priority order. Called once
/// per step with everything that happened: the step's events (Priority 1,
/// final phase only), cursor depletion (Priority 2), and the global step
/// limit (Priority 3).
#[allow(clippy::too_many_arguments)]
pub fn hit_check(
    state: &PilotState,
    events: &[SystemEvent],
    task: &TaskSpec,
    cfg: &PilotConfig,
    pending_answer: Option<&str>,
    advanced_to_end: bool,
    acted_in_final_phase: bool,
    step_next: u32,
) -> Option<Termination> {
    let qa = task.category == TaskCategory::QuestionAnswer;

    // Priority 1: deterministic OS callback observed right after an action in
    // the final milestone phase.
    if acted_in_final_phase {
        let success_event = events.iter().any(|e| {
            task.success_events
                .iter()
                .any(|p| p.kind == e.kind && e.payload.contains(p.contains.as_str()))
        });
        if success_event {
            let payload = if qa {
                pending_answer.unwrap_or(SUCCESS_TOKEN).to_string()
            } else {
                SUCCESS_TOKEN.to_string()
            };
            return Some(Termination {
                source: TerminationSource::HitPriority1,
                payload,
            });
        }
    }

    // Priority 2: milestone queue depletion.
    if advanced_to_end {
        let payload = if qa {
            pending_answer.unwrap_or_default().to_string()
        } else {
            SUCCESS_TOKEN.to_string()
        };
        return Some(Termination {
            source: TerminationSource::HitPriority2,
            payload,
        });
    }

    // Priority 3: budgetary fallback, regardless of phase.
    if step_next >= cfg.t_max {
        let payload = pending_answer.unwrap_or_default().to_string();
        return Some(Termination {
            source: TerminationSource::HitPriority3,
            payload,
        });
    }

    let _ = state;
    None
}

/// Ablated executor: the spatial reference converts directly into a
/// coordinate click on the nearest node, bypassing candidate scoring.
fn coordinate_click(meta: &MetaInstruction, tree: &UiTree, pixel: (u32, u32)) -> GroundOutcome {
    use crate::grounding::{GroundingResult, TacticalFailure};
    let Some(p_ref) = meta.spatial_reference else {
        return GroundOutcome::Failed(TacticalFailure {
            message: "no spatial reference provided".into(),
        });
    };
    let nearest = tree
        .flatten()
        .into_iter()
        .min_by(|a, b| {
            let da = a.centroid(pixel).dist_sq(&p_ref);
            let db = b.centroid(pixel).dist_sq(&p_ref);
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("trees are non-empty");
    GroundOutcome::Grounded(GroundingResult {
        node_index: Some(nearest.index),
        objective: 0.0,
        action: Action::Click {
            index: nearest.index,
        },
        per_candidate: vec![],
    })
}

struct DesignerFailure(String);

fn initial_plan(task: &TaskSpec, backends: &mut Backends) -> Result<Plan, DesignerFailure> {
    let plan = backends
        .designer
        .plan(&task.instruction, None, &task.metadata)
        .map_err(|e| DesignerFailure(format!("designer error: {e}")))?;
    validate_plan(&plan).map_err(|e| DesignerFailure(format!("invalid plan: {e}")))?;
    Ok(plan)
}

/// Runs one task to completion. Every outcome, including designer failures,
/// yields a complete trace; `Err` is reserved for invalid configuration.
pub fn run_task(
    task: &TaskSpec,
    mut world: World,
    backends: &mut Backends,
    cfg: &PilotConfig,
    gcfg: &GroundingConfig,
    counter: TokenCounter,
    seed: u64,
) -> Result<TaskResult, PilotError> {
    cfg.validate()?;
    world.set_seed(seed);

    let qa = task.category == TaskCategory::QuestionAnswer;
    let hit_active = cfg.hit_enabled && !cfg.ablation.no_hit;
    let mut records: Vec<StepRecord> = Vec::new();
    let mut failure_reason: Option<String> = None;

    let finish = |records: Vec<StepRecord>,
                  state_termination: Option<Termination>,
                  failure_reason: Option<String>,
                  replans: u32,
                  world: World|
     -> TaskResult {
        let payload = state_termination.as_ref().map(|t| t.payload.as_str());
        let success = failure_reason.is_none() && check_success(&world, task, payload);
        let cloud: Vec<_> = records
            .iter()
            .flat_map(|r| r.backend_calls.iter())
            .filter(|c| c.location == Location::Cloud)
            .collect();
        let summary = TraceSummary {
            task_id: task.task_id.clone(),
            seed,
            instruction: task.instruction.clone(),
            instruction_tokens: counter.count(&task.instruction),
            category: task.category,
            success,
            termination: state_termination.clone(),
            steps: records.len() as u32,
            cloud_calls: cloud.len() as u32,
            cloud_prompt_tokens: cloud.iter().map(|c| c.prompt_tokens).sum(),
            cloud_completion_tokens: cloud.iter().map(|c| c.completion_tokens).sum(),
            uplink_bytes: cloud.iter().map(|c| c.payload_bytes).sum(),
            replans,
            failure_reason,
        };
        TaskResult {
            success,
            termination: state_termination,
            trace: Trace { records, summary },
            final_world: world,
        }
    };

    for p in &task.perturbations {
        if let Err(e) = world.schedule_perturbation(p.clone()) {
            let mut rec = StepRecord::new(0, 0, Phase::Planning);
            rec.warnings.push(e.to_string());
            rec.backend_calls = backends.recorder.drain();
            return Ok(finish(
                vec![rec],
                None,
                Some(format!("perturbation error: {e}")),
                0,
                world,
            ));
        }
    }

    let plan = match initial_plan(task, backends) {
        Ok(plan) => plan,
        Err(DesignerFailure(reason)) => {
            let mut rec = StepRecord::new(0, 0, Phase::Planning);
            rec.backend_calls = backends.recorder.drain();
            rec.warnings.push(reason.clone());
            return Ok(finish(vec![rec], None, Some(reason), 0, world));
        }
    };

    let mut state = PilotState {
        plan,
        step: 0,
        milestone_steps: 0,
        phase: Phase::Executing,
        termination: None,
        failures: vec![],
    };
    let mut pending_calls = backends.recorder.drain();
    let mut feedback: Option<String> = None;
    let mut consecutive_failures: u32 = 0;
    let mut consecutive_empty: u32 = 0;
    let mut pending_answer: Option<String> = None;
    let mut history: Vec<String> = Vec::new();
    let mut attempt_start: usize = 0;

    while state.step < cfg.t_max {
        let (visual, tree) = world.observe();
        let k_total = state.plan.len();
        let cursor = state.plan.cursor;
        let depleted = cursor >= k_total;
        let final_phase = !depleted && cursor == k_total - 1;
        state.phase = if depleted || final_phase {
            Phase::FinalMilestone
        } else {
            Phase::Executing
        };

        let milestone_raw = state.plan.milestones[cursor.min(k_total - 1)].clone();
        let milestone = if cfg.ablation.no_expectation {
            Milestone {
                instruction: milestone_raw.instruction.clone(),
                expectation: String::new(),
            }
        } else {
            milestone_raw.clone()
        };
        let gate = if final_phase && qa {
            cfg.tau_qa
        } else {
            cfg.tau
        };

        let mut rec = StepRecord::new(state.step, cursor, state.phase);
        rec.plan_len = k_total;
        rec.state_summary = visual.summary_line();
        rec.tree_size = tree.len() as u32;

        let s_value = if depleted {
            1.0
        } else if cfg.ablation.no_orchestrator {
            0.0
        } else {
            match backends.orchestrator.align(&visual, &milestone) {
                Ok(s) => s,
                Err(e) => {
                    rec.warnings
                        .push(format!("alignment error treated as 0: {e}"));
                    0.0
                }
            }
        };
        rec.s_value = s_value;

        let mut advanced = false;
        let mut advanced_to_end = false;
        let mut acted_events: Vec<SystemEvent> = Vec::new();
        let mut acted_in_final_phase = false;

        if !depleted && s_value >= gate {
            // Gate passed: the cursor advances, no action this step.
            state.plan.cursor += 1;
            state.milestone_steps = 0;
            feedback = None;
            consecutive_failures = 0;
            consecutive_empty = 0;
            advanced = true;
            rec.advanced = true;
            if state.plan.cursor == k_total {
                advanced_to_end = true;
                if qa {
                    match backends.orchestrator.answer(&visual, &milestone) {
                        Ok(answer) => {
                            pending_answer = answer.clone();
                            rec.meta = Some(MetaInstruction::answer_ready(
                                answer.unwrap_or_default(),
                                visual.summary_line(),
                            ));
                        }
                        Err(e) => rec.warnings.push(format!("answer extraction failed: {e}")),
                    }
                }
            }
        } else {
            // Act phase: suggest, ground, apply.
            let suggest_feedback: Option<&str> = if depleted {
                Some(DEPLETION_FEEDBACK)
            } else {
                feedback.as_deref()
            };
            let meta_result = if cfg.ablation.no_orchestrator {
                Ok(MetaInstruction::ongoing(
                    milestone_raw.instruction.clone(),
                    visual.summary_line(),
                    visual.pixel_size,
                ))
            } else {
                backends
                    .orchestrator
                    .suggest(&visual, &milestone, suggest_feedback, &history)
            };

            match meta_result {
                Err(e) => {
                    rec.warnings.push(format!("orchestrator error: {e}"));
                    consecutive_empty += 1;
                }
                Ok(meta) => {
                    if let Some(parsed) =
                        crate::backends::parse_spatial_reference(&meta.text, visual.pixel_size)
                    {
                        if parsed.clamped {
                            rec.warnings.push("spatial reference clamped to [0,1]".into());
                        }
                    }
                    rec.meta = Some(meta.clone());
                    let empty_text = meta.text.trim().is_empty();
                    match meta.status {
                        MetaStatus::AnswerReady => {
                            if qa {
                                pending_answer = meta.answer_payload.clone();
                            } else {
                                rec.warnings
                                    .push("answer_ready ignored on operation task".into());
                            }
                        }
                        MetaStatus::Finished => {
                            // The backend asserts completion while the gate
                            // disagrees; nothing to act on.
                            consecutive_empty += 1;
                        }
                        MetaStatus::Ongoing if empty_text => {
                            consecutive_empty += 1;
                        }
                        MetaStatus::Ongoing => {
                            consecutive_empty = 0;
                            let pixel = visual.pixel_size;
                            let nodeless = matches!(
                                parse_intent(&meta.text),
                                Intent::Scroll { .. }
                                    | Intent::OpenApp { .. }
                                    | Intent::NavigateBack
                                    | Intent::NavigateHome
                                    | Intent::Terminate { .. }
                            );
                            let outcome = if cfg.ablation.no_executor && !nodeless {
                                coordinate_click(&meta, &tree, pixel)
                            } else {
                                ground(&meta, &tree, backends.scorer.as_mut(), gcfg, pixel)
                            };
                            match outcome {
                                GroundOutcome::Failed(tf) => {
                                    feedback = Some(tf.message.clone());
                                    rec.grounding = Some(GroundingTrace::TacticalFailure(tf));
                                    consecutive_failures += 1;
                                }
                                GroundOutcome::Grounded(result) => {
                                    if result.node_index.is_some() {
                                        let target = crate::grounding::extract_target(&meta.text);
                                        rec.ground_truth_index = task
                                            .ground_truth
                                            .iter()
                                            .find(|g| {
                                                g.screen == visual.screen_id && g.target == target
                                            })
                                            .map(|g| g.index);
                                    }
                                    rec.grounding = Some(GroundingTrace::Grounded(result.clone()));
                                    match world.apply_action(&result.action) {
                                        Err(SimError::Terminated) => {
                                            failure_reason =
                                                Some("action applied after termination".into());
                                        }
                                        Err(e) => {
                                            failure_reason = Some(format!("world error: {e}"));
                                        }
                                        Ok(outcome) => {
                                            rec.action = Some(result.action.clone());
                                            rec.outcome_ok = outcome.ok;
                                            rec.outcome_message = Some(outcome.message.clone());
                                            acted_events = outcome.events.clone();
                                            rec.events = outcome.events;
                                            acted_in_final_phase = final_phase;
                                            history.push(result.action.describe());
                                            if history.len() > 5 {
                                                history.remove(0);
                                            }
                                            if outcome.ok {
                                                feedback = None;
                                                consecutive_failures = 0;
                                            } else {
                                                feedback = Some(outcome.message);
                                                consecutive_failures += 1;
                                            }
                                            if let Action::Terminate { payload } = &result.action {
                                                state.termination = Some(Termination {
                                                    source: TerminationSource::Explicit,
                                                    payload: payload.clone(),
                                                });
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if !depleted {
                state.milestone_steps += 1;
            }
        }

        rec.success_now = check_success(&world, task, pending_answer.as_deref());

        // Outer loop: strategic failure on budget exhaustion or inner-loop
        // exhaustion (two empty suggestions, or too many consecutive
        // tactical failures).
        let exhausted = consecutive_empty >= 2 || consecutive_failures > cfg.inner_retries;
        if state.termination.is_none()
            && failure_reason.is_none()
            && !advanced
            && !depleted
            && (state.milestone_steps >= cfg.t_replan || exhausted)
        {
            rec.f_k = true;
            rec.exhausted = state.milestone_steps < cfg.t_replan;
            state.failures.push(cursor);
            let reason = if rec.exhausted {
                "inner loop exhausted without reaching the expected state"
            } else {
                "step budget exhausted without reaching the expected state"
            };
            if state.plan.revision < cfg.replan_rounds {
                let window: Vec<&StepRecord> = records[attempt_start..]
                    .iter()
                    .chain(std::iter::once(&rec))
                    .collect();
                let h_fail = synthesize_failure_context(
                    &milestone_raw,
                    &window,
                    reason,
                    cfg.t_replan as usize,
                );
                let payload = h_fail.to_payload_json();
                rec.h_fail_tokens = Some(counter.count(&payload));
                rec.h_fail_bytes = Some(payload.len() as u64);
                rec.h_fail_elements = Some(
                    h_fail
                        .trajectory
                        .iter()
                        .map(|t| count_summary_elements(&t.state_summary))
                        .sum(),
                );
                let revision = state.plan.revision;
                let replanned = backends
                    .designer
                    .plan(&task.instruction, Some(&h_fail), &task.metadata)
                    .and_then(|p| validate_plan(&p).map(|_| p));
                match replanned {
                    Ok(mut new_plan) => {
                        new_plan.revision = revision + 1;
                        new_plan.cursor = 0;
                        state.plan = new_plan;
                        state.milestone_steps = 0;
                        feedback = None;
                        consecutive_failures = 0;
                        consecutive_empty = 0;
                        rec.replanned = true;
                    }
                    Err(e) => {
                        failure_reason = Some(format!("replan failed: {e}"));
                    }
                }
            } else {
                // Replan budget exhausted: the task ends as a failure rather
                // than continuing blind.
                state.termination = Some(Termination {
                    source: TerminationSource::ReplanExhausted,
                    payload: String::new(),
                });
                if world.terminated().is_none() {
                    let _ = world.apply_action(&Action::Terminate {
                        payload: String::new(),
                    });
                }
            }
        }

        let mut calls = std::mem::take(&mut pending_calls);
        calls.extend(backends.recorder.drain());
        rec.backend_calls = calls;

        if state.termination.is_none() && failure_reason.is_none() && hit_active {
            if let Some(term) = hit_check(
                &state,
                &acted_events,
                task,
                cfg,
                pending_answer.as_deref(),
                advanced_to_end,
                acted_in_final_phase,
                state.step + 1,
            ) {
                if world.terminated().is_none() {
                    let _ = world.apply_action(&Action::Terminate {
                        payload: term.payload.clone(),
                    });
                }
                state.termination = Some(term);
            }
        }
        if let Some(term) = &state.termination {
            if rec.termination.is_none() {
                rec.termination = Some(term.clone());
            }
        }

        let reset_attempt = advanced || rec.replanned;
        records.push(rec);
        state.step += 1;
        if reset_attempt {
            attempt_start = records.len();
        }
        if state.termination.is_some() || failure_reason.is_some() {
            break;
        }
    }

    let replans = state.plan.revision;
    Ok(finish(
        records,
        state.termination,
        failure_reason,
        replans,
        world,
    ))
}
