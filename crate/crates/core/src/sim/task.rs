//! Task specifications: instruction, app metadata, success predicates, and
//! scripted-scenario hooks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::sim::world::EventKind;
use crate::sim::{Perturbation, SimError, World};

pub const TASKS_SCHEMA: &str = "adec-tasks/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskCategory {
    Operation,
    QuestionAnswer,
}

/// Declarative success check: a predicate over the final world state for
/// operation tasks, or over the terminate payload for question-answer tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessPredicate {
    ScreenIs { screen: String },
    WidgetEquals { key: String, value: String },
    VisibleText { text: String },
    AnswerMatches { expected: String },
    All(Vec<SuccessPredicate>),
    Any(Vec<SuccessPredicate>),
    Not(Box<SuccessPredicate>),
}

impl SuccessPredicate {
    fn contains_answer_check(&self) -> bool {
        match self {
            SuccessPredicate::AnswerMatches { .. } => true,
            SuccessPredicate::All(ps) | SuccessPredicate::Any(ps) => {
                ps.iter().any(|p| p.contains_answer_check())
            }
            SuccessPredicate::Not(p) => p.contains_answer_check(),
            _ => false,
        }
    }

    fn eval(&self, world: &World, payload: Option<&str>) -> bool {
        match self {
            SuccessPredicate::ScreenIs { screen } => world.current_screen() == screen,
            SuccessPredicate::WidgetEquals { key, value } => {
                world.widget(key).map(|v| v == value).unwrap_or(false)
            }
            SuccessPredicate::VisibleText { text } => {
                let (visual, _) = world.peek();
                visual
                    .visible_texts
                    .iter()
                    .any(|t| t.contains(text.as_str()))
            }
            SuccessPredicate::AnswerMatches { expected } => match payload {
                Some(p) => normalize_answer(p) == normalize_answer(expected),
                None => false,
            },
            SuccessPredicate::All(ps) => ps.iter().all(|p| p.eval(world, payload)),
            SuccessPredicate::Any(ps) => ps.iter().any(|p| p.eval(world, payload)),
            SuccessPredicate::Not(p) => !p.eval(world, payload),
        }
    }
}

/// Case-insensitive comparison with collapsed whitespace.
pub fn normalize_answer(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Pure verification of task completion against the final world state (or a
/// snapshot) and the terminate payload, when one was produced.
pub fn check_success(world: &World, task: &TaskSpec, terminate_payload: Option<&str>) -> bool {
    task.success.eval(world, terminate_payload)
}

/// One edge of an app's abstract workflow graph: performing `instruction`
/// from state `from` reaches state `to`, certified by `expectation`.
/// Templates may carry `{capture}` placeholders bound from the goal pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowEdge {
    pub from: String,
    pub to: String,
    pub instruction: String,
    pub expectation: String,
}

/// Maps a family of user instructions onto a target workflow state via a
/// regex with named captures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalRule {
    pub pattern: String,
    pub target: String,
}

/// Static functional schema of one application: its capabilities and its
/// workflow graph. Deliberately contains no screen coordinates or indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppSchema {
    pub name: String,
    #[serde(default)]
    pub capabilities: Vec<String>,
    #[serde(default)]
    pub workflow: Vec<WorkflowEdge>,
    #[serde(default)]
    pub goals: Vec<GoalRule>,
}

/// Application metadata (the static functional schema handed to the cloud).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AppMetadata {
    pub apps: Vec<AppSchema>,
}

/// Pattern over system events; used to declare which OS callbacks count as
/// success-indicating for Priority-1 termination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventPattern {
    pub kind: EventKind,
    #[serde(default)]
    pub contains: String,
}

/// Ground-truth grounding label: on `screen`, a decision targeting `target`
/// should select node `index`. Drives spatial-hallucination accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthTarget {
    pub screen: String,
    pub target: String,
    pub index: u32,
}

/// One scripted orchestrator behavior. Entries stand in for what a vision
/// model would say in a specific situation, keeping scenario tests
/// deterministic. The first matching entry with remaining uses fires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default)]
    pub milestone_contains: Option<String>,
    #[serde(default)]
    pub screen: Option<String>,
    #[serde(default)]
    pub requires_feedback: Option<bool>,
    #[serde(default)]
    pub feedback_contains: Option<String>,
    /// Matches only once the milestone queue is depleted (explicit-termination
    /// mode with the termination cascade disabled).
    #[serde(default)]
    pub post_depletion: bool,
    #[serde(default)]
    pub suggest: Option<String>,
    #[serde(default)]
    pub status: Option<String>,
    #[serde(default)]
    pub answer_widget: Option<String>,
    #[serde(default)]
    pub answer_text: Option<String>,
    #[serde(default)]
    pub max_uses: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub instruction: String,
    pub category: TaskCategory,
    #[serde(default)]
    pub metadata: AppMetadata,
    pub success: SuccessPredicate,
    #[serde(default)]
    pub success_events: Vec<EventPattern>,
    #[serde(default)]
    pub ground_truth: Vec<GroundTruthTarget>,
    #[serde(default)]
    pub perturbations: Vec<Perturbation>,
    #[serde(default)]
    pub orchestrator_script: Vec<ScriptEntry>,
    /// Widget key the orchestrator reads the answer from on QA tasks.
    #[serde(default)]
    pub answer_widget: Option<String>,
    /// World file this task runs in, relative to the tasks file.
    #[serde(default)]
    pub world: Option<PathBuf>,
}

impl TaskSpec {
    pub fn validate(&self, path: &str) -> Result<(), SimError> {
        if self.instruction.trim().is_empty() {
            return Err(SimError::validation(
                format!("{path}.instruction"),
                "must be non-empty",
            ));
        }
        let has_answer = self.success.contains_answer_check();
        match self.category {
            TaskCategory::Operation if has_answer => Err(SimError::validation(
                format!("{path}.success"),
                "operation tasks need a world-state predicate, not an answer check",
            )),
            TaskCategory::QuestionAnswer if !has_answer => Err(SimError::validation(
                format!("{path}.success"),
                "question_answer tasks need an answer-matching predicate",
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Deserialize)]
struct TasksFile {
    schema: String,
    #[serde(default)]
    metadata: Option<AppMetadata>,
    tasks: Vec<TaskSpec>,
}

/// Loads and validates a task-suite document (`adec-tasks/1`). Per-task
/// `world` paths are resolved relative to the suite file; a file-level
/// `metadata` block is inherited by tasks that do not declare their own.
pub fn load_tasks(path: &Path) -> Result<Vec<TaskSpec>, SimError> {
    let raw = std::fs::read_to_string(path)?;
    let file: TasksFile = serde_json::from_str(&raw)
        .map_err(|e| SimError::parse(path.display().to_string(), e.to_string()))?;
    if file.schema != TASKS_SCHEMA {
        return Err(SimError::parse(
            format!("{}.schema", path.display()),
            format!("expected '{TASKS_SCHEMA}', found '{}'", file.schema),
        ));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = BTreeMap::new();
    let mut tasks = file.tasks;
    for (i, task) in tasks.iter_mut().enumerate() {
        if task.metadata.apps.is_empty() {
            if let Some(shared) = &file.metadata {
                task.metadata = shared.clone();
            }
        }
        task.validate(&format!("tasks[{i}]"))?;
        if let Some(prev) = seen.insert(task.task_id.clone(), i) {
            return Err(SimError::validation(
                format!("tasks[{i}].task_id"),
                format!("duplicate of tasks[{prev}]"),
            ));
        }
        if let Some(world) = &task.world {
            task.world = Some(base.join(world));
        }
    }
    Ok(tasks)
}
