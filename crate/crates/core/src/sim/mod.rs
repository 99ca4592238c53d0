//! Deterministic simulated mobile world.
//!
//! A [`World`] is loaded from a versioned JSON document (`adec-world/1`) and
//! evolves only through [`World::apply_action`]. Observation is two-modal:
//! a structured [`VisualState`] (what a vision model would see) and the full
//! textual [`UiTree`] (what a text model grounds against). Replaying the same
//! world spec, seed, and action sequence yields bit-identical traces.

mod action;
mod error;
mod perturb;
mod task;
mod ui;
mod world;

pub use action::{Action, Direction};
pub use error::SimError;
pub use perturb::{Perturbation, PopupSpec};
pub use task::{
    check_success, load_tasks, AppMetadata, AppSchema, EventPattern, GoalRule, GroundTruthTarget,
    ScriptEntry, SuccessPredicate, TaskCategory, TaskSpec, WorkflowEdge,
};
pub use ui::{UiNode, UiTree, VisualState};
pub use world::{load_world, EventKind, StepOutcome, SystemEvent, World, WORLD_SCHEMA};
