//! Scheduled UI perturbations: icon relocation, popups, label renames, and
//! delayed rendering. Each fires exactly once when the world's action counter
//! reaches `trigger_step`, deterministically.

use serde::{Deserialize, Serialize};

use crate::geometry::Rect;

/// A popup overlay injected over a screen. Modal popups block every
/// underlying element until dismissed (by tapping `dismiss_text`, when
/// present, or via `navigate_back`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopupSpec {
    pub title: String,
    #[serde(default)]
    pub message: String,
    #[serde(default)]
    pub dismiss_text: Option<String>,
    #[serde(default = "default_modal")]
    pub modal: bool,
}

fn default_modal() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Perturbation {
    /// Moves a node to new bounds, preserving its identity (same index).
    RelocateNode {
        screen: String,
        target_text: String,
        trigger_step: u64,
        bounds: Rect,
    },
    /// Overlays a popup subtree at the front of the screen's pre-order.
    InjectPopup {
        screen: String,
        trigger_step: u64,
        popup: PopupSpec,
    },
    /// Rewrites a node's label text.
    RenameLabel {
        screen: String,
        target_text: String,
        trigger_step: u64,
        new_text: String,
    },
    /// Hides a node for `steps` world steps starting at `trigger_step`.
    DelayRender {
        screen: String,
        target_text: String,
        trigger_step: u64,
        steps: u64,
    },
}

impl Perturbation {
    pub fn screen(&self) -> &str {
        match self {
            Perturbation::RelocateNode { screen, .. }
            | Perturbation::InjectPopup { screen, .. }
            | Perturbation::RenameLabel { screen, .. }
            | Perturbation::DelayRender { screen, .. } => screen,
        }
    }

    pub fn trigger_step(&self) -> u64 {
        match self {
            Perturbation::RelocateNode { trigger_step, .. }
            | Perturbation::InjectPopup { trigger_step, .. }
            | Perturbation::RenameLabel { trigger_step, .. }
            | Perturbation::DelayRender { trigger_step, .. } => *trigger_step,
        }
    }

    pub fn target_text(&self) -> Option<&str> {
        match self {
            Perturbation::RelocateNode { target_text, .. }
            | Perturbation::RenameLabel { target_text, .. }
            | Perturbation::DelayRender { target_text, .. } => Some(target_text),
            Perturbation::InjectPopup { .. } => None,
        }
    }
}
