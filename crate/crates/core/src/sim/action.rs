//! Atomic device actions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" => Some(Direction::Up),
            "down" => Some(Direction::Down),
            "left" => Some(Direction::Left),
            "right" => Some(Direction::Right),
            _ => None,
        }
    }
}

/// An atomic action. Index-bearing variants must reference an interactable
/// node of the current tree; `terminate` freezes the world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action")]
pub enum Action {
    Click { index: u32 },
    LongPress { index: u32 },
    InputText { index: u32, text: String },
    Swipe { index: u32, direction: Direction },
    Scroll { direction: Direction },
    OpenApp { app_name: String },
    NavigateBack,
    NavigateHome,
    Terminate { payload: String },
}

impl Action {
    pub fn target_index(&self) -> Option<u32> {
        match self {
            Action::Click { index }
            | Action::LongPress { index }
            | Action::InputText { index, .. }
            | Action::Swipe { index, .. } => Some(*index),
            _ => None,
        }
    }

    pub fn is_terminate(&self) -> bool {
        matches!(self, Action::Terminate { .. })
    }

    /// Compact textual form used in trajectories and histories. Text-only by
    /// construction: this is the only action representation that ever leaves
    /// the device.
    pub fn describe(&self) -> String {
        match self {
            Action::Click { index } => format!("click(#{index})"),
            Action::LongPress { index } => format!("long_press(#{index})"),
            Action::InputText { index, text } => format!("input_text(#{index}, '{text}')"),
            Action::Swipe { index, direction } => {
                format!("swipe(#{index}, {})", direction.as_str())
            }
            Action::Scroll { direction } => format!("scroll({})", direction.as_str()),
            Action::OpenApp { app_name } => format!("open_app({app_name})"),
            Action::NavigateBack => "navigate_back".into(),
            Action::NavigateHome => "navigate_home".into(),
            Action::Terminate { payload } => format!("terminate('{payload}')"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serde_shape_is_tagged() {
        let a = Action::Click { index: 3 };
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            r#"{"action":"click","index":3}"#
        );
        let b: Action = serde_json::from_str(r#"{"action":"scroll","direction":"down"}"#).unwrap();
        assert_eq!(
            b,
            Action::Scroll {
                direction: Direction::Down
            }
        );
    }

    #[test]
    fn describe_is_stable() {
        assert_eq!(
            Action::InputText {
                index: 2,
                text: "Alice".into()
            }
            .describe(),
            "input_text(#2, 'Alice')"
        );
    }
}
