//! View-hierarchy and visual-state types.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Rect};
use crate::sim::SimError;

/// One element of the textual view hierarchy.
///
/// Indices are dense `0..N-1` in pre-order within a tree. `interactable` is
/// the element's interactability flag as parsed from the underlying
/// structural metadata; only interactable nodes are legal action targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiNode {
    pub index: u32,
    pub class_name: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub content_desc: String,
    pub bounds: Rect,
    #[serde(default)]
    pub interactable: bool,
    #[serde(default)]
    pub editable: bool,
    #[serde(default)]
    pub children: Vec<UiNode>,
}

impl UiNode {
    /// Normalized centroid of this node's bounds.
    pub fn centroid(&self, pixel_size: (u32, u32)) -> Point {
        self.bounds.normalized_centroid(pixel_size)
    }

    /// Text plus content description, the lexical surface a scorer matches
    /// against.
    pub fn lexical_surface(&self) -> String {
        if self.content_desc.is_empty() {
            self.text.clone()
        } else if self.text.is_empty() {
            self.content_desc.clone()
        } else {
            format!("{} {}", self.text, self.content_desc)
        }
    }
}

/// A full screen hierarchy with dense pre-order indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiTree {
    pub root: UiNode,
}

impl UiTree {
    pub fn new(root: UiNode) -> Self {
        Self { root }
    }

    /// All nodes in pre-order.
    pub fn flatten(&self) -> Vec<&UiNode> {
        let mut out = Vec::new();
        fn walk<'a>(node: &'a UiNode, out: &mut Vec<&'a UiNode>) {
            out.push(node);
            for child in &node.children {
                walk(child, out);
            }
        }
        walk(&self.root, &mut out);
        out
    }

    pub fn len(&self) -> usize {
        self.flatten().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, index: u32) -> Option<&UiNode> {
        self.flatten().into_iter().find(|n| n.index == index)
    }

    /// Re-assigns dense pre-order indices `0..N-1`.
    pub fn reindex(&mut self) {
        fn walk(node: &mut UiNode, next: &mut u32) {
            node.index = *next;
            *next += 1;
            for child in &mut node.children {
                walk(child, next);
            }
        }
        let mut next = 0;
        walk(&mut self.root, &mut next);
    }

    /// Checks the structural invariants: dense pre-order indices, valid
    /// bounds, and interactable containers being explicitly clickable.
    pub fn validate(&self, path: &str) -> Result<(), SimError> {
        for (pos, node) in self.flatten().iter().enumerate() {
            if node.index as usize != pos {
                return Err(SimError::validation(
                    format!("{path}.nodes[{pos}]"),
                    format!("index {} breaks dense pre-order", node.index),
                ));
            }
            if !node.bounds.is_valid() {
                return Err(SimError::validation(
                    format!("{path}.nodes[{pos}].bounds"),
                    "left < right and top < bottom required",
                ));
            }
            if node.interactable && !node.children.is_empty() && !is_clickable_container(node) {
                return Err(SimError::validation(
                    format!("{path}.nodes[{pos}]"),
                    format!(
                        "interactable container '{}' must use an explicitly clickable class",
                        node.class_name
                    ),
                ));
            }
        }
        Ok(())
    }

    /// One line per node, the textual rendering handed to text-only scorers.
    pub fn to_prompt_lines(&self) -> String {
        let mut out = String::new();
        for node in self.flatten() {
            let _ = writeln!(
                out,
                "{} | {} | text='{}' desc='{}' | [{},{},{},{}] | interactable={} editable={}",
                node.index,
                node.class_name,
                node.text,
                node.content_desc,
                node.bounds.left,
                node.bounds.top,
                node.bounds.right,
                node.bounds.bottom,
                node.interactable,
                node.editable,
            );
        }
        out
    }
}

/// Containers may be interactable only when their class marks them as
/// clickable rows/buttons; plain layout groups are not action targets.
fn is_clickable_container(node: &UiNode) -> bool {
    const MARKERS: [&str; 4] = ["Button", "Row", "Item", "Tile"];
    MARKERS.iter().any(|m| node.class_name.contains(m))
}

/// Structured abstraction of the rendered screen: no pixels, just the facts a
/// vision model could read off the display.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualState {
    pub screen_id: String,
    pub app_name: String,
    pub visible_texts: BTreeSet<String>,
    pub widget_states: BTreeMap<String, String>,
    pub pixel_size: (u32, u32),
}

impl VisualState {
    /// `screen_id | top-3 visible texts`, the one-line textual state summary
    /// used in failure trajectories.
    pub fn summary_line(&self) -> String {
        let texts: Vec<&str> = self
            .visible_texts
            .iter()
            .take(3)
            .map(|s| s.as_str())
            .collect();
        format!("{} | {}", self.screen_id, texts.join(", "))
    }
}
