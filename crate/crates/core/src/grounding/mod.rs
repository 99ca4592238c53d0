//! Structural grounding: selecting the view-hierarchy node that maximizes
//! semantic log-probability minus `alpha` times squared distance to the
//! orchestrator's spatial reference, over the interactable candidate set.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{MetaInstruction, NodeScorer};
use crate::geometry::Point;
use crate::sim::{Action, Direction, UiNode, UiTree};

/// Candidate-set ceiling for the exhaustive reference implementation.
pub const BRUTE_FORCE_LIMIT: usize = 64;

#[derive(Debug, Error)]
pub enum GroundingError {
    #[error(
        "brute-force grounding refuses candidate sets larger than {BRUTE_FORCE_LIMIT} (got {0})"
    )]
    TooManyCandidates(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundingConfig {
    /// Spatial regularization weight.
    pub alpha: f64,
    /// Minimum winning objective; anything below signals tactical failure.
    pub score_floor: f64,
    pub tie_break: TieBreak,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            score_floor: (0.05f64).ln(),
            tie_break: TieBreak::LowestIndex,
        }
    }
}

/// Squared Euclidean distance between a node centroid and the spatial
/// reference, both in normalized coordinates. With no reference the
/// regularizer is vacuous: every node scores 0.
pub fn r_struct(node_centroid: Point, p_ref: Option<Point>) -> f64 {
    match p_ref {
        Some(p) => node_centroid.dist_sq(&p),
        None => 0.0,
    }
}

/// The interactable subset of the hierarchy, in index order.
pub fn prune_candidates(tree: &UiTree) -> Vec<&UiNode> {
    tree.flatten()
        .into_iter()
        .filter(|n| n.interactable)
        .collect()
}

// ---------------------------------------------------------------------------
// Meta-instruction intent grammar.
// ---------------------------------------------------------------------------

/// Parsed intent of a meta-instruction. Node-targeted intents go through
/// candidate scoring; the rest assemble their action directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Intent {
    Tap {
        target: String,
    },
    LongPress {
        target: String,
    },
    Input {
        target: String,
        text: String,
    },
    SwipeOn {
        target: String,
        direction: Direction,
    },
    Scroll {
        direction: Direction,
    },
    OpenApp {
        app_name: String,
    },
    NavigateBack,
    NavigateHome,
    Terminate {
        payload: String,
    },
}

impl Intent {
    pub fn target(&self) -> Option<&str> {
        match self {
            Intent::Tap { target }
            | Intent::LongPress { target }
            | Intent::Input { target, .. }
            | Intent::SwipeOn { target, .. } => Some(target),
            _ => None,
        }
    }
}

fn strip_coordinates(text: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\s*(?:near\s*)?\[\s*\d+\s*,\s*\d+\s*\]").unwrap());
    re.replace_all(text, "").trim().to_string()
}

fn unquote(s: &str) -> String {
    s.trim()
        .trim_matches(|c| c == '\'' || c == '"')
        .trim()
        .to_string()
}

/// Parses a meta-instruction into its intent. The verb table is documented in
/// `docs/formats.md`; anything unrecognized is treated as a tap target, which
/// lets raw milestone text be grounded blindly.
pub fn parse_intent(text: &str) -> Intent {
    static OPEN_APP: OnceLock<Regex> = OnceLock::new();
    static SCROLL: OnceLock<Regex> = OnceLock::new();
    static SWIPE: OnceLock<Regex> = OnceLock::new();
    static TYPE: OnceLock<Regex> = OnceLock::new();
    static LONG: OnceLock<Regex> = OnceLock::new();
    static TAP: OnceLock<Regex> = OnceLock::new();

    let cleaned = strip_coordinates(text);
    let cleaned = cleaned.trim_end_matches(['.', '!']).trim().to_string();
    let lower = cleaned.to_lowercase();

    if let Some(rest) = lower.strip_prefix("open_app ") {
        let start = cleaned.len() - rest.len();
        return Intent::OpenApp {
            app_name: unquote(&cleaned[start..]),
        };
    }
    let open_app =
        OPEN_APP.get_or_init(|| Regex::new(r#"(?i)^open (?:the )?['"]?(.+?)['"]? app$"#).unwrap());
    if let Some(caps) = open_app.captures(&cleaned) {
        return Intent::OpenApp {
            app_name: unquote(&caps[1]),
        };
    }
    match lower.as_str() {
        "navigate_home" | "navigate home" | "go home" | "home" => return Intent::NavigateHome,
        "navigate_back" | "navigate back" | "go back" | "back" => return Intent::NavigateBack,
        _ => {}
    }
    if let Some(rest) = lower.strip_prefix("terminate") {
        let start = cleaned.len() - rest.len();
        return Intent::Terminate {
            payload: unquote(&cleaned[start..]),
        };
    }
    let scroll =
        SCROLL.get_or_init(|| Regex::new(r"(?i)^scroll(?:\s+(up|down|left|right))?$").unwrap());
    if let Some(caps) = scroll.captures(&cleaned) {
        let dir = caps
            .get(1)
            .and_then(|m| Direction::parse(m.as_str()))
            .unwrap_or(Direction::Down);
        return Intent::Scroll { direction: dir };
    }
    let swipe = SWIPE.get_or_init(|| {
        Regex::new(r"(?i)^swipe\s+(up|down|left|right)(?:\s+on\s+(.+))?$").unwrap()
    });
    if let Some(caps) = swipe.captures(&cleaned) {
        let dir = Direction::parse(&caps[1]).unwrap_or(Direction::Down);
        return match caps.get(2) {
            Some(m) => Intent::SwipeOn {
                target: unquote(m.as_str()),
                direction: dir,
            },
            None => Intent::Scroll { direction: dir },
        };
    }
    let type_re = TYPE.get_or_init(|| {
        Regex::new(
            r#"(?i)^(?:type|enter|input)\s+['"](.+?)['"]\s+into\s+(?:the\s+)?(.+?)(?:\s+field)?$"#,
        )
        .unwrap()
    });
    if let Some(caps) = type_re.captures(&cleaned) {
        return Intent::Input {
            target: unquote(&caps[2]),
            text: caps[1].to_string(),
        };
    }
    let long = LONG.get_or_init(|| Regex::new(r"(?i)^long[ _]press\s+(.+)$").unwrap());
    if let Some(caps) = long.captures(&cleaned) {
        return Intent::LongPress {
            target: unquote(&caps[1]),
        };
    }
    let tap = TAP.get_or_init(|| {
        Regex::new(r"(?i)^(?:tap|click|press)\s+(?:on\s+)?(?:the\s+)?(.+)$").unwrap()
    });
    if let Some(caps) = tap.captures(&cleaned) {
        return Intent::Tap {
            target: unquote(&caps[1]),
        };
    }
    Intent::Tap { target: cleaned }
}

/// The lexical anchor a scorer matches candidates against.
pub fn extract_target(text: &str) -> String {
    parse_intent(text).target().unwrap_or("").to_string()
}

// ---------------------------------------------------------------------------
// Grounding proper.
// ---------------------------------------------------------------------------

/// Per-candidate scoring breakdown, serialized into the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub index: u32,
    pub log_prob: f64,
    pub r_struct: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingResult {
    /// Winning node index; absent for nodeless intents (open_app, scroll,
    /// navigation, terminate), which bypass candidate scoring.
    pub node_index: Option<u32>,
    pub objective: f64,
    pub action: Action,
    pub per_candidate: Vec<CandidateScore>,
}

/// Tactical failure signal: grounding found no satisfying node. Feeds the
/// cloud-free inner self-correction loop instead of random actuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacticalFailure {
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroundOutcome {
    Grounded(GroundingResult),
    Failed(TacticalFailure),
}

impl GroundOutcome {
    pub fn failed(message: impl Into<String>) -> Self {
        GroundOutcome::Failed(TacticalFailure {
            message: message.into(),
        })
    }

    pub fn result(&self) -> Option<&GroundingResult> {
        match self {
            GroundOutcome::Grounded(r) => Some(r),
            GroundOutcome::Failed(_) => None,
        }
    }
}

fn assemble_action(intent: &Intent, node: &UiNode) -> Action {
    match intent {
        Intent::Tap { .. } => Action::Click { index: node.index },
        Intent::LongPress { .. } => Action::LongPress { index: node.index },
        Intent::Input { text, .. } => {
            if node.editable {
                Action::InputText {
                    index: node.index,
                    text: text.clone(),
                }
            } else {
                Action::Click { index: node.index }
            }
        }
        Intent::SwipeOn { direction, .. } => Action::Swipe {
            index: node.index,
            direction: *direction,
        },
        _ => unreachable!("nodeless intents never reach assembly"),
    }
}

fn nodeless_action(intent: &Intent) -> Option<Action> {
    match intent {
        Intent::Scroll { direction } => Some(Action::Scroll {
            direction: *direction,
        }),
        Intent::OpenApp { app_name } => Some(Action::OpenApp {
            app_name: app_name.clone(),
        }),
        Intent::NavigateBack => Some(Action::NavigateBack),
        Intent::NavigateHome => Some(Action::NavigateHome),
        Intent::Terminate { payload } => Some(Action::Terminate {
            payload: payload.clone(),
        }),
        _ => None,
    }
}

/// Grounds a meta-instruction against the current hierarchy: evaluates
/// `log P - alpha * R_struct` for every interactable candidate and returns
/// the argmax (lowest index on ties), or a tactical failure when the
/// candidate set is empty, nothing matches lexically, or the winner falls
/// below the score floor.
pub fn ground(
    meta: &MetaInstruction,
    tree: &UiTree,
    scorer: &mut dyn NodeScorer,
    cfg: &GroundingConfig,
    pixel_size: (u32, u32),
) -> GroundOutcome {
    let intent = parse_intent(&meta.text);
    if let Some(action) = nodeless_action(&intent) {
        return GroundOutcome::Grounded(GroundingResult {
            node_index: None,
            objective: 0.0,
            action,
            per_candidate: vec![],
        });
    }

    let pruned = prune_candidates(tree);
    if pruned.is_empty() {
        return GroundOutcome::failed("no interactable elements on screen");
    }
    let scored = match scorer.score_candidates(meta, tree, &pruned) {
        Ok(s) => s,
        Err(e) => return GroundOutcome::failed(e.to_string()),
    };
    let target = intent.target().unwrap_or("");
    if !scored.anchored {
        return GroundOutcome::failed(format!("no node matched '{target}'"));
    }

    let mut per_candidate = Vec::with_capacity(pruned.len());
    let mut best: Option<usize> = None;
    for (pos, node) in pruned.iter().enumerate() {
        let log_prob = scored.log_probs[pos];
        let r = r_struct(node.centroid(pixel_size), meta.spatial_reference);
        let objective = log_prob - cfg.alpha * r;
        per_candidate.push(CandidateScore {
            index: node.index,
            log_prob,
            r_struct: r,
            objective,
        });
        // Strict improvement keeps the lowest index on exact ties.
        match best {
            Some(b) if per_candidate[b].objective >= objective => {}
            _ => best = Some(pos),
        }
    }
    let best = best.expect("non-empty candidate set");
    let winner = &per_candidate[best];
    if winner.objective < cfg.score_floor {
        return GroundOutcome::failed(format!("no candidate above score floor for '{target}'"));
    }
    GroundOutcome::Grounded(GroundingResult {
        node_index: Some(winner.index),
        objective: winner.objective,
        action: assemble_action(&intent, pruned[best]),
        per_candidate,
    })
}

/// Exhaustive reference grounding with the identical contract: collects every
/// objective, takes the maximum value in a separate pass, and selects the
/// first candidate attaining it. Exists solely as the independent check for
/// equivalence tests; refuses candidate sets larger than
/// [`BRUTE_FORCE_LIMIT`].
pub fn brute_force_ground(
    meta: &MetaInstruction,
    tree: &UiTree,
    scorer: &mut dyn NodeScorer,
    cfg: &GroundingConfig,
    pixel_size: (u32, u32),
) -> Result<GroundOutcome, GroundingError> {
    let intent = parse_intent(&meta.text);
    if let Some(action) = nodeless_action(&intent) {
        return Ok(GroundOutcome::Grounded(GroundingResult {
            node_index: None,
            objective: 0.0,
            action,
            per_candidate: vec![],
        }));
    }

    let pruned = prune_candidates(tree);
    if pruned.len() > BRUTE_FORCE_LIMIT {
        return Err(GroundingError::TooManyCandidates(pruned.len()));
    }
    if pruned.is_empty() {
        return Ok(GroundOutcome::failed("no interactable elements on screen"));
    }
    let scored = match scorer.score_candidates(meta, tree, &pruned) {
        Ok(s) => s,
        Err(e) => return Ok(GroundOutcome::failed(e.to_string())),
    };
    let target = intent.target().unwrap_or("");
    if !scored.anchored {
        return Ok(GroundOutcome::failed(format!("no node matched '{target}'")));
    }

    let per_candidate: Vec<CandidateScore> = pruned
        .iter()
        .zip(&scored.log_probs)
        .map(|(node, &log_prob)| {
            let r = r_struct(node.centroid(pixel_size), meta.spatial_reference);
            CandidateScore {
                index: node.index,
                log_prob,
                r_struct: r,
                objective: log_prob - cfg.alpha * r,
            }
        })
        .collect();
    let max_objective = per_candidate
        .iter()
        .map(|c| c.objective)
        .fold(f64::NEG_INFINITY, f64::max);
    let best = per_candidate
        .iter()
        .position(|c| c.objective == max_objective)
        .expect("maximum exists in a non-empty set");
    if max_objective < cfg.score_floor {
        return Ok(GroundOutcome::failed(format!(
            "no candidate above score floor for '{target}'"
        )));
    }
    Ok(GroundOutcome::Grounded(GroundingResult {
        node_index: Some(per_candidate[best].index),
        objective: max_objective,
        action: assemble_action(&intent, pruned[best]),
        per_candidate,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    #[test]
    fn r_struct_unit_cases() {
        let z = Point { x: 0.3, y: 0.7 };
        assert_eq!(r_struct(z, Some(z)), 0.0);
        assert_eq!(
            r_struct(Point { x: 0.0, y: 0.0 }, Some(Point { x: 1.0, y: 1.0 })),
            2.0
        );
        let r = r_struct(Point { x: 0.5, y: 0.5 }, Some(Point { x: 0.1, y: 0.2 }));
        assert!((r - 0.25).abs() < 1e-15);
        assert_eq!(r_struct(z, None), 0.0);
    }

    #[test]
    fn intent_grammar() {
        assert_eq!(
            parse_intent("open_app Contacts"),
            Intent::OpenApp {
                app_name: "Contacts".into()
            }
        );
        assert_eq!(
            parse_intent("Open the Contacts app."),
            Intent::OpenApp {
                app_name: "Contacts".into()
            }
        );
        assert_eq!(
            parse_intent("scroll down"),
            Intent::Scroll {
                direction: Direction::Down
            }
        );
        assert_eq!(parse_intent("navigate_back"), Intent::NavigateBack);
        assert_eq!(parse_intent("navigate home"), Intent::NavigateHome);
        assert_eq!(
            parse_intent("terminate 'TASK_COMPLETE'"),
            Intent::Terminate {
                payload: "TASK_COMPLETE".into()
            }
        );
        assert_eq!(
            parse_intent("type 'Alice' into the Name field"),
            Intent::Input {
                target: "Name".into(),
                text: "Alice".into()
            }
        );
        assert_eq!(
            parse_intent("tap Save near [540, 1200]"),
            Intent::Tap {
                target: "Save".into()
            }
        );
        assert_eq!(
            parse_intent("swipe left on Brightness"),
            Intent::SwipeOn {
                target: "Brightness".into(),
                direction: Direction::Left
            }
        );
        assert_eq!(
            parse_intent("long press Row"),
            Intent::LongPress {
                target: "Row".into()
            }
        );
        assert_eq!(
            parse_intent("Save the file"),
            Intent::Tap {
                target: "Save the file".into()
            }
        );
    }

    fn node(index: u32, text: &str, interactable: bool) -> UiNode {
        UiNode {
            index,
            class_name: "android.widget.Button".into(),
            text: text.into(),
            content_desc: String::new(),
            bounds: Rect::new(0, index * 10, 100, index * 10 + 10),
            interactable,
            editable: false,
            children: vec![],
        }
    }

    #[test]
    fn prune_keeps_interactable_in_index_order() {
        let mut root = node(0, "root", false);
        root.class_name = "android.widget.FrameLayout".into();
        root.children = vec![
            node(0, "a", true),
            node(0, "b", false),
            node(0, "c", true),
            node(0, "d", false),
        ];
        let mut tree = UiTree::new(root);
        tree.reindex();
        let pruned = prune_candidates(&tree);
        assert_eq!(
            pruned.iter().map(|n| n.text.as_str()).collect::<Vec<_>>(),
            ["a", "c"]
        );

        let all_dead = UiTree::new(node(0, "only", false));
        assert!(prune_candidates(&all_dead).is_empty());
    }
}
