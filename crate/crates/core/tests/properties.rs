//! Property tests for the structural invariants: pre-order density, replay
//! determinism, normalization, and template round-trips.

mod common;

use adec_core::backends::prompts::{extract_bindings, render_prompt};
use adec_core::backends::{LatencyParams, MetaInstruction, NodeScorer, OracleScorer, Recorder};
use adec_core::geometry::Rect;
use adec_core::grounding::prune_candidates;
use adec_core::sim::{Action, Direction, UiNode, UiTree};
use adec_core::tokens::TokenCounter;
use common::fixture_root;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct TreeShape {
    children: Vec<TreeShape>,
    interactable: bool,
    text: u8,
}

fn tree_shape() -> impl Strategy<Value = TreeShape> {
    let leaf = (any::<bool>(), any::<u8>()).prop_map(|(interactable, text)| TreeShape {
        children: vec![],
        interactable,
        text,
    });
    leaf.prop_recursive(4, 40, 6, |inner| {
        (proptest::collection::vec(inner, 0..6), any::<u8>()).prop_map(|(children, text)| {
            TreeShape {
                children,
                interactable: false,
                text,
            }
        })
    })
}

fn build(shape: &TreeShape, depth: u32) -> UiNode {
    UiNode {
        index: 0,
        class_name: if shape.children.is_empty() {
            "android.widget.TextView".into()
        } else {
            "android.widget.FrameLayout".into()
        },
        text: format!("t{}", shape.text),
        content_desc: String::new(),
        bounds: Rect::new(0, depth * 10, 100, depth * 10 + 10),
        interactable: shape.interactable,
        editable: false,
        children: shape.children.iter().map(|c| build(c, depth + 1)).collect(),
    }
}

proptest! {
    #[test]
    fn indices_are_dense_pre_order(shape in tree_shape()) {
        let mut tree = UiTree::new(build(&shape, 0));
        tree.reindex();
        let flat = tree.flatten();
        for (pos, node) in flat.iter().enumerate() {
            prop_assert_eq!(node.index as usize, pos);
        }
        prop_assert!(tree.validate("prop").is_ok());
    }

    #[test]
    fn oracle_scores_normalize_over_candidates(shape in tree_shape(), target in 0u8..255) {
        let mut tree = UiTree::new(build(&shape, 0));
        tree.reindex();
        let pruned = prune_candidates(&tree);
        prop_assume!(!pruned.is_empty());
        let mut scorer = OracleScorer::new(
            Recorder::new(),
            LatencyParams::default(),
            TokenCounter::default(),
        );
        let meta = MetaInstruction::ongoing(format!("tap t{target}"), "", (1080, 2400));
        let scored = scorer.score_candidates(&meta, &tree, &pruned).unwrap();
        let sum: f64 = scored.log_probs.iter().map(|lp| lp.exp()).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9, "sum {}", sum);
    }

    #[test]
    fn world_replay_is_bit_identical(choices in proptest::collection::vec(0u8..8, 1..25)) {
        let path = fixture_root().join("worlds/golden_contacts.json");
        let actions: Vec<Action> = choices
            .iter()
            .map(|c| match c % 8 {
                0 => Action::Click { index: (*c as u32) % 9 },
                1 => Action::Scroll { direction: Direction::Down },
                2 => Action::Scroll { direction: Direction::Up },
                3 => Action::NavigateBack,
                4 => Action::NavigateHome,
                5 => Action::OpenApp { app_name: "Contacts".into() },
                6 => Action::InputText { index: (*c as u32) % 9, text: "x".into() },
                _ => Action::LongPress { index: (*c as u32) % 9 },
            })
            .collect();

        let run = |actions: &[Action]| -> String {
            let mut world = adec_core::sim::load_world(&path).unwrap();
            let mut log = String::new();
            for action in actions {
                let (visual, tree) = world.observe();
                log.push_str(&serde_json::to_string(&visual).unwrap());
                log.push_str(&serde_json::to_string(&tree).unwrap());
                match world.apply_action(action) {
                    Ok(outcome) => {
                        log.push_str(&format!("{}|{}|", outcome.ok, outcome.message));
                        for e in outcome.events {
                            log.push_str(&serde_json::to_string(&e).unwrap());
                        }
                    }
                    Err(e) => log.push_str(&e.to_string()),
                }
            }
            log
        };
        prop_assert_eq!(run(&actions), run(&actions));
    }

    #[test]
    fn prompt_bindings_round_trip(
        goal in "[A-Za-z0-9 .,]{1,60}",
        expectation in "[A-Za-z0-9 .,]{1,60}",
        history in "[A-Za-z0-9 .,()#]{1,60}",
    ) {
        let mut bindings = std::collections::BTreeMap::new();
        bindings.insert("sub_goal".to_string(), goal);
        bindings.insert("expectation".to_string(), expectation);
        bindings.insert("history".to_string(), history);
        let rendered = render_prompt("orchestrator", &bindings).unwrap();
        let recovered = extract_bindings("orchestrator", &rendered).unwrap();
        prop_assert_eq!(recovered, bindings);
    }

    #[test]
    fn token_count_is_ceil_of_quarter_bytes(s in ".{0,200}") {
        let counter = TokenCounter::BytesOver4;
        prop_assert_eq!(counter.count(&s), (s.len() as u64).div_ceil(4));
    }
}
