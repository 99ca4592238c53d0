//! Grounding equivalence against the exhaustive reference, plus the
//! argmax-invariance and regularization properties.

use adec_core::backends::{
    BackendError, LatencyParams, MetaInstruction, NodeScorer, OracleScorer, Recorder,
    ScoredCandidates,
};
use adec_core::geometry::{Point, Rect};
use adec_core::grounding::{
    brute_force_ground, ground, prune_candidates, GroundOutcome, GroundingConfig,
};
use adec_core::sim::{UiNode, UiTree};
use adec_core::tokens::TokenCounter;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PIXEL: (u32, u32) = (1080, 2400);

fn leaf(text: &str, bounds: Rect, interactable: bool) -> UiNode {
    UiNode {
        index: 0,
        class_name: "android.widget.Button".into(),
        text: text.into(),
        content_desc: String::new(),
        bounds,
        interactable,
        editable: false,
        children: vec![],
    }
}

fn random_tree(rng: &mut ChaCha8Rng) -> UiTree {
    const POOL: &[&str] = &[
        "Save",
        "Cancel",
        "New contact",
        "Search",
        "Done",
        "Settings",
        "Wi-Fi",
        "Export",
        "Share",
        "Delete",
        "Save draft",
        "OK",
        "More options",
        "Back",
        "Next",
    ];
    let n = rng.gen_range(1..=64usize);
    let mut root = leaf("", Rect::new(0, 0, 1080, 2400), false);
    root.class_name = "android.widget.FrameLayout".into();
    for _ in 0..n {
        let text = POOL[rng.gen_range(0..POOL.len())];
        let left = rng.gen_range(0..1000u32);
        let top = rng.gen_range(0..2300u32);
        let w = rng.gen_range(10..=80u32);
        let h = rng.gen_range(10..=80u32);
        let interactable = rng.gen_bool(0.8);
        root.children.push(leaf(
            text,
            Rect::new(left, top, left + w, top + h),
            interactable,
        ));
    }
    let mut tree = UiTree::new(root);
    tree.reindex();
    tree
}

fn random_meta(rng: &mut ChaCha8Rng) -> MetaInstruction {
    const TARGETS: &[&str] = &["Save", "New contact", "Done", "Export", "Nonexistent thing"];
    let target = TARGETS[rng.gen_range(0..TARGETS.len())];
    let text = if rng.gen_bool(0.5) {
        let x = rng.gen_range(0..1080u32);
        let y = rng.gen_range(0..2400u32);
        format!("tap {target} near [{x}, {y}]")
    } else {
        format!("tap {target}")
    };
    MetaInstruction::ongoing(text, "", PIXEL)
}

fn oracle() -> OracleScorer {
    OracleScorer::new(
        Recorder::new(),
        LatencyParams::default(),
        TokenCounter::default(),
    )
}

#[test]
fn ground_matches_brute_force_on_randomized_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240131);
    let mut grounded = 0;
    for case in 0..250 {
        let tree = random_tree(&mut rng);
        let meta = random_meta(&mut rng);
        let cfg = GroundingConfig {
            alpha: [0.0, 0.1, 0.2, 0.5, 1.0][case % 5],
            ..GroundingConfig::default()
        };
        let fast = ground(&meta, &tree, &mut oracle(), &cfg, PIXEL);
        let slow = brute_force_ground(&meta, &tree, &mut oracle(), &cfg, PIXEL).unwrap();
        match (&fast, &slow) {
            (GroundOutcome::Grounded(a), GroundOutcome::Grounded(b)) => {
                assert_eq!(a.node_index, b.node_index, "case {case}");
                assert!((a.objective - b.objective).abs() <= 1e-12, "case {case}");
                grounded += 1;
            }
            (GroundOutcome::Failed(a), GroundOutcome::Failed(b)) => {
                assert_eq!(a.message, b.message, "case {case}");
            }
            _ => panic!("case {case}: outcomes diverge: {fast:?} vs {slow:?}"),
        }
    }
    assert!(
        grounded > 100,
        "only {grounded} grounded cases; generator too adversarial"
    );
}

#[test]
fn brute_force_refuses_oversized_candidate_sets() {
    let mut root = leaf("", Rect::new(0, 0, 1080, 2400), false);
    root.class_name = "android.widget.FrameLayout".into();
    for i in 0..65u32 {
        root.children
            .push(leaf("Save", Rect::new(0, i * 30, 100, i * 30 + 20), true));
    }
    let mut tree = UiTree::new(root);
    tree.reindex();
    let meta = MetaInstruction::ongoing("tap Save", "", PIXEL);
    assert!(brute_force_ground(
        &meta,
        &tree,
        &mut oracle(),
        &GroundingConfig::default(),
        PIXEL
    )
    .is_err());
}

fn two_save_tree() -> UiTree {
    let mut root = leaf("", Rect::new(0, 0, 1080, 2400), false);
    root.class_name = "android.widget.FrameLayout".into();
    root.children = vec![
        leaf("Save", Rect::new(40, 200, 240, 300), true), // index 1, centroid (140, 250)
        leaf("Cancel", Rect::new(280, 200, 480, 300), true), // index 2
        leaf("Save", Rect::new(420, 1900, 660, 2000), true), // index 3, centroid (540, 1950)
    ];
    let mut tree = UiTree::new(root);
    tree.reindex();
    tree
}

#[test]
fn unique_match_grounds_to_a_click() {
    let mut root = leaf("", Rect::new(0, 0, 1080, 2400), false);
    root.class_name = "android.widget.FrameLayout".into();
    root.children = vec![
        leaf("Save", Rect::new(40, 200, 240, 300), true),
        leaf("Cancel", Rect::new(280, 200, 480, 300), true),
    ];
    let mut tree = UiTree::new(root);
    tree.reindex();
    let meta = MetaInstruction::ongoing("tap Save", "", PIXEL);
    let out = ground(
        &meta,
        &tree,
        &mut oracle(),
        &GroundingConfig::default(),
        PIXEL,
    );
    let result = out.result().expect("grounded");
    assert_eq!(result.node_index, Some(1));
    assert_eq!(result.action, adec_core::sim::Action::Click { index: 1 });
}

#[test]
fn spatial_reference_separates_duplicates() {
    // Hand-computed: both "Save" nodes share log P = ln(1/2). The reference
    // point sits exactly on the second centroid, so its penalty is zero and
    // the first carries alpha * |p1 - p_ref|^2.
    let tree = two_save_tree();
    let meta = MetaInstruction::ongoing("tap Save near [540, 1950]", "", PIXEL);
    let cfg = GroundingConfig::default();
    let out = ground(&meta, &tree, &mut oracle(), &cfg, PIXEL);
    let result = out.result().expect("grounded");
    assert_eq!(result.node_index, Some(3));
    let expected = (0.5f64).ln();
    assert!((result.objective - expected).abs() < 1e-12);

    let p1 = Point {
        x: 140.0 / 1080.0,
        y: 250.0 / 2400.0,
    };
    let p_ref = Point {
        x: 540.0 / 1080.0,
        y: 1950.0 / 2400.0,
    };
    let first = result.per_candidate.iter().find(|c| c.index == 1).unwrap();
    assert!((first.objective - ((0.5f64).ln() - cfg.alpha * p1.dist_sq(&p_ref))).abs() < 1e-12);

    // Any positive alpha prefers the nearer duplicate.
    for alpha in [0.05, 0.1, 0.2, 0.5, 1.0] {
        let cfg = GroundingConfig {
            alpha,
            ..GroundingConfig::default()
        };
        let out = ground(&meta, &tree, &mut oracle(), &cfg, PIXEL);
        assert_eq!(out.result().unwrap().node_index, Some(3));
    }
}

#[test]
fn zero_alpha_breaks_ties_by_lowest_index() {
    let tree = two_save_tree();
    let meta = MetaInstruction::ongoing("tap Save near [540, 1950]", "", PIXEL);
    let cfg = GroundingConfig {
        alpha: 0.0,
        ..GroundingConfig::default()
    };
    let out = ground(&meta, &tree, &mut oracle(), &cfg, PIXEL);
    assert_eq!(out.result().unwrap().node_index, Some(1));
}

#[test]
fn absent_reference_neutralizes_alpha() {
    let tree = two_save_tree();
    let meta = MetaInstruction::ongoing("tap Save", "", PIXEL);
    assert!(meta.spatial_reference.is_none());
    let baseline = ground(
        &meta,
        &tree,
        &mut oracle(),
        &GroundingConfig {
            alpha: 0.0,
            ..Default::default()
        },
        PIXEL,
    );
    for alpha in [0.1, 0.2, 1.0, 10.0] {
        let cfg = GroundingConfig {
            alpha,
            ..GroundingConfig::default()
        };
        let out = ground(&meta, &tree, &mut oracle(), &cfg, PIXEL);
        assert_eq!(
            out.result().unwrap().node_index,
            baseline.result().unwrap().node_index
        );
        assert_eq!(
            out.result().unwrap().objective,
            baseline.result().unwrap().objective
        );
    }
}

/// Wraps a scorer, shifting every log-probability by a constant.
struct Shifted<S>(S, f64);

impl<S: NodeScorer> NodeScorer for Shifted<S> {
    fn score_candidates(
        &mut self,
        meta: &MetaInstruction,
        tree: &UiTree,
        pruned: &[&UiNode],
    ) -> Result<ScoredCandidates, BackendError> {
        let mut scored = self.0.score_candidates(meta, tree, pruned)?;
        for lp in &mut scored.log_probs {
            *lp += self.1;
        }
        Ok(scored)
    }
}

#[test]
fn argmax_is_invariant_under_constant_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let tree = random_tree(&mut rng);
        let meta = random_meta(&mut rng);
        // A large floor keeps the shifted run comparable.
        let cfg = GroundingConfig {
            score_floor: f64::NEG_INFINITY,
            ..Default::default()
        };
        let base = ground(&meta, &tree, &mut oracle(), &cfg, PIXEL);
        let shifted = ground(&meta, &tree, &mut Shifted(oracle(), 3.25), &cfg, PIXEL);
        match (&base, &shifted) {
            (GroundOutcome::Grounded(a), GroundOutcome::Grounded(b)) => {
                assert_eq!(a.node_index, b.node_index)
            }
            (GroundOutcome::Failed(_), GroundOutcome::Failed(_)) => {}
            _ => panic!("shift changed the outcome class"),
        }
    }
}

#[test]
fn winner_distance_is_monotone_in_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..60 {
        let tree = random_tree(&mut rng);
        let meta = random_meta(&mut rng);
        if meta.spatial_reference.is_none() {
            continue;
        }
        let cfg = GroundingConfig {
            score_floor: f64::NEG_INFINITY,
            ..Default::default()
        };
        let mut prev: Option<f64> = None;
        for alpha in [0.0, 0.1, 0.2, 0.5, 1.0] {
            let cfg = GroundingConfig { alpha, ..cfg };
            if let GroundOutcome::Grounded(r) = ground(&meta, &tree, &mut oracle(), &cfg, PIXEL) {
                let winner_r = r
                    .per_candidate
                    .iter()
                    .find(|c| Some(c.index) == r.node_index)
                    .unwrap()
                    .r_struct;
                if let Some(p) = prev {
                    assert!(winner_r <= p + 1e-12, "winner distance grew with alpha");
                }
                prev = Some(winner_r);
            }
        }
    }
}

#[test]
fn score_floor_converts_weak_winners_into_tactical_failures() {
    // 30 candidates, three lexically tied: each match gets p = 1/3, below a
    // floor of 0.5.
    let mut root = leaf("", Rect::new(0, 0, 1080, 2400), false);
    root.class_name = "android.widget.FrameLayout".into();
    for i in 0..3u32 {
        root.children
            .push(leaf("Save", Rect::new(0, i * 30, 100, i * 30 + 20), true));
    }
    let mut tree = UiTree::new(root);
    tree.reindex();
    let meta = MetaInstruction::ongoing("tap Save", "", PIXEL);
    let cfg = GroundingConfig {
        score_floor: (0.5f64).ln(),
        ..Default::default()
    };
    match ground(&meta, &tree, &mut oracle(), &cfg, PIXEL) {
        GroundOutcome::Failed(f) => assert!(f.message.contains("score floor")),
        other => panic!("expected floor failure, got {other:?}"),
    }
}

#[test]
fn pruning_feeds_exactly_the_interactable_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..25 {
        let tree = random_tree(&mut rng);
        let pruned = prune_candidates(&tree);
        let expected: Vec<u32> = tree
            .flatten()
            .iter()
            .filter(|n| n.interactable)
            .map(|n| n.index)
            .collect();
        assert_eq!(pruned.iter().map(|n| n.index).collect::<Vec<_>>(), expected);
    }
}
