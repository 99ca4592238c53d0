//! Simulator behavior against the fixture worlds.

mod common;

use adec_core::geometry::Rect;
use adec_core::sim::{
    check_success, load_world, Action, Direction, EventKind, Perturbation, PopupSpec, SimError,
    SuccessPredicate, TaskCategory,
};
use common::{fixture_root, task_by_id};

fn mini() -> adec_core::sim::World {
    load_world(&fixture_root().join("worlds/contacts_mini.json")).unwrap()
}

fn golden() -> adec_core::sim::World {
    load_world(&fixture_root().join("worlds/golden_contacts.json")).unwrap()
}

fn index_of(tree: &adec_core::sim::UiTree, text: &str) -> u32 {
    tree.flatten()
        .into_iter()
        .find(|n| n.text == text || n.content_desc == text)
        .unwrap_or_else(|| panic!("node '{text}'"))
        .index
}

#[test]
fn mini_fixture_observes_twelve_dense_nodes() {
    let mut world = mini();
    let (visual, tree) = world.observe();
    assert_eq!(visual.app_name, "Contacts");
    assert_eq!(tree.len(), 12);
    let indices: Vec<u32> = tree.flatten().iter().map(|n| n.index).collect();
    assert_eq!(indices, (0..12).collect::<Vec<u32>>());
    assert_eq!(tree.flatten().iter().filter(|n| n.interactable).count(), 7);
}

#[test]
fn observe_is_idempotent_between_actions() {
    let mut world = mini();
    let a = world.observe();
    let b = world.observe();
    assert_eq!(a, b);
}

#[test]
fn minimal_one_screen_spec_loads() {
    let raw = r#"{
        "schema": "adec-world/1",
        "name": "tiny",
        "pixel_size": [100, 100],
        "screens": [{
            "id": "only",
            "app": "Tiny",
            "root": { "class": "android.widget.FrameLayout", "bounds": [0, 0, 100, 100] }
        }]
    }"#;
    let world = adec_core::sim::World::from_spec_str(raw).unwrap();
    assert_eq!(world.current_screen(), "only");
}

#[test]
fn dangling_transition_is_a_validation_error() {
    let raw = r#"{
        "schema": "adec-world/1",
        "name": "bad",
        "pixel_size": [100, 100],
        "screens": [{
            "id": "only",
            "app": "Tiny",
            "root": { "class": "android.widget.FrameLayout", "bounds": [0, 0, 100, 100] }
        }],
        "transitions": [
            { "screen": "only", "on": { "action": "navigate_back" }, "goto": "nowhere" }
        ]
    }"#;
    let err = adec_core::sim::World::from_spec_str(raw).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("transitions[0].goto"), "got: {msg}");
    assert!(msg.contains("nowhere"));
}

#[test]
fn invalid_bounds_name_the_offending_path() {
    let raw = r#"{
        "schema": "adec-world/1",
        "name": "bad",
        "pixel_size": [100, 100],
        "screens": [{
            "id": "only",
            "app": "Tiny",
            "root": { "class": "android.widget.FrameLayout", "bounds": [50, 0, 50, 100] }
        }]
    }"#;
    let err = adec_core::sim::World::from_spec_str(raw).unwrap_err();
    assert!(err.to_string().contains("invalid bounds"));
}

#[test]
fn save_click_transitions_and_enqueues_toast() {
    let mut world = mini();
    let (_, tree) = world.observe();
    let new_contact = index_of(&tree, "New contact");
    assert!(
        world
            .apply_action(&Action::Click { index: new_contact })
            .unwrap()
            .ok
    );

    let (_, tree) = world.observe();
    let name_field = index_of(&tree, "Name");
    world
        .apply_action(&Action::InputText {
            index: name_field,
            text: "Alice".into(),
        })
        .unwrap();

    let (_, tree) = world.observe();
    let save = index_of(&tree, "Save");
    let outcome = world.apply_action(&Action::Click { index: save }).unwrap();
    assert!(outcome.ok);
    assert_eq!(outcome.events.len(), 1);
    assert_eq!(outcome.events[0].kind, EventKind::Toast);
    assert_eq!(outcome.events[0].payload, "Contact saved");
    assert_eq!(world.current_screen(), "contacts_main");
    assert_eq!(world.widget("contacts.saved_name"), Some("Alice"));
}

#[test]
fn non_interactable_click_is_a_recoverable_no_op() {
    let mut world = mini();
    let before = world.peek();
    let outcome = world.apply_action(&Action::Click { index: 1 }).unwrap(); // title node
    assert!(!outcome.ok);
    assert_eq!(outcome.message, "non-interactable element");
    assert_eq!(world.peek(), before, "no-op must leave the world unchanged");
    assert_eq!(world.step_count(), 0);

    let outcome = world.apply_action(&Action::Click { index: 999 }).unwrap();
    assert!(!outcome.ok);
    assert!(outcome.message.contains("out of range"));
}

#[test]
fn unmatched_click_reports_missing_transition() {
    let mut world = mini();
    let (_, tree) = world.observe();
    let carol = index_of(&tree, "Carol Jones");
    let outcome = world.apply_action(&Action::Click { index: carol }).unwrap();
    assert!(!outcome.ok);
    assert_eq!(outcome.message, "no transition for click on 'Carol Jones'");
}

#[test]
fn navigate_home_and_system_scrolls() {
    let mut world = golden();
    assert_eq!(world.current_screen(), "home");

    // Scroll down on home opens the app drawer; scroll up quick settings.
    assert!(
        world
            .apply_action(&Action::Scroll {
                direction: Direction::Down
            })
            .unwrap()
            .ok
    );
    assert_eq!(world.current_screen(), "app_drawer");
    assert!(world.apply_action(&Action::NavigateBack).unwrap().ok);
    assert!(
        world
            .apply_action(&Action::Scroll {
                direction: Direction::Up
            })
            .unwrap()
            .ok
    );
    assert_eq!(world.current_screen(), "quick_settings");

    assert!(world.apply_action(&Action::NavigateHome).unwrap().ok);
    assert_eq!(world.current_screen(), "home");

    assert!(
        world
            .apply_action(&Action::OpenApp {
                app_name: "Contacts".into()
            })
            .unwrap()
            .ok
    );
    assert_eq!(world.current_screen(), "contacts_main");
    assert!(world.apply_action(&Action::NavigateHome).unwrap().ok);
    assert_eq!(world.current_screen(), "home");

    let unknown = world
        .apply_action(&Action::OpenApp {
            app_name: "Maps".into(),
        })
        .unwrap();
    assert!(!unknown.ok);
}

#[test]
fn terminate_freezes_the_world() {
    let mut world = mini();
    assert!(
        world
            .apply_action(&Action::Terminate {
                payload: "done".into()
            })
            .unwrap()
            .ok
    );
    assert_eq!(world.terminated(), Some("done"));
    let err = world.apply_action(&Action::NavigateHome).unwrap_err();
    assert!(matches!(err, SimError::Terminated));
}

#[test]
fn event_causality_stamps_the_emitting_step() {
    let mut world = mini();
    let (_, tree) = world.observe();
    let new_contact = index_of(&tree, "New contact");
    world
        .apply_action(&Action::Click { index: new_contact })
        .unwrap(); // step 0
    let (_, tree) = world.observe();
    let name = index_of(&tree, "Name");
    world
        .apply_action(&Action::InputText {
            index: name,
            text: "Zoe".into(),
        })
        .unwrap(); // 1
    let (_, tree) = world.observe();
    let save = index_of(&tree, "Save");
    let outcome = world.apply_action(&Action::Click { index: save }).unwrap(); // step 2
    assert_eq!(outcome.events[0].step_emitted, 2);
}

#[test]
fn relocate_node_keeps_identity_and_new_bounds() {
    let mut world = mini();
    let (_, before) = world.observe();
    let target = index_of(&before, "New contact");
    world
        .schedule_perturbation(Perturbation::RelocateNode {
            screen: "contacts_main".into(),
            target_text: "New contact".into(),
            trigger_step: 0,
            bounds: Rect::new(10, 10, 210, 110),
        })
        .unwrap();
    let (_, after) = world.observe();
    let node = after.node(target).unwrap();
    assert_eq!(node.text, "New contact");
    assert_eq!(node.bounds, Rect::new(10, 10, 210, 110));
    assert_eq!(after.len(), before.len());
}

#[test]
fn offscreen_relocation_disables_interaction_and_visibility() {
    let mut world = mini();
    world
        .schedule_perturbation(Perturbation::RelocateNode {
            screen: "contacts_main".into(),
            target_text: "New contact".into(),
            trigger_step: 0,
            bounds: Rect::new(1200, 2500, 1400, 2660),
        })
        .unwrap();
    let (visual, tree) = world.observe();
    let node = tree
        .flatten()
        .into_iter()
        .find(|n| n.text == "New contact")
        .unwrap();
    assert!(!node.interactable);
    assert!(!visual.visible_texts.contains("New contact"));
}

#[test]
fn unresolvable_perturbation_selector_is_rejected() {
    let mut world = mini();
    let err = world
        .schedule_perturbation(Perturbation::RenameLabel {
            screen: "contacts_main".into(),
            target_text: "No such node".into(),
            trigger_step: 0,
            new_text: "X".into(),
        })
        .unwrap_err();
    assert!(err.to_string().contains("No such node"));
}

#[test]
fn popup_injection_prepends_subtree_and_dismisses() {
    let mut world = mini();
    let (_, original) = world.observe();
    world
        .schedule_perturbation(Perturbation::InjectPopup {
            screen: "contacts_main".into(),
            trigger_step: 0,
            popup: PopupSpec {
                title: "Sync error".into(),
                message: "Account sync failed.".into(),
                dismiss_text: Some("OK".into()),
                modal: true,
            },
        })
        .unwrap();
    let (visual, tree) = world.observe();
    // Popup subtree renders at the front of pre-order, right under the root.
    assert_eq!(tree.root.children[0].content_desc, "popup dialog");
    assert!(visual.visible_texts.contains("Sync error"));
    // Modal: everything outside the popup is non-interactable.
    let ok_index = index_of(&tree, "OK");
    for node in tree.flatten() {
        if node.interactable {
            assert_eq!(node.index, ok_index);
        }
    }
    let outcome = world
        .apply_action(&Action::Click { index: ok_index })
        .unwrap();
    assert!(outcome.ok);
    assert_eq!(outcome.events[0].kind, EventKind::DialogDismissed);
    let (_, restored) = world.observe();
    assert_eq!(restored, original);
}

#[test]
fn navigate_back_dismisses_buttonless_popup() {
    let mut world = mini();
    world
        .schedule_perturbation(Perturbation::InjectPopup {
            screen: "contacts_main".into(),
            trigger_step: 0,
            popup: PopupSpec {
                title: "Syncing".into(),
                message: "Please wait.".into(),
                dismiss_text: None,
                modal: true,
            },
        })
        .unwrap();
    let (_, tree) = world.observe();
    assert!(tree.flatten().iter().all(|n| !n.interactable));
    assert!(world.apply_action(&Action::NavigateBack).unwrap().ok);
    let (_, tree) = world.observe();
    assert!(tree.flatten().iter().any(|n| n.interactable));
}

#[test]
fn rename_label_rewrites_text() {
    let mut world = mini();
    world
        .schedule_perturbation(Perturbation::RenameLabel {
            screen: "contacts_main".into(),
            target_text: "New contact".into(),
            trigger_step: 0,
            new_text: "Add person".into(),
        })
        .unwrap();
    let (visual, _) = world.observe();
    assert!(visual.visible_texts.contains("Add person"));
    assert!(!visual.visible_texts.contains("New contact"));
}

#[test]
fn delay_render_hides_target_for_two_steps() {
    let mut world = mini();
    world
        .schedule_perturbation(Perturbation::DelayRender {
            screen: "contacts_main".into(),
            target_text: "New contact".into(),
            trigger_step: 0,
            steps: 2,
        })
        .unwrap();
    let absent = |world: &mut adec_core::sim::World| {
        let (_, tree) = world.observe();
        tree.flatten().iter().all(|n| n.text != "New contact")
    };
    assert!(absent(&mut world)); // world step 0
    let (_, tree) = world.observe();
    let bob = index_of(&tree, "Bob Stone");
    world.apply_action(&Action::Click { index: bob }).unwrap(); // -> step 1
    world.apply_action(&Action::NavigateBack).unwrap(); // -> step 2
    assert!(!absent(&mut world));
}

#[test]
fn check_success_examples() {
    // Operation predicate over the final world state.
    let task = task_by_id("main_tasks.json", "c_create_alice");
    let mut world = golden();
    assert!(!check_success(&world, &task, None));
    world.set_widget("contacts.saved_name", "Alice");
    assert!(check_success(&world, &task, None));

    // Destructive follow-up reverts it.
    world.set_widget("contacts.saved_name", "");
    assert!(!check_success(&world, &task, None));

    // QA payload matching normalizes case and whitespace.
    let qa = task_by_id("main_tasks.json", "s_qa_model");
    assert_eq!(qa.category, TaskCategory::QuestionAnswer);
    let world = load_world(&fixture_root().join("worlds/settings.json")).unwrap();
    assert!(check_success(&world, &qa, Some("  pixel   SIM ")));
    assert!(!check_success(&world, &qa, Some("pixel")));
    assert!(!check_success(&world, &qa, None));
}

#[test]
fn visible_text_predicate_reads_the_current_screen() {
    let world = mini();
    let p = SuccessPredicate::VisibleText {
        text: "Bob Stone".into(),
    };
    assert!(p_eval(&p, &world));
    let p = SuccessPredicate::Not(Box::new(SuccessPredicate::VisibleText {
        text: "Nostromo".into(),
    }));
    assert!(p_eval(&p, &world));
}

fn p_eval(p: &SuccessPredicate, world: &adec_core::sim::World) -> bool {
    let task = adec_core::sim::TaskSpec {
        task_id: "t".into(),
        instruction: "x".into(),
        category: TaskCategory::Operation,
        metadata: Default::default(),
        success: p.clone(),
        success_events: vec![],
        ground_truth: vec![],
        perturbations: vec![],
        orchestrator_script: vec![],
        answer_widget: None,
        world: None,
    };
    check_success(world, &task, None)
}
