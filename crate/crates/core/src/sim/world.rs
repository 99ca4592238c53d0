//! World runtime: screens, transitions, system events, and perturbations.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::Rect;
use crate::sim::perturb::{Perturbation, PopupSpec};
use crate::sim::ui::{UiNode, UiTree, VisualState};
use crate::sim::{Action, Direction, SimError};

pub const WORLD_SCHEMA: &str = "adec-world/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Toast,
    Notification,
    DialogDismissed,
}

/// Deterministic OS callback captured by the environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemEvent {
    pub kind: EventKind,
    pub payload: String,
    pub step_emitted: u64,
}

/// Result of applying one action. `ok = false` outcomes are recoverable
/// no-ops whose message feeds the tactical feedback loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub ok: bool,
    pub message: String,
    pub events: Vec<SystemEvent>,
}

// ---------------------------------------------------------------------------
// Spec document (serde side).
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct WorldSpecDoc {
    schema: String,
    name: String,
    pixel_size: (u32, u32),
    #[serde(default)]
    initial_screen: Option<String>,
    #[serde(default)]
    home_screen: Option<String>,
    #[serde(default)]
    app_drawer_screen: Option<String>,
    #[serde(default)]
    quick_settings_screen: Option<String>,
    #[serde(default)]
    apps: BTreeMap<String, String>,
    screens: Vec<ScreenSpec>,
    #[serde(default)]
    transitions: Vec<TransitionRule>,
    #[serde(default)]
    perturbations: Vec<Perturbation>,
    #[serde(default)]
    widgets: BTreeMap<String, String>,
    #[serde(default)]
    rng_seed: u64,
}

#[derive(Debug, Deserialize)]
struct ScreenSpec {
    id: String,
    app: String,
    root: NodeSpec,
}

#[derive(Debug, Deserialize)]
struct NodeSpec {
    class: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    desc: String,
    bounds: Rect,
    #[serde(default)]
    interactable: bool,
    #[serde(default)]
    editable: bool,
    #[serde(default)]
    widget: Option<String>,
    #[serde(default)]
    children: Vec<NodeSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PatternAction {
    Click,
    LongPress,
    InputText,
    Swipe,
    Scroll,
    OpenApp,
    NavigateBack,
    NavigateHome,
}

/// `(screen, action-pattern)` key of the transition table. `text` matches the
/// target node's text or description exactly, with `"*"` (or omission) as a
/// wildcard; `index` pins the rendered node index for screens with duplicate
/// labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ActionPattern {
    action: PatternAction,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    index: Option<u32>,
    #[serde(default)]
    direction: Option<Direction>,
    #[serde(default)]
    app: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct EventSpec {
    kind: EventKind,
    payload: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TransitionRule {
    screen: String,
    on: ActionPattern,
    #[serde(default)]
    goto: Option<String>,
    #[serde(default)]
    events: Vec<EventSpec>,
    #[serde(default)]
    set_widgets: BTreeMap<String, String>,
    #[serde(default)]
    message: Option<String>,
}

// ---------------------------------------------------------------------------
// Runtime.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Screen {
    app: String,
    /// Template hierarchy; indices are stable template positions that
    /// perturbation selectors and widget bindings refer to.
    template: UiTree,
    widget_bindings: BTreeMap<u32, String>,
}

#[derive(Debug, Clone)]
struct Scheduled {
    perturbation: Perturbation,
    applied: bool,
}

#[derive(Debug, Clone)]
struct HiddenWindow {
    screen: String,
    template_index: u32,
    until_step: u64,
}

/// The deterministic simulated device.
#[derive(Debug, Clone)]
pub struct World {
    name: String,
    pixel_size: (u32, u32),
    home_screen: Option<String>,
    app_drawer_screen: Option<String>,
    quick_settings_screen: Option<String>,
    apps: BTreeMap<String, String>,
    screens: BTreeMap<String, Screen>,
    transitions: Vec<TransitionRule>,
    widgets: BTreeMap<String, String>,
    current_screen: String,
    back_stack: Vec<String>,
    event_queue: VecDeque<SystemEvent>,
    step: u64,
    terminated: Option<String>,
    rng_seed: u64,
    perturbations: Vec<Scheduled>,
    hidden: Vec<HiddenWindow>,
    overlays: Vec<(String, PopupSpec)>,
}

/// Loads a world-spec document (`adec-world/1`) from disk and validates it.
pub fn load_world(path: &Path) -> Result<World, SimError> {
    let raw = std::fs::read_to_string(path)?;
    World::from_spec_str(&raw)
}

impl World {
    pub fn from_spec_str(raw: &str) -> Result<Self, SimError> {
        let doc: WorldSpecDoc =
            serde_json::from_str(raw).map_err(|e| SimError::parse("world", e.to_string()))?;
        if doc.schema != WORLD_SCHEMA {
            return Err(SimError::parse(
                "schema",
                format!("expected '{WORLD_SCHEMA}', found '{}'", doc.schema),
            ));
        }
        if doc.screens.is_empty() {
            return Err(SimError::validation(
                "screens",
                "at least one screen required",
            ));
        }

        let mut screens = BTreeMap::new();
        let mut widgets = doc.widgets.clone();
        for (i, spec) in doc.screens.iter().enumerate() {
            let path = format!("screens[{i}]");
            let mut bindings = BTreeMap::new();
            let root = build_template(&spec.root, &mut bindings);
            let mut template = UiTree::new(root);
            template.reindex();
            template.validate(&path)?;
            // Materialize default values for bound widgets.
            for (tpl_idx, key) in &bindings {
                if !widgets.contains_key(key) {
                    let default = template
                        .node(*tpl_idx)
                        .map(|n| n.text.clone())
                        .unwrap_or_default();
                    widgets.insert(key.clone(), default);
                }
            }
            if screens
                .insert(
                    spec.id.clone(),
                    Screen {
                        app: spec.app.clone(),
                        template,
                        widget_bindings: bindings,
                    },
                )
                .is_some()
            {
                return Err(SimError::validation(
                    path,
                    format!("duplicate screen id '{}'", spec.id),
                ));
            }
        }

        let require_screen = |path: &str, id: &str| -> Result<(), SimError> {
            if screens.contains_key(id) {
                Ok(())
            } else {
                Err(SimError::validation(path, format!("unknown screen '{id}'")))
            }
        };
        for (name, opt) in [
            ("home_screen", &doc.home_screen),
            ("app_drawer_screen", &doc.app_drawer_screen),
            ("quick_settings_screen", &doc.quick_settings_screen),
            ("initial_screen", &doc.initial_screen),
        ] {
            if let Some(id) = opt {
                require_screen(name, id)?;
            }
        }
        for (app, entry) in &doc.apps {
            require_screen(&format!("apps.{app}"), entry)?;
        }
        for (i, rule) in doc.transitions.iter().enumerate() {
            require_screen(&format!("transitions[{i}].screen"), &rule.screen)?;
            if let Some(target) = &rule.goto {
                require_screen(&format!("transitions[{i}].goto"), target)?;
            }
            for (j, ev) in rule.events.iter().enumerate() {
                if ev.kind == EventKind::Toast && ev.payload.is_empty() {
                    return Err(SimError::validation(
                        format!("transitions[{i}].events[{j}]"),
                        "toast events require a non-empty payload",
                    ));
                }
            }
        }

        let initial = doc
            .initial_screen
            .or_else(|| doc.home_screen.clone())
            .unwrap_or_else(|| doc.screens[0].id.clone());

        let mut world = World {
            name: doc.name,
            pixel_size: doc.pixel_size,
            home_screen: doc.home_screen,
            app_drawer_screen: doc.app_drawer_screen,
            quick_settings_screen: doc.quick_settings_screen,
            apps: doc.apps,
            screens,
            transitions: doc.transitions,
            widgets,
            current_screen: initial,
            back_stack: Vec::new(),
            event_queue: VecDeque::new(),
            step: 0,
            terminated: None,
            rng_seed: doc.rng_seed,
            perturbations: Vec::new(),
            hidden: Vec::new(),
            overlays: Vec::new(),
        };
        for (i, p) in doc.perturbations.iter().enumerate() {
            world
                .schedule_perturbation(p.clone())
                .map_err(|e| SimError::validation(format!("perturbations[{i}]"), e.to_string()))?;
        }
        Ok(world)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pixel_size(&self) -> (u32, u32) {
        self.pixel_size
    }

    pub fn seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.rng_seed = seed;
    }

    pub fn current_screen(&self) -> &str {
        &self.current_screen
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn terminated(&self) -> Option<&str> {
        self.terminated.as_deref()
    }

    pub fn widget(&self, key: &str) -> Option<&str> {
        self.widgets.get(key).map(|s| s.as_str())
    }

    pub fn set_widget(&mut self, key: &str, value: &str) {
        self.widgets.insert(key.to_string(), value.to_string());
    }

    /// Schedules a perturbation, validating that its screen and selector
    /// resolve against the current templates.
    pub fn schedule_perturbation(&mut self, p: Perturbation) -> Result<(), SimError> {
        let screen = self.screens.get(p.screen()).ok_or_else(|| {
            SimError::validation(
                "perturbation.screen",
                format!("unknown screen '{}'", p.screen()),
            )
        })?;
        if let Some(target) = p.target_text() {
            if find_template_node(&screen.template, target).is_none() {
                return Err(SimError::validation(
                    "perturbation.target_text",
                    format!("no node '{target}' in screen '{}'", p.screen()),
                ));
            }
        }
        self.perturbations.push(Scheduled {
            perturbation: p,
            applied: false,
        });
        Ok(())
    }

    /// Both modal views of the current observation. Pending perturbations
    /// whose trigger step has arrived are applied first (exactly once);
    /// repeated calls without intervening actions are identical.
    pub fn observe(&mut self) -> (VisualState, UiTree) {
        self.sync_perturbations();
        self.render()
    }

    /// Pure render of the current state, without perturbation syncing.
    pub fn peek(&self) -> (VisualState, UiTree) {
        self.render()
    }

    /// Applies one atomic action. Unmatched actions are recoverable no-ops
    /// with `ok = false`; actions after termination are hard errors.
    pub fn apply_action(&mut self, action: &Action) -> Result<StepOutcome, SimError> {
        if self.terminated.is_some() {
            return Err(SimError::Terminated);
        }
        self.sync_perturbations();

        let (ok, message) = self.dispatch(action);
        if ok {
            self.step += 1;
        }
        let events: Vec<SystemEvent> = self.event_queue.drain(..).collect();
        Ok(StepOutcome {
            ok,
            message,
            events,
        })
    }

    fn dispatch(&mut self, action: &Action) -> (bool, String) {
        match action {
            Action::Terminate { payload } => {
                self.terminated = Some(payload.clone());
                (true, "terminated".into())
            }
            Action::OpenApp { app_name } => match self.apps.get(app_name).cloned() {
                Some(entry) => {
                    self.goto(&entry, true);
                    (true, format!("opened {app_name}"))
                }
                None => (false, format!("unknown app '{app_name}'")),
            },
            Action::NavigateHome => match self.home_screen.clone() {
                Some(home) => {
                    self.current_screen = home;
                    self.back_stack.clear();
                    (true, "navigated home".into())
                }
                None => (false, "no home screen defined".into()),
            },
            Action::NavigateBack => {
                if let Some(pos) = self.top_overlay() {
                    let (_, popup) = self.overlays.remove(pos);
                    self.emit(EventKind::DialogDismissed, &popup.title);
                    (true, format!("dismissed '{}'", popup.title))
                } else if let Some(prev) = self.back_stack.pop() {
                    self.current_screen = prev;
                    (true, "navigated back".into())
                } else {
                    (false, "nothing to navigate back to".into())
                }
            }
            Action::Scroll { direction } => {
                let on_home = Some(self.current_screen.as_str()) == self.home_screen.as_deref();
                if on_home && *direction == Direction::Down {
                    if let Some(drawer) = self.app_drawer_screen.clone() {
                        self.goto(&drawer, true);
                        return (true, "opened app drawer".into());
                    }
                }
                if on_home && *direction == Direction::Up {
                    if let Some(qs) = self.quick_settings_screen.clone() {
                        self.goto(&qs, true);
                        return (true, "opened quick settings".into());
                    }
                }
                self.apply_table(action, None)
            }
            Action::Click { index } | Action::LongPress { index } => {
                let (_, tree) = self.render();
                let node = match tree.node(*index) {
                    Some(n) => n.clone(),
                    None => return (false, format!("index {index} out of range")),
                };
                if !node.interactable {
                    return (false, "non-interactable element".into());
                }
                if matches!(action, Action::Click { .. }) {
                    if let Some(pos) = self.top_overlay() {
                        let dismisses = self.overlays[pos]
                            .1
                            .dismiss_text
                            .as_deref()
                            .is_some_and(|d| d == node.text || d == node.content_desc);
                        if dismisses {
                            let (_, popup) = self.overlays.remove(pos);
                            self.emit(EventKind::DialogDismissed, &popup.title);
                            return (true, format!("dismissed '{}'", popup.title));
                        }
                    }
                }
                self.apply_table(action, Some(&node))
            }
            Action::Swipe { index, .. } => {
                let (_, tree) = self.render();
                let node = match tree.node(*index) {
                    Some(n) => n.clone(),
                    None => return (false, format!("index {index} out of range")),
                };
                if !node.interactable {
                    return (false, "non-interactable element".into());
                }
                self.apply_table(action, Some(&node))
            }
            Action::InputText { index, text } => {
                let (_, tree) = self.render();
                let node = match tree.node(*index) {
                    Some(n) => n.clone(),
                    None => return (false, format!("index {index} out of range")),
                };
                if !node.interactable {
                    return (false, "non-interactable element".into());
                }
                if !node.editable {
                    return (false, "target not editable".into());
                }
                if let Some(key) = self.rendered_widget_binding(&node) {
                    self.widgets.insert(key, text.clone());
                }
                // Typing always lands; the table may add extra effects.
                let (matched, msg) = self.apply_table(action, Some(&node));
                (true, if matched { msg } else { "text entered".into() })
            }
        }
    }

    /// Consults the transition table; returns the no-op failure message when
    /// nothing matches.
    fn apply_table(&mut self, action: &Action, target: Option<&UiNode>) -> (bool, String) {
        let rule = self
            .transitions
            .iter()
            .find(|r| r.screen == self.current_screen && pattern_matches(&r.on, action, target))
            .cloned();
        match rule {
            Some(rule) => {
                for ev in &rule.events {
                    let payload = self.substitute(&ev.payload);
                    self.emit(ev.kind, &payload);
                }
                let updates: Vec<(String, String)> = rule
                    .set_widgets
                    .iter()
                    .map(|(k, v)| (k.clone(), self.substitute(v)))
                    .collect();
                for (k, v) in updates {
                    self.widgets.insert(k, v);
                }
                if let Some(goto) = &rule.goto {
                    self.goto(goto, true);
                }
                let msg = rule.message.clone().unwrap_or_else(|| "ok".into());
                (true, msg)
            }
            None => {
                let label = target
                    .map(|n| {
                        if n.text.is_empty() {
                            n.content_desc.clone()
                        } else {
                            n.text.clone()
                        }
                    })
                    .unwrap_or_default();
                let verb = match action {
                    Action::Click { .. } => "click",
                    Action::LongPress { .. } => "long_press",
                    Action::InputText { .. } => "input_text",
                    Action::Swipe { .. } => "swipe",
                    Action::Scroll { .. } => "scroll",
                    _ => "action",
                };
                (false, format!("no transition for {verb} on '{label}'"))
            }
        }
    }

    /// Replaces `{key}` placeholders with current widget values.
    fn substitute(&self, template: &str) -> String {
        let mut out = template.to_string();
        for (key, value) in &self.widgets {
            let pat = format!("{{{key}}}");
            if out.contains(&pat) {
                out = out.replace(&pat, value);
            }
        }
        out
    }

    fn goto(&mut self, screen: &str, push: bool) {
        if screen != self.current_screen {
            if push {
                self.back_stack.push(self.current_screen.clone());
            }
            self.current_screen = screen.to_string();
        }
    }

    fn emit(&mut self, kind: EventKind, payload: &str) {
        self.event_queue.push_back(SystemEvent {
            kind,
            payload: payload.to_string(),
            step_emitted: self.step,
        });
    }

    fn top_overlay(&self) -> Option<usize> {
        self.overlays
            .iter()
            .rposition(|(s, _)| s == &self.current_screen)
    }

    fn sync_perturbations(&mut self) {
        let step = self.step;
        let due: Vec<Perturbation> = self
            .perturbations
            .iter_mut()
            .filter(|s| !s.applied && s.perturbation.trigger_step() <= step)
            .map(|s| {
                s.applied = true;
                s.perturbation.clone()
            })
            .collect();
        for p in due {
            self.apply_perturbation(&p);
        }
    }

    fn apply_perturbation(&mut self, p: &Perturbation) {
        match p {
            Perturbation::RelocateNode {
                screen,
                target_text,
                bounds,
                ..
            } => {
                if let Some(s) = self.screens.get_mut(screen) {
                    if let Some(idx) = find_template_node(&s.template, target_text) {
                        set_template_bounds(&mut s.template.root, idx, *bounds);
                    }
                }
            }
            Perturbation::RenameLabel {
                screen,
                target_text,
                new_text,
                ..
            } => {
                if let Some(s) = self.screens.get_mut(screen) {
                    if let Some(idx) = find_template_node(&s.template, target_text) {
                        set_template_text(&mut s.template.root, idx, new_text);
                    }
                }
            }
            Perturbation::InjectPopup { screen, popup, .. } => {
                self.overlays.push((screen.clone(), popup.clone()));
            }
            Perturbation::DelayRender {
                screen,
                target_text,
                trigger_step,
                steps,
            } => {
                if let Some(s) = self.screens.get(screen) {
                    if let Some(idx) = find_template_node(&s.template, target_text) {
                        self.hidden.push(HiddenWindow {
                            screen: screen.clone(),
                            template_index: idx,
                            until_step: trigger_step + steps,
                        });
                    }
                }
            }
        }
    }

    /// Template index of a rendered node, recovered through identity of
    /// (class, bounds, editable) within the current screen.
    fn rendered_widget_binding(&self, rendered: &UiNode) -> Option<String> {
        let screen = self.screens.get(&self.current_screen)?;
        for tpl in screen.template.flatten() {
            if tpl.bounds == rendered.bounds
                && tpl.class_name == rendered.class_name
                && tpl.editable == rendered.editable
            {
                if let Some(key) = screen.widget_bindings.get(&tpl.index) {
                    return Some(key.clone());
                }
            }
        }
        None
    }

    fn render(&self) -> (VisualState, UiTree) {
        let screen = self
            .screens
            .get(&self.current_screen)
            .expect("current screen validated at load");

        let hidden: Vec<u32> = self
            .hidden
            .iter()
            .filter(|h| h.screen == self.current_screen && self.step < h.until_step)
            .map(|h| h.template_index)
            .collect();

        let mut root = clone_visible(
            &screen.template.root,
            &hidden,
            &screen.widget_bindings,
            &self.widgets,
        )
        .expect("screen root is never hidden");

        // Popup overlays render at the front of pre-order, i.e. as the first
        // child of the root frame. Modal overlays suppress everything below.
        let overlay = self.top_overlay().map(|i| self.overlays[i].1.clone());
        if let Some(popup) = &overlay {
            if popup.modal {
                fn suppress(node: &mut UiNode) {
                    node.interactable = false;
                    for c in &mut node.children {
                        suppress(c);
                    }
                }
                suppress(&mut root);
            }
            root.children
                .insert(0, popup_subtree(popup, self.pixel_size));
        }

        // Elements fully outside the viewport are present in the hierarchy
        // but cannot be interacted with or read off the display.
        fn apply_viewport(node: &mut UiNode, pixel: (u32, u32)) {
            if !node.bounds.intersects_viewport(pixel) {
                node.interactable = false;
            }
            for c in &mut node.children {
                apply_viewport(c, pixel);
            }
        }
        apply_viewport(&mut root, self.pixel_size);

        let mut tree = UiTree::new(root);
        tree.reindex();

        let mut visible_texts = std::collections::BTreeSet::new();
        for node in tree.flatten() {
            if node.bounds.intersects_viewport(self.pixel_size) {
                if !node.text.is_empty() {
                    visible_texts.insert(node.text.clone());
                }
                if !node.content_desc.is_empty() {
                    visible_texts.insert(node.content_desc.clone());
                }
            }
        }

        let mut widget_states = BTreeMap::new();
        for (tpl_idx, key) in &screen.widget_bindings {
            if hidden.contains(tpl_idx) {
                continue;
            }
            if let Some(value) = self.widgets.get(key) {
                widget_states.insert(key.clone(), value.clone());
            }
        }

        let visual = VisualState {
            screen_id: self.current_screen.clone(),
            app_name: screen.app.clone(),
            visible_texts,
            widget_states,
            pixel_size: self.pixel_size,
        };
        (visual, tree)
    }
}

fn build_template(spec: &NodeSpec, bindings: &mut BTreeMap<u32, String>) -> UiNode {
    // Indices are assigned by reindex() after the full tree is built; widget
    // bindings are collected against those final pre-order positions, so the
    // traversal order here must match reindex()'s.
    fn walk(spec: &NodeSpec, next: &mut u32, bindings: &mut BTreeMap<u32, String>) -> UiNode {
        let index = *next;
        *next += 1;
        if let Some(key) = &spec.widget {
            bindings.insert(index, key.clone());
        }
        UiNode {
            index,
            class_name: spec.class.clone(),
            text: spec.text.clone(),
            content_desc: spec.desc.clone(),
            bounds: spec.bounds,
            interactable: spec.interactable,
            editable: spec.editable,
            children: spec
                .children
                .iter()
                .map(|c| walk(c, next, bindings))
                .collect(),
        }
    }
    let mut next = 0;
    walk(spec, &mut next, bindings)
}

fn find_template_node(tree: &UiTree, target_text: &str) -> Option<u32> {
    tree.flatten()
        .into_iter()
        .find(|n| n.text == target_text || n.content_desc == target_text)
        .map(|n| n.index)
}

fn set_template_bounds(node: &mut UiNode, index: u32, bounds: Rect) {
    if node.index == index {
        node.bounds = bounds;
        return;
    }
    for c in &mut node.children {
        set_template_bounds(c, index, bounds);
    }
}

fn set_template_text(node: &mut UiNode, index: u32, text: &str) {
    if node.index == index {
        node.text = text.to_string();
        return;
    }
    for c in &mut node.children {
        set_template_text(c, index, text);
    }
}

/// Deep-clones the template, dropping hidden subtrees and substituting
/// widget-bound node text with the live widget value.
fn clone_visible(
    node: &UiNode,
    hidden: &[u32],
    bindings: &BTreeMap<u32, String>,
    widgets: &BTreeMap<String, String>,
) -> Option<UiNode> {
    if hidden.contains(&node.index) {
        return None;
    }
    let mut out = node.clone();
    if let Some(key) = bindings.get(&node.index) {
        if let Some(value) = widgets.get(key) {
            out.text = value.clone();
        }
    }
    out.children = node
        .children
        .iter()
        .filter_map(|c| clone_visible(c, hidden, bindings, widgets))
        .collect();
    Some(out)
}

fn popup_subtree(popup: &PopupSpec, pixel: (u32, u32)) -> UiNode {
    let (w, h) = (pixel.0, pixel.1);
    let frame = Rect::new(w / 8, h / 3, w - w / 8, h / 3 + h / 4);
    let title = Rect::new(
        frame.left + 20,
        frame.top + 20,
        frame.right - 20,
        frame.top + 120,
    );
    let message = Rect::new(
        frame.left + 20,
        frame.top + 140,
        frame.right - 20,
        frame.top + 300,
    );
    let button = Rect::new(
        frame.left + 20,
        frame.bottom - 140,
        frame.right - 20,
        frame.bottom - 20,
    );

    let mut children = vec![
        UiNode {
            index: 0,
            class_name: "android.widget.TextView".into(),
            text: popup.title.clone(),
            content_desc: String::new(),
            bounds: title,
            interactable: false,
            editable: false,
            children: vec![],
        },
        UiNode {
            index: 0,
            class_name: "android.widget.TextView".into(),
            text: popup.message.clone(),
            content_desc: String::new(),
            bounds: message,
            interactable: false,
            editable: false,
            children: vec![],
        },
    ];
    if let Some(dismiss) = &popup.dismiss_text {
        children.push(UiNode {
            index: 0,
            class_name: "android.widget.Button".into(),
            text: dismiss.clone(),
            content_desc: String::new(),
            bounds: button,
            interactable: true,
            editable: false,
            children: vec![],
        });
    }
    UiNode {
        index: 0,
        class_name: "android.app.Dialog".into(),
        text: String::new(),
        content_desc: "popup dialog".into(),
        bounds: frame,
        interactable: false,
        editable: false,
        children,
    }
}

fn pattern_matches(pattern: &ActionPattern, action: &Action, target: Option<&UiNode>) -> bool {
    let kind_ok = matches!(
        (&pattern.action, action),
        (PatternAction::Click, Action::Click { .. })
            | (PatternAction::LongPress, Action::LongPress { .. })
            | (PatternAction::InputText, Action::InputText { .. })
            | (PatternAction::Swipe, Action::Swipe { .. })
            | (PatternAction::Scroll, Action::Scroll { .. })
            | (PatternAction::OpenApp, Action::OpenApp { .. })
            | (PatternAction::NavigateBack, Action::NavigateBack)
            | (PatternAction::NavigateHome, Action::NavigateHome)
    );
    if !kind_ok {
        return false;
    }
    if let Some(text) = &pattern.text {
        if text != "*" {
            let matched = target
                .map(|n| &n.text == text || &n.content_desc == text)
                .unwrap_or(false);
            if !matched {
                return false;
            }
        }
    }
    if let Some(index) = pattern.index {
        if target.map(|n| n.index) != Some(index) {
            return false;
        }
    }
    if let Some(dir) = &pattern.direction {
        let action_dir = match action {
            Action::Swipe { direction, .. } | Action::Scroll { direction } => Some(direction),
            _ => None,
        };
        if action_dir != Some(dir) {
            return false;
        }
    }
    if let Some(app) = &pattern.app {
        let action_app = match action {
            Action::OpenApp { app_name } => Some(app_name),
            _ => None,
        };
        if action_app.map(|a| a == app) != Some(true) {
            return false;
        }
    }
    true
}
