//! Deterministic oracle backends.
//!
//! These stand in for the three models during tests and benches: the designer
//! plans by breadth-first search over the app's workflow graph, the
//! orchestrator aligns by compiling expectations into checkable features and
//! suggests through a small rule engine (optionally overridden by scripted
//! scenario entries), and the scorer ranks candidates by lexical similarity.
//! Everything is a pure function of its inputs plus explicit internal state,
//! so replays are bit-identical.

use std::collections::{BTreeMap, VecDeque};
use std::sync::OnceLock;

use regex::Regex;

use crate::backends::{
    designer_payload, BackendCallRecord, BackendError, Backends, Designer, FailureContext,
    LatencyParams, Location, MetaInstruction, MetaStatus, Milestone, NodeScorer, Orchestrator,
    Plan, Recorder, Role, ScoredCandidates,
};
use crate::grounding::extract_target;
use crate::sim::{AppMetadata, AppSchema, ScriptEntry, TaskSpec, UiNode, UiTree, VisualState};
use crate::tokens::TokenCounter;

/// App name that marks the launcher/home surface in world fixtures.
pub const HOME_APP: &str = "Launcher";

/// Feedback marker the pilot passes once the milestone queue is depleted and
/// the termination cascade is disabled: the backend must decide whether to
/// emit an explicit terminate.
pub const DEPLETION_FEEDBACK: &str = "milestone queue depleted; emit terminate when done";

/// Static success token injected for completed operation tasks.
pub const SUCCESS_TOKEN: &str = "TASK_COMPLETE";

/// Builds the oracle backend bundle for one task.
pub fn oracle_backends(task: &TaskSpec, latency: LatencyParams, counter: TokenCounter) -> Backends {
    let recorder = Recorder::new();
    Backends {
        designer: Box::new(OracleDesigner::new(recorder.clone(), latency, counter)),
        orchestrator: Box::new(OracleOrchestrator::new(
            task.orchestrator_script.clone(),
            task.answer_widget.clone(),
            recorder.clone(),
            latency,
            counter,
        )),
        scorer: Box::new(OracleScorer::new(recorder.clone(), latency, counter)),
        recorder,
    }
}

// ---------------------------------------------------------------------------
// Designer: BFS over the workflow graph.
// ---------------------------------------------------------------------------

pub struct OracleDesigner {
    recorder: Recorder,
    latency: LatencyParams,
    counter: TokenCounter,
}

impl OracleDesigner {
    pub fn new(recorder: Recorder, latency: LatencyParams, counter: TokenCounter) -> Self {
        Self {
            recorder,
            latency,
            counter,
        }
    }

    fn resolve_goal<'a>(
        &self,
        instruction: &str,
        metadata: &'a AppMetadata,
    ) -> Result<(&'a AppSchema, String, BTreeMap<String, String>), BackendError> {
        for app in &metadata.apps {
            for goal in &app.goals {
                let re = Regex::new(&goal.pattern).map_err(|e| {
                    BackendError::PlanningInfeasible(format!("bad goal pattern: {e}"))
                })?;
                if let Some(caps) = re.captures(instruction) {
                    let mut bindings = BTreeMap::new();
                    for name in re.capture_names().flatten() {
                        if let Some(m) = caps.name(name) {
                            bindings.insert(name.to_string(), m.as_str().to_string());
                        }
                    }
                    return Ok((app, goal.target.clone(), bindings));
                }
            }
        }
        Err(BackendError::PlanningInfeasible(format!(
            "no goal rule matches instruction '{instruction}'"
        )))
    }
}

/// Shortest edge path from `start` to `target`, ties broken by declaration
/// order.
fn bfs_path<'a>(app: &'a AppSchema, target: &str) -> Option<Vec<&'a crate::sim::WorkflowEdge>> {
    let mut queue = VecDeque::new();
    let mut parent: BTreeMap<&str, (&str, usize)> = BTreeMap::new();
    queue.push_back("start");
    parent.insert("start", ("start", usize::MAX));
    while let Some(state) = queue.pop_front() {
        if state == target {
            let mut edges = Vec::new();
            let mut cur = state;
            while cur != "start" {
                let (prev, edge_idx) = parent[cur];
                edges.push(&app.workflow[edge_idx]);
                cur = prev;
            }
            edges.reverse();
            return Some(edges);
        }
        for (i, edge) in app.workflow.iter().enumerate() {
            if edge.from == state && !parent.contains_key(edge.to.as_str()) {
                parent.insert(&edge.to, (state, i));
                queue.push_back(&edge.to);
            }
        }
    }
    None
}

fn substitute_bindings(
    template: &str,
    bindings: &BTreeMap<String, String>,
) -> Result<String, BackendError> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\{([a-z][a-z0-9_]*)\}").unwrap());
    let mut out = template.to_string();
    for caps in re.captures_iter(template) {
        let name = &caps[1];
        let value = bindings.get(name).ok_or_else(|| {
            BackendError::PlanningInfeasible(format!(
                "workflow template references unbound capture '{{{name}}}'"
            ))
        })?;
        out = out.replace(&format!("{{{name}}}"), value);
    }
    Ok(out)
}

impl Designer for OracleDesigner {
    fn plan(
        &mut self,
        instruction: &str,
        failure: Option<&FailureContext>,
        metadata: &AppMetadata,
    ) -> Result<Plan, BackendError> {
        if instruction.trim().is_empty() {
            return Err(BackendError::EmptyInstruction);
        }
        let payload = designer_payload(instruction, failure, metadata);

        let (app, target, bindings) = self.resolve_goal(instruction, metadata)?;
        let edges = bfs_path(app, &target).ok_or_else(|| {
            BackendError::PlanningInfeasible(format!(
                "no workflow path from 'start' to '{target}' in app '{}'",
                app.name
            ))
        })?;
        let mut milestones = Vec::with_capacity(edges.len() + 1);
        if failure.is_some() {
            // Strategic restart: recover to a known state, then re-derive the
            // full trajectory.
            milestones.push(Milestone::new(
                "Navigate Home.",
                "The 'Home screen' marker is visible.",
            ));
        }
        for edge in edges {
            milestones.push(Milestone::new(
                substitute_bindings(&edge.instruction, &bindings)?,
                substitute_bindings(&edge.expectation, &bindings)?,
            ));
        }
        let plan = Plan::new(milestones);

        let completion = serde_json::to_string(&plan.milestones).expect("milestones serialize");
        self.recorder.push(BackendCallRecord {
            role: Role::Designer,
            location: Location::Cloud,
            prompt_tokens: self.counter.count(&payload),
            completion_tokens: self.counter.count(&completion),
            payload_bytes: payload.len() as u64,
            wall_latency_model_s: self.latency.cloud_text_s,
        });
        Ok(plan)
    }
}

// ---------------------------------------------------------------------------
// Orchestrator: graded alignment + rule-engine suggestions.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Feature {
    App(String),
    Text(String),
    Widget(String, String),
}

/// Compiles an expectation sentence into checkable visual features: the
/// `the <Name> app` pattern, quoted texts, and dotted `key=value` widget
/// states. An expectation with no extractable features scores the neutral
/// 0.5, same as an ablated (empty) expectation.
fn compile_features(expectation: &str) -> Vec<Feature> {
    static APP: OnceLock<Regex> = OnceLock::new();
    static QUOTED: OnceLock<Regex> = OnceLock::new();
    static WIDGET: OnceLock<Regex> = OnceLock::new();
    let app_re = APP.get_or_init(|| Regex::new(r"(?i)\bthe ([A-Za-z0-9 ]+?) app\b").unwrap());
    let quoted_re = QUOTED.get_or_init(|| Regex::new(r#"'([^']+)'|"([^"]+)""#).unwrap());
    let widget_re = WIDGET.get_or_init(|| {
        Regex::new(r"\b([a-z][a-z0-9_]*(?:\.[a-z0-9_]+)+)=([A-Za-z0-9_-]+)").unwrap()
    });

    let mut features = Vec::new();
    if let Some(caps) = app_re.captures(expectation) {
        features.push(Feature::App(caps[1].trim().to_string()));
    }
    for caps in quoted_re.captures_iter(expectation) {
        let text = caps
            .get(1)
            .or_else(|| caps.get(2))
            .map(|m| m.as_str().to_string());
        if let Some(t) = text {
            features.push(Feature::Text(t));
        }
    }
    for caps in widget_re.captures_iter(expectation) {
        features.push(Feature::Widget(caps[1].to_string(), caps[2].to_string()));
    }
    features
}

fn feature_matched(feature: &Feature, visual: &VisualState) -> bool {
    match feature {
        Feature::App(name) => visual.app_name.eq_ignore_ascii_case(name),
        Feature::Text(text) => {
            let needle = text.to_lowercase();
            visual
                .visible_texts
                .iter()
                .any(|t| t.to_lowercase().contains(&needle))
                || visual
                    .widget_states
                    .values()
                    .any(|v| v.to_lowercase().contains(&needle))
        }
        Feature::Widget(key, value) => {
            visual.widget_states.get(key).map(String::as_str) == Some(value)
        }
    }
}

/// Graded alignment: fraction of the expectation's required features present
/// in the visual state. Pure in `(visual, expectation)`.
pub fn oracle_alignment(visual: &VisualState, expectation: &str) -> f64 {
    if expectation.trim().is_empty() {
        return 0.5;
    }
    let features = compile_features(expectation);
    if features.is_empty() {
        return 0.5;
    }
    let matched = features
        .iter()
        .filter(|f| feature_matched(f, visual))
        .count();
    matched as f64 / features.len() as f64
}

pub struct OracleOrchestrator {
    script: Vec<ScriptEntry>,
    uses: Vec<u32>,
    last_suggestion: Option<String>,
    answer_widget: Option<String>,
    recorder: Recorder,
    latency: LatencyParams,
    counter: TokenCounter,
}

impl OracleOrchestrator {
    pub fn new(
        script: Vec<ScriptEntry>,
        answer_widget: Option<String>,
        recorder: Recorder,
        latency: LatencyParams,
        counter: TokenCounter,
    ) -> Self {
        let uses = vec![0; script.len()];
        Self {
            script,
            uses,
            last_suggestion: None,
            answer_widget,
            recorder,
            latency,
            counter,
        }
    }

    fn record_call(&self, prompt: &str, completion: &str) {
        self.recorder.push(BackendCallRecord {
            role: Role::Orchestrator,
            location: Location::Edge,
            prompt_tokens: self.counter.count(prompt),
            completion_tokens: self.counter.count(completion),
            payload_bytes: prompt.len() as u64,
            wall_latency_model_s: self.latency.edge_s,
        });
    }

    fn script_match(
        &mut self,
        visual: &VisualState,
        milestone: &Milestone,
        feedback: Option<&str>,
        depleted: bool,
    ) -> Option<ScriptEntry> {
        for (i, entry) in self.script.iter().enumerate() {
            if let Some(max) = entry.max_uses {
                if self.uses[i] >= max {
                    continue;
                }
            }
            if entry.post_depletion != depleted {
                continue;
            }
            if let Some(m) = &entry.milestone_contains {
                if !milestone.instruction.contains(m.as_str()) {
                    continue;
                }
            }
            if let Some(s) = &entry.screen {
                if &visual.screen_id != s {
                    continue;
                }
            }
            let has_feedback = feedback.is_some() && !depleted;
            if let Some(required) = entry.requires_feedback {
                if required != has_feedback {
                    continue;
                }
            }
            if let Some(pattern) = &entry.feedback_contains {
                if !feedback.is_some_and(|f| f.contains(pattern.as_str())) {
                    continue;
                }
            }
            self.uses[i] += 1;
            return Some(entry.clone());
        }
        None
    }

    fn scripted_meta(&self, entry: &ScriptEntry, visual: &VisualState) -> MetaInstruction {
        let text = entry.suggest.clone().unwrap_or_default();
        let mut meta = MetaInstruction::ongoing(text, visual.summary_line(), visual.pixel_size);
        match entry.status.as_deref() {
            Some("answer_ready") => {
                meta.status = MetaStatus::AnswerReady;
                meta.answer_payload = self.entry_answer(entry, visual);
            }
            Some("finished") => meta.status = MetaStatus::Finished,
            _ => {}
        }
        meta
    }

    fn entry_answer(&self, entry: &ScriptEntry, visual: &VisualState) -> Option<String> {
        if let Some(text) = &entry.answer_text {
            return Some(text.clone());
        }
        let key = entry
            .answer_widget
            .as_ref()
            .or(self.answer_widget.as_ref())?;
        visual.widget_states.get(key).cloned()
    }

    /// Default answer lookup: the task-declared answer widget read off the
    /// current screen.
    fn default_answer(&self, visual: &VisualState) -> Option<String> {
        let key = self.answer_widget.as_ref()?;
        visual.widget_states.get(key).cloned()
    }

    /// Rule-based suggestion for the no-feedback path.
    fn base_rule(&self, visual: &VisualState, milestone: &Milestone) -> String {
        static OPEN_APP: OnceLock<Regex> = OnceLock::new();
        static FILL: OnceLock<Regex> = OnceLock::new();
        static FIELD: OnceLock<Regex> = OnceLock::new();
        static QUOTED: OnceLock<Regex> = OnceLock::new();
        let open_re = OPEN_APP.get_or_init(|| {
            Regex::new(r#"(?i)\bopen (?:the )?['"]?([A-Za-z0-9 ]+?)['"]? app\b"#).unwrap()
        });
        let fill_re = FILL.get_or_init(|| Regex::new(r"(?i)^(?:fill in|type|enter)\b").unwrap());
        let field_re =
            FIELD.get_or_init(|| Regex::new(r"(?i)\bthe '?([A-Za-z0-9 ]+?)'? field\b").unwrap());
        let quoted_re = QUOTED.get_or_init(|| Regex::new(r"'([^']+)'").unwrap());

        let instruction = &milestone.instruction;
        if let Some(caps) = open_re.captures(instruction) {
            let app = caps[1].trim().to_string();
            if !visual.app_name.eq_ignore_ascii_case(&app) {
                return format!("open_app {app}");
            }
        }
        if instruction.to_lowercase().contains("navigate home") {
            return "navigate_home".into();
        }
        if fill_re.is_match(instruction) {
            if let Some(value) = quoted_re.captures(instruction).map(|c| c[1].to_string()) {
                let field = field_re
                    .captures(instruction)
                    .or_else(|| field_re.captures(&milestone.expectation))
                    .map(|c| c[1].to_string());
                if let Some(field) = field {
                    return format!("type '{value}' into the {field} field");
                }
            }
        }
        if let Some(caps) = quoted_re.captures(instruction) {
            return format!("tap {}", &caps[1]);
        }
        if instruction.to_lowercase().contains("scroll") {
            return "scroll down".into();
        }
        String::new()
    }

    /// Recovery suggestion for the feedback path: dismiss blockers, try the
    /// visible confirm control, fall back to exploration. Guaranteed to
    /// differ from the previous suggestion.
    fn recovery_rule(&self, visual: &VisualState, feedback: &str) -> String {
        let mut candidates: Vec<String> = Vec::new();
        if feedback.contains("no interactable") {
            candidates.extend([
                "navigate_back".into(),
                "scroll down".into(),
                "navigate_home".into(),
            ]);
        } else {
            const CONFIRM: [&str; 5] = ["OK", "Done", "Confirm", "Apply", "Submit"];
            let failed_target = extract_quoted(feedback);
            for synonym in CONFIRM {
                if Some(synonym) == failed_target.as_deref() {
                    continue;
                }
                if visual.visible_texts.iter().any(|t| t == synonym) {
                    candidates.push(format!("tap {synonym}"));
                    break;
                }
            }
            if visual.app_name == HOME_APP {
                candidates.push("scroll down".into());
            }
            candidates.extend([
                "scroll down".into(),
                "navigate_back".into(),
                "navigate_home".into(),
            ]);
        }
        candidates
            .into_iter()
            .find(|c| Some(c.as_str()) != self.last_suggestion.as_deref())
            .unwrap_or_else(|| "navigate_home".into())
    }
}

fn extract_quoted(text: &str) -> Option<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"'([^']+)'").unwrap());
    re.captures(text).map(|c| c[1].to_string())
}

impl Orchestrator for OracleOrchestrator {
    fn align(&mut self, visual: &VisualState, milestone: &Milestone) -> Result<f64, BackendError> {
        let score = oracle_alignment(visual, &milestone.expectation);
        let prompt = format!("{} :: {}", visual.summary_line(), milestone.expectation);
        self.record_call(&prompt, "aligned");
        Ok(score)
    }

    fn suggest(
        &mut self,
        visual: &VisualState,
        milestone: &Milestone,
        feedback: Option<&str>,
        history: &[String],
    ) -> Result<MetaInstruction, BackendError> {
        let depleted = feedback == Some(DEPLETION_FEEDBACK);

        if let Some(entry) = self.script_match(visual, milestone, feedback, depleted) {
            let meta = self.scripted_meta(&entry, visual);
            self.last_suggestion = Some(meta.text.clone());
            self.record_call(
                &format!("{} :: {:?}", milestone.instruction, history),
                &meta.text,
            );
            return Ok(meta);
        }

        let text = if depleted {
            // No script drives the ending: report completion explicitly.
            match self.default_answer(visual) {
                Some(answer) => format!("terminate '{answer}'"),
                None => format!("terminate '{SUCCESS_TOKEN}'"),
            }
        } else if feedback.is_none() {
            if oracle_alignment(visual, &milestone.expectation) >= 1.0 {
                return Err(BackendError::ContractViolation(
                    "suggest() called on an already-satisfied milestone".into(),
                ));
            }
            self.base_rule(visual, milestone)
        } else {
            self.recovery_rule(visual, feedback.unwrap_or_default())
        };

        let meta = MetaInstruction::ongoing(text, visual.summary_line(), visual.pixel_size);
        self.last_suggestion = Some(meta.text.clone());
        self.record_call(
            &format!("{} :: {:?}", milestone.instruction, history),
            &meta.text,
        );
        Ok(meta)
    }

    fn answer(
        &mut self,
        visual: &VisualState,
        _milestone: &Milestone,
    ) -> Result<Option<String>, BackendError> {
        let answer = self.default_answer(visual);
        self.record_call(&visual.summary_line(), answer.as_deref().unwrap_or(""));
        Ok(answer)
    }
}

// ---------------------------------------------------------------------------
// Scorer: normalized lexical similarity.
// ---------------------------------------------------------------------------

pub struct OracleScorer {
    recorder: Recorder,
    latency: LatencyParams,
    counter: TokenCounter,
}

impl OracleScorer {
    pub fn new(recorder: Recorder, latency: LatencyParams, counter: TokenCounter) -> Self {
        Self {
            recorder,
            latency,
            counter,
        }
    }
}

fn lexical_tokens(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Jaccard similarity over lowercased alphanumeric token sets.
fn jaccard(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let sa: std::collections::BTreeSet<&String> = a.iter().collect();
    let sb: std::collections::BTreeSet<&String> = b.iter().collect();
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    inter as f64 / union as f64
}

impl NodeScorer for OracleScorer {
    fn score_candidates(
        &mut self,
        meta: &MetaInstruction,
        tree: &UiTree,
        pruned: &[&UiNode],
    ) -> Result<ScoredCandidates, BackendError> {
        let target = extract_target(&meta.text);
        let target_tokens = lexical_tokens(&target);
        let sims: Vec<f64> = pruned
            .iter()
            .map(|n| jaccard(&target_tokens, &lexical_tokens(&n.lexical_surface())))
            .collect();
        let total: f64 = sims.iter().sum();
        let (log_probs, anchored) = if total > 0.0 {
            (
                sims.iter()
                    .map(|s| (s / total).max(f64::MIN_POSITIVE).ln())
                    .collect(),
                true,
            )
        } else {
            // All-zero similarities normalize to the uniform distribution.
            let uniform = (1.0 / pruned.len() as f64).ln();
            (vec![uniform; pruned.len()], false)
        };

        let prompt = format!("{}\n{}", meta.text, tree.to_prompt_lines());
        self.recorder.push(BackendCallRecord {
            role: Role::Executor,
            location: Location::Edge,
            prompt_tokens: self.counter.count(&prompt),
            completion_tokens: 1,
            payload_bytes: prompt.len() as u64,
            wall_latency_model_s: self.latency.edge_s,
        });
        Ok(ScoredCandidates {
            log_probs,
            anchored,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use std::collections::{BTreeMap, BTreeSet};

    fn visual(app: &str, texts: &[&str]) -> VisualState {
        VisualState {
            screen_id: "s".into(),
            app_name: app.into(),
            visible_texts: texts.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
            widget_states: BTreeMap::new(),
            pixel_size: (1080, 2400),
        }
    }

    #[test]
    fn alignment_full_match_on_app_expectation() {
        let v = visual("Contacts", &["Contacts", "New contact"]);
        assert_eq!(
            oracle_alignment(&v, "The Contacts app main list is visible."),
            1.0
        );
        let home = visual(HOME_APP, &["Home screen"]);
        assert_eq!(
            oracle_alignment(&home, "The Contacts app main list is visible."),
            0.0
        );
    }

    #[test]
    fn alignment_is_graded_by_feature_fraction() {
        let v = visual("Dashboard", &["Alpha", "Beta"]);
        let expectation = "The panel shows 'Alpha', 'Beta', 'Gamma' and 'Delta'.";
        assert_eq!(oracle_alignment(&v, expectation), 0.5);
    }

    #[test]
    fn alignment_of_empty_expectation_is_neutral() {
        let v = visual("Contacts", &["Contacts"]);
        assert_eq!(oracle_alignment(&v, ""), 0.5);
    }

    fn node(index: u32, text: &str) -> UiNode {
        UiNode {
            index,
            class_name: "android.widget.Button".into(),
            text: text.into(),
            content_desc: String::new(),
            bounds: Rect::new(0, index * 10, 100, index * 10 + 10),
            interactable: true,
            editable: false,
            children: vec![],
        }
    }

    fn tree_of(texts: &[&str]) -> UiTree {
        let mut root = node(0, "");
        root.class_name = "android.widget.FrameLayout".into();
        root.interactable = false;
        root.children = texts.iter().map(|t| node(0, t)).collect();
        let mut tree = UiTree::new(root);
        tree.reindex();
        tree
    }

    fn score(meta_text: &str, texts: &[&str]) -> ScoredCandidates {
        let tree = tree_of(texts);
        let pruned = crate::grounding::prune_candidates(&tree);
        let mut scorer = OracleScorer::new(
            Recorder::new(),
            LatencyParams::default(),
            TokenCounter::default(),
        );
        let meta = MetaInstruction::ongoing(meta_text, "", (1080, 2400));
        scorer.score_candidates(&meta, &tree, &pruned).unwrap()
    }

    #[test]
    fn unique_lexical_match_gets_maximum_score() {
        let scored = score("tap Save", &["Cancel", "Save", "Name"]);
        let max = scored
            .log_probs
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(scored.log_probs[1], max);
        assert!(scored.anchored);
    }

    #[test]
    fn duplicate_labels_score_equally() {
        let scored = score("tap Save", &["Save", "Save", "Other"]);
        assert_eq!(scored.log_probs[0], scored.log_probs[1]);
    }

    #[test]
    fn empty_meta_text_yields_uniform_distribution() {
        let scored = score("", &["A", "B", "C", "D"]);
        let expected = (1.0f64 / 4.0).ln();
        for lp in &scored.log_probs {
            assert!((lp - expected).abs() < 1e-12);
        }
        assert!(!scored.anchored);
    }

    #[test]
    fn scores_exponentiate_to_a_distribution() {
        for (meta, texts) in [
            ("tap Save", &["Cancel", "Save", "Save contact"][..]),
            ("tap New contact", &["New contact", "Search"][..]),
            ("", &["A", "B"][..]),
        ] {
            let scored = score(meta, texts);
            let sum: f64 = scored.log_probs.iter().map(|lp| lp.exp()).sum();
            assert!((sum - 1.0).abs() <= 1e-9, "sum was {sum}");
        }
    }

    #[test]
    fn designer_plans_unique_shortest_chain() {
        let metadata: AppMetadata = serde_json::from_str(
            r#"{"apps":[{"name":"Contacts","capabilities":["create contact"],
            "workflow":[
              {"from":"start","to":"main","instruction":"Open the Contacts app.","expectation":"The Contacts app main list is visible."},
              {"from":"main","to":"form","instruction":"Open the 'New contact' form.","expectation":"The 'Name' field is visible."},
              {"from":"form","to":"saved","instruction":"Fill in '{name}'.","expectation":"The 'Name' field shows '{name}'."}
            ],
            "goals":[{"pattern":"(?i)create a contact named (?P<name>[A-Za-z]+)","target":"saved"}]}]}"#,
        )
        .unwrap();
        let mut designer = OracleDesigner::new(
            Recorder::new(),
            LatencyParams::default(),
            TokenCounter::default(),
        );
        let plan = designer
            .plan("Create a contact named Alice", None, &metadata)
            .unwrap();
        assert_eq!(plan.len(), 3);
        assert_eq!(
            plan.milestones[0],
            Milestone::new(
                "Open the Contacts app.",
                "The Contacts app main list is visible."
            )
        );
        assert_eq!(plan.milestones[2].instruction, "Fill in 'Alice'.");

        assert!(matches!(
            designer.plan("", None, &metadata),
            Err(BackendError::EmptyInstruction)
        ));
        assert!(matches!(
            designer.plan("Fly to the moon", None, &metadata),
            Err(BackendError::PlanningInfeasible(_))
        ));
    }

    #[test]
    fn suggest_open_app_from_home() {
        let mut orch = OracleOrchestrator::new(
            vec![],
            None,
            Recorder::new(),
            LatencyParams::default(),
            TokenCounter::default(),
        );
        let home = visual(HOME_APP, &["Home screen", "Contacts"]);
        let m = Milestone::new(
            "Open the Contacts app.",
            "The Contacts app main list is visible.",
        );
        let meta = orch.suggest(&home, &m, None, &[]).unwrap();
        assert_eq!(meta.text, "open_app Contacts");
    }

    #[test]
    fn suggest_on_satisfied_milestone_is_contract_violation() {
        let mut orch = OracleOrchestrator::new(
            vec![],
            None,
            Recorder::new(),
            LatencyParams::default(),
            TokenCounter::default(),
        );
        let v = visual("Contacts", &["Contacts"]);
        let m = Milestone::new(
            "Open the Contacts app.",
            "The Contacts app main list is visible.",
        );
        assert!(matches!(
            orch.suggest(&v, &m, None, &[]),
            Err(BackendError::ContractViolation(_))
        ));
    }

    #[test]
    fn feedback_retargets_visible_confirm_control() {
        let mut orch = OracleOrchestrator::new(
            vec![],
            None,
            Recorder::new(),
            LatencyParams::default(),
            TokenCounter::default(),
        );
        let v = visual("Notes", &["Done", "Body"]);
        let m = Milestone::new("Confirm the edit.", "The 'Saved' banner is visible.");
        let meta = orch
            .suggest(&v, &m, Some("no node matched 'Save'"), &[])
            .unwrap();
        assert_eq!(meta.text, "tap Done");
    }
}
