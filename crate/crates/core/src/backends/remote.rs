//! Remote backends speaking a chat-completions-compatible wire protocol.
//!
//! One HTTP client is shared across tasks; per-task adapter instances render
//! the versioned prompt templates, parse the JSON replies (with exactly one
//! re-prompt on malformed output), and log call records. Cloud accounting
//! covers the designer only; orchestrator and executor endpoints are
//! edge-local by deployment.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backends::prompts::{
    parse_response, render_prompt, route_designer_template, ParsedResponse, DEFAULT_QA_MARKERS,
};
use crate::backends::{
    parse_spatial_reference, BackendCallRecord, BackendError, Backends, Designer, FailureContext,
    LatencyParams, Location, MetaInstruction, MetaStatus, Milestone, NodeScorer, Orchestrator,
    Plan, Recorder, Role, ScoredCandidates,
};
use crate::sim::{AppMetadata, UiNode, UiTree, VisualState};
use crate::tokens::TokenCounter;

pub const ENV_API_BASE: &str = "ADEC_API_BASE";
pub const ENV_API_KEY: &str = "ADEC_API_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub api_base: String,
    #[serde(default)]
    pub api_key: Option<String>,
    pub designer_model: String,
    pub orchestrator_model: String,
    pub executor_model: String,
    pub temperature: f64,
    pub timeout_s: f64,
    /// Probability assigned to non-selected candidates when mapping the
    /// executor's single choice onto a score vector.
    pub epsilon: f64,
    #[serde(default = "default_markers")]
    pub qa_markers: Vec<String>,
}

fn default_markers() -> Vec<String> {
    DEFAULT_QA_MARKERS.iter().map(|s| s.to_string()).collect()
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            api_base: String::new(),
            api_key: None,
            designer_model: "gpt-4o".into(),
            orchestrator_model: "qwen3-vl-2b".into(),
            executor_model: "qwen2.5-3b".into(),
            temperature: 0.0,
            timeout_s: 30.0,
            epsilon: 1e-6,
            qa_markers: default_markers(),
        }
    }
}

impl RemoteConfig {
    /// Applies `ADEC_API_BASE` / `ADEC_API_KEY` overrides.
    pub fn with_env(mut self) -> Self {
        if let Ok(base) = std::env::var(ENV_API_BASE) {
            if !base.is_empty() {
                self.api_base = base;
            }
        }
        if let Ok(key) = std::env::var(ENV_API_KEY) {
            if !key.is_empty() {
                self.api_key = Some(key);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.api_base.is_empty() {
            return Err(BackendError::Config(format!(
                "{ENV_API_BASE} or remote.api_base is unset"
            )));
        }
        if self.api_key.as_deref().unwrap_or("").is_empty() {
            return Err(BackendError::Config(format!(
                "{ENV_API_KEY} or remote.api_key is unset"
            )));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

/// Shared, thread-safe HTTP client for all remote calls.
pub struct RemoteClient {
    http: reqwest::blocking::Client,
    pub cfg: RemoteConfig,
}

impl RemoteClient {
    pub fn new(cfg: RemoteConfig) -> Result<Arc<Self>, BackendError> {
        cfg.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_s))
            .build()
            .map_err(|e| BackendError::Http(e.to_string()))?;
        Ok(Arc::new(Self { http, cfg }))
    }

    /// One chat turn; returns the reply content and the request body size.
    fn chat(&self, model: &str, prompt: &str) -> Result<(String, usize), BackendError> {
        let request = ChatRequest {
            model,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: self.cfg.temperature,
        };
        let body = serde_json::to_vec(&request).expect("request serializes");
        let body_len = body.len();
        let url = format!(
            "{}/chat/completions",
            self.cfg.api_base.trim_end_matches('/')
        );
        let mut builder = self
            .http
            .post(&url)
            .header("content-type", "application/json");
        if let Some(key) = &self.cfg.api_key {
            builder = builder.header("authorization", format!("Bearer {key}"));
        }
        let response = builder.body(body).send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(self.cfg.timeout_s)
            } else {
                BackendError::Http(e.to_string())
            }
        })?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::Http(format!("status {status}")));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| BackendError::Parse(format!("bad chat envelope: {e}")))?;
        let content = parsed
            .choices
            .first()
            .map(|c| c.message.content.clone())
            .ok_or_else(|| BackendError::Parse("response has no choices".into()))?;
        Ok((content, body_len))
    }
}

/// Builds the remote backend bundle for one task, sharing the client.
pub fn remote_backends(
    client: Arc<RemoteClient>,
    latency: LatencyParams,
    counter: TokenCounter,
) -> Backends {
    let recorder = Recorder::new();
    Backends {
        designer: Box::new(RemoteDesigner {
            client: client.clone(),
            recorder: recorder.clone(),
            latency,
            counter,
        }),
        orchestrator: Box::new(RemoteOrchestrator {
            client: client.clone(),
            recorder: recorder.clone(),
            latency,
            counter,
            cache: None,
            last_suggestion: None,
        }),
        scorer: Box::new(RemoteScorer {
            client,
            recorder: recorder.clone(),
            latency,
            counter,
        }),
        recorder,
    }
}

fn bindings(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

pub struct RemoteDesigner {
    client: Arc<RemoteClient>,
    recorder: Recorder,
    latency: LatencyParams,
    counter: TokenCounter,
}

impl RemoteDesigner {
    fn request_plan(&self, prompt: &str) -> Result<(Vec<Milestone>, String, usize), BackendError> {
        let (raw, body_len) = self.client.chat(&self.client.cfg.designer_model, prompt)?;
        match parse_response(Role::Designer, &raw) {
            Ok(ParsedResponse::Plan(milestones)) => Ok((milestones, raw, body_len)),
            Ok(_) => unreachable!("designer parse returns plans"),
            Err(e) => Err(e),
        }
    }
}

impl Designer for RemoteDesigner {
    fn plan(
        &mut self,
        instruction: &str,
        failure: Option<&FailureContext>,
        _metadata: &AppMetadata,
    ) -> Result<Plan, BackendError> {
        if instruction.trim().is_empty() {
            return Err(BackendError::EmptyInstruction);
        }
        let prompt = match failure {
            None => {
                let template_id = route_designer_template(instruction, &self.client.cfg.qa_markers);
                render_prompt(
                    template_id,
                    &bindings(&[("task_instruction", instruction.to_string())]),
                )?
            }
            Some(ctx) => {
                let old_plan = serde_json::to_string(&ctx.failed_milestone).expect("serializes");
                let trace = ctx
                    .trajectory
                    .iter()
                    .map(|t| {
                        format!(
                            "[Orchestrator Thought] {} [Action] {}",
                            t.state_summary, t.action
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("\n");
                render_prompt(
                    "designer_replan",
                    &bindings(&[
                        ("goal", instruction.to_string()),
                        ("old_plan", old_plan),
                        ("trace", trace),
                    ]),
                )?
            }
        };
        // Uplink accounting also covers the structured payload the prompt
        // embeds; the rendered prompt is what actually crosses the network.
        let result = self.request_plan(&prompt).or_else(|e| match e {
            BackendError::Parse(_) | BackendError::EmptyPlan => self.request_plan(&prompt),
            other => Err(other),
        })?;
        let (milestones, raw, body_len) = result;
        self.recorder.push(BackendCallRecord {
            role: Role::Designer,
            location: Location::Cloud,
            prompt_tokens: self.counter.count(&prompt),
            completion_tokens: self.counter.count(&raw),
            payload_bytes: body_len as u64,
            wall_latency_model_s: self.latency.cloud_text_s,
        });
        Ok(Plan::new(milestones))
    }
}

pub struct RemoteOrchestrator {
    client: Arc<RemoteClient>,
    recorder: Recorder,
    latency: LatencyParams,
    counter: TokenCounter,
    /// Last (prompt, reply) pair: alignment and suggestion share one wire
    /// call when made against the same screen and milestone.
    cache: Option<(String, crate::backends::prompts::OrchestratorReply)>,
    last_suggestion: Option<String>,
}

impl RemoteOrchestrator {
    fn prompt_for(
        &self,
        visual: &VisualState,
        milestone: &Milestone,
        feedback: Option<&str>,
        history: &[String],
    ) -> Result<String, BackendError> {
        let mut lines: Vec<String> = if history.is_empty() {
            vec!["(none)".into()]
        } else {
            history.to_vec()
        };
        if let Some(f) = feedback {
            lines.push(format!("[Executor Feedback] {f}"));
        }
        lines.push(format!("[Screen] {}", visual.summary_line()));
        render_prompt(
            "orchestrator",
            &bindings(&[
                ("sub_goal", milestone.instruction.clone()),
                ("expectation", milestone.expectation.clone()),
                ("history", lines.join("\n")),
            ]),
        )
    }

    fn call(
        &mut self,
        prompt: &str,
    ) -> Result<crate::backends::prompts::OrchestratorReply, BackendError> {
        if let Some((cached_prompt, reply)) = &self.cache {
            if cached_prompt == prompt {
                return Ok(reply.clone());
            }
        }
        let attempt = |this: &Self| -> Result<
            (crate::backends::prompts::OrchestratorReply, String, usize),
            BackendError,
        > {
            let (raw, body_len) = this
                .client
                .chat(&this.client.cfg.orchestrator_model, prompt)?;
            match parse_response(Role::Orchestrator, &raw)? {
                ParsedResponse::Orchestrator(reply) => Ok((reply, raw, body_len)),
                _ => unreachable!("orchestrator parse returns orchestrator replies"),
            }
        };
        let (reply, raw, body_len) = attempt(self).or_else(|e| match e {
            BackendError::Parse(_) => attempt(self),
            other => Err(other),
        })?;
        self.recorder.push(BackendCallRecord {
            role: Role::Orchestrator,
            location: Location::Edge,
            prompt_tokens: self.counter.count(prompt),
            completion_tokens: self.counter.count(&raw),
            payload_bytes: body_len as u64,
            wall_latency_model_s: self.latency.edge_s,
        });
        self.cache = Some((prompt.to_string(), reply.clone()));
        Ok(reply)
    }
}

impl Orchestrator for RemoteOrchestrator {
    fn align(&mut self, visual: &VisualState, milestone: &Milestone) -> Result<f64, BackendError> {
        let prompt = self.prompt_for(visual, milestone, None, &[])?;
        let reply = self.call(&prompt)?;
        // A token probability from the wire wins; otherwise the parsed status
        // maps FINISHED -> 1.0, anything else -> 0.0.
        if let Some(p) = reply.status_probability {
            return Ok(p.clamp(0.0, 1.0));
        }
        Ok(match reply.status.to_uppercase().as_str() {
            "FINISHED" | "ANSWER_READY" => 1.0,
            _ => 0.0,
        })
    }

    fn suggest(
        &mut self,
        visual: &VisualState,
        milestone: &Milestone,
        feedback: Option<&str>,
        history: &[String],
    ) -> Result<MetaInstruction, BackendError> {
        let prompt = self.prompt_for(visual, milestone, feedback, history)?;
        let mut reply = self.call(&prompt)?;
        // With feedback present the revised instruction must differ from the
        // previous one; re-prompt once if it does not.
        if feedback.is_some() && self.last_suggestion.as_deref() == Some(reply.suggestion.as_str())
        {
            self.cache = None;
            reply = self.call(&prompt)?;
        }

        let mut meta = MetaInstruction::ongoing(
            reply.suggestion.clone(),
            reply.observation.clone(),
            visual.pixel_size,
        );
        if meta.spatial_reference.is_none() {
            if let Some(sr) = &reply.spatial_reference {
                meta.spatial_reference =
                    parse_spatial_reference(sr, visual.pixel_size).map(|s| s.point);
            }
        }
        match reply.status.to_uppercase().as_str() {
            "FINISHED" => meta.status = MetaStatus::Finished,
            "ANSWER_READY" => {
                meta.status = MetaStatus::AnswerReady;
                meta.answer_payload = reply.answer.clone();
            }
            _ => {}
        }
        self.last_suggestion = Some(meta.text.clone());
        Ok(meta)
    }

    fn answer(
        &mut self,
        visual: &VisualState,
        milestone: &Milestone,
    ) -> Result<Option<String>, BackendError> {
        let prompt = self.prompt_for(visual, milestone, None, &[])?;
        let reply = self.call(&prompt)?;
        Ok(reply.answer)
    }
}

pub struct RemoteScorer {
    client: Arc<RemoteClient>,
    recorder: Recorder,
    latency: LatencyParams,
    counter: TokenCounter,
}

impl NodeScorer for RemoteScorer {
    fn score_candidates(
        &mut self,
        meta: &MetaInstruction,
        tree: &UiTree,
        pruned: &[&UiNode],
    ) -> Result<ScoredCandidates, BackendError> {
        let p_ref = meta
            .spatial_reference
            .map(|p| format!("[{:.3}, {:.3}] (normalized)", p.x, p.y))
            .unwrap_or_else(|| "(none)".into());
        let prompt = render_prompt(
            "executor",
            &bindings(&[
                ("sub_goal", meta.text.clone()),
                ("hint_text", meta.text.clone()),
                ("p_ref", p_ref),
                ("ui_tree", tree.to_prompt_lines()),
            ]),
        )?;
        let attempt = |this: &Self| -> Result<
            (crate::backends::prompts::ExecutorReply, String, usize),
            BackendError,
        > {
            let (raw, body_len) = this.client.chat(&this.client.cfg.executor_model, &prompt)?;
            match parse_response(Role::Executor, &raw)? {
                ParsedResponse::Executor(reply) => Ok((reply, raw, body_len)),
                _ => unreachable!("executor parse returns executor replies"),
            }
        };
        let (reply, raw, body_len) = attempt(self).or_else(|e| match e {
            BackendError::Parse(_) => attempt(self),
            other => Err(other),
        })?;
        self.recorder.push(BackendCallRecord {
            role: Role::Executor,
            location: Location::Edge,
            prompt_tokens: self.counter.count(&prompt),
            completion_tokens: self.counter.count(&raw),
            payload_bytes: body_len as u64,
            wall_latency_model_s: self.latency.edge_s,
        });

        let selected = reply
            .index
            .ok_or_else(|| BackendError::Parse("executor reply carries no index".into()))?;
        let pos = pruned
            .iter()
            .position(|n| n.index == selected)
            .ok_or_else(|| {
                BackendError::Parse(format!(
                    "executor selected index {selected} outside the candidate set"
                ))
            })?;
        // The model emits one choice, not a distribution: log(1) for the
        // selected node, log(epsilon) elsewhere.
        let eps = self.client.cfg.epsilon.max(f64::MIN_POSITIVE).ln();
        let mut log_probs = vec![eps; pruned.len()];
        log_probs[pos] = 0.0;
        Ok(ScoredCandidates {
            log_probs,
            anchored: true,
        })
    }
}
