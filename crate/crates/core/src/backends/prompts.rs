//! Versioned prompt templates and wire-response parsing.
//!
//! Templates live as text assets and are rendered by exact placeholder
//! substitution, so the bytes sent over the wire match the stored assets
//! everywhere outside the bound values. Responses are parsed tolerantly: the
//! first JSON value in the raw text wins, fenced code blocks included.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::Deserialize;
use serde_json::Value;

use crate::backends::{BackendError, Milestone};

pub const TEMPLATE_VERSION: &str = "v1";

const DESIGNER: &str = include_str!("../../assets/prompts/designer_v1.txt");
const DESIGNER_QA: &str = include_str!("../../assets/prompts/designer_qa_v1.txt");
const DESIGNER_REPLAN: &str = include_str!("../../assets/prompts/designer_replan_v1.txt");
const ORCHESTRATOR: &str = include_str!("../../assets/prompts/orchestrator_v1.txt");
const EXECUTOR: &str = include_str!("../../assets/prompts/executor_v1.txt");

pub fn template(template_id: &str) -> Result<&'static str, BackendError> {
    match template_id {
        "designer" => Ok(DESIGNER),
        "designer_qa" => Ok(DESIGNER_QA),
        "designer_replan" => Ok(DESIGNER_REPLAN),
        "orchestrator" => Ok(ORCHESTRATOR),
        "executor" => Ok(EXECUTOR),
        other => Err(BackendError::Template(format!(
            "unknown template '{other}'"
        ))),
    }
}

/// Placeholders are lowercase identifiers in single braces, e.g.
/// `{task_instruction}`. JSON literals in the templates never match.
fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z][a-z_]*)\}").unwrap())
}

/// Renders a template with every placeholder bound; an unbound placeholder is
/// a template error.
pub fn render_prompt(
    template_id: &str,
    bindings: &BTreeMap<String, String>,
) -> Result<String, BackendError> {
    let text = template(template_id)?;
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for caps in placeholder_re().captures_iter(text) {
        let whole = caps.get(0).unwrap();
        let name = &caps[1];
        let value = bindings.get(name).ok_or_else(|| {
            BackendError::Template(format!(
                "unbound placeholder '{{{name}}}' in '{template_id}'"
            ))
        })?;
        out.push_str(&text[last..whole.start()]);
        out.push_str(value);
        last = whole.end();
    }
    out.push_str(&text[last..]);
    Ok(out)
}

/// Recovers the bound values from a rendered prompt by matching the literal
/// spans between placeholders. Inverse of [`render_prompt`] for bindings that
/// do not themselves contain the adjacent literal text.
pub fn extract_bindings(
    template_id: &str,
    rendered: &str,
) -> Result<BTreeMap<String, String>, BackendError> {
    let text = template(template_id)?;
    let mut segments: Vec<(String, &str)> = Vec::new(); // (leading literal, name)
    let mut trailing = String::new();
    let mut last = 0;
    for caps in placeholder_re().captures_iter(text) {
        let whole = caps.get(0).unwrap();
        segments.push((
            text[last..whole.start()].to_string(),
            caps.get(1).unwrap().as_str(),
        ));
        last = whole.end();
    }
    trailing.push_str(&text[last..]);

    let mut bindings = BTreeMap::new();
    let mut pos = 0;
    for (i, (literal, name)) in segments.iter().enumerate() {
        if !rendered[pos..].starts_with(literal.as_str()) {
            return Err(BackendError::Template(format!(
                "rendered text diverges from template '{template_id}' before '{{{name}}}'"
            )));
        }
        pos += literal.len();
        let next_literal: &str = segments
            .get(i + 1)
            .map(|(lit, _)| lit.as_str())
            .unwrap_or(trailing.as_str());
        let end = if next_literal.is_empty() {
            rendered.len()
        } else {
            pos + rendered[pos..].find(next_literal).ok_or_else(|| {
                BackendError::Template(format!("rendered text missing literal after '{{{name}}}'"))
            })?
        };
        bindings.insert(name.to_string(), rendered[pos..end].to_string());
        pos = end;
    }
    Ok(bindings)
}

/// Default interrogative markers that route instructions to the
/// question-answer designer template.
pub const DEFAULT_QA_MARKERS: &[&str] = &["who", "what", "when", "where", "how", "which", "?"];

/// Heuristic dispatcher: keyword routing between the operation and QA
/// designer templates.
pub fn route_designer_template<S: AsRef<str>>(instruction: &str, markers: &[S]) -> &'static str {
    let lower = instruction.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    for marker in markers {
        let marker = marker.as_ref();
        let hit = if marker == "?" {
            lower.contains('?')
        } else {
            words.contains(&marker)
        };
        if hit {
            return "designer_qa";
        }
    }
    "designer"
}

// ---------------------------------------------------------------------------
// Response parsing.
// ---------------------------------------------------------------------------

/// Scans raw model output for the first complete JSON object or array,
/// tolerating fenced code blocks and surrounding prose.
pub fn first_json_value(raw: &str) -> Option<Value> {
    let bytes = raw.as_bytes();
    for start in 0..bytes.len() {
        let open = bytes[start];
        if open != b'{' && open != b'[' {
            continue;
        }
        if let Some(end) = balanced_end(bytes, start) {
            if let Ok(value) = serde_json::from_str::<Value>(&raw[start..=end]) {
                return Some(value);
            }
        }
    }
    None
}

fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0i32;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct OrchestratorReply {
    #[serde(default)]
    pub observation: String,
    #[serde(default)]
    pub status: String,
    #[serde(default)]
    pub reasoning: String,
    #[serde(default)]
    pub suggestion: String,
    #[serde(default)]
    pub spatial_reference: Option<String>,
    #[serde(default)]
    pub answer: Option<String>,
    /// Probability of the affirmative status token, when the serving stack
    /// exposes it; used directly as the alignment score.
    #[serde(default)]
    pub status_probability: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ExecutorReply {
    #[serde(default)]
    pub action_type: String,
    #[serde(default)]
    pub index: Option<u32>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub direction: Option<String>,
    #[serde(default)]
    pub app_name: Option<String>,
}

#[derive(Debug, Clone)]
pub enum ParsedResponse {
    Plan(Vec<Milestone>),
    Orchestrator(OrchestratorReply),
    Executor(ExecutorReply),
}

/// Extracts the role-typed result from raw model output.
pub fn parse_response(
    role: crate::backends::Role,
    raw: &str,
) -> Result<ParsedResponse, BackendError> {
    let value =
        first_json_value(raw).ok_or_else(|| BackendError::Parse("no JSON value found".into()))?;
    match role {
        crate::backends::Role::Designer => {
            let items = value.as_array().ok_or_else(|| {
                BackendError::Parse("designer output must be a JSON array".into())
            })?;
            if items.is_empty() {
                return Err(BackendError::EmptyPlan);
            }
            let milestones: Vec<Milestone> = items
                .iter()
                .map(|item| {
                    serde_json::from_value(item.clone())
                        .map_err(|e| BackendError::Parse(format!("bad milestone: {e}")))
                })
                .collect::<Result<_, _>>()?;
            Ok(ParsedResponse::Plan(milestones))
        }
        crate::backends::Role::Orchestrator => {
            let reply: OrchestratorReply = serde_json::from_value(value)
                .map_err(|e| BackendError::Parse(format!("bad orchestrator reply: {e}")))?;
            Ok(ParsedResponse::Orchestrator(reply))
        }
        crate::backends::Role::Executor => {
            let reply: ExecutorReply = serde_json::from_value(value)
                .map_err(|e| BackendError::Parse(format!("bad executor reply: {e}")))?;
            Ok(ParsedResponse::Executor(reply))
        }
    }
}
