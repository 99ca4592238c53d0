//! Trace-driven accounting: synchronization cost, cloud-call/token means,
//! relative cloud energy, element-reduction rate, post-completion
//! hallucination, and spatial hallucination rate. All functions are pure
//! folds over traces; parallel aggregation merges commutatively.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pilot::trace::{Trace, TraceError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Trace(#[from] TraceError),

    #[error("baseline value must be positive")]
    ZeroBaseline,

    #[error("at least one trace is required")]
    Empty,
}

/// Total synchronization cost in tokens: the instruction uplink plus the
/// token volume of every transmitted failure context.
pub fn c_total(trace: &Trace) -> u64 {
    trace.summary.instruction_tokens
        + trace
            .records
            .iter()
            .filter_map(|r| r.h_fail_tokens)
            .sum::<u64>()
}

/// Relative cloud energy: token burden against a baseline, with a
/// multiplicative penalty `mu` applied to methods that stream images.
pub fn rce(
    mt_method: f64,
    image_stream_method: bool,
    mt_baseline: f64,
    image_stream_baseline: bool,
    mu: f64,
) -> Result<f64, MetricsError> {
    if mt_baseline <= 0.0 || mt_baseline.is_nan() {
        return Err(MetricsError::ZeroBaseline);
    }
    let penalty = |image: bool| if image { mu } else { 1.0 };
    Ok((mt_method * penalty(image_stream_method)) / (mt_baseline * penalty(image_stream_baseline)))
}

/// Fractional reduction in UI elements uploaded versus a baseline over
/// aligned decisions. Negative values are permitted (the caller records a
/// warning); a zero baseline is an error.
pub fn reduction_rate(e_baseline: u64, e_ours: u64) -> Result<f64, MetricsError> {
    if e_baseline == 0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok((e_baseline as f64 - e_ours as f64) / e_baseline as f64)
}

/// Post-completion hallucination: any non-terminate action executed after the
/// first step at which the task's success predicate already held.
pub fn pch(trace: &Trace) -> bool {
    let Some(first_success) = trace.records.iter().position(|r| r.success_now) else {
        return false;
    };
    trace.records[first_success + 1..]
        .iter()
        .any(|r| r.action.as_ref().is_some_and(|a| !a.is_terminate()))
}

/// Semantic-score tie tolerance for spatially-decidable grounding decisions.
pub const SHR_TIE_EPS: f64 = 1e-9;

/// Spatial hallucination rate: over labeled grounding decisions where the
/// selected and correct candidates are semantically tied (within
/// [`SHR_TIE_EPS`]), the fraction that picked the wrong node. `None` when no
/// spatially-decidable labeled decision exists.
pub fn shr(traces: &[Trace]) -> Option<f64> {
    let mut decidable = 0u64;
    let mut wrong = 0u64;
    for trace in traces {
        for record in &trace.records {
            let Some(label) = record.ground_truth_index else {
                continue;
            };
            let Some(crate::pilot::trace::GroundingTrace::Grounded(result)) = &record.grounding
            else {
                continue;
            };
            let Some(selected) = result.node_index else {
                continue;
            };
            let selected_lp = result
                .per_candidate
                .iter()
                .find(|c| c.index == selected)
                .map(|c| c.log_prob);
            let label_lp = result
                .per_candidate
                .iter()
                .find(|c| c.index == label)
                .map(|c| c.log_prob);
            let (Some(a), Some(b)) = (selected_lp, label_lp) else {
                continue;
            };
            if (a - b).abs() <= SHR_TIE_EPS {
                decidable += 1;
                if selected != label {
                    wrong += 1;
                }
            }
        }
    }
    if decidable == 0 {
        None
    } else {
        Some(wrong as f64 / decidable as f64)
    }
}

/// Aggregated accounting over a trace set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub tasks: u64,
    pub success_rate: f64,
    pub c_total_tokens: u64,
    /// Mean cloud calls per task.
    pub mc: f64,
    /// Mean cloud tokens per task (prompt + completion).
    pub mt: f64,
    /// Total cloud-bound payload volume, decimal kilobytes.
    pub uplink_kb: f64,
    /// Relative cloud energy versus the configured baseline (1.0 when this
    /// run is its own baseline).
    pub rce: f64,
    /// Element reduction rate versus the monolithic full-tree upload.
    pub rr: f64,
    pub pch_rate: f64,
    /// `None` marks not-applicable (no labeled, spatially-decidable
    /// decisions), distinct from an observed 0.
    pub shr: Option<f64>,
    pub replan_rate: f64,
    pub avg_steps: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Folds a trace set into a [`CostReport`]. Deterministic given the set;
/// order-independent because every component is a sum or a count.
pub fn aggregate(traces: &[Trace]) -> Result<CostReport, MetricsError> {
    if traces.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = traces.len() as f64;
    let successes = traces.iter().filter(|t| t.summary.success).count() as f64;
    let c_total_tokens = traces.iter().map(c_total).sum();
    let mc = traces
        .iter()
        .map(|t| t.summary.cloud_calls as f64)
        .sum::<f64>()
        / n;
    let mt = traces
        .iter()
        .map(|t| (t.summary.cloud_prompt_tokens + t.summary.cloud_completion_tokens) as f64)
        .sum::<f64>()
        / n;
    let uplink_kb = traces
        .iter()
        .map(|t| t.summary.uplink_bytes as f64)
        .sum::<f64>()
        / 1000.0;

    // Element accounting: a monolithic agent uploads the full hierarchy at
    // every action step; this engine uploads only the element texts embedded
    // in failure-context trajectories.
    let e_baseline: u64 = traces
        .iter()
        .flat_map(|t| t.records.iter())
        .filter(|r| r.action.is_some())
        .map(|r| r.tree_size as u64)
        .sum();
    let e_ours: u64 = traces
        .iter()
        .flat_map(|t| t.records.iter())
        .filter_map(|r| r.h_fail_elements)
        .map(|e| e as u64)
        .sum();
    let mut warnings = Vec::new();
    let rr = if e_baseline == 0 {
        warnings.push("no action steps recorded; element reduction rate defaults to 0".into());
        0.0
    } else {
        let rr = reduction_rate(e_baseline, e_ours).expect("baseline checked above");
        if rr < 0.0 {
            warnings.push(format!(
                "uploaded more elements than the baseline ({e_ours} > {e_baseline})"
            ));
        }
        rr
    };

    let pch_rate = traces.iter().filter(|t| pch(t)).count() as f64 / n;
    let replan_rate = traces.iter().map(|t| t.summary.replans as f64).sum::<f64>() / n;
    let avg_steps = traces.iter().map(|t| t.summary.steps as f64).sum::<f64>() / n;

    Ok(CostReport {
        tasks: traces.len() as u64,
        success_rate: successes / n,
        c_total_tokens,
        mc,
        mt,
        uplink_kb,
        rce: 1.0,
        rr,
        pch_rate,
        shr: shr(traces),
        replan_rate,
        avg_steps,
        warnings,
    })
}

/// Re-anchors a report's relative cloud energy against a baseline report.
/// Neither side of this engine streams images; the penalty arguments exist
/// for cross-method comparisons.
pub fn rce_vs_baseline(
    report: &mut CostReport,
    baseline: &CostReport,
    mu: f64,
) -> Result<(), MetricsError> {
    report.rce = rce(report.mt, false, baseline.mt, false, mu)?;
    Ok(())
}
