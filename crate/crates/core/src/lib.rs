//! Core engine for hierarchical edge-cloud mobile-UI automation.
//!
//! The engine runs natural-language device tasks inside a deterministic
//! simulated world. A cloud-side designer decomposes the task into abstract
//! milestones, an edge-side orchestrator aligns the live screen against each
//! milestone's expected state, and an edge-side executor grounds corrective
//! instructions into concrete view-hierarchy actions. Every run produces an
//! append-only JSONL trace from which all cost, latency, and privacy metrics
//! are computed.

#![forbid(unsafe_code)]

pub mod backends;
pub mod geometry;
pub mod grounding;
pub mod metrics;
pub mod net;
pub mod pilot;
pub mod sim;
pub mod tokens;
