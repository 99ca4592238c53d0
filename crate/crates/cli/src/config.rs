//! Layered configuration: CLI flags override the TOML file, which overrides
//! the defaults.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use adec_core::backends::{LatencyParams, RemoteConfig};
use adec_core::grounding::GroundingConfig;
use adec_core::pilot::{AblationSet, PilotConfig};
use adec_core::tokens::TokenCounter;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Oracle,
    Remote,
}

/// Flags shared by the task-running subcommands. Every tunable in the pilot
/// and grounding configs is reachable from here; sweeps rely on that.
#[derive(Debug, Clone, Args)]
pub struct RunFlags {
    /// World-spec file; fixtures may also name a world per task.
    #[arg(long)]
    pub world: Option<PathBuf>,

    /// Task-suite file (adec-tasks/1).
    #[arg(long)]
    pub tasks: PathBuf,

    /// Backend family driving the three roles.
    #[arg(long, value_enum, default_value_t = BackendKind::Oracle)]
    pub backend: BackendKind,

    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Parallel task workers for bench-style commands.
    #[arg(long)]
    pub jobs: Option<usize>,

    #[arg(long)]
    pub tau: Option<f64>,

    #[arg(long)]
    pub tau_qa: Option<f64>,

    #[arg(long)]
    pub alpha: Option<f64>,

    #[arg(long)]
    pub t_replan: Option<u32>,

    #[arg(long)]
    pub t_max: Option<u32>,

    #[arg(long)]
    pub replan_rounds: Option<u32>,

    /// Comma-separated ablation flags
    /// (no_executor,no_orchestrator,no_expectation,no_hit).
    #[arg(long)]
    pub ablate: Option<String>,

    /// Network profile used for modeled-latency reporting.
    #[arg(long, default_value = "wifi")]
    pub net: String,

    /// Output directory for traces and reports.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PilotToml {
    tau: Option<f64>,
    tau_qa: Option<f64>,
    t_replan: Option<u32>,
    t_max: Option<u32>,
    replan_rounds: Option<u32>,
    inner_retries: Option<u32>,
    hit_enabled: Option<bool>,
    ablation: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundingToml {
    alpha: Option<f64>,
    score_floor: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    pilot: PilotToml,
    #[serde(default)]
    grounding: GroundingToml,
    #[serde(default)]
    tokens: Option<TokenCounter>,
    #[serde(default)]
    remote: Option<RemoteConfig>,
}

/// Fully resolved engine settings for one invocation.
#[derive(Debug, Clone)]
pub struct Settings {
    pub pilot: PilotConfig,
    pub grounding: GroundingConfig,
    pub counter: TokenCounter,
    pub latency: LatencyParams,
    pub backend: BackendKind,
    pub remote: RemoteConfig,
}

fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&raw).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Resolves defaults, then the config file, then CLI flags.
pub fn resolve(flags: &RunFlags) -> Result<Settings, CliError> {
    let file = match &flags.config {
        Some(path) => load_file(path)?,
        None => FileConfig::default(),
    };

    let mut pilot = PilotConfig::default();
    let f = &file.pilot;
    if let Some(v) = f.tau {
        pilot.tau = v;
    }
    if let Some(v) = f.tau_qa {
        pilot.tau_qa = v;
    }
    if let Some(v) = f.t_replan {
        pilot.t_replan = v;
    }
    if let Some(v) = f.t_max {
        pilot.t_max = v;
    }
    if let Some(v) = f.replan_rounds {
        pilot.replan_rounds = v;
    }
    if let Some(v) = f.inner_retries {
        pilot.inner_retries = v;
    }
    if let Some(v) = f.hit_enabled {
        pilot.hit_enabled = v;
    }
    if let Some(list) = &f.ablation {
        pilot.ablation =
            AblationSet::parse_list(list).map_err(|e| CliError::config(e.to_string()))?;
    }
    if let Some(v) = flags.tau {
        pilot.tau = v;
    }
    if let Some(v) = flags.tau_qa {
        pilot.tau_qa = v;
    }
    if let Some(v) = flags.t_replan {
        pilot.t_replan = v;
    }
    if let Some(v) = flags.t_max {
        pilot.t_max = v;
    }
    if let Some(v) = flags.replan_rounds {
        pilot.replan_rounds = v;
    }
    if let Some(list) = &flags.ablate {
        pilot.ablation =
            AblationSet::parse_list(list).map_err(|e| CliError::config(e.to_string()))?;
    }
    pilot
        .validate()
        .map_err(|e| CliError::config(e.to_string()))?;

    let mut grounding = GroundingConfig::default();
    if let Some(v) = file.grounding.alpha {
        grounding.alpha = v;
    }
    if let Some(v) = file.grounding.score_floor {
        grounding.score_floor = v;
    }
    if let Some(v) = flags.alpha {
        grounding.alpha = v;
    }
    if grounding.alpha < 0.0 {
        return Err(CliError::config("alpha must be non-negative"));
    }

    let remote = file.remote.clone().unwrap_or_default().with_env();

    Ok(Settings {
        pilot,
        grounding,
        counter: file.tokens.unwrap_or_default(),
        latency: LatencyParams::default(),
        backend: flags.backend,
        remote,
    })
}
