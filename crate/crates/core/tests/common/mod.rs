#![allow(dead_code)]

use std::path::{Path, PathBuf};

use adec_core::backends::{oracle_backends, Backends, LatencyParams};
use adec_core::grounding::GroundingConfig;
use adec_core::pilot::{run_task, PilotConfig, TaskResult};
use adec_core::sim::{load_tasks, load_world, TaskSpec, World};
use adec_core::tokens::TokenCounter;

pub fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn load_suite(name: &str) -> Vec<TaskSpec> {
    load_tasks(&fixture_root().join("tasks").join(name)).expect("suite loads")
}

pub fn world_for(task: &TaskSpec) -> World {
    let path = task.world.as_ref().expect("fixture tasks name their world");
    load_world(path).expect("world loads")
}

pub fn task_by_id(suite: &str, id: &str) -> TaskSpec {
    load_suite(suite)
        .into_iter()
        .find(|t| t.task_id == id)
        .unwrap_or_else(|| panic!("task '{id}' in suite '{suite}'"))
}

pub fn oracle_bundle(task: &TaskSpec) -> Backends {
    oracle_backends(task, LatencyParams::default(), TokenCounter::default())
}

pub fn run_with(
    task: &TaskSpec,
    cfg: &PilotConfig,
    gcfg: &GroundingConfig,
    seed: u64,
) -> TaskResult {
    let world = world_for(task);
    let mut backends = oracle_bundle(task);
    run_task(
        task,
        world,
        &mut backends,
        cfg,
        gcfg,
        TokenCounter::default(),
        seed,
    )
    .expect("valid config")
}

pub fn run_default(task: &TaskSpec) -> TaskResult {
    run_with(
        task,
        &PilotConfig::default(),
        &GroundingConfig::default(),
        0,
    )
}
