//! Shared task-running plumbing for the commands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use adec_core::backends::{oracle_backends, remote_backends, Backends, RemoteClient};
use adec_core::pilot::{run_task, write_trace, TaskResult, Trace};
use adec_core::sim::{load_tasks, load_world, TaskSpec, World};

use crate::config::{BackendKind, Settings};
use crate::CliError;

/// A suite entry resolved against the command line: task plus the world file
/// it runs in.
#[derive(Debug, Clone)]
pub struct ResolvedTask {
    pub task: TaskSpec,
    pub world_path: PathBuf,
}

pub fn resolve_suite(
    tasks_path: &Path,
    world_flag: Option<&Path>,
) -> Result<Vec<ResolvedTask>, CliError> {
    if !tasks_path.exists() {
        return Err(CliError::config(format!(
            "tasks file not found: {}",
            tasks_path.display()
        )));
    }
    let tasks = load_tasks(tasks_path).map_err(|e| CliError::config(e.to_string()))?;
    tasks
        .into_iter()
        .map(|task| {
            let world_path = task
                .world
                .clone()
                .or_else(|| world_flag.map(Path::to_path_buf))
                .ok_or_else(|| {
                    CliError::config(format!(
                        "task '{}' names no world and --world was not given",
                        task.task_id
                    ))
                })?;
            if !world_path.exists() {
                return Err(CliError::config(format!(
                    "world file not found: {}",
                    world_path.display()
                )));
            }
            Ok(ResolvedTask { task, world_path })
        })
        .collect()
}

/// Backend factory: validated once, instantiated per task.
pub enum BackendFactory {
    Oracle,
    Remote(Arc<RemoteClient>),
}

impl BackendFactory {
    pub fn new(settings: &Settings) -> Result<Self, CliError> {
        match settings.backend {
            BackendKind::Oracle => Ok(BackendFactory::Oracle),
            BackendKind::Remote => {
                let client = RemoteClient::new(settings.remote.clone())
                    .map_err(|e| CliError::config(e.to_string()))?;
                Ok(BackendFactory::Remote(client))
            }
        }
    }

    pub fn build(&self, task: &TaskSpec, settings: &Settings) -> Backends {
        match self {
            BackendFactory::Oracle => oracle_backends(task, settings.latency, settings.counter),
            BackendFactory::Remote(client) => {
                remote_backends(client.clone(), settings.latency, settings.counter)
            }
        }
    }
}

pub fn load_world_for(entry: &ResolvedTask) -> Result<World, CliError> {
    load_world(&entry.world_path).map_err(|e| CliError::config(e.to_string()))
}

pub fn run_one(
    entry: &ResolvedTask,
    settings: &Settings,
    factory: &BackendFactory,
    seed: u64,
) -> Result<TaskResult, CliError> {
    let world = load_world_for(entry)?;
    let mut backends = factory.build(&entry.task, settings);
    run_task(
        &entry.task,
        world,
        &mut backends,
        &settings.pilot,
        &settings.grounding,
        settings.counter,
        seed,
    )
    .map_err(|e| CliError::config(e.to_string()))
}

pub fn write_trace_file(out_dir: &Path, name: &str, trace: &Trace) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::failure(format!("cannot create {}: {e}", out_dir.display())))?;
    let path = out_dir.join(name);
    write_trace(&path, trace)
        .map_err(|e| CliError::failure(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn summary_line(result: &TaskResult) -> String {
    let s = &result.trace.summary;
    format!(
        "{}: {} steps={} cloud_calls={} replans={} termination={}",
        s.task_id,
        if s.success { "SUCCESS" } else { "FAILURE" },
        s.steps,
        s.cloud_calls,
        s.replans,
        s.termination
            .as_ref()
            .map(|t| format!("{:?}", t.source))
            .unwrap_or_else(|| "none".into()),
    )
}
