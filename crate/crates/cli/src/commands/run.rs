use clap::Args;

use crate::config::{resolve, RunFlags};
use crate::engine::{resolve_suite, run_one, summary_line, write_trace_file, BackendFactory};
use crate::CliError;

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub flags: RunFlags,

    /// Task to run; defaults to the only task in the suite.
    #[arg(long)]
    pub task_id: Option<String>,
}

/// Runs one task, writes `<task_id>.trace.jsonl`, and prints a one-line
/// summary. Exit 0 iff the task succeeded.
pub fn cmd_run(args: &RunArgs) -> Result<i32, CliError> {
    let settings = resolve(&args.flags)?;
    let factory = BackendFactory::new(&settings)?;
    let suite = resolve_suite(&args.flags.tasks, args.flags.world.as_deref())?;

    let entry = match &args.task_id {
        Some(id) => suite
            .into_iter()
            .find(|e| &e.task.task_id == id)
            .ok_or_else(|| CliError::config(format!("no task '{id}' in suite")))?,
        None => {
            let mut suite = suite;
            if suite.len() != 1 {
                return Err(CliError::config(format!(
                    "suite has {} tasks; pick one with --task-id",
                    suite.len()
                )));
            }
            suite.remove(0)
        }
    };

    let result = run_one(&entry, &settings, &factory, args.flags.seed)?;
    let name = format!("{}.trace.jsonl", entry.task.task_id);
    write_trace_file(&args.flags.out, &name, &result.trace)?;
    println!("{}", summary_line(&result));
    Ok(if result.success { 0 } else { 1 })
}
