use std::path::Path;

use clap::Args;
use rayon::prelude::*;

use adec_core::metrics::{aggregate, CostReport};
use adec_core::pilot::Trace;

use crate::commands::report_csv;
use crate::config::{resolve, RunFlags, Settings};
use crate::engine::{resolve_suite, run_one, write_trace_file, BackendFactory, ResolvedTask};
use crate::CliError;

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub flags: RunFlags,

    /// Seeds to run each task under.
    #[arg(long, default_value = "0,1,2")]
    pub seeds: String,
}

pub fn parse_seeds(raw: &str) -> Result<Vec<u64>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u64>()
                .map_err(|_| CliError::config(format!("bad seed '{s}'")))
        })
        .collect()
}

/// Runs the whole suite across the seed set and writes traces plus an
/// aggregate report. Task failures are recorded per-trace; the bench itself
/// still completes.
pub fn run_bench(
    suite: &[ResolvedTask],
    settings: &Settings,
    seeds: &[u64],
    jobs: Option<usize>,
    out_dir: &Path,
) -> Result<(Vec<Trace>, CostReport), CliError> {
    let factory = BackendFactory::new(settings)?;
    let mut jobs_list: Vec<(&ResolvedTask, u64)> = Vec::new();
    for entry in suite {
        for &seed in seeds {
            jobs_list.push((entry, seed));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(1))
        .build()
        .map_err(|e| CliError::config(e.to_string()))?;
    let mut results: Vec<(String, Trace)> = pool.install(|| {
        jobs_list
            .par_iter()
            .map(|(entry, seed)| {
                let result = run_one(entry, settings, &factory, *seed)?;
                let name = format!("{}.seed{}.trace.jsonl", entry.task.task_id, seed);
                write_trace_file(out_dir, &name, &result.trace)?;
                Ok((name, result.trace))
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    // Aggregation order is fixed regardless of worker scheduling.
    results.sort_by(|a, b| a.0.cmp(&b.0));
    let traces: Vec<Trace> = results.into_iter().map(|(_, t)| t).collect();
    let report = aggregate(&traces).map_err(|e| CliError::failure(e.to_string()))?;
    Ok((traces, report))
}

pub fn write_report(out_dir: &Path, name: &str, report: &CostReport) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::failure(format!("cannot create {}: {e}", out_dir.display())))?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(out_dir.join(format!("{name}.json")), json + "\n")
        .map_err(|e| CliError::failure(e.to_string()))?;
    let csv = report_csv(&[("default".to_string(), report)]);
    std::fs::write(out_dir.join(format!("{name}.csv")), csv)
        .map_err(|e| CliError::failure(e.to_string()))?;
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32, CliError> {
    let settings = resolve(&args.flags)?;
    let profile = adec_core::net::profile_by_name(&args.flags.net)
        .map_err(|e| CliError::config(e.to_string()))?;
    let suite = resolve_suite(&args.flags.tasks, args.flags.world.as_deref())?;
    let seeds = parse_seeds(&args.seeds)?;
    if seeds.is_empty() {
        return Err(CliError::config("at least one seed required"));
    }
    let (traces, report) = run_bench(&suite, &settings, &seeds, args.flags.jobs, &args.flags.out)?;
    write_report(&args.flags.out, "report", &report)?;
    let uplink_bytes_per_task = report.uplink_kb * 1000.0 / report.tasks.max(1) as f64;
    let modeled = adec_core::net::latency(
        &profile,
        adec_core::net::CallModality::CloudText,
        report.mc,
        uplink_bytes_per_task,
    );
    println!(
        "bench: {} traces, sr={:.3} mc={:.3} mt={:.1} replan_rate={:.3} latency[{}]={:.3}s",
        traces.len(),
        report.success_rate,
        report.mc,
        report.mt,
        report.replan_rate,
        profile.name,
        modeled
    );
    Ok(0)
}
