use std::path::PathBuf;

use clap::Args;

use adec_core::metrics::aggregate;
use adec_core::pilot::{read_trace, Trace};

use crate::commands::bench::write_report;
use crate::CliError;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory of `*.trace.jsonl` files.
    #[arg(long)]
    pub traces: PathBuf,

    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Rebuilds the aggregate report from a directory of traces.
pub fn cmd_report(args: &ReportArgs) -> Result<i32, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.traces)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", args.traces.display())))?
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".trace.jsonl"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::config(format!(
            "no *.trace.jsonl files in {}",
            args.traces.display()
        )));
    }
    let traces: Vec<Trace> = paths
        .iter()
        .map(|p| read_trace(p).map_err(|e| CliError::failure(format!("{}: {e}", p.display()))))
        .collect::<Result<_, _>>()?;
    let report = aggregate(&traces).map_err(|e| CliError::failure(e.to_string()))?;
    write_report(&args.out, "report", &report)?;
    println!(
        "report: {} traces, sr={:.3} mc={:.3} mt={:.1}",
        traces.len(),
        report.success_rate,
        report.mc,
        report.mt
    );
    Ok(0)
}
