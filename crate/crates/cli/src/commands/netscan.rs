use std::path::PathBuf;

use clap::Args;

use adec_core::metrics::CostReport;
use adec_core::net::{default_ladder, latency_with_per_call, reference_method_rows, MethodRow};

use crate::commands::fmt;
use crate::CliError;

#[derive(Debug, Args)]
pub struct NetscanArgs {
    /// Completed bench report supplying mc and uplink volume.
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Mean cloud calls per task (overrides the report).
    #[arg(long)]
    pub mc: Option<f64>,

    /// Cloud inference seconds per call.
    #[arg(long, default_value_t = 2.0)]
    pub per_call: f64,

    /// Uplink volume per task, decimal kilobytes (overrides the report).
    #[arg(long)]
    pub uplink_kb: Option<f64>,

    /// Include the reference method rows alongside this engine's row.
    #[arg(long)]
    pub methods: bool,

    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Latency CSV across the bandwidth ladder using the modeled
/// inference-plus-transmission formula.
pub fn netscan_csv(rows: &[MethodRow]) -> String {
    let mut out = String::from("profile,method,latency_s\n");
    for profile in default_ladder() {
        for row in rows {
            let latency =
                latency_with_per_call(&profile, row.per_call_s, row.mc, row.uplink_bytes());
            out.push_str(&format!("{},{},{}\n", profile.name, row.name, fmt(latency)));
        }
    }
    out
}

pub fn cmd_netscan(args: &NetscanArgs) -> Result<i32, CliError> {
    let (mc, uplink_kb) = match (&args.report, args.mc, args.uplink_kb) {
        (_, Some(mc), Some(uplink)) => (mc, uplink),
        (Some(path), mc, uplink) => {
            let raw = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            let report: CostReport = serde_json::from_str(&raw)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            // The report's uplink is a suite total; scan per-task volume.
            let per_task = report.uplink_kb / report.tasks.max(1) as f64;
            (mc.unwrap_or(report.mc), uplink.unwrap_or(per_task))
        }
        _ => {
            return Err(CliError::config(
                "netscan needs --report or explicit --mc and --uplink-kb overrides",
            ))
        }
    };

    let mut rows = vec![MethodRow::new("adec", mc, args.per_call, uplink_kb)];
    if args.methods {
        rows = reference_method_rows()
            .into_iter()
            .filter(|r| r.name != "adec")
            .chain(rows)
            .collect();
    }
    let csv = netscan_csv(&rows);
    match &args.out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| CliError::failure(e.to_string()))?;
            }
            std::fs::write(path, &csv).map_err(|e| CliError::failure(e.to_string()))?;
        }
        None => print!("{csv}"),
    }
    Ok(0)
}
