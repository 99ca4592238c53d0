mod ablate;
mod bench;
mod netscan;
mod report;
mod run;

pub use ablate::{cmd_ablate, AblateArgs};
pub use bench::{cmd_bench, BenchArgs};
pub use netscan::{cmd_netscan, NetscanArgs};
pub use report::{cmd_report, ReportArgs};
pub use run::{cmd_run, RunArgs};

use adec_core::metrics::CostReport;

/// Fixed-format float for reproducible report files.
pub(crate) fn fmt(value: f64) -> String {
    format!("{value:.6}")
}

pub(crate) fn report_csv(rows: &[(String, &CostReport)]) -> String {
    let mut out = String::from(
        "config,tasks,success_rate,c_total_tokens,mc,mt,uplink_kb,rce,rr,pch_rate,shr,replan_rate,avg_steps\n",
    );
    for (name, r) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            name,
            r.tasks,
            fmt(r.success_rate),
            r.c_total_tokens,
            fmt(r.mc),
            fmt(r.mt),
            fmt(r.uplink_kb),
            fmt(r.rce),
            fmt(r.rr),
            fmt(r.pch_rate),
            r.shr.map(fmt).unwrap_or_else(|| "n/a".into()),
            fmt(r.replan_rate),
            fmt(r.avg_steps),
        ));
    }
    out
}
