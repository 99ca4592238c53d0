use clap::Args;

use adec_core::metrics::{rce_vs_baseline, CostReport};
use adec_core::pilot::AblationSet;

use crate::commands::{bench::parse_seeds, bench::run_bench, report_csv};
use crate::config::{resolve, RunFlags, Settings};
use crate::engine::resolve_suite;
use crate::CliError;

/// Relative-cloud-energy penalty for image-streaming baselines.
pub const MU: f64 = 1.2;

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub flags: RunFlags,

    #[arg(long, default_value = "0,1,2")]
    pub seeds: String,

    /// Comma-separated tau values to sweep.
    #[arg(long)]
    pub sweep_tau: Option<String>,

    /// Comma-separated alpha values to sweep.
    #[arg(long)]
    pub sweep_alpha: Option<String>,
}

fn parse_values(raw: &str, what: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::config(format!("bad {what} '{s}'")))
        })
        .collect()
}

/// One configuration variant of the comparison table.
struct Variant {
    name: String,
    settings: Settings,
}

fn variants(args: &AblateArgs, base: &Settings) -> Result<Vec<Variant>, CliError> {
    let mut out = vec![Variant {
        name: "baseline".into(),
        settings: base.clone(),
    }];
    if let Some(raw) = &args.sweep_tau {
        for tau in parse_values(raw, "tau")? {
            let mut settings = base.clone();
            settings.pilot.tau = tau;
            settings
                .pilot
                .validate()
                .map_err(|e| CliError::config(e.to_string()))?;
            out.push(Variant {
                name: format!("tau={tau}"),
                settings,
            });
        }
    }
    if let Some(raw) = &args.sweep_alpha {
        for alpha in parse_values(raw, "alpha")? {
            if alpha < 0.0 {
                return Err(CliError::config("alpha must be non-negative"));
            }
            let mut settings = base.clone();
            settings.grounding.alpha = alpha;
            out.push(Variant {
                name: format!("alpha={alpha}"),
                settings,
            });
        }
    }
    if let Some(list) = &args.flags.ablate {
        for flag in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let set = AblationSet::parse_list(flag).map_err(|e| CliError::config(e.to_string()))?;
            let mut settings = base.clone();
            settings.pilot.ablation = set;
            out.push(Variant {
                name: flag.to_string(),
                settings,
            });
        }
        // The combined set must also be coherent.
        AblationSet::parse_list(list).map_err(|e| CliError::config(e.to_string()))?;
    }
    Ok(out)
}

/// Benches every requested configuration side by side and writes a
/// comparative CSV anchored to the baseline run.
pub fn cmd_ablate(args: &AblateArgs) -> Result<i32, CliError> {
    let mut base_flags = args.flags.clone();
    base_flags.ablate = None;
    let base = resolve(&base_flags)?;
    let suite = resolve_suite(&args.flags.tasks, args.flags.world.as_deref())?;
    let seeds = parse_seeds(&args.seeds)?;

    let mut reports: Vec<(String, CostReport)> = Vec::new();
    for variant in variants(args, &base)? {
        let out_dir = args.flags.out.join(variant.name.replace('=', "_"));
        let (_, report) = run_bench(&suite, &variant.settings, &seeds, args.flags.jobs, &out_dir)?;
        reports.push((variant.name, report));
    }

    let baseline = reports[0].1.clone();
    for (_, report) in reports.iter_mut() {
        rce_vs_baseline(report, &baseline, MU).map_err(|e| CliError::failure(e.to_string()))?;
    }

    let rows: Vec<(String, &CostReport)> = reports.iter().map(|(n, r)| (n.clone(), r)).collect();
    let csv = report_csv(&rows);
    std::fs::create_dir_all(&args.flags.out).map_err(|e| CliError::failure(e.to_string()))?;
    std::fs::write(args.flags.out.join("ablate.csv"), &csv)
        .map_err(|e| CliError::failure(e.to_string()))?;
    print!("{csv}");
    Ok(0)
}
