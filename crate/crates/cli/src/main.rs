use clap::{Parser, Subcommand};

use adec_cli::commands::{
    cmd_ablate, cmd_bench, cmd_netscan, cmd_report, cmd_run, AblateArgs, BenchArgs, NetscanArgs,
    ReportArgs, RunArgs,
};

/// Hierarchical edge-cloud automation engine over a simulated device world.
#[derive(Parser)]
#[command(name = "adec", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single task and write its trace.
    Run(RunArgs),
    /// Run a task suite across seeds and emit an aggregate report.
    Bench(BenchArgs),
    /// Compare ablation flags and hyperparameter sweeps side by side.
    Ablate(AblateArgs),
    /// Model end-to-end latency across network profiles.
    Netscan(NetscanArgs),
    /// Rebuild a report from a directory of traces.
    Report(ReportArgs),
}

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Netscan(args) => cmd_netscan(args),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("adec: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
