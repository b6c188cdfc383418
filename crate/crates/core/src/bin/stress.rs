//! `stress run` drives a plan against a gateway; `stress bench` compares
//! naive and batched backend throughput. Exit code 0 iff no request failed.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use infergate::catalog::{simulated_registry, CallCost};
use infergate::loadgen::{
    bench_throughput, render_csv, render_report, run_stress, BenchMode, PlanOverrides, StressPlan,
};

#[derive(Parser)]
#[command(name = "stress", about = "Load generator and throughput bench for the gateway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run a stress plan and print the per-route latency table.
    Run {
        #[arg(long)]
        plan: PathBuf,
        /// Virtual users.
        #[arg(long)]
        users: Option<usize>,
        /// Run length in seconds (replaces the plan's stop condition).
        #[arg(long, conflicts_with = "requests")]
        duration: Option<f64>,
        /// Total request budget (replaces the plan's stop condition).
        #[arg(long)]
        requests: Option<u64>,
        /// Pace requests at this rate instead of running closed-loop.
        #[arg(long)]
        qps: Option<f64>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Measure items/second of a stock backend with simulated call costs.
    Bench {
        #[arg(long)]
        backend: String,
        #[arg(long)]
        mode: BenchMode,
        #[arg(long, default_value_t = 100)]
        items: usize,
        #[arg(long, default_value_t = 10)]
        batch: usize,
        /// Fixed cost of every backend call.
        #[arg(long, default_value_t = 10.0)]
        call_overhead_ms: f64,
        /// Additional cost per item.
        #[arg(long, default_value_t = 0.0)]
        item_cost_ms: f64,
    },
}

fn millis(ms: f64) -> Result<Duration, String> {
    Duration::try_from_secs_f64(ms / 1000.0).map_err(|e| format!("{ms} ms: {e}"))
}

async fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run {
            plan,
            users,
            duration,
            requests,
            qps,
            out,
            format,
        } => {
            let mut plan = StressPlan::load(&plan).map_err(|e| e.to_string())?;
            plan.apply(PlanOverrides {
                users,
                duration,
                requests,
                qps,
            })
            .map_err(|e| e.to_string())?;
            let report = run_stress(&plan).await.map_err(|e| e.to_string())?;
            let text = match format {
                Format::Text => render_report(&report),
                Format::Csv => render_csv(&report),
            };
            print!("{text}");
            eprintln!(
                "{} requests, {} errors, {:.2} s, {:.2} QPS achieved",
                report.attempts(),
                report.errors(),
                report.wall_time().as_secs_f64(),
                report.achieved_qps()
            );
            if let Some(path) = out {
                std::fs::write(&path, &text).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            Ok(report.errors() == 0)
        }
        Command::Bench {
            backend,
            mode,
            items,
            batch,
            call_overhead_ms,
            item_cost_ms,
        } => {
            let registry = simulated_registry(CallCost {
                per_call: millis(call_overhead_ms)?,
                per_item: millis(item_cost_ms)?,
            });
            let result = tokio::task::spawn_blocking(move || {
                bench_throughput(&registry, &backend, mode, items, batch)
            })
            .await
            .map_err(|e| e.to_string())?
            .map_err(|e| e.to_string())?;
            println!("{result}");
            Ok(true)
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli).await {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("stress: {e}");
            ExitCode::from(2)
        }
    }
}
