//! `aggsim`: run aggregation scenarios and emit CSV or JSON reports.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 the simulation
//! aborted on an internal consistency check.

use std::ops::Range;
use std::path::PathBuf;
use std::process::ExitCode;

use aggsim_core::engine::{run_with_trace, scenario_trace, SimError};
use aggsim_core::report::{summarize_sweep, sweep_to_csv, sweep_to_json, to_csv, to_json};
use aggsim_core::{load_scenario, MetricsReport, Scenario, SchedulerPolicy};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "aggsim", version, about = "802.11n frame aggregation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write a report.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file. Without it the built-in unsaturated-mixed scenario runs.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the file).
    #[arg(long)]
    seed: Option<u64>,
    /// bi, fifo, ampdu-greedy or amsdu-greedy (overrides the file).
    #[arg(long)]
    scheduler: Option<SchedulerPolicy>,
    #[arg(long)]
    duration_ms: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run bi, fifo and ampdu-greedy on one shared arrival trace.
    #[arg(long)]
    compare: bool,
    /// Independent runs over a seed range, e.g. `seed=1..21` or `seed=1..=20`,
    /// reported as mean and standard deviation.
    #[arg(long)]
    sweep: Option<String>,
}

fn parse_sweep(spec: &str) -> Result<Range<u64>> {
    let range = spec
        .strip_prefix("seed=")
        .with_context(|| format!("--sweep expects `seed=a..b`, got `{spec}`"))?;
    let (lo, hi, inclusive) = if let Some((lo, hi)) = range.split_once("..=") {
        (lo, hi, true)
    } else if let Some((lo, hi)) = range.split_once("..") {
        (lo, hi, false)
    } else {
        bail!("--sweep expects `seed=a..b`, got `{spec}`");
    };
    let lo: u64 = lo.trim().parse().with_context(|| format!("bad sweep start `{lo}`"))?;
    let hi: u64 = hi.trim().parse().with_context(|| format!("bad sweep end `{hi}`"))?;
    let end = if inclusive { hi.checked_add(1).context("sweep end too large")? } else { hi };
    if lo >= end {
        bail!("--sweep range `{range}` is empty");
    }
    Ok(lo..end)
}

fn resolve_scenario(args: &RunArgs) -> Result<Scenario> {
    let mut scenario = match &args.config {
        Some(path) => load_scenario(path)?,
        None => Scenario::unsaturated_mixed(),
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(policy) = args.scheduler {
        scenario.scheduler.policy = policy;
    }
    if let Some(ms) = args.duration_ms {
        scenario.duration_us = ms.checked_mul(1000).context("--duration-ms too large")?;
    }
    scenario.validate()?;
    Ok(scenario)
}

/// All reports for one seed; compared policies share the arrival trace.
fn run_seed(scenario: &Scenario, seed: u64, compare: bool) -> Result<Vec<MetricsReport>, SimError> {
    let policies: Vec<SchedulerPolicy> =
        if compare { SchedulerPolicy::COMPARED.to_vec() } else { vec![scenario.scheduler.policy] };
    let trace = scenario_trace(scenario, seed);
    policies.into_iter().map(|p| run_with_trace(scenario, seed, p, &trace)).collect()
}

fn execute(args: RunArgs) -> Result<()> {
    let sweep = args.sweep.as_deref().map(parse_sweep).transpose()?;
    let scenario = resolve_scenario(&args)?;
    let output = match sweep {
        None => {
            let reports = run_seed(&scenario, scenario.seed, args.compare)?;
            match args.format {
                Format::Csv => to_csv(&reports),
                Format::Json => to_json(&scenario, &reports),
            }
        }
        Some(seeds) => {
            let seeds: Vec<u64> = seeds.collect();
            let per_seed: Vec<Vec<MetricsReport>> = seeds
                .par_iter()
                .map(|&seed| run_seed(&scenario, seed, args.compare))
                .collect::<Result<_, _>>()?;
            let rows = summarize_sweep(&per_seed.concat());
            match args.format {
                Format::Csv => sweep_to_csv(&rows),
                Format::Json => sweep_to_json(&scenario, &seeds, &rows),
            }
        }
    };
    match &args.out {
        Some(path) => std::fs::write(path, output).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{output}"),
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<SimError>() {
        Some(SimError::Config(_)) | None => 1,
        Some(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let Command::Run(args) = cli.command;
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_ranges() {
        assert_eq!(parse_sweep("seed=1..4").unwrap(), 1..4);
        assert_eq!(parse_sweep("seed=1..=4").unwrap(), 1..5);
        assert!(parse_sweep("seed=4..4").is_err());
        assert!(parse_sweep("1..4").is_err());
        assert!(parse_sweep("seed=a..4").is_err());
    }

    #[test]
    fn runtime_failures_map_to_two() {
        let err = anyhow::Error::new(SimError::DuplicateDelivery(3));
        assert_eq!(exit_code(&err), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("bad file")), 1);
    }
}
