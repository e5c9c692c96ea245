use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairharvest_cli::scenario::{generate_instance, InstanceKind};
use fairharvest_cli::{run, write_json, write_reports, Command, Failure, LexmaxSetting, RunOptions};

/// Max-min fair sensing rates for energy-harvesting sensor networks.
///
/// Exit codes: 0 success, 2 infeasible or no solution, 3 invalid input,
/// 4 no convergence.
#[derive(Parser)]
#[command(name = "fairharvest", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Search precision δ.
    #[arg(long, global = true, default_value_t = fairharvest::DEFAULT_DELTA)]
    delta: f64,
    /// Cross-check the result against the exact reference when the instance is small enough.
    #[arg(long, global = true)]
    oracle: bool,
    /// Seed for the random generator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Report directory (solvers) or scenario file (generate). Without it,
    /// the summary or scenario goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Max-min fair rates along given unsplittable paths.
    UnsplittableRates {
        scenario: PathBuf,
        /// Paths file ({"time_invariable": .., "paths": ..}); defaults to the scenario's own paths.
        #[arg(long)]
        paths: Option<PathBuf>,
    },
    /// Max-min fair constant rates with a time-invariable fractional routing.
    FixedFractional { scenario: PathBuf },
    /// ε-approximate max-min fair rates with time-variable fractional routing.
    FractionalFptas {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
    /// Time-invariable unsplittable routing maximizing the minimum rate.
    FindUnsplittable { scenario: PathBuf },
    /// Exact lexicographically maximum rates by iterated rational LPs (small instances only).
    Lexmax {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = SettingArg::TimeVariable)]
        setting: SettingArg,
        #[arg(long)]
        paths: Option<PathBuf>,
    },
    /// Writes a deterministic scenario.
    Generate {
        #[arg(value_enum)]
        kind: KindArg,
        /// Size parameter of fig4 and fig5.
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Number of sensors (random).
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Horizon (random).
        #[arg(long, default_value_t = 3)]
        t: usize,
        /// Sensing plus transmit cost (fig2).
        #[arg(long, default_value_t = 1.0)]
        c_st: f64,
        /// Receive plus transmit cost (fig2).
        #[arg(long, default_value_t = 2.0)]
        c_rt: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SettingArg {
    TimeVariable,
    Constant,
    GivenPaths,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Fig2,
    Fig4,
    Fig5,
    Random,
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let opts = RunOptions { delta: cli.common.delta, oracle: cli.common.oracle };
    if !(opts.delta > 0.0) {
        return Err(Failure::Input(format!("--delta must be positive, got {}", opts.delta)));
    }
    let (command, scenario) = match cli.command {
        Cmd::Generate { kind, k, n, t, c_st, c_rt } => {
            let kind = match kind {
                KindArg::Fig2 => InstanceKind::Fig2 { c_st, c_rt },
                KindArg::Fig4 => InstanceKind::Fig4 { k },
                KindArg::Fig5 => InstanceKind::Fig5 { k },
                KindArg::Random => InstanceKind::Random { sensors: n, horizon: t, seed: cli.common.seed },
            };
            let scenario = generate_instance(kind)?;
            match &cli.common.out {
                Some(path) => write_json(path, &scenario)?,
                None => println!("{}", serde_json::to_string_pretty(&scenario).map_err(anyhow::Error::from)?),
            }
            return Ok(());
        }
        Cmd::UnsplittableRates { scenario, paths } => (Command::UnsplittableRates { paths }, scenario),
        Cmd::FixedFractional { scenario } => (Command::FixedFractional, scenario),
        Cmd::FractionalFptas { scenario, epsilon } => (Command::FractionalFptas { epsilon }, scenario),
        Cmd::FindUnsplittable { scenario } => (Command::FindUnsplittable, scenario),
        Cmd::Lexmax { scenario, setting, paths } => {
            let setting = match setting {
                SettingArg::TimeVariable => LexmaxSetting::TimeVariable,
                SettingArg::Constant => LexmaxSetting::Constant,
                SettingArg::GivenPaths => LexmaxSetting::GivenPaths,
            };
            (Command::Lexmax { setting, paths }, scenario)
        }
    };
    let out = run(&command, &scenario, opts)?;
    if let Some(dir) = &cli.common.out {
        write_reports(dir, &out)?;
    }
    println!("{}", serde_json::to_string_pretty(&out.summary).map_err(anyhow::Error::from)?);
    if let Some(check) = out.summary.oracle.as_ref().filter(|c| !c.within_tolerance) {
        eprintln!("warning: result deviates from {} by {}", check.reference, check.max_shortfall);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
