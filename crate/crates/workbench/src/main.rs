//! `nsaqkd` — command-line workbench over the core models.

// Negated comparisons below are deliberate NaN guards: `!(x > 0.0)` rejects
// NaN where `x <= 0.0` would accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nsaqkd::config::{Protocol, WorkbenchConfig};
use nsaqkd::report::{fingerprint, Intermediates, ReportFile};
use nsaqkd::runner::{simulate_bb84_parallel, simulate_mdi_parallel};
use nsaqkd::stats::StatsFile;
use nsaqkd::topology::TopologyFile;
use nsaqkd::resolve_path;

use nsaqkd_core::bb84_keyrate::bb84_key_rate;
use nsaqkd_core::mdi_keyrate::mdi_key_rate;
use nsaqkd_core::montecarlo::{Bb84SessionConfig, MdiSessionConfig};
use nsaqkd_core::network::{
    assign_protocols, enumerate_compromise_scenarios, survivability,
};
use nsaqkd_core::optimizer::{optimize_bb84_source, optimize_mdi_source};

#[derive(Parser)]
#[command(name = "nsaqkd", version, about = "QKD key-rate workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a key rate from observed statistics.
    Keyrate(KeyrateArgs),
    /// Run the pulse-level simulator and write an observed-statistics file.
    Simulate(SimulateArgs),
    /// Sweep one parameter and emit a CSV of key rates.
    Sweep(SweepArgs),
    /// Optimize source settings for a scenario.
    Optimize(OptimizeArgs),
    /// Topology analysis.
    #[command(subcommand)]
    Network(NetworkCommand),
}

#[derive(Args)]
struct KeyrateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    stats: PathBuf,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Pulses (BB84) or pulse pairs (MDI); accepts scientific notation.
    #[arg(long)]
    pulses: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Override the resource guard on very large runs.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// `param=lo:hi:steps`; params: distance_km, mu, nu, omega.
    #[arg(long)]
    vary: String,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration best-value trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Subcommand)]
enum NetworkCommand {
    /// Plan services and judge them against a compromise set.
    Analyze(AnalyzeArgs),
    /// Rank all compromise scenarios up to k nodes.
    Enumerate(EnumerateArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    topology: PathBuf,
    /// Compromised node; repeatable.
    #[arg(long)]
    compromise: Vec<String>,
    /// Also write a Graphviz rendering.
    #[arg(long)]
    dot: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnumerateArgs {
    topology: PathBuf,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Override the scenario-count guard.
    #[arg(long)]
    force: bool,
    /// Keep only the worst N scenarios.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Keyrate(args) => cmd_keyrate(&args),
        Command::Simulate(args) => cmd_simulate(&args).map(|()| 0),
        Command::Sweep(args) => cmd_sweep(&args).map(|()| 0),
        Command::Optimize(args) => cmd_optimize(&args),
        Command::Network(NetworkCommand::Analyze(args)) => cmd_network_analyze(&args).map(|()| 0),
        Command::Network(NetworkCommand::Enumerate(args)) => {
            cmd_network_enumerate(&args).map(|()| 0)
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Exit code 0 for a positive rate, 2 for a zero rate.
fn rate_code(rate: f64) -> u8 {
    if rate > 0.0 {
        0
    } else {
        2
    }
}

fn cmd_keyrate(args: &KeyrateArgs) -> Result<u8> {
    let config_path = resolve_path(&args.config);
    let stats_path = resolve_path(&args.stats);
    let config_bytes = std::fs::read(&config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let stats_bytes = std::fs::read(&stats_path)
        .with_context(|| format!("reading {}", stats_path.display()))?;
    let cfg = WorkbenchConfig::load(&config_path)?;
    let stats = StatsFile::load(&stats_path)?;
    let print = fingerprint(&[&config_bytes, &stats_bytes]);

    let intermediates = match cfg.protocol {
        Protocol::Mdi => {
            let scenario = cfg.mdi_scenario()?;
            let obs = stats.to_mdi_observations(&scenario)?;
            let report = mdi_key_rate(&obs, &scenario.source_a, &scenario.source_b, &cfg.mdi_params()?)
                .map_err(anyhow::Error::msg)?;
            Intermediates::Mdi(report)
        }
        Protocol::Bb84 => {
            let scenario = cfg.bb84_scenario()?;
            let obs = stats.to_bb84_observations(&scenario)?;
            let report = bb84_key_rate(&obs, &scenario.source, &cfg.bb84_params()?)
                .map_err(anyhow::Error::msg)?;
            Intermediates::Bb84(report)
        }
    };
    let report = ReportFile::new(
        &cfg.scenario,
        cfg.protocol,
        print,
        cfg.repetition_rate_hz,
        intermediates,
    );
    emit(&args.out, &report.to_json()?)?;
    Ok(rate_code(report.key_rate_per_pulse))
}

/// Largest run accepted without `--force`.
const MAX_UNFORCED_PULSES: f64 = 1.0e9;

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    if !(args.pulses >= 1.0) {
        bail!("--pulses must be at least 1");
    }
    if args.pulses > MAX_UNFORCED_PULSES && !args.force {
        bail!("refusing {} pulses (> {MAX_UNFORCED_PULSES:.0}); pass --force", args.pulses);
    }
    let n_pulses = args.pulses as u64;
    let cfg = WorkbenchConfig::load(&args.config)?;
    let file = match cfg.protocol {
        Protocol::Mdi => {
            let scenario = cfg.mdi_scenario()?;
            let stats = simulate_mdi_parallel(&MdiSessionConfig {
                n_pulses,
                seed: args.seed,
                source_a: scenario.source_a,
                source_b: scenario.source_b,
                link: scenario.link,
            })?;
            StatsFile::from_mdi_simulation(&stats)
        }
        Protocol::Bb84 => {
            let scenario = cfg.bb84_scenario()?;
            let stats = simulate_bb84_parallel(&Bb84SessionConfig {
                n_pulses,
                seed: args.seed,
                source: scenario.source,
                link: scenario.link,
                receiver_prob_x: None,
            })?;
            StatsFile::from_bb84_simulation(&stats, n_pulses)
        }
    };
    file.save(&args.out)
}

struct SweepSpec {
    param: String,
    values: Vec<f64>,
}

fn parse_sweep(vary: &str) -> Result<SweepSpec> {
    let (param, range) = vary.split_once('=').context("--vary needs param=lo:hi:steps")?;
    let parts: Vec<&str> = range.split(':').collect();
    let [lo, hi, steps] = parts.as_slice() else {
        bail!("--vary needs param=lo:hi:steps");
    };
    let lo: f64 = lo.parse().context("bad lo")?;
    let hi: f64 = hi.parse().context("bad hi")?;
    let steps: usize = steps.parse().context("bad steps")?;
    if steps == 0 {
        bail!("steps must be at least 1");
    }
    let values = if steps == 1 || lo == hi {
        vec![lo]
    } else {
        (0..steps)
            .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
            .collect()
    };
    Ok(SweepSpec { param: param.into(), values })
}

fn apply_sweep(cfg: &WorkbenchConfig, param: &str, value: f64) -> Result<WorkbenchConfig> {
    let mut out = cfg.clone();
    fn sources(c: &mut WorkbenchConfig) -> [Option<&mut nsaqkd::config::SourceConfig>; 3] {
        [c.source.as_mut(), c.source_a.as_mut(), c.source_b.as_mut()]
    }
    match param {
        "distance_km" => {
            out.link.length_km_a = value;
            if out.link.length_km_b.is_some() {
                out.link.length_km_b = Some(value);
            }
        }
        "mu" => sources(&mut out).into_iter().flatten().for_each(|s| s.mu = value),
        "nu" => sources(&mut out).into_iter().flatten().for_each(|s| s.nu = value),
        "omega" => sources(&mut out).into_iter().flatten().for_each(|s| s.omega = value),
        other => bail!("unknown sweep parameter {other:?}"),
    }
    Ok(out)
}

fn analytic_rate(cfg: &WorkbenchConfig) -> Result<f64> {
    let rate = match cfg.protocol {
        Protocol::Mdi => {
            nsaqkd_core::mdi_keyrate::mdi_key_rate_analytic(&cfg.mdi_scenario()?, &cfg.mdi_params()?)
                .map_err(anyhow::Error::msg)?
                .key_rate
        }
        Protocol::Bb84 => nsaqkd_core::bb84_keyrate::bb84_key_rate_analytic(
            &cfg.bb84_scenario()?,
            &cfg.bb84_params()?,
        )
        .map_err(anyhow::Error::msg)?
        .key_rate,
    };
    Ok(rate)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = WorkbenchConfig::load(&args.config)?;
    let spec = parse_sweep(&args.vary)?;
    let mut csv = format!("{},key_rate_per_pulse,key_rate_per_second\n", spec.param);
    for &value in &spec.values {
        let varied = apply_sweep(&cfg, &spec.param, value)?;
        let rate = analytic_rate(&varied)?;
        csv += &format!("{value},{rate:e},{:e}\n", rate * cfg.repetition_rate_hz);
    }
    emit(&args.out, &csv)
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<u8> {
    let cfg = WorkbenchConfig::load(&args.config)?;
    let pso = cfg.pso_config();
    let optimum = match cfg.protocol {
        Protocol::Mdi => optimize_mdi_source(&cfg.mdi_scenario()?, &cfg.mdi_params()?, &pso),
        Protocol::Bb84 => optimize_bb84_source(&cfg.bb84_scenario()?, &cfg.bb84_params()?, &pso),
    }
    .map_err(anyhow::Error::msg)?;
    if let Some(trace) = &args.trace {
        let mut csv = String::from("iteration,best_key_rate\n");
        for (i, v) in optimum.history.iter().enumerate() {
            csv += &format!("{i},{v:e}\n");
        }
        std::fs::write(trace, csv).with_context(|| format!("writing {}", trace.display()))?;
    }
    emit(&args.out, &(serde_json::to_string_pretty(&optimum)? + "\n"))?;
    Ok(rate_code(optimum.key_rate))
}

fn cmd_network_analyze(args: &AnalyzeArgs) -> Result<()> {
    let file = TopologyFile::load(&args.topology)?;
    let (topo, rates) = file.to_core()?;
    if let Some(dot) = &args.dot {
        std::fs::write(dot, topo.to_dot()).with_context(|| format!("writing {}", dot.display()))?;
    }
    let plan = assign_protocols(&topo, &rates).map_err(anyhow::Error::msg)?;
    let compromised: Vec<&str> = args.compromise.iter().map(String::as_str).collect();
    let report = survivability(&topo, &rates, &compromised).map_err(anyhow::Error::msg)?;
    let combined = serde_json::json!({ "plan": plan, "survivability": report });
    emit(&args.out, &(serde_json::to_string_pretty(&combined)? + "\n"))
}

fn cmd_network_enumerate(args: &EnumerateArgs) -> Result<()> {
    let file = TopologyFile::load(&args.topology)?;
    let (topo, rates) = file.to_core()?;
    let mut reports = enumerate_compromise_scenarios(&topo, &rates, args.k, args.force)
        .map_err(anyhow::Error::msg)?;
    if let Some(limit) = args.limit {
        reports.truncate(limit);
    }
    emit(&args.out, &(serde_json::to_string_pretty(&reports)? + "\n"))
}
