//! `nonstat`: run bandit experiments, verification suites and tuning from
//! the command line.
//!
//! Exit codes: 0 on success, 1 on a runtime failure or a failed check,
//! 2 on an invalid configuration or invocation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use nonstat::environments::ScenarioSpec;
use nonstat::harness::{emit_results, run_replications, ExperimentConfig, PolicyKind, PolicySpec};
use nonstat::policies::{
    tune_gamma, tune_gamma_unclamped, tune_window, tune_window_unknown, SwRadius, GAMMA_MAX,
    GAMMA_MIN,
};
use nonstat::verify::{run_suite, Suite};

#[derive(Parser)]
#[command(name = "nonstat", version, about = "Linear bandits under drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded replications and write regret.csv and manifest.json.
    Run(RunArgs),
    /// Run a verification suite and report JSON.
    Verify(VerifyArgs),
    /// Print the tuned discount factor and window lengths.
    Tune(TuneArgs),
    /// List the built-in scenarios.
    Scenarios,
}

/// Every flag overrides the matching field of `--config`.
#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    scenario: Option<String>,
    /// Comma-separated policy list, e.g. `dlinucb,linucb,swlinucb,linucb-or`.
    #[arg(long)]
    policies: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    /// Discount factor for every dlinucb entry.
    #[arg(long)]
    gamma: Option<f64>,
    /// Window length for every swlinucb entry.
    #[arg(long)]
    window: Option<usize>,
    /// Output directory (default `results`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sliding-window radius variant: `corrected` or `legacy`.
    #[arg(long)]
    sw_radius: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// coverage, matrix, sw, bias or all.
    suite: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    /// Variation budget `B_T`.
    #[arg(long)]
    budget: f64,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    horizon: u64,
}

/// An error plus the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn config(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into() }
    }

    fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, error: error.into() }
    }
}

impl From<nonstat::Error> for Failure {
    fn from(e: nonstat::Error) -> Self {
        if e.is_config_error() {
            Failure::config(e)
        } else {
            Failure::runtime(e)
        }
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))
        .map_err(Failure::config)?;
    ExperimentConfig::from_json(&text)
        .with_context(|| format!("invalid config file {}", path.display()))
        .map_err(Failure::config)
}

fn effective_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => {
            let scenario = args.scenario.as_deref().unwrap_or("abrupt");
            let policies = args.policies.as_deref().unwrap_or("dlinucb,linucb");
            ExperimentConfig::new(
                ScenarioSpec::from_name(scenario)?,
                PolicySpec::parse_list(policies)?,
            )
        }
    };
    if args.config.is_some() {
        if let Some(name) = &args.scenario {
            cfg.scenario = ScenarioSpec::from_name(name)?;
        }
        if let Some(list) = &args.policies {
            cfg.policies = PolicySpec::parse_list(list)?;
        }
    }
    if let Some(n) = args.reps {
        cfg.replications = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.horizon {
        cfg.horizon = Some(t);
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    let sw_radius = args
        .sw_radius
        .as_deref()
        .map(str::parse::<SwRadius>)
        .transpose()?;
    for p in &mut cfg.policies {
        match p.kind {
            PolicyKind::DLinUcb if args.gamma.is_some() => p.gamma = args.gamma,
            PolicyKind::SwLinUcb => {
                if args.window.is_some() {
                    p.window = args.window;
                }
                if sw_radius.is_some() {
                    p.sw_radius = sw_radius;
                }
            }
            _ => {}
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let cfg = effective_config(&args)?;
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("results"));
    log::info!(
        "scenario {}, {} replications from seed {}",
        cfg.scenario.name(),
        cfg.replications,
        cfg.seed
    );
    let result = run_replications(&cfg)?;
    emit_results(&result, &out)?;
    for p in &result.policies {
        println!(
            "{:<16} final regret {:>10.2}  [q05 {:.2}, q95 {:.2}]",
            p.name, p.final_regret.mean, p.final_regret.q05, p.final_regret.q95
        );
    }
    println!("wrote {}", out.join("regret.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    let suite: Suite = args.suite.parse()?;
    let report = run_suite(suite, args.seed)?;
    let json = serde_json::to_string_pretty(&report).map_err(Failure::runtime)?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, json + "\n")
                .with_context(|| format!("cannot write {}", path.display()))
                .map_err(Failure::runtime)?;
            for line in report.lines() {
                println!("{line}");
            }
        }
        None => {
            println!("{json}");
            for line in report.lines() {
                eprintln!("{line}");
            }
        }
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_tune(args: TuneArgs) -> CmdResult {
    if args.dim == 0 {
        return Err(Failure::config(anyhow!("--dim must be positive")));
    }
    if args.horizon == 0 {
        return Err(Failure::config(anyhow!("--horizon must be positive")));
    }
    if !(args.budget >= 0.0) || !args.budget.is_finite() {
        return Err(Failure::config(anyhow!("--budget must be a finite non-negative number")));
    }
    let raw = tune_gamma_unclamped(args.budget, args.dim, args.horizon);
    let gamma = tune_gamma(args.budget, args.dim, args.horizon);
    println!("gamma = {gamma:.6}");
    if raw > GAMMA_MAX {
        println!("  (formula gives {raw:.6}; clamped to 1 - 1e-6)");
    } else if raw < GAMMA_MIN {
        println!("  (formula gives {raw:.6}; clamped to {GAMMA_MIN})");
    }
    println!("window = {}", tune_window(args.budget, args.dim, args.horizon));
    println!(
        "window (unknown budget) = {}",
        tune_window_unknown(args.dim, args.horizon)
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_scenarios() -> CmdResult {
    for name in ScenarioSpec::BUILTIN {
        let spec = ScenarioSpec::from_name(name)?;
        println!("{name:<16} {}", spec.describe());
    }
    println!("{:<16} user CSV pools via a config file (see README)", "context_pools");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Scenarios => cmd_scenarios(),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> RunArgs {
        let mut full = vec!["nonstat", "run"];
        full.extend_from_slice(list);
        match Cli::parse_from(full).command {
            Command::Run(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn tuning_flags_reach_matching_kinds_only() {
        let cfg = effective_config(&args(&[
            "--policies", "dlinucb,swlinucb,linucb", "--gamma", "0.9", "--window", "40",
            "--sw-radius", "legacy",
        ]))
        .ok()
        .unwrap();
        assert_eq!(cfg.policies[0].gamma, Some(0.9));
        assert_eq!(cfg.policies[0].window, None);
        assert_eq!(cfg.policies[1].window, Some(40));
        assert_eq!(cfg.policies[1].sw_radius, Some(SwRadius::Legacy));
        assert_eq!(cfg.policies[2].gamma, None);
    }

    #[test]
    fn defaults_without_config() {
        let cfg = effective_config(&args(&[])).ok().unwrap();
        assert_eq!(cfg.scenario.name(), "abrupt");
        assert_eq!(cfg.policies.len(), 2);
    }
}
