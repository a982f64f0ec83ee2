//! `simlab <scenario> [--config FILE] [--seed U64] [--trials N] [--out PATH]
//! [--threads N] [key=value ...]`
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser};
use simlab_core::simlab::config::KEY_HELP;
use simlab_core::simlab::{emit_csv, emit_gnuplot, run_scenario, write_csv, Scenario, ScenarioConfig};
use simlab_core::Error;

#[derive(Parser, Debug)]
#[command(name = "simlab", version, about = "Monte-Carlo scenarios for multi-user hybrid mmWave MIMO")]
struct Cli {
    /// mse-sweep | rate-vs-snr | rate-vs-kappa | impairments | antenna-sweep
    scenario: String,

    /// Config file of `key = value` lines; `#` starts a comment.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Trials per sweep point.
    #[arg(long, value_name = "N")]
    trials: Option<usize>,

    /// CSV destination; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// `key=value` overrides, applied after the config file and flags.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn key_table() -> String {
    let width = KEY_HELP.iter().map(|(k, _, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (default in brackets):\n");
    for (key, default, meaning) in KEY_HELP {
        s.push_str(&format!("  {key:<width$}  {meaning} [{default}]\n"));
    }
    s.push_str("\nSweeps accept `start:step:stop` or comma lists, e.g. snr_db=-10:5:20.");
    s
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn build_config(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let scenario: Scenario = cli.scenario.parse()?;
    let mut cfg = ScenarioConfig::defaults(scenario);
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_source(&text)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.apply("trials", &trials.to_string())?;
    }
    if let Some(out) = &cli.out {
        cfg.out_path = Some(out.clone());
    }
    if let Some(threads) = cli.threads {
        cfg.apply("threads", &threads.to_string())?;
    }
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("override `{kv}` is not key=value")))?;
        cfg.apply(k.trim(), v)?;
    }
    cfg.validate()?;
    if cfg.gnuplot && cfg.out_path.is_none() {
        return Err(Failure::Config("config error at `gnuplot`: needs an --out path to place the .dat file".into()));
    }
    Ok(cfg)
}

fn run(cfg: &ScenarioConfig) -> Result<(), Failure> {
    let report = run_scenario(cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match &cfg.out_path {
        Some(path) => {
            emit_csv(&report.records, path)?;
            if cfg.gnuplot {
                emit_gnuplot(&report.records, &path.with_extension("dat"))?;
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(write_csv(&report.records).as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Runtime(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cmd = Cli::command().after_long_help(key_table()).after_help("Run with --help for all config keys.");
    let cli = match cmd.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = build_config(&cli).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("simlab: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("simlab: {msg}");
            ExitCode::from(2)
        }
    }
}
