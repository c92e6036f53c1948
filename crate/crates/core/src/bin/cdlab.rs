//! Experiment runner. Exit codes: 0 all checks pass, 1 a check failed,
//! 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cdlab::experiments::{self, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "cdlab", version, about = "Numerical laboratory for coefficient recovery in a convection-diffusion equation")]
struct Cli {
    /// JSON experiment configuration
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Scenario to run (overrides the config)
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,

    /// Artifact directory (overrides the config)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads; scenarios are currently single-threaded and the value
    /// is recorded for provenance only
    #[arg(long, value_name = "K")]
    threads: Option<usize>,

    /// Seed recorded in the provenance hash
    #[arg(long, value_name = "S")]
    seed: Option<u64>,

    /// List scenarios and exit
    #[arg(long)]
    list: bool,

    /// Validate the configuration without running any numerics
    #[arg(long)]
    validate_only: bool,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = &cli.scenario {
        cfg.scenario = s.clone();
    }
    if let Some(dir) = &cli.out {
        cfg.out_dir = Some(dir.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if cli.list {
        for (name, desc) in experiments::list_scenarios() {
            println!("{name:16} {desc}");
        }
        return ExitCode::SUCCESS;
    }

    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(2);
        }
    };

    let diagnostics = experiments::validate(&cfg);
    if cli.validate_only {
        if diagnostics.is_empty() {
            println!("config ok");
            return ExitCode::SUCCESS;
        }
        for d in &diagnostics {
            eprintln!("config error: {d}");
        }
        return ExitCode::from(2);
    }
    if !diagnostics.is_empty() {
        for d in &diagnostics {
            eprintln!("config error: {d}");
        }
        return ExitCode::from(2);
    }

    match experiments::run(&cfg) {
        Ok(report) => {
            for c in &report.checks {
                let status = if c.passed { "pass" } else { "FAIL" };
                println!(
                    "[{status}] {:32} measured {:.6e} (threshold {:.3e}) — {}",
                    c.name, c.measured, c.threshold, c.detail
                );
            }
            println!(
                "{}: {} in {:.2}s (config {})",
                report.scenario,
                if report.passed { "all checks passed" } else { "CHECKS FAILED" },
                report.wall_clock_seconds,
                &report.config_sha256[..12]
            );
            if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(e) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
    }
}
