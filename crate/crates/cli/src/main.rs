use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cwlab::config::{parse_config_str, ScenarioKind};
use cwlab::{exit_code, run_scenario, split_overrides, sweep, RunReport, EXIT_CONFIG};

/// Viscous contact wave laboratory.
///
/// Any `--section.key=value` flag overrides the configuration key of the same
/// dotted path.
#[derive(Parser, Debug)]
#[command(name = "cwlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration file; scenario defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    WaveDecay(Common),
    OracleCheck(Common),
    KappaSweep(Common),
    Stability(Common),
    BoundaryOde(Common),
    FullAcceptance(Common),
    /// Run the configured scenario once per value of a numeric key.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted config path, e.g. `wave.delta0`.
        #[arg(long)]
        axis: Option<String>,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Metric that must strictly decrease along the sweep (repeatable).
        #[arg(long)]
        expect_decreasing: Vec<String>,
    },
}

fn print(report: &RunReport) {
    for c in report.all_checks() {
        println!("{}", c.line());
    }
    if let Some(f) = &report.failure {
        println!("ERROR ({}): {}", f.category, f.message);
    }
    for s in &report.sub_reports {
        if let Some(f) = &s.failure {
            println!("ERROR in {} ({}): {}", s.scenario, f.category, f.message);
        }
    }
    println!(
        "{}: {} in {:.1} s -> {}",
        report.scenario,
        if report.passed { "PASS" } else { "FAIL" },
        report.wall_clock_seconds,
        report.config.output_dir.display()
    );
}

fn main() -> ExitCode {
    let (args, mut overrides) = match split_overrides(std::env::args().collect()) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let cli = Cli::parse_from(args);
    let (kind, common) = match &cli.command {
        Command::WaveDecay(c) => (Some(ScenarioKind::WaveDecay), c),
        Command::OracleCheck(c) => (Some(ScenarioKind::OracleCheck), c),
        Command::KappaSweep(c) => (Some(ScenarioKind::KappaSweep), c),
        Command::Stability(c) => (Some(ScenarioKind::Stability), c),
        Command::BoundaryOde(c) => (Some(ScenarioKind::BoundaryOde), c),
        Command::FullAcceptance(c) => (Some(ScenarioKind::FullAcceptance), c),
        Command::Sweep { common, .. } => (None, common),
    };
    if let Some(dir) = &common.output_dir {
        overrides.push(("output_dir".into(), format!("{:?}", dir.display().to_string())));
    }
    if let Some(seed) = common.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let text = match &common.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("configuration error: cannot read {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG as u8);
            }
        },
        None => String::new(),
    };
    let cfg = match parse_config_str(&text, &overrides, kind) {
        Ok(c) => c,
        Err(e) => {
            let origin = common.config.as_ref().map_or("<defaults>".into(), |p| p.display().to_string());
            eprintln!("{origin}: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let report = match &cli.command {
        Command::Sweep {
            axis,
            values,
            expect_decreasing,
            ..
        } => {
            let axis = axis.clone().unwrap_or_else(|| cfg.sweep.axis.clone());
            let values = if values.is_empty() { cfg.sweep.values.clone() } else { values.clone() };
            let expect = if expect_decreasing.is_empty() {
                cfg.sweep.expect_decreasing.clone()
            } else {
                expect_decreasing.clone()
            };
            sweep(&cfg, &axis, &values, &expect)
        }
        _ => run_scenario(&cfg),
    };
    print(&report);
    ExitCode::from(exit_code(&report) as u8)
}
