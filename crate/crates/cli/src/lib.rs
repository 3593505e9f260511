//! Configuration, scenario orchestration and report emission for the `cwlab`
//! command line tool.

pub mod config;
pub mod report;
pub mod scenarios;
pub mod sweep;

pub use config::{parse_config, parse_config_str, ConfigError, ScenarioConfig, ScenarioKind};
pub use report::{CheckResult, RunReport};
pub use scenarios::run_scenario;
pub use sweep::sweep;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Process exit status for a finished report.
pub fn exit_code(report: &RunReport) -> i32 {
    match report.failure_category() {
        Some("configuration") => EXIT_CONFIG,
        Some(_) => EXIT_NUMERICAL,
        None if report.passed => EXIT_PASS,
        None => EXIT_CHECK_FAILED,
    }
}

/// Split `--section.key=value` / `--section.key value` arguments (any flag
/// whose name contains a dot) from the rest.
pub fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), ConfigError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--").filter(|f| f.split('=').next().is_some_and(|k| k.contains('.')))
        else {
            rest.push(arg);
            continue;
        };
        match flag.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().ok_or_else(|| ConfigError {
                    message: format!("override --{flag} needs a value"),
                    line: None,
                })?;
                overrides.push((flag.to_string(), v));
            }
        }
    }
    Ok((rest, overrides))
}
