//! One-axis parameter sweeps: independent runs per value, merged in value order.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{apply_override, ConfigError, ScenarioConfig};
use crate::report::{fmt_f64, CheckResult, CsvTable, RunFailure, RunReport};
use crate::scenarios::run_scenario;

/// `template` with `axis` set to `value` and a per-value output directory.
pub fn config_at(template: &ScenarioConfig, axis: &str, value: f64) -> Result<ScenarioConfig, ConfigError> {
    let mut table = toml::Table::try_from(template).map_err(|e| ConfigError {
        message: format!("cannot serialize template: {e}"),
        line: None,
    })?;
    let root = toml::Value::Table(table.clone());
    let current = axis.split('.').try_fold(&root, |v, k| {
        v.as_table().and_then(|t| t.get(k))
    });
    match current {
        Some(toml::Value::Float(_) | toml::Value::Integer(_)) => {}
        _ => {
            return Err(ConfigError {
                message: format!("sweep axis `{axis}` is not a numeric configuration key"),
                line: None,
            })
        }
    }
    let literal = match current {
        Some(toml::Value::Integer(_)) if value.fract() == 0.0 => format!("{}", value as i64),
        Some(toml::Value::Integer(_)) => {
            return Err(ConfigError {
                message: format!("sweep axis `{axis}` is an integer key; got {value}"),
                line: None,
            })
        }
        _ => format!("{value:?}"),
    };
    apply_override(&mut table, axis, &literal)?;
    table.insert(
        "output_dir".into(),
        toml::Value::String(template.output_dir.join(format!("{axis}={value}")).display().to_string()),
    );
    let cfg: ScenarioConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError {
        message: e.message().to_string(),
        line: None,
    })?;
    cfg.validate().map_err(|(key, mut e)| {
        e.message = format!("{axis} = {value}: {key}: {}", e.message);
        e
    })?;
    Ok(cfg)
}

fn verdict(column: &[f64]) -> &'static str {
    if column.len() < 2 || column.iter().any(|v| !v.is_finite()) {
        "undetermined"
    } else if column.windows(2).all(|w| w[1] < w[0]) {
        "strictly-decreasing"
    } else if column.windows(2).all(|w| w[1] > w[0]) {
        "strictly-increasing"
    } else {
        "non-monotone"
    }
}

/// Run `template` once per value of `axis` (concurrently) and merge the
/// reports in value order. Metrics named in `expect_decreasing` become checks.
pub fn sweep(template: &ScenarioConfig, axis: &str, values: &[f64], expect_decreasing: &[String]) -> RunReport {
    let start = Instant::now();
    let mut merged = RunReport::new(template.clone());
    merged.scenario = format!("sweep:{}", template.scenario);
    let configs: Result<Vec<ScenarioConfig>, ConfigError> =
        values.iter().map(|&v| config_at(template, axis, v)).collect();
    match configs {
        Err(e) => {
            merged.failure = Some(RunFailure {
                category: "configuration".into(),
                message: e.to_string(),
            })
        }
        Ok(_) if values.is_empty() => {
            merged.failure = Some(RunFailure {
                category: "configuration".into(),
                message: "sweep needs at least one value".into(),
            })
        }
        Ok(configs) => {
            merged.sub_reports = configs.par_iter().map(run_scenario).collect();
            merge(&mut merged, axis, values, expect_decreasing);
        }
    }
    merged.wall_clock_seconds = start.elapsed().as_secs_f64();
    merged.finish();
    if let Err(e) = merged.write(&template.output_dir) {
        merged.failure = Some(RunFailure {
            category: "io".into(),
            message: e.to_string(),
        });
        merged.finish();
    }
    merged
}

fn merge(merged: &mut RunReport, axis: &str, values: &[f64], expect_decreasing: &[String]) {
    if let Some((v, sub)) = values.iter().zip(&merged.sub_reports).find(|(_, s)| s.failure.is_some()) {
        let f = sub.failure.as_ref().expect("filtered on failure");
        merged.failure = Some(RunFailure {
            category: f.category.clone(),
            message: format!("{axis} = {v}: {}", f.message),
        });
    }
    let mut common: BTreeSet<String> = merged.sub_reports[0].metrics.keys().cloned().collect();
    for s in &merged.sub_reports[1..] {
        common.retain(|k| s.metrics.contains_key(k));
    }
    let subs = std::mem::take(&mut merged.sub_reports);
    let column = |name: &str| -> Vec<f64> {
        subs.iter()
            .map(|s| s.metrics.get(name).copied().unwrap_or(f64::NAN))
            .collect()
    };
    let mut header = vec![axis.to_string()];
    header.extend(common.iter().cloned());
    let mut table = CsvTable::new(&header);
    for (i, v) in values.iter().enumerate() {
        let mut row = vec![fmt_f64(*v)];
        row.extend(common.iter().map(|k| fmt_f64(subs[i].metrics[k])));
        table.push_text(row);
    }
    for k in &common {
        merged.verdicts.insert(k.clone(), verdict(&column(k)).to_string());
    }
    for name in expect_decreasing {
        merged.check(CheckResult::strictly_decreasing(
            format!("{name} strictly decreasing along {axis}"),
            &column(name),
        ));
    }
    merged.sub_reports = subs;
    if let Err(e) = table.write(&merged.config.output_dir.join("series.csv")) {
        merged.failure = Some(RunFailure {
            category: "io".into(),
            message: e.to_string(),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioKind;

    #[test]
    fn axis_must_be_numeric_and_known() {
        let t = ScenarioConfig::defaults(ScenarioKind::Stability);
        assert!(config_at(&t, "gas.kappa", 0.5).is_ok());
        assert!(config_at(&t, "gas.nothing", 0.5).is_err());
        assert!(config_at(&t, "perturbation.shape", 1.0).is_err());
        assert!(config_at(&t, "grid.nodes", 401.0).is_ok());
        assert!(config_at(&t, "grid.nodes", 401.5).is_err());
        // invariant violations are reported per value
        assert!(config_at(&t, "gas.gamma", 0.9).is_err());
    }

    #[test]
    fn per_value_directories_are_distinct() {
        let t = ScenarioConfig::defaults(ScenarioKind::Stability);
        let a = config_at(&t, "wave.delta0", 0.4).unwrap();
        let b = config_at(&t, "wave.delta0", 0.2).unwrap();
        assert_eq!(a.wave.delta0, 0.4);
        assert_ne!(a.output_dir, b.output_dir);
        assert!(a.output_dir.starts_with(&t.output_dir));
    }

    #[test]
    fn verdicts() {
        assert_eq!(verdict(&[3.0, 2.0, 1.0]), "strictly-decreasing");
        assert_eq!(verdict(&[1.0, 2.0]), "strictly-increasing");
        assert_eq!(verdict(&[1.0, 1.0]), "non-monotone");
        assert_eq!(verdict(&[1.0]), "undetermined");
    }
}
