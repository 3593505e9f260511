//! Run reports and the CSV writers behind `series.csv` / `profile_final.csv`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;

/// Comparison applied between `measured` and `bound`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    /// `measured` counts violations of a strict ordering; `bound` is zero.
    #[serde(rename = "strictly-decreasing")]
    StrictlyDecreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub relation: Relation,
    pub tolerance: f64,
    /// Set when the check has nothing to measure and passes by default.
    pub vacuous: bool,
    pub detail: String,
}

impl CheckResult {
    /// `measured <= bound + tolerance`.
    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: measured <= bound + tolerance,
            measured,
            bound,
            relation: Relation::AtMost,
            tolerance,
            vacuous: false,
            detail: String::new(),
        }
    }

    /// `measured >= bound - tolerance`.
    pub fn at_least(name: impl Into<String>, measured: f64, bound: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: measured >= bound - tolerance,
            measured,
            bound,
            relation: Relation::AtLeast,
            tolerance,
            vacuous: false,
            detail: String::new(),
        }
    }

    pub fn vacuous(name: impl Into<String>, relation: Relation, bound: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: true,
            measured: f64::NAN,
            bound,
            relation,
            tolerance: 0.0,
            vacuous: true,
            detail: detail.into(),
        }
    }

    /// Strict decrease of `column`; `measured` is the number of violations.
    pub fn strictly_decreasing(name: impl Into<String>, column: &[f64]) -> Self {
        let violations = column.windows(2).filter(|w| !(w[1] < w[0])).count();
        let detail = column.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(" > ");
        Self {
            name: name.into(),
            passed: violations == 0 && column.iter().all(|v| v.is_finite()),
            measured: violations as f64,
            bound: 0.0,
            relation: Relation::StrictlyDecreasing,
            tolerance: 0.0,
            vacuous: false,
            detail,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// One human-readable line.
    pub fn line(&self) -> String {
        let verdict = match (self.passed, self.vacuous) {
            (true, true) => "PASS (vacuous)",
            (true, false) => "PASS",
            (false, _) => "FAIL",
        };
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::StrictlyDecreasing => "violations <=",
        };
        let mut s = format!(
            "{verdict:<14} {}: measured {:.6e} {rel} {:.6e}",
            self.name, self.measured, self.bound
        );
        if self.tolerance != 0.0 {
            let _ = write!(s, " (tol {:.1e})", self.tolerance);
        }
        if !self.detail.is_empty() {
            let _ = write!(s, " [{}]", self.detail);
        }
        s
    }
}

/// Failure that stopped a run before its checks completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    /// `configuration` or `numerical`.
    pub category: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub version: String,
    pub passed: bool,
    pub wall_clock_seconds: f64,
    pub failure: Option<RunFailure>,
    pub config: ScenarioConfig,
    pub metrics: BTreeMap<String, f64>,
    /// Monotonicity of each metric along a sweep axis.
    pub verdicts: BTreeMap<String, String>,
    pub checks: Vec<CheckResult>,
    /// Nested reports of composite runs, in run order.
    pub sub_reports: Vec<RunReport>,
}

impl RunReport {
    pub fn new(config: ScenarioConfig) -> Self {
        Self {
            scenario: config.scenario.name().to_string(),
            version: version_stamp(),
            passed: false,
            wall_clock_seconds: 0.0,
            failure: None,
            config,
            metrics: BTreeMap::new(),
            verdicts: BTreeMap::new(),
            checks: Vec::new(),
            sub_reports: Vec::new(),
        }
    }

    pub fn check(&mut self, c: CheckResult) {
        debug_assert!(
            self.checks.iter().all(|o| o.name != c.name),
            "duplicate check {}",
            c.name
        );
        self.checks.push(c);
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    /// Recompute `passed`: no failure and every check (recursively) passed.
    pub fn finish(&mut self) {
        for s in &mut self.sub_reports {
            s.finish();
        }
        self.passed = self.failure.is_none()
            && self.checks.iter().all(|c| c.passed)
            && self.sub_reports.iter().all(|s| s.passed);
    }

    pub fn find_check(&self, name: &str) -> Option<&CheckResult> {
        self.checks
            .iter()
            .find(|c| c.name == name)
            .or_else(|| self.sub_reports.iter().find_map(|s| s.find_check(name)))
    }

    /// Every check of this report and its sub-reports, depth first.
    pub fn all_checks(&self) -> Vec<&CheckResult> {
        let mut out: Vec<&CheckResult> = self.checks.iter().collect();
        for s in &self.sub_reports {
            out.extend(s.all_checks());
        }
        out
    }

    pub fn failure_category(&self) -> Option<&str> {
        self.failure
            .as_ref()
            .map(|f| f.category.as_str())
            .or_else(|| self.sub_reports.iter().find_map(|s| s.failure_category()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("reports contain only serializable data")
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), self.to_toml())
    }
}

pub fn version_stamp() -> String {
    let version = env!("CARGO_PKG_VERSION");
    match option_env!("CWLAB_GIT_REV") {
        Some(rev) => format!("{version}+{rev}"),
        None => version.to_string(),
    }
}

/// 17 significant digits; round-trips every finite `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comma-separated table with a header row.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row.iter().map(|&v| fmt_f64(v)).collect());
    }

    pub fn push_text(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.render())
    }
}
