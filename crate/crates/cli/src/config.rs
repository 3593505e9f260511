//! Scenario configuration: TOML schema, per-scenario defaults, dotted-path
//! overrides and invariant checks.
//!
//! A configuration file is a set of flat TOML sections. Every key is optional
//! except `scenario`; missing keys take the defaults of the named scenario
//! kind (see [`ScenarioConfig::defaults`]).
//!
//! ```toml
//! scenario = "stability"
//! seed = 1
//! output_dir = "runs/stability"
//!
//! [gas]          # r, gamma, mu, kappa, theta_minus, theta_plus, v_plus
//! [wave]         # alpha, delta0, coupling_exponent
//! [grid]         # length (omit for automatic), nodes
//! [time]         # horizon, snapshot_interval, snapshots, fit_window
//! [perturbation] # shape, amplitude, center, width, wavenumber, modes,
//!                # l2_target, phi_boundary
//! [solver]       # scheme, cfl_factor, dt_max, dt_initial, growth, eps_bnd,
//!                # wave_dt_max
//! [oracle]       # cn_length, cn_nodes, cn_time, growth_delta0,
//!                # growth_length, growth_nodes, growth_horizon,
//!                # growth_samples, growth_window
//! [sweep]        # axis, values, expect_decreasing
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cwlab_core::model::{GasParams, Grid1D, WaveParams};
use cwlab_core::solver::{PerturbationSpec, Scheme, Shape, StepControl};
use cwlab_core::wave::WaveControl;
use serde::{Deserialize, Serialize};

/// Configuration problem, rendered with the offending line when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    pub line: Option<usize>,
}

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            line: None,
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "configuration error (line {l}): {}", self.message),
            None => write!(f, "configuration error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    WaveDecay,
    OracleCheck,
    KappaSweep,
    Stability,
    BoundaryOde,
    FullAcceptance,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::WaveDecay,
        ScenarioKind::OracleCheck,
        ScenarioKind::KappaSweep,
        ScenarioKind::Stability,
        ScenarioKind::BoundaryOde,
        ScenarioKind::FullAcceptance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::WaveDecay => "wave-decay",
            ScenarioKind::OracleCheck => "oracle-check",
            ScenarioKind::KappaSweep => "kappa-sweep",
            ScenarioKind::Stability => "stability",
            ScenarioKind::BoundaryOde => "boundary-ode",
            ScenarioKind::FullAcceptance => "full-acceptance",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError::new(format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSection {
    pub r: f64,
    pub gamma: f64,
    pub mu: f64,
    pub kappa: f64,
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub v_plus: f64,
}

impl Default for GasSection {
    fn default() -> Self {
        Self {
            r: 1.0,
            gamma: 5.0 / 3.0,
            mu: 1.0,
            kappa: 1.0,
            theta_minus: 1.0,
            theta_plus: 2.0,
            v_plus: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSection {
    pub alpha: f64,
    pub delta0: f64,
    pub coupling_exponent: f64,
}

impl Default for WaveSection {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            delta0: 0.5,
            coupling_exponent: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// `None` selects a length from the wave tail and the diffusion front.
    pub length: Option<f64>,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub horizon: f64,
    /// Regular snapshot spacing; `0` disables the regular schedule.
    pub snapshot_interval: f64,
    /// Extra snapshot times.
    pub snapshots: Vec<f64>,
    pub fit_window: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    GaussianBump,
    CompactBump,
    DerivativeHeavy,
    RandomModes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub shape: ShapeKind,
    pub amplitude: [f64; 3],
    pub center: f64,
    pub width: f64,
    pub wavenumber: f64,
    /// Mode count for `random-modes`; coefficients come from the run seed.
    pub modes: usize,
    pub l2_target: Option<f64>,
    pub phi_boundary: f64,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        Self {
            shape: ShapeKind::CompactBump,
            amplitude: [0.0; 3],
            center: 10.0,
            width: 5.0,
            wavenumber: 25.0,
            modes: 8,
            l2_target: None,
            phi_boundary: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub scheme: SchemeKind,
    pub cfl_factor: f64,
    pub dt_max: f64,
    pub dt_initial: Option<f64>,
    pub growth: f64,
    pub eps_bnd: f64,
    pub wave_dt_max: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            scheme: SchemeKind::Implicit,
            cfl_factor: 0.2,
            dt_max: 0.1,
            dt_initial: None,
            growth: 1.2,
            eps_bnd: 1e-8,
            wave_dt_max: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub cn_length: f64,
    pub cn_nodes: usize,
    pub cn_time: f64,
    pub growth_delta0: f64,
    pub growth_length: Option<f64>,
    pub growth_nodes: usize,
    pub growth_horizon: f64,
    /// Geometric sample count on `[1e-3, growth_horizon]`.
    pub growth_samples: usize,
    pub growth_window: [f64; 2],
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            cn_length: 60.0,
            cn_nodes: 4001,
            cn_time: 1.0,
            growth_delta0: 0.25,
            growth_length: None,
            growth_nodes: 8001,
            growth_horizon: 100.0,
            growth_samples: 100,
            growth_window: [1.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Dotted config path swept by `cwlab sweep`.
    pub axis: String,
    pub values: Vec<f64>,
    /// Metrics whose column must strictly decrease along `values`.
    pub expect_decreasing: Vec<String>,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub gas: GasSection,
    pub wave: WaveSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub perturbation: PerturbationSection,
    pub solver: SolverSection,
    pub oracle: OracleSection,
    pub sweep: SweepSection,
}

impl ScenarioConfig {
    /// Defaults of each scenario kind; these reproduce the acceptance runs.
    pub fn defaults(kind: ScenarioKind) -> Self {
        let mut cfg = Self {
            scenario: kind,
            seed: 1,
            output_dir: PathBuf::from("runs").join(kind.name()),
            gas: GasSection::default(),
            wave: WaveSection::default(),
            grid: GridSection {
                length: None,
                nodes: 8001,
            },
            time: TimeSection {
                horizon: 100.0,
                snapshot_interval: 0.5,
                snapshots: Vec::new(),
                fit_window: [10.0, 100.0],
            },
            perturbation: PerturbationSection::default(),
            solver: SolverSection::default(),
            oracle: OracleSection::default(),
            sweep: SweepSection::default(),
        };
        match kind {
            ScenarioKind::WaveDecay => {
                cfg.wave.delta0 = 0.25;
                cfg.grid.length = Some(400.0);
                cfg.time.snapshot_interval = 10.0;
            }
            ScenarioKind::OracleCheck => {
                // a = 0.5
                cfg.gas.kappa = 1.25;
            }
            ScenarioKind::KappaSweep => {
                cfg.time.horizon = 1.0;
                cfg.time.snapshot_interval = 0.0;
                cfg.time.fit_window = [0.1, 1.0];
                cfg.sweep.axis = "gas.kappa".into();
                cfg.sweep.values = vec![0.1, 0.05, 0.025];
            }
            ScenarioKind::Stability | ScenarioKind::FullAcceptance => {
                // removes the wave's momentum residual: mu = kappa a (gamma - 1) / (p+ gamma)
                cfg.gas.mu = 0.16;
                cfg.grid.length = Some(300.0);
                cfg.perturbation = PerturbationSection {
                    shape: ShapeKind::DerivativeHeavy,
                    amplitude: [1.0, 1.0, 1.0],
                    // grid H1 seminorm 0.48 at L2 = 0.02 on dx = 0.0375
                    wavenumber: 30.0,
                    l2_target: Some(0.02),
                    ..PerturbationSection::default()
                };
            }
            ScenarioKind::BoundaryOde => {
                cfg.grid.length = Some(20.0);
                cfg.time.horizon = 5.0;
                cfg.time.snapshot_interval = 0.1;
                cfg.time.fit_window = [0.5, 5.0];
                cfg.perturbation.width = 1.0;
                cfg.perturbation.center = 10.0;
                cfg.perturbation.phi_boundary = 0.05;
                cfg.solver.dt_max = 0.0025;
                cfg.solver.dt_initial = Some(0.0025);
                cfg.solver.eps_bnd = 1e-3;
            }
        }
        cfg
    }

    pub fn gas_params(&self) -> Result<GasParams, ConfigError> {
        let g = &self.gas;
        GasParams::new(g.r, g.gamma, g.mu, g.kappa, g.theta_minus, g.theta_plus, g.v_plus)
            .map_err(|e| ConfigError::new(e.to_string()))
    }

    pub fn wave_params(&self) -> Result<WaveParams, ConfigError> {
        let w = &self.wave;
        WaveParams::new(w.alpha, w.delta0, w.coupling_exponent).map_err(|e| ConfigError::new(e.to_string()))
    }

    /// The configured grid, or an automatic length for `(gas, wave, horizon)`.
    pub fn grid(&self, gas: &GasParams, wave: &WaveParams) -> Result<Grid1D, ConfigError> {
        let length = self
            .grid
            .length
            .unwrap_or_else(|| cwlab_core::wave::suggested_length(gas, wave, self.time.horizon));
        Grid1D::new(length, self.grid.nodes).map_err(|e| ConfigError::new(e.to_string()))
    }

    /// Sorted, de-duplicated snapshot times in `(0, T]`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let t = &self.time;
        let mut out = t.snapshots.clone();
        if t.snapshot_interval > 0.0 {
            let count = (t.horizon / t.snapshot_interval + 1e-9).floor() as usize;
            out.extend((1..=count).map(|k| k as f64 * t.snapshot_interval));
        }
        out.retain(|&s| s > 0.0 && s <= t.horizon);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn perturbation_spec(&self) -> PerturbationSpec {
        let p = &self.perturbation;
        let shape = match p.shape {
            ShapeKind::GaussianBump => Shape::GaussianBump,
            ShapeKind::CompactBump => Shape::CompactBump,
            ShapeKind::DerivativeHeavy => Shape::DerivativeHeavy {
                wavenumber: p.wavenumber,
            },
            ShapeKind::RandomModes => Shape::RandomModes {
                seed: self.seed,
                modes: p.modes,
            },
        };
        PerturbationSpec {
            shape,
            amplitude: p.amplitude,
            center: p.center,
            width: p.width,
            l2_target: p.l2_target,
            phi_boundary: p.phi_boundary,
        }
    }

    pub fn step_control(&self) -> StepControl {
        let s = &self.solver;
        StepControl {
            cfl_factor: s.cfl_factor,
            dt_max: s.dt_max,
            eps_bnd: s.eps_bnd,
            scheme: match s.scheme {
                SchemeKind::Explicit => Scheme::ExplicitMidpoint,
                SchemeKind::Implicit => Scheme::ImplicitSdirk2,
            },
            dt_initial: s.dt_initial,
            growth: s.growth,
        }
    }

    pub fn wave_control(&self) -> WaveControl {
        WaveControl {
            dt_max: self.solver.wave_dt_max,
            ..WaveControl::default()
        }
    }

    /// Check every invariant; the error names the offending key.
    pub fn validate(&self) -> Result<(), (String, ConfigError)> {
        let at = |key: &'static str| move |e: ConfigError| (key.to_string(), e);
        let gas = self.gas_params().map_err(at("gas.gamma"))?;
        let wave = self.wave_params().map_err(at("wave.alpha"))?;
        self.grid(&gas, &wave).map_err(at("grid.nodes"))?;
        let t = &self.time;
        if !(t.horizon > 0.0 && t.horizon.is_finite()) {
            return Err(at("time.horizon")(ConfigError::new(format!(
                "horizon must be positive, got {}",
                t.horizon
            ))));
        }
        if let Some(bad) = t.snapshots.iter().find(|&&s| !(s > 0.0 && s <= t.horizon)) {
            return Err(at("time.snapshots")(ConfigError::new(format!(
                "snapshot time {bad} outside (0, T = {}]",
                t.horizon
            ))));
        }
        if !(t.snapshot_interval >= 0.0) {
            return Err(at("time.snapshot_interval")(ConfigError::new("snapshot_interval must be >= 0")));
        }
        let [lo, hi] = t.fit_window;
        if !(lo >= 0.0 && hi > lo) {
            return Err(at("time.fit_window")(ConfigError::new(format!(
                "fit window [{lo}, {hi}] is not an interval"
            ))));
        }
        self.step_control()
            .validate()
            .map_err(|e| at("solver.dt_max")(ConfigError::new(e.to_string())))?;
        if !(self.solver.wave_dt_max > 0.0) {
            return Err(at("solver.wave_dt_max")(ConfigError::new("wave_dt_max must be positive")));
        }
        let p = &self.perturbation;
        if !(p.width > 0.0) || p.amplitude.iter().any(|a| !a.is_finite()) {
            return Err(at("perturbation.width")(ConfigError::new(
                "perturbation needs width > 0 and finite amplitudes",
            )));
        }
        let o = &self.oracle;
        if o.cn_nodes < 3 || o.growth_nodes < 3 || o.growth_samples < 2 {
            return Err(at("oracle.cn_nodes")(ConfigError::new("oracle grids need at least 3 nodes")));
        }
        if !(o.cn_time > 0.0 && o.growth_horizon > 0.0 && o.growth_delta0 > 0.0 && o.growth_delta0 < 1.0) {
            return Err(at("oracle.growth_delta0")(ConfigError::new(
                "oracle times must be positive and growth_delta0 in (0, 1)",
            )));
        }
        if self.scenario == ScenarioKind::KappaSweep
            && (self.sweep.values.is_empty() || self.sweep.values.iter().any(|&k| !(k > 0.0)))
        {
            return Err(at("sweep.values")(ConfigError::new(
                "kappa-sweep needs a non-empty list of positive values",
            )));
        }
        Ok(())
    }
}

/// Apply one `path=value` override to a TOML table. The value is read as a
/// TOML literal, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, path: &str, raw: &str) -> Result<(), ConfigError> {
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::new(format!("malformed override path `{path}`")));
    }
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::new(format!("override `{path}`: `{k}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// 1-based line of `key` inside `[section]` (or at top level).
fn line_of(text: &str, path: &str) -> Option<usize> {
    let (section, key) = match path.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", path),
    };
    let mut current = "";
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(h) = l.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
            current = h.trim();
            continue;
        }
        let k = l.split('=').next().unwrap_or("").trim();
        if current == section && k == key {
            return Some(i + 1);
        }
        if section.is_empty() && current.is_empty() && k == path {
            return Some(i + 1);
        }
    }
    None
}

fn merge(base: &mut toml::Table, patch: toml::Table) {
    for (k, v) in patch {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(p)) => merge(b, p),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn de_error(e: toml::de::Error, text: Option<&str>) -> ConfigError {
    let line = match (e.span(), text) {
        (Some(span), Some(text)) => Some(text[..span.start.min(text.len())].lines().count().max(1)),
        _ => None,
    };
    ConfigError {
        message: e.message().to_string(),
        line,
    }
}

/// Parse configuration text, applying dotted overrides and, when the text does
/// not name a scenario, falling back to `kind`.
pub fn parse_config_str(
    text: &str,
    overrides: &[(String, String)],
    kind: Option<ScenarioKind>,
) -> Result<ScenarioConfig, ConfigError> {
    let mut user: toml::Table = text.parse().map_err(|e| de_error(e, Some(text)))?;
    for (path, value) in overrides {
        apply_override(&mut user, path, value)?;
    }
    let named = match user.get("scenario") {
        Some(toml::Value::String(s)) => Some(s.parse::<ScenarioKind>().map_err(|mut e| {
            e.line = line_of(text, "scenario");
            e
        })?),
        Some(_) => {
            return Err(ConfigError {
                message: "`scenario` must be a string".into(),
                line: line_of(text, "scenario"),
            })
        }
        None => None,
    };
    let kind = match (named, kind) {
        (Some(a), Some(b)) if a != b => {
            return Err(ConfigError {
                message: format!("file names scenario `{a}` but `{b}` was requested"),
                line: line_of(text, "scenario"),
            })
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(ConfigError::new("missing required key `scenario`")),
    };
    let defaults = toml::Table::try_from(ScenarioConfig::defaults(kind))
        .map_err(|e| ConfigError::new(format!("internal defaults: {e}")))?;
    let mut merged = defaults.clone();
    merge(&mut merged, user.clone());
    let cfg: ScenarioConfig = merged.try_into().map_err(|e: toml::de::Error| {
        let mut err = de_error(e, None);
        let key = offending_key(&err.message)
            .filter(|k| find_key_anywhere(text, k).is_some())
            .map(|k| line_of(text, &k).or_else(|| find_key_anywhere(text, &k)))
            .unwrap_or_else(|| bad_leaf(&defaults, &user).and_then(|path| {
                err.message = format!("{path}: {}", err.message);
                line_of(text, &path)
            }));
        err.line = key;
        err
    })?;
    cfg.validate().map_err(|(key, mut e)| {
        e.line = line_of(text, &key);
        e.message = format!("{}: {}", key, e.message);
        e
    })?;
    Ok(cfg)
}

/// Dotted path of the first user leaf that alone breaks deserialization.
fn bad_leaf(defaults: &toml::Table, user: &toml::Table) -> Option<String> {
    fn leaves(t: &toml::Table, prefix: &str, out: &mut Vec<(String, toml::Value)>) {
        for (k, v) in t {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            match v {
                toml::Value::Table(sub) => leaves(sub, &path, out),
                _ => out.push((path, v.clone())),
            }
        }
    }
    let mut all = Vec::new();
    leaves(user, "", &mut all);
    all.into_iter().find_map(|(path, value)| {
        let mut trial = defaults.clone();
        apply_value(&mut trial, &path, value)?;
        trial.try_into::<ScenarioConfig>().is_err().then_some(path)
    })
}

fn apply_value(table: &mut toml::Table, path: &str, value: toml::Value) -> Option<()> {
    let (parents, last) = match path.rsplit_once('.') {
        Some((p, l)) => (p.split('.').collect::<Vec<_>>(), l),
        None => (Vec::new(), path),
    };
    let mut cur = table;
    for k in parents {
        cur = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()?;
    }
    cur.insert(last.to_string(), value);
    Some(())
}

/// Key named in a serde message such as "unknown field `foo`".
fn offending_key(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

fn find_key_anywhere(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| l.split('=').next().is_some_and(|k| k.trim() == key))
        .map(|i| i + 1)
}

/// Read and parse a configuration file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    parse_config_with(path, &[], None)
}

pub fn parse_config_with(
    path: &Path,
    overrides: &[(String, String)],
    kind: Option<ScenarioKind>,
) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, overrides, kind).map_err(|mut e| {
        e.message = format!("{}: {}", path.display(), e.message);
        e
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_scenario_defaults() {
        let cfg = parse_config_str("scenario = \"stability\"\n", &[], None).unwrap();
        assert_eq!(cfg, ScenarioConfig::defaults(ScenarioKind::Stability));
        assert_eq!(cfg.time.horizon, 100.0);
        assert_eq!(cfg.perturbation.l2_target, Some(0.02));
    }

    #[test]
    fn every_default_is_valid() {
        for kind in ScenarioKind::ALL {
            ScenarioConfig::defaults(kind).validate().unwrap();
        }
    }

    #[test]
    fn gamma_below_one_is_rejected_with_line() {
        let text = "scenario = \"stability\"\n[gas]\ngamma = 0.9\n";
        let err = parse_config_str(text, &[], None).unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("gamma"), "{err}");
    }

    #[test]
    fn snapshot_beyond_horizon_is_rejected() {
        let text = "scenario = \"stability\"\n[time]\nhorizon = 10.0\nsnapshots = [5.0, 12.0]\n";
        let err = parse_config_str(text, &[], None).unwrap_err();
        assert_eq!(err.line, Some(4));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "scenario = \"stability\"\n[gas]\nmu = 1.0\nviscosity = 2.0\n";
        let err = parse_config_str(text, &[], None).unwrap_err();
        assert!(err.message.contains("viscosity"), "{err}");
        assert_eq!(err.line, Some(4));
        let err = parse_config_str("scenario = \"stability\"\n[extra]\nx = 1\n", &[], None).unwrap_err();
        assert!(err.message.contains("extra"), "{err}");
    }

    #[test]
    fn type_errors_are_rejected() {
        let err = parse_config_str("scenario = \"stability\"\n[grid]\nnodes = \"many\"\n", &[], None).unwrap_err();
        assert!(err.line.is_some(), "{err}");
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = parse_config_str("scenario = \"stability\"\n\n[gas\n", &[], None).unwrap_err();
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn missing_and_conflicting_scenario() {
        assert!(parse_config_str("seed = 3\n", &[], None).is_err());
        let cfg = parse_config_str("seed = 3\n", &[], Some(ScenarioKind::BoundaryOde)).unwrap();
        assert_eq!(cfg.scenario, ScenarioKind::BoundaryOde);
        assert_eq!(cfg.seed, 3);
        assert!(parse_config_str("scenario = \"stability\"\n", &[], Some(ScenarioKind::WaveDecay)).is_err());
        assert!(parse_config_str("scenario = \"nonsense\"\n", &[], None).is_err());
    }

    #[test]
    fn dotted_overrides_replace_keys() {
        let o = vec![
            ("gas.mu".to_string(), "0.5".to_string()),
            ("perturbation.shape".to_string(), "gaussian-bump".to_string()),
            ("time.snapshots".to_string(), "[1.0, 2.0]".to_string()),
            ("output_dir".to_string(), "elsewhere/run".to_string()),
        ];
        let cfg = parse_config_str("scenario = \"stability\"\n", &o, None).unwrap();
        assert_eq!(cfg.gas.mu, 0.5);
        assert_eq!(cfg.perturbation.shape, ShapeKind::GaussianBump);
        assert_eq!(cfg.time.snapshots, vec![1.0, 2.0]);
        assert_eq!(cfg.output_dir, PathBuf::from("elsewhere/run"));
        let bad = vec![("gas.nope".to_string(), "1".to_string())];
        assert!(parse_config_str("scenario = \"stability\"\n", &bad, None).is_err());
    }

    #[test]
    fn integer_literals_are_accepted_for_floats() {
        let cfg = parse_config_str("scenario = \"stability\"\n[gas]\nmu = 1\n", &[], None).unwrap();
        assert_eq!(cfg.gas.mu, 1.0);
    }

    #[test]
    fn snapshot_schedule_merges_and_sorts() {
        let mut cfg = ScenarioConfig::defaults(ScenarioKind::Stability);
        cfg.time.horizon = 2.0;
        cfg.time.snapshot_interval = 0.5;
        cfg.time.snapshots = vec![0.75, 1.0];
        assert_eq!(cfg.snapshot_times(), vec![0.5, 0.75, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        for kind in ScenarioKind::ALL {
            let cfg = ScenarioConfig::defaults(kind);
            let text = toml::to_string(&cfg).unwrap();
            assert_eq!(parse_config_str(&text, &[], None).unwrap(), cfg);
        }
    }
}
