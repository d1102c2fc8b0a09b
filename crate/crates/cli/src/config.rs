//! Run and sweep configuration.
//!
//! A config is resolved in three layers: built-in defaults, then an optional
//! TOML file, then `key.path=value` overrides from the command line. The
//! resolved [`RunConfig`] is what gets echoed into every manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kzqfi::oracles::MAX_DENSE_SITES;
use kzqfi::{DmrgConfig, QuenchSchedule, ScheduleShape, TebdConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Mps,
    Dense,
    Ff,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Mps => "mps",
            Engine::Dense => "dense",
            Engine::Ff => "ff",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mps" => Ok(Engine::Mps),
            "dense" => Ok(Engine::Dense),
            "ff" => Ok(Engine::Ff),
            other => Err(CliError::config("engine", format!("expected mps, dense or ff, got `{other}`"))),
        }
    }
}

/// Chain length, or the infinite chain (free-fermion engine only).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SizeRepr", into = "SizeRepr")]
pub enum SystemSize {
    Sites(usize),
    Thermodynamic,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SizeRepr {
    Sites(usize),
    Name(String),
}

impl TryFrom<SizeRepr> for SystemSize {
    type Error = String;

    fn try_from(r: SizeRepr) -> std::result::Result<Self, String> {
        match r {
            SizeRepr::Sites(n) => Ok(SystemSize::Sites(n)),
            SizeRepr::Name(s) if s == "thermodynamic" => Ok(SystemSize::Thermodynamic),
            SizeRepr::Name(s) => Err(format!("expected a site count or \"thermodynamic\", got \"{s}\"")),
        }
    }
}

impl From<SystemSize> for SizeRepr {
    fn from(s: SystemSize) -> Self {
        match s {
            SystemSize::Sites(n) => SizeRepr::Sites(n),
            SystemSize::Thermodynamic => SizeRepr::Name("thermodynamic".into()),
        }
    }
}

impl std::fmt::Display for SystemSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SystemSize::Sites(n) => write!(f, "{n}"),
            SystemSize::Thermodynamic => f.write_str("thermodynamic"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: SystemSize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    Linear,
    Power,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub shape: ShapeName,
    pub alpha: f64,
    pub tau_q: f64,
    pub g_start: f64,
    pub g_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            shape: ShapeName::Linear,
            alpha: 1.0,
            tau_q: 1.0,
            g_start: QuenchSchedule::DEFAULT_G_START,
            g_end: QuenchSchedule::DEFAULT_G_END,
            duration: None,
        }
    }
}

impl ScheduleSection {
    pub fn build(&self) -> Result<QuenchSchedule> {
        let shape = match self.shape {
            ShapeName::Linear => {
                if self.alpha != 1.0 {
                    return Err(CliError::config(
                        "schedule.alpha",
                        "a linear schedule has alpha = 1; use shape = \"power\"",
                    ));
                }
                ScheduleShape::Linear
            }
            ShapeName::Power => ScheduleShape::Power { alpha: self.alpha },
            ShapeName::Constant => {
                let duration = self
                    .duration
                    .ok_or_else(|| CliError::config("schedule.duration", "required for a constant schedule"))?;
                ScheduleShape::Constant { duration }
            }
        };
        QuenchSchedule::new(shape, self.tau_q, self.g_start, self.g_end)
            .map_err(|e| CliError::config("schedule", e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmrgSection {
    pub chi_max: usize,
    pub svd_eps: f64,
    pub max_sweeps: usize,
    pub energy_tol: f64,
    pub local_solver_tol: f64,
}

impl Default for DmrgSection {
    fn default() -> Self {
        let d = DmrgConfig::default();
        Self {
            chi_max: d.chi_max,
            svd_eps: d.svd_eps,
            max_sweeps: d.max_sweeps,
            energy_tol: d.energy_tol,
            local_solver_tol: d.local_solver_tol,
        }
    }
}

impl DmrgSection {
    pub fn build(&self, seed: u64) -> Result<DmrgConfig> {
        let cfg = DmrgConfig {
            chi_max: self.chi_max,
            svd_eps: self.svd_eps,
            max_sweeps: self.max_sweeps,
            energy_tol: self.energy_tol,
            local_solver_tol: self.local_solver_tol,
            seed,
        };
        cfg.validate().map_err(|e| CliError::config("dmrg", e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TebdSection {
    pub dt: f64,
    pub chi_max: usize,
    pub svd_eps: f64,
    pub budget: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
}

impl Default for TebdSection {
    fn default() -> Self {
        let d = TebdConfig::default();
        Self {
            dt: d.dt,
            chi_max: d.chi_max,
            svd_eps: d.svd_eps,
            budget: d.budget,
            record_every: None,
            checkpoint_every: None,
        }
    }
}

impl TebdSection {
    pub fn build(&self, checkpoint_path: Option<PathBuf>) -> Result<TebdConfig> {
        let cfg = TebdConfig {
            dt: self.dt,
            chi_max: self.chi_max,
            svd_eps: self.svd_eps,
            budget: self.budget,
            checkpoint_every: self.checkpoint_every,
            checkpoint_path: self.checkpoint_every.and(checkpoint_path),
            record_every: self.record_every,
        };
        cfg.validate().map_err(|e| CliError::config("tebd", e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FfSection {
    pub ode_tol: f64,
}

impl Default for FfSection {
    fn default() -> Self {
        Self { ode_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub engine: Engine,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub model: ModelSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub dmrg: DmrgSection,
    #[serde(default)]
    pub tebd: TebdSection,
    #[serde(default)]
    pub ff: FfSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            engine: Engine::Mps,
            output_dir: PathBuf::from("kzqfi-out"),
            seed: 0,
            model: ModelSection {
                n: SystemSize::Sites(16),
            },
            schedule: ScheduleSection::default(),
            dmrg: DmrgSection::default(),
            tebd: TebdSection::default(),
            ff: FfSection::default(),
        }
    }
}

impl RunConfig {
    /// Checks cross-field constraints that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        self.schedule.build()?;
        match (self.engine, self.model.n) {
            (Engine::Ff, SystemSize::Thermodynamic) => {
                if self.schedule.shape != ShapeName::Linear {
                    return Err(CliError::config(
                        "model.n",
                        "the thermodynamic limit is only available for linear schedules",
                    ));
                }
            }
            (_, SystemSize::Thermodynamic) => {
                return Err(CliError::config("model.n", "\"thermodynamic\" requires engine = \"ff\""));
            }
            (Engine::Ff, SystemSize::Sites(n)) if n < 2 || n % 2 != 0 => {
                return Err(CliError::config("model.n", format!("free-fermion chains need even N, got {n}")));
            }
            (Engine::Dense, SystemSize::Sites(n)) if n > MAX_DENSE_SITES => {
                return Err(kzqfi::Error::Capacity {
                    sites: n,
                    max: MAX_DENSE_SITES,
                }
                .into());
            }
            (Engine::Mps | Engine::Dense, SystemSize::Sites(n)) if n < 4 => {
                return Err(CliError::config("model.n", format!("need at least 4 sites, got {n}")));
            }
            _ => {}
        }
        if !(self.ff.ode_tol > 0.0) {
            return Err(CliError::config("ff.ode_tol", "must be positive"));
        }
        self.dmrg.build(self.seed)?;
        self.tebd.build(Some(self.output_dir.join("checkpoint.bin")))?;
        Ok(())
    }

    pub fn sites(&self) -> Option<usize> {
        match self.model.n {
            SystemSize::Sites(n) => Some(n),
            SystemSize::Thermodynamic => None,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Serialization(e.to_string()))
    }
}

/// Parameter axes of a sweep, keyed by canonical dotted path.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axes: BTreeMap<String, Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_concurrency: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub base: RunConfig,
    /// The unresolved base table; each cell applies its overrides to this.
    pub base_table: Table,
    pub axes: Vec<(String, Vec<Value>)>,
    pub max_concurrency: Option<usize>,
}

/// Short axis names accepted in sweep files.
pub fn canonical_key(key: &str) -> &str {
    match key {
        "N" | "n" => "model.n",
        "tau_q" => "schedule.tau_q",
        "alpha" => "schedule.alpha",
        "dt" => "tebd.dt",
        "chi_max" => "tebd.chi_max",
        other => other,
    }
}

/// Builder for a resolved configuration.
#[derive(Clone, Debug)]
pub struct ConfigLoader {
    table: Table,
    sweep: Option<SweepSection>,
}

impl Default for ConfigLoader {
    fn default() -> Self {
        let table = Table::try_from(RunConfig::default()).expect("default config serializes");
        Self { table, sweep: None }
    }
}

impl ConfigLoader {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::default().merge_str(&text)
    }

    /// Deep-merges a TOML document; a `[sweep]` table is kept aside.
    pub fn merge_str(mut self, text: &str) -> Result<Self> {
        let mut doc: Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::config("<file>", e.message().to_string()))?;
        if let Some(sweep) = doc.remove("sweep") {
            let section: SweepSection = sweep
                .try_into()
                .map_err(|e: toml::de::Error| CliError::config("sweep", e.message().to_string()))?;
            self.sweep = Some(section);
        }
        merge(&mut self.table, doc);
        Ok(self)
    }

    /// Applies a `key.path=value` override. The value is read as a TOML
    /// literal, falling back to a plain string.
    pub fn set(mut self, assignment: &str) -> Result<Self> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override `{assignment}` is not of the form key=value")))?;
        set_path(&mut self.table, canonical_key(key.trim()), parse_value(raw.trim()))?;
        Ok(self)
    }

    pub fn set_value(mut self, key: &str, value: Value) -> Result<Self> {
        set_path(&mut self.table, canonical_key(key), value)?;
        Ok(self)
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        resolve_table(&self.table)
    }

    /// Splits off the sweep. The base config is only parsed here; each
    /// cell is validated once its axis values are applied.
    pub fn into_sweep(self) -> Result<SweepConfig> {
        let base = parse_table(&self.table)?;
        let section = self
            .sweep
            .ok_or_else(|| CliError::config("sweep", "a sweep needs a [sweep] table with axes"))?;
        let mut axes: BTreeMap<String, Vec<Value>> = BTreeMap::new();
        for (key, values) in section.axes {
            let canon = canonical_key(&key).to_string();
            if values.is_empty() {
                return Err(CliError::config(format!("sweep.axes.{key}"), "axis has no values"));
            }
            if axes.insert(canon.clone(), values).is_some() {
                return Err(CliError::config(format!("sweep.axes.{key}"), format!("duplicate axis {canon}")));
            }
        }
        if section.max_concurrency == Some(0) {
            return Err(CliError::config("sweep.max_concurrency", "must be positive"));
        }
        Ok(SweepConfig {
            base,
            base_table: self.table,
            axes: axes.into_iter().collect(),
            max_concurrency: section.max_concurrency,
        })
    }
}

fn parse_table(table: &Table) -> Result<RunConfig> {
    Value::Table(table.clone())
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config("<config>", e.message().to_string()))
}

pub(crate) fn resolve_table(table: &Table) -> Result<RunConfig> {
    let cfg = parse_table(table)?;
    cfg.validate()?;
    Ok(cfg)
}

fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

pub(crate) fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::config(key, "empty key"))?;
    let mut cur = table;
    for (i, part) in parts.iter().enumerate() {
        let entry = cur.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(parts[..=i].join("."), "is not a table"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn merge(into: &mut Table, from: Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}
