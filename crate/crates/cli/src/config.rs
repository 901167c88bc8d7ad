//! Run configuration: one TOML file plus dotted-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tga::attack::{AttackConfig, Method};
use tga::ddne::DdneHyper;
use tga::dynnet::SnapshotSpec;
use tga::evalharness::{ExperimentPlan, Strategy, SyntheticSpec, TargetSelection};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; every random stream is derived from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: DdneHyper,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    /// Temporal edge list; requires `snapshots`. Relative to the config file.
    pub path: Option<PathBuf>,
    pub snapshots: Option<SnapshotSpec>,
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub horizons: Vec<usize>,
    pub selections: Vec<TargetSelection>,
    /// History lengths to sweep; defaults to `model.history_length` alone.
    pub history_lengths: Option<Vec<usize>>,
    pub record_timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::TgaGre],
            horizons: vec![0],
            selections: vec![TargetSelection::new(Strategy::HighestProbability)],
            history_lengths: None,
            record_timings: false,
        }
    }
}

impl RunConfig {
    /// Reads `path`, applies `key=value` overrides and an optional seed, and
    /// resolves relative paths against the config file's directory.
    pub fn load(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut table: toml::Table = toml::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig = table
            .try_into()
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.model.seed = cfg.seed;
        cfg.attack.seed = cfg.seed;
        if let Some(s) = &mut cfg.dataset.synthetic {
            s.seed = cfg.seed;
        }
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &cfg.dataset.path {
            if p.is_relative() {
                cfg.dataset.path = Some(base.join(p));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let d = &self.dataset;
        match (&d.path, &d.synthetic) {
            (Some(_), None) if d.snapshots.is_none() => {
                Err(CliError::Input("dataset.path needs a [dataset.snapshots] section".into()))
            }
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => Err(CliError::Input(
                "set exactly one of dataset.path and [dataset.synthetic]".into(),
            )),
        }?;
        if self.experiment.methods.is_empty() || self.experiment.horizons.is_empty() || self.experiment.selections.is_empty() {
            return Err(CliError::Input("experiment methods, horizons and selections must be non-empty".into()));
        }
        self.model.validate().map_err(|e| CliError::Input(e.to_string()))?;
        self.attack.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(())
    }

    pub fn history_lengths(&self) -> Vec<usize> {
        self.experiment
            .history_lengths
            .clone()
            .unwrap_or_else(|| vec![self.model.history_length])
    }

    pub fn plan(&self, history_length: usize) -> ExperimentPlan {
        ExperimentPlan {
            dataset: self.dataset.name.clone(),
            hyper: DdneHyper {
                history_length,
                ..self.model.clone()
            },
            attack: self.attack.clone(),
            selections: self.experiment.selections.clone(),
            methods: self.experiment.methods.clone(),
            horizons: self.experiment.horizons.clone(),
            record_timings: self.experiment.record_timings,
        }
    }
}

/// Sets `a.b.c = value` in `table`, creating intermediate tables. The value is
/// parsed as TOML and taken as a plain string when that fails.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Input(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Input(format!("bad override key {key:?}")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("non-empty");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Input(format!("override {key:?}: {p} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
