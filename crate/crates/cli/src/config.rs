//! Flat TOML configuration. Keys mirror the command-line flags, plus every
//! knob of the RVM, optimizer, baseline and simulation settings under its
//! field name (`gamma = 0.4`, `grid_step = 0.1`, `nb_var = 12`, ...).

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

/// Values for the flag-named keys.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagValues {
    pub family: Option<String>,
    pub n: Option<OneOrMany<usize>>,
    pub replicates: Option<usize>,
    pub methods: Option<OneOrMany<String>>,
    pub params: Option<OneOrMany<usize>>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub singular_policy: Option<String>,
    pub trace: Option<bool>,
}

const FLAG_KEYS: [&str; 11] = [
    "family",
    "n",
    "replicates",
    "methods",
    "params",
    "alpha",
    "seed",
    "out",
    "jobs",
    "singular_policy",
    "trace",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// A parsed configuration file: flag values plus knob overrides still to be
/// applied to the settings structs.
#[derive(Debug, Default)]
pub struct FileConfig {
    pub flags: FlagValues,
    knobs: Table,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Failure(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut knobs: Table = text.parse().map_err(|e: toml::de::Error| CliError::Usage(e.to_string()))?;
        let mut flags = Table::new();
        for key in FLAG_KEYS {
            if let Some(v) = knobs.remove(key) {
                flags.insert(key.to_string(), v);
            }
        }
        let flags = FlagValues::deserialize(flags).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Self { flags, knobs })
    }

    /// Replace the fields of `base` named by the file's knobs. Nested
    /// structs are searched too, so knobs stay flat.
    pub fn overlay<T: Serialize + DeserializeOwned>(&mut self, base: &T) -> Result<T, CliError> {
        let mut table = Table::try_from(base).map_err(|e| CliError::Usage(e.to_string()))?;
        take_knobs(&mut table, &mut self.knobs);
        T::deserialize(table).map_err(|e| CliError::Usage(e.to_string()))
    }

    /// Fail on knobs that no settings struct claimed.
    pub fn finish(self) -> Result<(), CliError> {
        match self.knobs.keys().next() {
            None => Ok(()),
            Some(key) => Err(CliError::Usage(format!("unknown configuration key `{key}`"))),
        }
    }
}

fn take_knobs(table: &mut Table, knobs: &mut Table) {
    for (key, value) in table.iter_mut() {
        if let Value::Table(inner) = value {
            take_knobs(inner, knobs);
        } else if let Some(v) = knobs.remove(key) {
            *value = v;
        }
    }
}
