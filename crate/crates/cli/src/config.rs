//! Run configuration: TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shrinkport_core::backtest::DEFAULT_TOP_K;
use shrinkport_core::dea::Group;
use shrinkport_core::mean_shrinkage::{BopEpsilon, DEFAULT_BOP_EPSILON};
use shrinkport_core::portfolio_opt::{ModelParams, DEFAULT_ALPHA_CVAR, DEFAULT_GAMMA};
use shrinkport_core::synth::SynthConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetSpec>,
    pub insample_len: usize,
    pub outsample: Vec<usize>,
    pub gamma: f64,
    pub alpha_cvar: f64,
    pub bop_epsilon: f64,
    pub top_k: usize,
    pub groups: Vec<Group>,
    pub drop_incomplete_rows: bool,
    pub synth: SynthConfig,
    pub out: PathBuf,
    /// 0 lets rayon choose.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            insample_len: 260,
            outsample: vec![65, 130, 260],
            gamma: DEFAULT_GAMMA,
            alpha_cvar: DEFAULT_ALPHA_CVAR,
            bop_epsilon: DEFAULT_BOP_EPSILON,
            top_k: DEFAULT_TOP_K,
            groups: Group::ALL.to_vec(),
            drop_incomplete_rows: false,
            synth: SynthConfig::default(),
            out: PathBuf::from("results"),
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.insample_len < 2 {
            return Err(CliError::Invalid("insample_len must be at least 2".into()));
        }
        if self.outsample.is_empty() || self.outsample.contains(&0) {
            return Err(CliError::Invalid(
                "outsample settings must be non-empty and positive".into(),
            ));
        }
        if self.groups.is_empty() {
            return Err(CliError::Invalid("at least one group is required".into()));
        }
        if self.top_k == 0 {
            return Err(CliError::Invalid("top_k must be positive".into()));
        }
        self.params().validate()?;
        self.epsilon()?;
        Ok(())
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            gamma: self.gamma,
            alpha_cvar: self.alpha_cvar,
        }
    }

    pub fn epsilon(&self) -> Result<BopEpsilon, CliError> {
        Ok(BopEpsilon::new(self.bop_epsilon)?)
    }
}

/// `NAME=PATH`, or a bare path named after its file stem.
pub fn parse_dataset(arg: &str) -> Result<DatasetSpec, String> {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok(DatasetSpec {
            name: name.to_string(),
            path: PathBuf::from(path),
        }),
        Some(_) => Err(format!("expected NAME=PATH, got '{arg}'")),
        None => {
            let path = PathBuf::from(arg);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(DatasetSpec { name, path })
        }
    }
}

/// SHA-256 of the JSON encoding of `value`, hex encoded.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(value).expect("config serialises");
    hex::encode(Sha256::digest(&bytes))
}
