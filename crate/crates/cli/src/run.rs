//! Config envelope, output directory and manifest.
//!
//! Every command resolves its parameters into a JSON document; the manifest
//! records that document, its hash and the hash of every file written, so two
//! runs with the same inputs produce identical directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

fn default_version() -> u32 {
    CONFIG_VERSION
}

/// Shared envelope around command-specific parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig<P> {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_version")]
    pub version: u32,
    pub params: P,
}

impl<P> RunConfig<P> {
    pub fn new(params: P) -> Self {
        Self { seed: 0, out_dir: None, threads: None, version: CONFIG_VERSION, params }
    }
}

pub fn load_config<P: DeserializeOwned>(path: &Path) -> Result<RunConfig<P>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: RunConfig<P> =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if cfg.version != CONFIG_VERSION {
        return Err(CliError::config(format!("config version {} is not supported (expected {CONFIG_VERSION})", cfg.version)));
    }
    if cfg.threads == Some(0) {
        return Err(CliError::config("threads must be positive"));
    }
    Ok(cfg)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    infogen_version: &'a str,
    config_version: u32,
    seed: u64,
    inputs_sha256: String,
    config: serde_json::Value,
    files: &'a BTreeMap<String, String>,
}

/// Collects the files of one run and writes `manifest.json` last.
pub struct Output {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: BTreeMap::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| CliError::Write { path, source })?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
        self.write(name, (text + "\n").as_bytes())
    }

    /// Little-endian `f64` payload plus a `<name>.json` sidecar.
    pub fn write_bin<M: Serialize>(&mut self, name: &str, values: &[f64], meta: &M) -> Result<()> {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        self.write(name, &bytes)?;
        self.write_json(&format!("{name}.json"), meta)
    }

    pub fn finish<P: Serialize>(self, command: &str, cfg: &RunConfig<P>) -> Result<()> {
        let mut config = serde_json::to_value(cfg).map_err(|e| CliError::Numeric(e.to_string()))?;
        // Where and how wide a run executes does not change its outputs.
        if let Some(obj) = config.as_object_mut() {
            obj.remove("out_dir");
            obj.remove("threads");
        }
        let canonical = serde_json::to_vec(&config).map_err(|e| CliError::Numeric(e.to_string()))?;
        let manifest = Manifest {
            command,
            infogen_version: env!("CARGO_PKG_VERSION"),
            config_version: cfg.version,
            seed: cfg.seed,
            inputs_sha256: sha256_hex(&canonical),
            config,
            files: &self.files,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Numeric(e.to_string()))?;
        let path = self.dir.join("manifest.json");
        fs::write(&path, text + "\n").map_err(|source| CliError::Write { path, source })
    }
}
