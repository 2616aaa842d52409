//! Subcommand implementations. Each one resolves its effective config and
//! validates inputs before creating the run directory.

pub mod data;
pub mod eval;
pub mod model;

use std::path::{Path, PathBuf};

use anyhow::anyhow;
use lowmt_core::backends::Registry;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{config, CliError, Result};
use crate::rundir::{sha256_file, RunDir};
use crate::settings::Layers;

pub struct Ctx {
    pub layers: Layers,
    pub registry: PathBuf,
    pub run_dir: Option<PathBuf>,
    pub argv: Vec<String>,
}

impl Ctx {
    pub fn resolve<C: Serialize + DeserializeOwned>(&self, section: &str, defaults: &C, flags: toml::Table) -> Result<C> {
        self.layers.resolve(section, defaults, flags)
    }

    /// Logs the effective config, compares replayed input hashes and creates
    /// the run directory.
    pub fn start(&self, subcommand: &str, cfg: &impl Serialize) -> Result<RunDir> {
        let json = serde_json::to_value(cfg).expect("config serializes");
        tracing::info!(subcommand, config = %json, "effective config");
        for (path, expected) in &self.layers.manifest_inputs {
            match sha256_file(path) {
                Ok((found, _)) if &found == expected => {}
                Ok(_) => tracing::warn!(path = %path.display(), "input differs from the replayed manifest"),
                Err(_) => tracing::warn!(path = %path.display(), "input from the replayed manifest is missing"),
            }
        }
        let dir = self
            .run_dir
            .clone()
            .unwrap_or_else(|| Path::new("runs").join(subcommand));
        RunDir::create(&dir, subcommand, self.argv.clone(), json, &self.registry)
    }

    pub fn open_registry(&self) -> Result<Registry> {
        if !self.registry.is_dir() {
            return Err(config(anyhow!("registry {} does not exist", self.registry.display())));
        }
        Ok(Registry::open(&self.registry)?)
    }

    pub fn create_registry(&self) -> Result<Registry> {
        Ok(Registry::create(&self.registry)?)
    }
}

/// Writes the manifest with the final status and passes the result through.
pub fn finish<T>(run: RunDir, result: Result<T>) -> Result<T> {
    let error = result.as_ref().err().map(|e: &CliError| e.to_string());
    let manifest = run.finish(error.as_deref())?;
    tracing::info!(manifest = %manifest.display(), "run recorded");
    result
}

pub fn require<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| config(anyhow!("missing required setting `{what}`")))
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(config(anyhow!("{what} {} does not exist", path.display())))
    }
}

pub fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("value serializes"));
}
