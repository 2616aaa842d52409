//! Run directories: every subcommand writes its outputs plus a
//! `manifest.json` recording the effective config and SHA-256 hashes of all
//! inputs and outputs.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{runtime, Result};

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    argv: &'a [String],
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    config: &'a serde_json::Value,
    registry: &'a Path,
    inputs: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
}

pub struct RunDir {
    path: PathBuf,
    subcommand: String,
    argv: Vec<String>,
    config: serde_json::Value,
    registry: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<(String, u64)> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        total += n as u64;
        hasher.update(&buf[..n]);
    }
    Ok((hex::encode(hasher.finalize()), total))
}

impl RunDir {
    pub fn create(path: &Path, subcommand: &str, argv: Vec<String>, config: serde_json::Value, registry: &Path) -> Result<Self> {
        fs::create_dir_all(path)
            .with_context(|| format!("cannot create run directory {}", path.display()))
            .map_err(runtime)?;
        tracing::info!(run_dir = %path.display(), "run directory ready");
        Ok(Self {
            path: path.to_path_buf(),
            subcommand: subcommand.into(),
            argv,
            config,
            registry: registry.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
        let meta = lowmt_core::corpus::meta_path(path);
        if meta.exists() {
            self.inputs.push(meta);
        }
    }

    /// Path of an output file inside the run directory.
    pub fn output(&mut self, name: &str) -> PathBuf {
        let p = self.path.join(name);
        self.outputs.push(p.clone());
        p
    }

    /// Output path for a corpus file, including its metadata sidecar.
    pub fn corpus_output(&mut self, name: &str) -> PathBuf {
        let p = self.output(name);
        self.outputs.push(lowmt_core::corpus::meta_path(&p));
        p
    }

    /// Records a file written outside the run directory (e.g. a registry manifest).
    pub fn external_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    fn records(paths: &[PathBuf]) -> Vec<FileRecord> {
        paths
            .iter()
            .filter_map(|p| {
                let (sha256, bytes) = sha256_file(p).ok()?;
                Some(FileRecord {
                    path: p.clone(),
                    sha256,
                    bytes,
                })
            })
            .collect()
    }

    pub fn finish(self, error: Option<&str>) -> Result<PathBuf> {
        let manifest = Manifest {
            tool: "lowmt",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: &self.subcommand,
            argv: &self.argv,
            status: if error.is_some() { "failed" } else { "ok" },
            error: error.map(str::to_string),
            config: &self.config,
            registry: &self.registry,
            inputs: Self::records(&self.inputs),
            outputs: Self::records(&self.outputs),
        };
        let path = self.path.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, json + "\n")
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(runtime)?;
        Ok(path)
    }
}
