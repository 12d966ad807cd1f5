//! Output files and the manifest written next to each of them.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Reproducibility record for one output file, written as `<file>.manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub output: String,
    /// Resolved flags, keyed like the command line; usable as a `--config` file.
    pub config: Value,
    pub master_seed: u64,
    pub tool_version: String,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub warnings: Vec<String>,
}

/// Collects outputs of one run and writes each with its manifest.
pub struct OutputSink {
    pub subcommand: &'static str,
    pub config: Value,
    pub master_seed: u64,
    pub threads: usize,
    pub out_dir: PathBuf,
    pub started: Instant,
    pub warnings: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl OutputSink {
    pub fn new(subcommand: &'static str, config: Value, master_seed: u64, threads: usize, out_dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir)?;
        Ok(Self {
            subcommand,
            config,
            master_seed,
            threads,
            out_dir: out_dir.to_path_buf(),
            started: Instant::now(),
            warnings: Vec::new(),
            written: Vec::new(),
        })
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        eprintln!("warning: {w}");
        self.warnings.push(w);
    }

    /// Writes `bytes` to `name` inside the output directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        self.write_path(&path, bytes)?;
        Ok(path)
    }

    /// Writes `bytes` to an explicit path.
    pub fn write_path(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, bytes)?;
        let manifest = RunManifest {
            subcommand: self.subcommand.to_string(),
            output: path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
            config: self.config.clone(),
            master_seed: self.master_seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            threads: self.threads,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            warnings: self.warnings.clone(),
        };
        let mut name = path.as_os_str().to_os_string();
        name.push(".manifest.json");
        fs::write(PathBuf::from(name), serde_json::to_vec_pretty(&manifest)?)?;
        self.written.push(path.to_path_buf());
        Ok(())
    }
}
