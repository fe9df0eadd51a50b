use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use trilab::exact::DEFAULT_EDGE_CAP;
use trilab::graphs::DEFAULT_VERTEX_BUDGET;
use trilab::kernel::DEFAULT_BOX_BUDGET;

use crate::args::RunCommand;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Resource caps, read from the environment on a fresh run and from the manifest on replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub edge_cap: usize,
    pub vertex_budget: usize,
    pub box_budget: u64,
}

impl Caps {
    pub fn from_env() -> Result<Self> {
        Ok(Self {
            edge_cap: env_or("TRILAB_EDGE_CAP", DEFAULT_EDGE_CAP)?,
            vertex_budget: env_or("TRILAB_VERTEX_BUDGET", DEFAULT_VERTEX_BUDGET)?,
            box_budget: env_or("TRILAB_BOX_BUDGET", DEFAULT_BOX_BUDGET)?,
        })
    }
}

fn env_or<T: std::str::FromStr>(key: &str, default: T) -> Result<T> {
    match std::env::var(key) {
        Ok(raw) => raw
            .trim()
            .parse()
            .map_err(|_| trilab::LabError::InvalidParameter(format!("{key}={raw:?} is not a valid cap")).into()),
        Err(_) => Ok(default),
    }
}

/// Everything needed to reproduce a run, plus a short summary of its results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: RunCommand,
    pub caps: Caps,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| trilab::LabError::Parse(format!("{}: {e}", path.display())).into())
    }
}

/// Collects output files for one run directory.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn finish(self, command: &RunCommand, caps: Caps, summary: serde_json::Value) -> Result<PathBuf> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.clone(),
            caps,
            outputs: self.written,
            summary,
        };
        let path = self.dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
