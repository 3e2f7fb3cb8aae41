//! Manifests, input digests, and JSON writing shared by the subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const SCHEMA: u32 = 1;

/// 1 for I/O failures anywhere in the chain, 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|c| {
        c.is::<std::io::Error>() || c.downcast_ref::<lexisseg::Error>().is_some_and(lexisseg::Error::is_io)
    });
    if io {
        1
    } else {
        2
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest_file(path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Wall-clock per phase, kept only when requested so that default outputs
/// are reproducible byte for byte.
pub struct PhaseTimer {
    enabled: bool,
    phases: BTreeMap<String, f64>,
}

impl PhaseTimer {
    pub fn new(enabled: bool) -> Self {
        Self { enabled, phases: BTreeMap::new() }
    }

    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let v = f();
        if self.enabled {
            *self.phases.entry(phase.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
        }
        v
    }

    pub fn into_map(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.phases)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub tool_version: &'static str,
    pub seed: Option<u64>,
    pub parameters: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<BTreeMap<String, f64>>,
}

impl Manifest {
    pub fn new(command: &'static str, seed: Option<u64>, parameters: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed,
            parameters: serde_json::to_value(parameters)?,
            inputs: Vec::new(),
            wall_seconds: None,
        })
    }
}

/// Pretty JSON with a trailing newline, to `out` or stdout.
pub fn write_json(out: Option<&PathBuf>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .context("writing to stdout"),
    }
}
