use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

/// Provenance record of a run: the full configuration, the seed and the
/// build that produced it. Contains no timestamps so repeated runs are
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub git_describe: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: Value,
}

impl Manifest {
    pub fn new(command: impl Into<String>, seed: Option<u64>, config: Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            git_describe: env!("PERMBET_GIT_DESCRIBE").to_string(),
            command: command.into(),
            seed,
            config,
        }
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }
}
