//! Rendering, atomic writes and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::commands::Output;
use crate::config::SCHEMA_VERSION;
use crate::{CliError, Format};

#[derive(Serialize)]
struct Envelope<'a> {
    schema_version: u32,
    command: &'a str,
    seed: u64,
    report: &'a Value,
}

/// The subcommand's primary output in the requested format.
pub fn render(command: &str, seed: u64, out: &Output, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let env = Envelope {
                schema_version: SCHEMA_VERSION,
                command,
                seed,
                report: &out.report,
            };
            let mut s =
                multilasso_core::json::to_string(&env).map_err(|e| CliError::Io(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&out.table.header)
                .map_err(|e| CliError::Io(e.to_string()))?;
            for row in &out.table.rows {
                w.write_record(row)
                    .map_err(|e| CliError::Io(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("writing {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[derive(Serialize)]
pub struct Stage {
    pub stage: String,
    pub ms: f64,
}

#[derive(Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub version: String,
    /// SHA-256 of the config file bytes.
    pub config_sha256: String,
    pub seed: u64,
    /// Seconds since the Unix epoch at start.
    pub started_at: f64,
    pub timings: Vec<Stage>,
    pub report: Value,
}

impl Manifest {
    pub fn new(
        command: &str,
        seed: u64,
        config: &[u8],
        started: SystemTime,
        report: Value,
    ) -> Self {
        Manifest {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_hash(config),
            seed,
            started_at: started
                .duration_since(SystemTime::UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
            timings: Vec::new(),
            report,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s =
            multilasso_core::json::to_string(self).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

pub fn config_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
