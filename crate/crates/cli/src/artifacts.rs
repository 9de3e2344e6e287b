use std::fs;
use std::path::{Path, PathBuf};

use alldiff_select::csp::{parse_instance, serialize_instance, CspInstance};
use alldiff_select::features::FeatureVector;
use alldiff_select::harness::{InstanceLabel, Protocol, RuntimeMatrix};
use alldiff_select::solver::{RunRecord, VariantId};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::Snapshot;
use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;
pub const INSTANCE_EXT: &str = "csp";

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    format_version: u32,
    kind: &'a str,
    config: &'a Snapshot,
    data: &'a T,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    format_version: u32,
    kind: String,
    config: Snapshot,
    data: T,
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_artifact<T: Serialize>(path: &Path, kind: &str, config: &Snapshot, data: &T) -> Result<(), CliError> {
    let env = EnvelopeOut {
        format_version: FORMAT_VERSION,
        kind,
        config,
        data,
    };
    let mut text = serde_json::to_string_pretty(&env).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Reads a JSON artifact, rejecting other format versions and kinds.
pub fn read_artifact<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<(Snapshot, T), CliError> {
    let schema = |msg: String| CliError::Schema {
        path: path.to_path_buf(),
        msg,
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| schema(e.to_string()))?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => return Err(schema(format!("format version {v}, expected {FORMAT_VERSION}"))),
        None => return Err(schema("missing format_version".into())),
    }
    match value.get("kind").and_then(serde_json::Value::as_str) {
        Some(k) if k == kind => {}
        other => return Err(schema(format!("expected a {kind} file, found {other:?}"))),
    }
    let env: EnvelopeIn<T> = serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
    debug_assert_eq!(env.format_version, FORMAT_VERSION);
    debug_assert_eq!(env.kind, kind);
    Ok((env.config, env.data))
}

/// Text header for non-JSON outputs.
pub fn comment_header(kind: &str, config: &Snapshot) -> Result<String, CliError> {
    let cfg = serde_json::to_string(config).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(format!(
        "# format-version {FORMAT_VERSION}\n# kind {kind}\n# config {cfg}\n"
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub instance: String,
    pub features: FeatureVector,
    /// Seconds; zero in deterministic mode.
    pub extraction_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixData {
    pub protocol: Protocol,
    pub cells: Vec<RunRecord>,
}

impl MatrixData {
    pub fn from_matrix(m: &RuntimeMatrix) -> Self {
        MatrixData {
            protocol: m.protocol.clone(),
            cells: m.cells().to_vec(),
        }
    }

    pub fn into_matrix(self, path: &Path) -> Result<RuntimeMatrix, CliError> {
        RuntimeMatrix::from_cells(self.protocol, self.cells).map_err(|e| CliError::Schema {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }
}

pub type LabelData = Vec<InstanceLabel>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub instance: String,
    pub variant: VariantId,
}

pub fn instance_file_text(instance: &CspInstance, provenance: &str) -> String {
    format!(
        "# format-version {FORMAT_VERSION}\n# {provenance}\n{}",
        serialize_instance(instance)
    )
}

fn check_instance_version(path: &Path, text: &str) -> Result<(), CliError> {
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix("# format-version") {
            let v = rest.trim();
            if v != FORMAT_VERSION.to_string() {
                return Err(CliError::Schema {
                    path: path.to_path_buf(),
                    msg: format!("format version {v}, expected {FORMAT_VERSION}"),
                });
            }
        }
    }
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<CspInstance, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    check_instance_version(path, &text)?;
    parse_instance(&text).map_err(|e| CliError::Schema {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Instance files in a directory, sorted by file name.
pub fn read_corpus(dir: &Path) -> Result<Vec<CspInstance>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == INSTANCE_EXT))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Input(format!("{}: no .{INSTANCE_EXT} files", dir.display())));
    }
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let inst = read_instance(&p)?;
        if !seen.insert(inst.name().to_string()) {
            return Err(CliError::Input(format!(
                "{}: instance name `{}` already used",
                p.display(),
                inst.name()
            )));
        }
        out.push(inst);
    }
    Ok(out)
}
