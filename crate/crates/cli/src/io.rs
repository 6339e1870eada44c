//! Column and artifact file I/O.
//!
//! A column is a raw little-endian `.bin` (VarBytes columns prepend their
//! `count + 1` u64 offsets) plus a JSON sidecar of the same stem describing
//! element type and count. Artifacts are ZDMV containers.

use patternpress::datamodel::{
    deserialize_artifact, serialize_artifact, CompressedArtifact, ElementType, TypedColumn,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Process exit classification: 2 usage, 3 data/type, 4 integrity.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Integrity(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Integrity(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Integrity(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o error: {e}"))
    }
}

impl From<patternpress::datamodel::FormatError> for CliError {
    fn from(e: patternpress::datamodel::FormatError) -> Self {
        CliError::Data(format!("container error: {e}"))
    }
}

impl From<patternpress::nesting::PipelineError> for CliError {
    fn from(e: patternpress::nesting::PipelineError) -> Self {
        match e {
            patternpress::nesting::PipelineError::ChecksumMismatch { .. } => {
                CliError::Integrity(format!("integrity failure: {e}"))
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(format!("json error: {e}"))
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    schema: String,
    element_type: String,
    count: usize,
}

fn type_string(t: ElementType) -> String {
    match t {
        ElementType::Int64 => "int64".into(),
        ElementType::Float64 => "float64".into(),
        ElementType::FixedBytes(w) => format!("fixed:{w}"),
        ElementType::VarBytes => "varbytes".into(),
    }
}

fn type_from(s: &str) -> Result<ElementType, CliError> {
    if let Some(w) = s.strip_prefix("fixed:") {
        let w: u32 = w
            .parse()
            .map_err(|_| CliError::Data(format!("bad fixed width in \"{s}\"")))?;
        return Ok(ElementType::FixedBytes(w));
    }
    match s {
        "int64" => Ok(ElementType::Int64),
        "float64" => Ok(ElementType::Float64),
        "varbytes" => Ok(ElementType::VarBytes),
        other => Err(CliError::Data(format!("unknown element type \"{other}\""))),
    }
}

pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

pub fn write_column(path: &Path, col: &TypedColumn) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    if let Some(offsets) = col.offsets() {
        for o in offsets {
            bytes.extend_from_slice(&o.to_le_bytes());
        }
    }
    bytes.extend_from_slice(col.payload());
    std::fs::write(path, &bytes)?;
    let sidecar = Sidecar {
        schema: "patternpress.column/1".into(),
        element_type: type_string(col.element_type()),
        count: col.count(),
    };
    std::fs::write(
        sidecar_path(path),
        serde_json::to_string_pretty(&sidecar)? + "\n",
    )?;
    Ok(())
}

pub fn read_column(path: &Path) -> Result<TypedColumn, CliError> {
    let sidecar: Sidecar = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    if sidecar.schema != "patternpress.column/1" {
        return Err(CliError::Data(format!(
            "unsupported sidecar schema \"{}\"",
            sidecar.schema
        )));
    }
    let element_type = type_from(&sidecar.element_type)?;
    let bytes = std::fs::read(path)?;
    let col = match element_type {
        ElementType::VarBytes => {
            let header = sidecar
                .count
                .checked_add(1)
                .and_then(|c| c.checked_mul(8))
                .ok_or_else(|| CliError::Data("sidecar count overflows".into()))?;
            if bytes.len() < header {
                return Err(CliError::Data("column file shorter than offsets".into()));
            }
            let offsets: Vec<u64> = bytes[..header]
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            TypedColumn::from_var(offsets, bytes[header..].to_vec())
                .map_err(|e| CliError::Data(e.to_string()))?
        }
        t => TypedColumn::from_parts(t, bytes, None).map_err(|e| CliError::Data(e.to_string()))?,
    };
    if col.count() != sidecar.count {
        return Err(CliError::Data(format!(
            "sidecar count {} does not match file ({})",
            sidecar.count,
            col.count()
        )));
    }
    Ok(col)
}

pub fn write_artifact(path: &Path, artifact: &CompressedArtifact) -> Result<(), CliError> {
    std::fs::write(path, serialize_artifact(artifact))?;
    Ok(())
}

pub fn read_artifact(path: &Path) -> Result<CompressedArtifact, CliError> {
    Ok(deserialize_artifact(&std::fs::read(path)?)?)
}
