//! Output writers. Every CSV starts with a `# config:` comment line holding
//! the resolved configuration; every JSON carries it under `"config"`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// JSON object with the config embedded next to the payload fields.
pub fn with_config(config: &Value, payload: Value) -> Value {
    let mut obj = serde_json::Map::new();
    obj.insert("config".into(), config.clone());
    match payload {
        Value::Object(m) => obj.extend(m),
        other => {
            obj.insert("data".into(), other);
        }
    }
    Value::Object(obj)
}

pub fn write_csv<T: Serialize>(path: &Path, config: &Value, rows: &[T]) -> Result<(), CliError> {
    write_csv_with_header(path, config, None, rows)
}

/// Like `write_csv`, with an explicit header so that an empty table still names its columns.
pub fn write_csv_with_header<T: Serialize>(path: &Path, config: &Value, header: Option<&[&str]>, rows: &[T]) -> Result<(), CliError> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "# config: {}", serde_json::to_string(config)?)?;
    let mut w = csv::WriterBuilder::new().has_headers(header.is_none()).from_writer(file);
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Hex SHA-256 of a JSON value's compact serialization.
pub fn hash_json(value: &Value) -> String {
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Fingerprint of the sample data so cells from different inputs never mix.
pub fn hash_set(set: &hrtf_graph::hrir::HrirSet) -> String {
    let mut h = Sha256::new();
    h.update(set.name.as_bytes());
    h.update(set.sample_rate_hz.to_le_bytes());
    for d in &set.directions {
        for c in d.unit_vector() {
            h.update(c.to_le_bytes());
        }
    }
    for r in set.left.iter().chain(&set.right) {
        for x in r {
            h.update(x.to_le_bytes());
        }
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}
