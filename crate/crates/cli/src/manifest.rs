use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    /// SHA-256 of the primary input file
    pub corpus_hash: Option<String>,
    pub seed: u64,
    pub version: String,
    /// seconds since the epoch; `SOURCE_DATE_EPOCH` wins when set
    pub timestamp: u64,
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Paths inside the output directory are recorded relative to it, so two
/// runs into different directories yield the same manifest.
fn relativize(value: &mut Value, out: &Path) {
    match value {
        Value::String(s) => {
            if let Ok(rest) = Path::new(s.as_str()).strip_prefix(out) {
                *s = format!("$OUT/{}", rest.display());
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|v| relativize(v, out)),
        Value::Object(map) => map.values_mut().for_each(|v| relativize(v, out)),
        _ => {}
    }
}

pub fn write(out: &Path, command: &str, params: &impl Serialize, input: Option<&Path>, seed: u64) -> Result<PathBuf> {
    let mut parameters = serde_json::to_value(params)?;
    relativize(&mut parameters, out);
    let manifest = RunManifest {
        command: command.to_string(),
        parameters,
        corpus_hash: input.map(file_hash).transpose()?,
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: timestamp(),
    };
    let dir = out.join("manifests");
    fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{command}.json"));
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}
