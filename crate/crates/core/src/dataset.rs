//! Line-delimited dataset records shared by the samplers, the trainers and
//! the command-line tools.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const AD_HOMINEM: &str = "AD_HOMINEM";
pub const NON_AD_HOMINEM: &str = "NON_AD_HOMINEM";
pub const DELTA: &str = "DELTA";
pub const AD_HOMINEM_GROUP: &str = "AD_HOMINEM_GROUP";
pub const DELTA_GROUP: &str = "DELTA_GROUP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Score(f64),
    Class(String),
}

impl Label {
    pub fn as_class(&self) -> Option<&str> {
        match self {
            Label::Class(c) => Some(c),
            Label::Score(_) => None,
        }
    }

    pub fn as_score(&self) -> Option<f64> {
        match self {
            Label::Score(s) => Some(*s),
            Label::Class(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub instance_id: String,
    pub label: Label,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub post_ids: Vec<String>,
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<DatasetRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut writer: W, records: &[DatasetRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(|e| Error::InvalidInput(e.to_string()))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
