//! `--config` files: `key=value` lines appended as `--key value` unless the
//! flag is already on the command line.

use std::ffi::OsString;
use std::fs;

use anyhow::{bail, Context, Result};

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn has_flag(argv: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_eq = format!("--{key}=");
    argv.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&with_eq)
    })
}

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key=value", i + 1);
        };
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        if k.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

pub fn expand(mut argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let mut extra = Vec::new();
    for (k, v) in parse(&text)? {
        if k == "config" || has_flag(&argv, &k) {
            continue;
        }
        match v.as_str() {
            "true" => extra.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => {
                extra.push(OsString::from(format!("--{k}")));
                extra.push(OsString::from(v));
            }
        }
    }
    argv.extend(extra);
    Ok(argv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn explicit_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        fs::write(&cfg, "# defaults\nepochs=5\nlr = 0.01\nlowercase=true\ntrain_embeddings=false\n").unwrap();
        let argv = args(&["hominem", "train", "cnn", "--epochs", "2", "--config", cfg.to_str().unwrap()]);
        let out = expand(argv).unwrap();
        let tail: Vec<String> = out[7..].iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(tail, ["--lr", "0.01", "--lowercase"]);
    }

    #[test]
    fn malformed_line() {
        assert!(parse("epochs 5").is_err());
    }
}
