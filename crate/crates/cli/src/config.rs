//! TOML overlay: `[subcommand]` tables whose keys are long flag names.
//! Flags given on the command line win.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

fn flag_present(args: &[OsString], flag: &str) -> bool {
    args.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.starts_with(&format!("{flag}="))
    })
}

fn scalar(key: &str, v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        other => bail!("config key '{key}' has unsupported value {other}"),
    })
}

/// Appends flags from `config[subcommand]` that `args` does not set.
pub fn overlay(args: Vec<OsString>, subcommand: &str, config: &toml::Table) -> Result<Vec<OsString>> {
    let Some(section) = config.get(subcommand) else { return Ok(args) };
    let section = section.as_table().with_context(|| format!("config section [{subcommand}] must be a table"))?;
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in section {
        let flag = format!("--{key}");
        if flag_present(&args, &flag) {
            continue;
        }
        match value {
            toml::Value::Boolean(true) => extra.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                for item in items {
                    extra.push(flag.clone().into());
                    extra.push(scalar(key, item)?.into());
                }
            }
            v => {
                extra.push(flag.into());
                extra.push(scalar(key, v)?.into());
            }
        }
    }
    // Keep positional arguments after `--` intact.
    let mut out = args;
    let at = out.iter().position(|a| a == "--").unwrap_or(out.len());
    out.splice(at..at, extra);
    Ok(out)
}

pub fn load(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    text.parse::<toml::Table>().with_context(|| format!("invalid config {}", path.display()))
}

/// Finds `--config PATH` (or `--config=PATH`) and the subcommand name
/// without a full parse.
pub fn locate(args: &[OsString], subcommands: &[&str]) -> (Option<std::path::PathBuf>, Option<String>) {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--config" {
            config = args.get(i + 1).map(std::path::PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.into());
        } else if sub.is_none() && subcommands.contains(&a.as_ref()) {
            sub = Some(a.to_string());
        }
        i += 1;
    }
    (config, sub)
}
