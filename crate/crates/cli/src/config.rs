//! Option defaults from a TOML file.
//!
//! Top-level keys and keys under a table named after the subcommand become
//! flags inserted right after the subcommand, so flags given on the command
//! line (which come later) override them. `stop_m = 300` becomes
//! `--stop-m 300`; `true` booleans become bare flags and `false` ones are
//! dropped.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use crate::cli::SUBCOMMANDS;
use crate::errors::{DataError, UsageError};

/// Path given with `--config`, if any.
fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(path) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(path));
        }
    }
    None
}

fn scalar(key: &str, value: &toml::Value) -> Result<Option<String>> {
    Ok(Some(match value {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(_) => return Ok(None),
        _ => bail!(UsageError(format!("config key {key:?} must be a string, number or boolean"))),
    }))
}

fn flags(table: &toml::Table, out: &mut Vec<OsString>) -> Result<()> {
    for (key, value) in table {
        if value.is_table() {
            continue;
        }
        if matches!(key.as_str(), "config" | "jobs" | "quiet") {
            bail!(UsageError(format!("config key {key:?} must be given on the command line")));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match (value, scalar(key, value)?) {
            (toml::Value::Boolean(true), _) => out.push(flag.into()),
            (toml::Value::Boolean(false), _) => {}
            (_, Some(v)) => {
                out.push(flag.into());
                out.push(v.into());
            }
            (_, None) => unreachable!(),
        }
    }
    Ok(())
}

/// Returns `argv` with the config file's options spliced in.
pub fn merge(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else { return Ok(argv) };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| DataError(format!("reading config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| UsageError(format!("config {}: {e}", path.display())))
        .with_context(|| format!("parsing {}", path.display()))?;
    let Some(pos) = argv.iter().position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref())) else {
        return Ok(argv);
    };
    let name = argv[pos].to_string_lossy().into_owned();
    let mut extra = Vec::new();
    flags(&table, &mut extra)?;
    if let Some(section) = table.get(&name) {
        let section = section.as_table().ok_or_else(|| UsageError(format!("config entry {name:?} must be a table")))?;
        flags(section, &mut extra)?;
    }
    let mut merged = argv[..=pos].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&argv[pos + 1..]);
    Ok(merged)
}
