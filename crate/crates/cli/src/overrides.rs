use std::path::Path;

use anyhow::{anyhow, Context};
use evmarl::scenario::{DataConfig, ScenarioConfig};
use toml::{Table, Value};

use crate::Failure;

/// Parses `s` as a TOML value, falling back to a bare string.
fn parse_value(s: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {s}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(s.to_string()))
}

/// Sets a dotted key, creating intermediate tables.
pub fn set_path(root: &mut Table, key: &str, value: Value) -> anyhow::Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(anyhow!("malformed key {key:?}"));
    }
    let mut t = root;
    for p in &parts[..parts.len() - 1] {
        t = t
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("{key}: {p} is not a table"))?;
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Reads the config, applies `KEY=VALUE` overrides, and validates it.
/// Relative data paths resolve against the config's directory; the file itself is only read.
pub fn load_config(path: &Path, sets: &[(String, Value)]) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::config)?;
    let mut table: Table = toml::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::config)?;
    for (k, v) in sets {
        set_path(&mut table, k, v.clone()).map_err(Failure::config)?;
    }
    let merged = toml::to_string(&table).map_err(Failure::runtime)?;
    let mut cfg = ScenarioConfig::from_toml_str(&merged)
        .with_context(|| format!("in {}", path.display()))
        .map_err(Failure::config)?;
    if let (DataConfig::Files(f), Some(dir)) = (&mut cfg.data, path.parent()) {
        for p in [&mut f.sessions, &mut f.solar] {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(cfg)
}

pub fn parse_sets(raw: &[String]) -> Result<Vec<(String, Value)>, Failure> {
    raw.iter()
        .map(|s| {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Failure::config(anyhow!("--set expects KEY=VALUE, got {s:?}")))?;
            Ok((k.trim().to_string(), parse_value(v.trim())))
        })
        .collect()
}
