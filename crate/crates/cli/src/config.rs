//! Config files, flag merging and the config echo written ahead of every
//! output.
//!
//! A config file is TOML with one section per subcommand. A previous output
//! file is also accepted: its echoed header (a leading `{"config": ...}` JSON
//! line, or leading `# ` comment lines holding TOML) is read back, which
//! reproduces the run exactly.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

pub const SECTIONS: [&str; 6] = ["simulate", "compensator", "verify", "knn", "gap-test", "copula"];

/// Sections of a config file, keyed by subcommand.
pub fn load(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::ConfigFile { path: path.display().to_string(), reason: e.to_string() })?;
    parse(&text).map_err(|reason| CliError::ConfigFile { path: path.display().to_string(), reason })
}

pub fn parse(text: &str) -> std::result::Result<Map<String, Value>, String> {
    let trimmed = text.trim_start();
    let value: Value = if trimmed.starts_with('{') {
        let first = trimmed.lines().next().unwrap_or_default();
        let header: Value = serde_json::from_str(first).map_err(|e| e.to_string())?;
        header.get("config").cloned().ok_or("the first JSON line has no `config` object")?
    } else if trimmed.starts_with('#') {
        let toml_text: String = trimmed
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.strip_prefix("# ").or_else(|| l.strip_prefix('#')).unwrap_or(l))
            .collect::<Vec<_>>()
            .join("\n");
        toml::from_str(&toml_text).map_err(|e| e.to_string())?
    } else {
        toml::from_str(text).map_err(|e| e.to_string())?
    };
    let map = match value {
        Value::Object(m) => m,
        _ => return Err("expected a table of subcommand sections".into()),
    };
    if let Some(unknown) = map.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(format!("unknown section `{unknown}`; expected one of {}", SECTIONS.join(", ")));
    }
    Ok(map)
}

/// Objects merge key by key; any other value in `over` replaces `base`.
fn merge(base: Value, over: Value) -> Value {
    match (base, over) {
        (Value::Object(mut b), Value::Object(o)) => {
            for (k, v) in o {
                let merged = match b.remove(&k) {
                    Some(old) => merge(old, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            Value::Object(b)
        }
        (_, over) => over,
    }
}

/// Flag values layered over the file section for `section`.
pub fn layer<P: Serialize + DeserializeOwned>(section: &str, flags: &P, file: Option<&Map<String, Value>>) -> Result<P> {
    let from_flags = serde_json::to_value(flags).map_err(|e| CliError::Library(e.to_string()))?;
    let from_file = file.and_then(|m| m.get(section)).cloned().unwrap_or(Value::Object(Map::new()));
    let merged = merge(from_file, from_flags);
    serde_json::from_value(merged).map_err(|e| CliError::ConfigFile { path: format!("[{section}]"), reason: e.to_string() })
}

/// `{"config":{"<section>":{...}}}`.
pub fn json_header<P: Serialize>(section: &str, params: &P) -> Result<String> {
    let mut sections = Map::new();
    sections.insert(section.to_string(), serde_json::to_value(params).map_err(|e| CliError::Library(e.to_string()))?);
    let mut top = Map::new();
    top.insert("config".to_string(), Value::Object(sections));
    Ok(Value::Object(top).to_string())
}

/// The section as TOML, every line prefixed with `# `.
pub fn comment_header<P: Serialize>(section: &str, params: &P) -> Result<String> {
    let mut sections = toml::Table::new();
    sections.insert(section.to_string(), toml::Value::try_from(params).map_err(|e| CliError::Library(e.to_string()))?);
    let text = toml::to_string(&sections).map_err(|e| CliError::Library(e.to_string()))?;
    Ok(text.lines().map(|l| format!("# {l}\n")).collect())
}
