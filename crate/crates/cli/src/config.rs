//! Key-value configuration files. Keys are long flag names (with `-` or `_`);
//! values become flag arguments placed before the command-line flags, so the
//! command line wins.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

const GLOBAL_WITH_VALUE: [&str; 2] = ["--config", "--threads"];

fn value_to_arg(key: &str, value: &toml::Value) -> CliResult<Option<String>> {
    Ok(match value {
        toml::Value::Boolean(true) => None,
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Array(items) => {
            let parts = items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s.clone()),
                    toml::Value::Integer(i) => Ok(i.to_string()),
                    toml::Value::Float(f) => Ok(f.to_string()),
                    _ => Err(CliError::Usage(format!("config key {key}: unsupported list element {v}"))),
                })
                .collect::<CliResult<Vec<_>>>()?;
            Some(parts.join(","))
        }
        other => return Err(CliError::Usage(format!("config key {key}: unsupported value {other}"))),
    })
}

fn table_to_args(table: &toml::Table, out: &mut Vec<OsString>) -> CliResult<()> {
    for (key, value) in table {
        if value.is_table() {
            continue;
        }
        if let toml::Value::Boolean(false) = value {
            continue;
        }
        out.push(format!("--{}", key.replace('_', "-")).into());
        if let Some(v) = value_to_arg(key, value)? {
            out.push(v.into());
        }
    }
    Ok(())
}

/// Flag arguments contributed by `path` for `command`.
pub fn config_args(path: &Path, command: &str) -> CliResult<Vec<OsString>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut args = Vec::new();
    table_to_args(&table, &mut args)?;
    if let Some(section) = table.get(command) {
        match section.as_table() {
            Some(t) => table_to_args(t, &mut args)?,
            None => return Err(CliError::Usage(format!("config key {command} must be a table"))),
        }
    }
    Ok(args)
}

/// The `--config` file and subcommand name of a raw command line, when both
/// are present. Flags before the subcommand are the global ones.
pub fn prescan(argv: &[OsString]) -> Option<(PathBuf, String)> {
    let mut path = None;
    let mut command = None;
    let mut i = 1;
    while i < argv.len() {
        let arg = argv[i].to_string_lossy();
        if arg == "--" {
            break;
        }
        if arg == "--config" {
            path = argv.get(i + 1).map(PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else if command.is_none() && !arg.starts_with('-') {
            command = Some(arg.into_owned());
        } else if command.is_none() && GLOBAL_WITH_VALUE.contains(&arg.as_ref()) {
            i += 1;
        }
        i += 1;
    }
    Some((path?, command?))
}

/// Inserts `extra` right after the subcommand token of `argv`.
pub fn splice_after_command(argv: &[OsString], command: &str, extra: Vec<OsString>) -> Vec<OsString> {
    let mut i = 1;
    while i < argv.len() {
        let arg = argv[i].to_string_lossy();
        if arg == command {
            break;
        }
        i += if GLOBAL_WITH_VALUE.contains(&arg.as_ref()) { 2 } else { 1 };
    }
    let at = (i + 1).min(argv.len());
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splices_after_subcommand() {
        let argv: Vec<OsString> = ["qfe", "--threads", "2", "score", "--input", "a.csv"].iter().map(OsString::from).collect();
        let merged = splice_after_command(&argv, "score", vec!["--lambda".into(), "50".into()]);
        let merged: Vec<String> = merged.iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(merged, ["qfe", "--threads", "2", "score", "--lambda", "50", "--input", "a.csv"]);
    }

    #[test]
    fn finds_config_anywhere() {
        let argv: Vec<OsString> = ["qfe", "--threads", "2", "granger", "--alpha", "0.1", "--config=c.toml"].iter().map(OsString::from).collect();
        assert_eq!(prescan(&argv), Some((PathBuf::from("c.toml"), "granger".to_string())));
        let argv: Vec<OsString> = ["qfe", "--config", "c.toml", "score"].iter().map(OsString::from).collect();
        assert_eq!(prescan(&argv), Some((PathBuf::from("c.toml"), "score".to_string())));
        let argv: Vec<OsString> = ["qfe", "score", "-i", "x.csv"].iter().map(OsString::from).collect();
        assert_eq!(prescan(&argv), None);
    }

    #[test]
    fn converts_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "stride = 10\nclosed_form = true\nno-clamp = false\nlambda-k = [1, 2.5]\n[granger]\nalpha = 0.01\n").unwrap();
        let args: Vec<String> = config_args(&path, "score").unwrap().iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(args, ["--closed-form", "--lambda-k", "1,2.5", "--stride", "10"]);
        let g: Vec<String> = config_args(&path, "granger").unwrap().iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert!(g.ends_with(&["--alpha".to_string(), "0.01".to_string()]));
    }
}
