//! `--config FILE` support: a flat JSON object keyed by long flag names.
//! Values from the file are spliced in after the subcommand; any flag the
//! user also passes on the command line is taken from the command line only.

use std::ffi::OsString;
use std::fmt;

use serde_json::Value;

#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Removes `--config PATH` / `--config=PATH` from `args` and returns the path.
fn take_config(args: &mut Vec<String>) -> Result<Option<String>, UsageError> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--" {
            break;
        }
        if let Some(p) = args[i].strip_prefix("--config=") {
            path = Some(p.to_string());
            args.remove(i);
        } else if args[i] == "--config" {
            if i + 1 >= args.len() {
                return Err(UsageError("--config needs a file path".into()));
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(path)
}

fn flag_present(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_value = format!("--{key}=");
    args.iter().any(|a| *a == flag || a.starts_with(&with_value))
}

fn scalar(key: &str, v: &Value) -> Result<String, UsageError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(UsageError(format!("config key {key:?} must be a string, number, boolean or list"))),
    }
}

fn expand(key: &str, value: &Value) -> Result<Vec<String>, UsageError> {
    let flag = format!("--{key}");
    Ok(match value {
        Value::Bool(true) => vec![flag],
        Value::Bool(false) | Value::Null => vec![],
        Value::Array(items) => {
            let mut out = Vec::with_capacity(items.len() * 2);
            for item in items {
                out.push(flag.clone());
                out.push(scalar(key, item)?);
            }
            out
        }
        other => vec![flag, scalar(key, other)?],
    })
}

/// Merges the config file named on the command line, if any, into `args`.
pub fn resolve_args(args: impl IntoIterator<Item = OsString>) -> Result<Vec<String>, UsageError> {
    let mut args: Vec<String> = args
        .into_iter()
        .map(|a| a.into_string().map_err(|a| UsageError(format!("argument is not UTF-8: {a:?}"))))
        .collect::<Result<_, _>>()?;
    let Some(path) = take_config(&mut args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| UsageError(format!("cannot read config {path}: {e}")))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("config {path} is not valid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(UsageError(format!("config {path} must be a JSON object")));
    };
    let Some(sub) = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(args);
    };
    let mut injected = Vec::new();
    for (key, value) in &map {
        if !flag_present(&args[sub + 1..], key) {
            injected.extend(expand(key, value)?);
        }
    }
    args.splice(sub + 1..sub + 1, injected);
    Ok(args)
}
