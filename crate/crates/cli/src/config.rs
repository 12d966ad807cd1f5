//! Merging a JSON config file into the command line.
//!
//! Each key of the config object names a flag (`n_iter_test` or
//! `n-iter-test`). Global flags are inserted right after the program name and
//! the others right after the subcommand, in both cases before the user's own
//! flags. The last occurrence of a flag wins, so the command line overrides
//! the file. A run manifest is accepted too: its `config` object is used.

use std::ffi::OsString;
use std::fs;

use serde_json::Value;

use crate::args::{GLOBAL_FLAGS, SUBCOMMANDS};
use crate::error::CliError;

/// Keys that are never turned into flags (positional arguments).
const SKIPPED_KEYS: [&str; 2] = ["input", "config"];

fn config_path(argv: &[OsString]) -> Result<Option<OsString>, CliError> {
    for (i, a) in argv.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return argv
                .get(i + 1)
                .cloned()
                .map(Some)
                .ok_or_else(|| CliError::Usage("--config needs a path".into()));
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(p.into()));
        }
    }
    Ok(None)
}

/// Flag tokens for the config object, split into (global, subcommand) flags.
fn flag_tokens(obj: &serde_json::Map<String, Value>) -> Result<(Vec<OsString>, Vec<OsString>), CliError> {
    let (mut global, mut local) = (Vec::new(), Vec::new());
    for (key, value) in obj {
        let flag = key.replace('_', "-");
        if SKIPPED_KEYS.contains(&flag.as_str()) {
            continue;
        }
        let out = if GLOBAL_FLAGS.contains(&flag.as_str()) { &mut global } else { &mut local };
        let text = match value {
            Value::Null | Value::Bool(false) => continue,
            Value::Bool(true) => {
                out.push(format!("--{flag}").into());
                continue;
            }
            Value::Number(n) => n.to_string(),
            Value::String(s) => s.clone(),
            Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    other => Err(CliError::Usage(format!("config key `{key}`: unsupported list item {other}"))),
                })
                .collect::<Result<Vec<_>, _>>()?
                .join(","),
            Value::Object(_) => return Err(CliError::Usage(format!("config key `{key}` must not be an object"))),
        };
        out.push(format!("--{flag}={text}").into());
    }
    Ok((global, local))
}

/// Returns `argv` with the flags of the `--config` file (if any) spliced in.
pub fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.to_string_lossy())))?;
    let obj = match value {
        Value::Object(mut obj) => match obj.get("config") {
            Some(Value::Object(_)) if obj.get("subcommand").is_some_and(Value::is_string) => {
                match obj.remove("config") {
                    Some(Value::Object(inner)) => inner,
                    _ => unreachable!(),
                }
            }
            _ => obj,
        },
        _ => return Err(CliError::Usage("config file must hold a JSON object".into())),
    };
    let (global, local) = flag_tokens(&obj)?;
    let Some(pos) = argv
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(argv);
    };
    let mut merged = argv[..1].to_vec();
    merged.extend(global);
    merged.extend_from_slice(&argv[1..=pos]);
    merged.extend(local);
    merged.extend_from_slice(&argv[pos + 1..]);
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn tokens_from_object() {
        let obj = json!({"n_iter_test": 200, "exact": true, "allow-alt": false, "auc-diff": [0.05, 0.1], "input": "x.csv", "seed": 4});
        let (g, t) = flag_tokens(obj.as_object().unwrap()).unwrap();
        assert_eq!(g, vec![OsString::from("--seed=4")]);
        let t: Vec<String> = t.into_iter().map(|s| s.into_string().unwrap()).collect();
        assert!(t.contains(&"--n-iter-test=200".to_string()));
        assert!(t.contains(&"--exact".to_string()));
        assert!(t.contains(&"--auc-diff=0.05,0.1".to_string()));
        assert_eq!(t.len(), 3);
    }
}
