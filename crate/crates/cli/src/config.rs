//! `--config` files: one `key=value` per line, `#` comments. Each key becomes
//! `--key value` unless the flag is already on the command line. `true` and
//! `false` toggle switches.

use std::ffi::OsString;
use std::path::Path;

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            return None;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn has_flag(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let prefix = format!("--{key}=");
    args.iter().map(|a| a.to_string_lossy()).any(|s| s == flag || s.starts_with(&prefix))
}

/// Parses the file into `(key, value)` pairs.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("config line {}: expected key=value", no + 1))?;
        let k = k.trim().trim_start_matches("--");
        if k.is_empty() || k == "config" {
            return Err(format!("config line {}: invalid key {k:?}", no + 1));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// `args` with the config entries spliced in after the subcommand name.
pub fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| format!("cannot read config {}: {e}", Path::new(&path).display()))?;
    let mut extra: Vec<OsString> = Vec::new();
    for (k, v) in parse_config(&text)? {
        if has_flag(&args, &k) {
            continue;
        }
        match v.as_str() {
            "true" => extra.push(format!("--{k}").into()),
            "false" => {}
            _ => {
                extra.push(format!("--{k}").into());
                extra.push(v.into());
            }
        }
    }
    if args.len() < 2 {
        return Ok(args);
    }
    let mut out = args[..2].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}
