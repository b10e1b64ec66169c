//! `key = value` config files. Keys are long flag names; each entry becomes
//! `--key value` placed before the command-line flags, which therefore win.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::error::{CliError, Result};
use crate::Cli;

/// The value of `--config` in `argv`, if any.
pub fn config_path(argv: &[OsString]) -> Option<OsString> {
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

pub fn parse(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let err = |line: usize, message: String| CliError::Config {
        path: path.display().to_string(),
        message: format!("line {line}: {message}"),
    };
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| err(i + 1, "expected `key = value`".into()))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(err(i + 1, format!("bad key `{k}`")));
        }
        out.push((k.replace('_', "-"), v.to_string()));
    }
    Ok(out)
}

/// Splices the config entries into `argv` right after the subcommand.
pub fn apply(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else { return Ok(argv) };
    let path = Path::new(&path).to_path_buf();
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config { path: path.display().to_string(), message: e.to_string() })?;
    let entries = parse(&text, &path)?;
    let cmd = Cli::command();
    let Some((pos, sub)) = argv
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| cmd.find_subcommand(a.to_string_lossy().as_ref()).map(|s| (i, s)))
    else {
        return Ok(argv);
    };
    let mut injected = Vec::new();
    for (key, value) in entries {
        let arg =
            sub.get_arguments().chain(cmd.get_arguments()).find(|a| a.get_long() == Some(key.as_str())).ok_or_else(
                || CliError::Config {
                    path: path.display().to_string(),
                    message: format!("unknown key `{key}` for `{}`", sub.get_name()),
                },
            )?;
        if key == "config" {
            continue;
        }
        let takes_value = arg.get_num_args().is_none_or(|n| n.takes_values());
        if takes_value {
            injected.push(OsString::from(format!("--{key}")));
            injected.push(OsString::from(value));
        } else {
            match value.as_str() {
                "true" => injected.push(OsString::from(format!("--{key}"))),
                "false" => {}
                other => {
                    return Err(CliError::Config {
                        path: path.display().to_string(),
                        message: format!("`{key}` is a switch; use true or false, not `{other}`"),
                    })
                }
            }
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(injected);
    out.extend(argv[pos + 1..].iter().cloned());
    Ok(out)
}
