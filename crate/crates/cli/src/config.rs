//! Config files: `key = value` lines, `#` comments. Keys are long flag
//! names of the chosen subcommand (`_` and `-` are interchangeable).
//! Values are spliced in front of the command-line flags, so flags given on
//! the command line win.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::ArgAction;

use crate::CliError;

pub fn parse_config(text: &str, path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::usage(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                i + 1
            )));
        };
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(argv: &[OsString]) -> Result<Option<OsString>, CliError> {
    let mut found = None;
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let v = it
                .next()
                .ok_or_else(|| CliError::usage("--config needs a value".into()))?;
            found = Some(v.clone());
        } else if let Some(v) = s.strip_prefix("--config=") {
            found = Some(OsString::from(v));
        }
    }
    Ok(found)
}

/// Returns `argv` with the config file's entries inserted right after the
/// subcommand name.
pub fn expand(argv: Vec<OsString>, cmd: &clap::Command) -> Result<Vec<OsString>, CliError> {
    let Some(file) = config_path(&argv)? else {
        return Ok(argv);
    };
    let path = Path::new(&file);
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
    let entries = parse_config(&text, path)?;

    let Some((pos, sub)) = argv
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| cmd.find_subcommand(a).map(|s| (i, s)))
    else {
        return Ok(argv);
    };
    let mut extra = Vec::new();
    for (key, value) in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| {
                CliError::usage(format!("config key `{key}` is not a flag of `{}`", sub.get_name()))
            })?;
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value.as_str() {
                "true" => extra.push(OsString::from(format!("--{key}"))),
                "false" => {}
                _ => return Err(CliError::usage(format!("config key `{key}` needs true or false"))),
            }
        } else {
            extra.push(OsString::from(format!("--{key}")));
            extra.push(OsString::from(value));
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}
