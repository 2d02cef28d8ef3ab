//! The `jointscl` command-line driver. [`run`] takes an argument vector
//! and performs one subcommand; every artifact it writes gets a
//! `.manifest.json` sibling recording the effective configuration and
//! input hashes, which `jointscl replay` turns back into the same command.

pub mod args;
pub mod config;
mod commands;
mod selfcheck;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;

use clap::{ArgAction, CommandFactory, FromArgMatches};

pub use args::{Cli, Command, DATA_DIR_ENV};

/// A failure reported as one machine-parsable line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &str, message: String) -> Self {
        CliError {
            kind: kind.to_string(),
            message,
        }
    }

    pub fn usage(message: String) -> Self {
        CliError::new("usage", message)
    }

    /// Process exit status: 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.kind == "usage" {
            2
        } else {
            1
        }
    }

    /// `{"error":"<kind>","message":"<text>"}` on a single line.
    pub fn to_line(&self) -> String {
        serde_json::json!({ "error": self.kind, "message": self.message }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

impl From<jointscl::Error> for CliError {
    fn from(e: jointscl::Error) -> Self {
        CliError::new(e.kind(), e.to_string().replace('\n', " "))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        jointscl::Error::from(e).into()
    }
}

pub fn command() -> clap::Command {
    let mut cmd = Cli::command();
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    cmd
}

/// Effective values of every flag of the chosen subcommand, keyed by long
/// name (positionals by id), as strings.
fn recorded_args(cmd: &clap::Command, matches: &clap::ArgMatches) -> (String, BTreeMap<String, String>) {
    let (name, sub_m) = matches.subcommand().expect("subcommand is required");
    let sub = cmd.find_subcommand(name).expect("parsed subcommand exists");
    let mut out = BTreeMap::new();
    for arg in sub.get_arguments() {
        let id = arg.get_id().as_str();
        if arg.is_global_set() || id == "help" || id == "version" {
            continue;
        }
        let Some(raw) = sub_m.get_raw(id) else { continue };
        let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        let key = arg.get_long().map_or_else(|| id.to_string(), str::to_string);
        out.insert(key, vals.join(","));
    }
    (name.to_string(), out)
}

/// Rebuilds an argument vector from a recorded subcommand and its values.
pub fn replay_argv(command_name: &str, config: &BTreeMap<String, String>) -> Result<Vec<OsString>, CliError> {
    let cmd = command();
    let sub = cmd
        .find_subcommand(command_name)
        .ok_or_else(|| CliError::usage(format!("manifest names unknown command `{command_name}`")))?;
    let mut argv = vec![OsString::from("jointscl"), OsString::from(command_name)];
    let mut positionals = Vec::new();
    for arg in sub.get_arguments() {
        let id = arg.get_id().as_str();
        let Some(value) = config.get(arg.get_long().unwrap_or(id)) else { continue };
        match (arg.get_long(), arg.get_action()) {
            (Some(long), ArgAction::SetTrue) => {
                if value == "true" {
                    argv.push(format!("--{long}").into());
                }
            }
            (Some(long), _) => {
                argv.push(format!("--{long}").into());
                argv.push(value.into());
            }
            (None, _) => positionals.push((arg.get_index().unwrap_or(0), value.clone())),
        }
    }
    positionals.sort();
    argv.extend(positionals.into_iter().map(|(_, v)| OsString::from(v)));
    Ok(argv)
}

fn init_logging(level: &str) {
    let filter = level.parse().unwrap_or(log::LevelFilter::Warn);
    let _ = env_logger::Builder::new().filter_level(filter).format_timestamp(None).try_init();
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cmd = command();
    let argv = config::expand(argv, &cmd)?;
    let matches = match cmd.clone().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let msg = first.strip_prefix("error: ").unwrap_or(first);
            return Err(CliError::usage(msg.to_string()));
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::usage(e.to_string()))?;
    init_logging(&cli.log_level);
    let (name, recorded) = recorded_args(&cmd, &matches);
    commands::dispatch(cli.command, &name, recorded)
}
