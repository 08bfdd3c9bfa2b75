//! `--config FILE`: a `key = value` file whose keys are long flag names of
//! the subcommand (`delta-t = 0.0011`). Switch flags take `true`/`false`.
//! Flags on the command line win over the file.

use std::ffi::OsString;
use std::path::Path;

use bft_blocktime::kv::KeyValues;
use clap::CommandFactory;

use crate::{Cli, CliError, Result};

pub(crate) fn read_kv(path: &Path) -> Result<KeyValues> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::io_err(path, e))?;
    KeyValues::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Turn key-value pairs into flags of `subcommand`.
pub(crate) fn flags_from_kv(subcommand: &str, kv: &KeyValues) -> Result<Vec<OsString>> {
    let cmd = Cli::command();
    let sub = cmd
        .find_subcommand(subcommand)
        .ok_or_else(|| CliError::Usage(format!("unknown command {subcommand:?}")))?;
    let mut out = Vec::new();
    for (key, value) in kv.iter() {
        if key == "config" {
            return Err(CliError::Usage(
                "a config file cannot name another config file".into(),
            ));
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key))
            .ok_or_else(|| CliError::Usage(format!("config key {key:?} is not a flag of `{subcommand}`")))?;
        if arg.get_action().takes_values() {
            out.push(OsString::from(format!("--{key}")));
            out.push(OsString::from(value));
        } else {
            match value {
                "true" => out.push(OsString::from(format!("--{key}"))),
                "false" => {}
                _ => {
                    return Err(CliError::Usage(format!(
                        "config key {key:?} is a switch; use true or false, not {value:?}"
                    )))
                }
            }
        }
    }
    Ok(out)
}

/// Insert the flags of any `--config` file right after the subcommand name,
/// ahead of the user's own flags.
pub(crate) fn merge_config(args: &[OsString]) -> Result<Vec<OsString>> {
    let Some(sub) = args.get(1).and_then(|s| s.to_str()) else {
        return Ok(args.to_vec());
    };
    if sub.starts_with('-') {
        return Ok(args.to_vec());
    }
    let mut path = None;
    let mut i = 2;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--" {
            break;
        }
        if a == "--config" {
            path = args.get(i + 1).cloned();
            i += 1;
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok(args.to_vec());
    };
    let kv = read_kv(Path::new(&path))?;
    let mut merged = args[..2].to_vec();
    merged.extend(flags_from_kv(sub, &kv)?);
    merged.extend_from_slice(&args[2..]);
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switches_and_values() {
        let kv = KeyValues::parse("validators = 175\ndelta-t = 0.0011").unwrap();
        let flags = flags_from_kv("simulate", &kv).unwrap();
        assert_eq!(
            flags,
            ["--validators", "175", "--delta-t", "0.0011"].map(OsString::from)
        );
        let kv = KeyValues::parse("insecure = true\nendpoint = http://x").unwrap();
        assert_eq!(flags_from_kv("fetch", &kv).unwrap().len(), 3);
        let kv = KeyValues::parse("insecure = yes").unwrap();
        assert!(flags_from_kv("fetch", &kv).is_err());
        let kv = KeyValues::parse("nonsense = 1").unwrap();
        assert!(matches!(flags_from_kv("simulate", &kv), Err(CliError::Usage(_))));
    }

    #[test]
    fn no_config_is_identity() {
        let args: Vec<OsString> = ["blocktime", "simulate", "--runs", "3"]
            .map(OsString::from)
            .into();
        assert_eq!(merge_config(&args).unwrap(), args);
    }
}
