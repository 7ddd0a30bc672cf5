//! `cm.toml`: flag presets per subcommand.
//!
//! ```toml
//! seed = 7                # any subcommand with a --seed flag
//!
//! [lda]
//! k = 12
//! iterations = 2000
//!
//! [topics.show]
//! lambda = 0.6
//! ```
//!
//! Presets are turned into flags placed right after the subcommand path, so
//! they go through the same parser as typed flags. A flag given on the command
//! line wins over its preset.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Command};

/// The `--config` value from raw arguments, else `CM_CONFIG`, else
/// `./cm.toml` when it exists.
pub fn locate(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    if let Some(p) = std::env::var_os("CM_CONFIG") {
        return Some(PathBuf::from(p));
    }
    let local = Path::new("cm.toml");
    local.exists().then(|| local.to_path_buf())
}

pub fn load(path: &Path) -> Result<toml::Table, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.parse::<toml::Table>().map_err(|e| format!("{}: {e}", path.display()))
}

fn takes_value(cmd: &Command, token: &str) -> bool {
    let Some(long) = token.strip_prefix("--") else {
        return false;
    };
    if long.contains('=') {
        return false;
    }
    cmd.get_arguments()
        .find(|a| a.get_long() == Some(long))
        .is_some_and(|a| matches!(a.get_action(), ArgAction::Set | ArgAction::Append))
}

/// Inserts preset flags from `config` into `argv`. Returns the new argument
/// list and warnings about keys no flag matches.
pub fn apply(root: &Command, argv: Vec<OsString>, config: &toml::Table) -> (Vec<OsString>, Vec<String>) {
    let mut cmd = root.clone();
    cmd.build();
    let mut path: Vec<String> = Vec::new();
    let mut insert_at = 1;
    let mut i = 1;
    while i < argv.len() {
        let tok = argv[i].to_string_lossy().into_owned();
        if tok == "--" {
            break;
        }
        if tok.starts_with('-') {
            i += if takes_value(&cmd, &tok) || (tok == "--config") { 2 } else { 1 };
            continue;
        }
        match cmd.find_subcommand(&tok).cloned() {
            Some(sub) => {
                path.push(tok);
                cmd = sub;
                insert_at = i + 1;
                i += 1;
            }
            None => break,
        }
    }
    if path.is_empty() {
        return (argv, Vec::new());
    }

    let mut warnings = Vec::new();
    // top-level scalars apply wherever a flag matches; tables are exact
    let mut presets: Vec<(String, toml::Value, bool)> = config
        .iter()
        .filter(|(_, v)| !v.is_table())
        .map(|(k, v)| (k.clone(), v.clone(), false))
        .collect();
    let mut table = Some(config);
    for seg in &path {
        table = table.and_then(|t| t.get(seg)).and_then(|v| v.as_table());
    }
    if let Some(t) = table {
        for (k, v) in t.iter().filter(|(_, v)| !v.is_table()) {
            presets.retain(|(pk, _, _)| pk != k);
            presets.push((k.clone(), v.clone(), true));
        }
    }

    let typed: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut injected: Vec<OsString> = Vec::new();
    for (key, value, explicit) in presets {
        let long = key.replace('_', "-");
        let Some(arg) = cmd.get_arguments().find(|a| a.get_long() == Some(long.as_str())) else {
            if explicit {
                warnings.push(format!("cm.toml: [{}] has no flag --{long}", path.join(".")));
            }
            continue;
        };
        let flag = format!("--{long}");
        if typed.iter().any(|t| *t == flag || t.starts_with(&format!("{flag}="))) {
            continue;
        }
        let is_switch = matches!(arg.get_action(), ArgAction::SetTrue);
        let values: Vec<toml::Value> = match value {
            toml::Value::Array(items) => items,
            v => vec![v],
        };
        for v in values {
            match (&v, is_switch) {
                (toml::Value::Boolean(true), true) => injected.push(flag.clone().into()),
                (toml::Value::Boolean(false), true) => {}
                (toml::Value::String(s), _) => {
                    injected.push(flag.clone().into());
                    injected.push(s.into());
                }
                (other, _) => {
                    injected.push(flag.clone().into());
                    injected.push(other.to_string().into());
                }
            }
        }
    }
    let mut out = argv;
    let tail = out.split_off(insert_at);
    out.extend(injected);
    out.extend(tail);
    (out, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::{Arg, ArgAction};

    fn cmd() -> Command {
        Command::new("cm")
            .arg(Arg::new("json").long("json").action(ArgAction::SetTrue).global(true))
            .subcommand(
                Command::new("lda")
                    .arg(Arg::new("k").long("k"))
                    .arg(Arg::new("seed").long("seed"))
                    .arg(Arg::new("corpus").long("corpus")),
            )
            .subcommand(
                Command::new("topics").subcommand(
                    Command::new("show")
                        .arg(Arg::new("lambda").long("lambda"))
                        .arg(Arg::new("model").long("model")),
                ),
            )
    }

    fn args(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    fn strs(v: Vec<OsString>) -> Vec<String> {
        v.into_iter().map(|s| s.into_string().unwrap()).collect()
    }

    #[test]
    fn presets_follow_the_subcommand_path() {
        let cfg: toml::Table = "seed = 7\n[lda]\nk = 3\n[topics.show]\nlambda = 0.6\n".parse().unwrap();
        let (out, warnings) = apply(&cmd(), args(&["cm", "lda", "--corpus", "c.json"]), &cfg);
        assert_eq!(strs(out), ["cm", "lda", "--seed", "7", "--k", "3", "--corpus", "c.json"]);
        assert!(warnings.is_empty());
        let (out, _) = apply(&cmd(), args(&["cm", "--json", "topics", "show"]), &cfg);
        assert_eq!(strs(out), ["cm", "--json", "topics", "show", "--lambda", "0.6"]);
    }

    #[test]
    fn typed_flags_win() {
        let cfg: toml::Table = "[lda]\nk = 3\nseed = 1\n".parse().unwrap();
        let (out, _) = apply(&cmd(), args(&["cm", "lda", "--k=9", "--seed", "2"]), &cfg);
        assert_eq!(strs(out), ["cm", "lda", "--k=9", "--seed", "2"]);
    }

    #[test]
    fn unknown_table_keys_warn() {
        let cfg: toml::Table = "[lda]\nsweeps = 3\n".parse().unwrap();
        let (out, warnings) = apply(&cmd(), args(&["cm", "lda"]), &cfg);
        assert_eq!(strs(out), ["cm", "lda"]);
        assert_eq!(warnings.len(), 1);
    }
}
