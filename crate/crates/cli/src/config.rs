//! `--config FILE`: a JSON object whose keys mirror the long flags
//! (underscores or dashes), plus `"command"` naming the subcommand. Flags
//! given on the command line win over the file.

use std::ffi::OsString;
use std::path::Path;

use qoutlier::{Error, Result};
use serde_json::Value;

const SUBCOMMANDS: [&str; 6] = [
    "haar-sample",
    "verify-moments",
    "cover",
    "witness",
    "schumacher-demo",
    "deficiency",
];

/// Splices a config file's flags into `argv`, right after the subcommand.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.into_iter();
    let prog = it.next().unwrap_or_else(|| "qoutlier".into());
    while let Some(arg) = it.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            config = it.next();
        } else if let Some(path) = text.strip_prefix("--config=") {
            config = Some(path.into());
        } else {
            rest.push(arg);
        }
    }
    let Some(config) = config else {
        let mut out = vec![prog];
        out.extend(rest);
        return Ok(out);
    };

    let text = std::fs::read_to_string(Path::new(&config))?;
    let v: Value = serde_json::from_str(&text)?;
    let Value::Object(map) = v else {
        return Err(Error::Format("config file must hold a JSON object".into()));
    };

    let cli_command = rest
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()));
    let file_command = map.get("command").and_then(Value::as_str);
    let command: OsString = match (cli_command, file_command) {
        (Some(i), Some(f)) if rest[i] != f => {
            return Err(Error::Contract(format!(
                "config names \"{f}\" but the command line runs {:?}",
                rest[i]
            )))
        }
        (Some(i), _) => rest.remove(i),
        (None, Some(f)) => f.into(),
        (None, None) => {
            return Err(Error::Format(
                "no subcommand given on the command line or in the config".into(),
            ))
        }
    };

    let mut out = vec![prog, command];
    for (key, value) in &map {
        if key == "command" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::String(s) => {
                out.push(flag.into());
                out.push(s.into());
            }
            Value::Number(n) => {
                out.push(flag.into());
                out.push(n.to_string().into());
            }
            _ => {
                return Err(Error::Format(format!(
                    "config key \"{key}\" must be a scalar"
                )))
            }
        }
    }
    out.extend(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(xs: &[&str]) -> Vec<OsString> {
        xs.iter().map(OsString::from).collect()
    }

    #[test]
    fn no_config_is_identity() {
        let a = args(&["q", "haar-sample", "--qubits", "2"]);
        assert_eq!(expand(a.clone()).unwrap(), a);
    }

    #[test]
    fn file_flags_precede_command_line_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"command":"haar-sample","qubits":2,"count":3,"seed":5,"output_dir":"x"}"#,
        )
        .unwrap();
        let got = expand(args(&[
            "q",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "9",
        ]))
        .unwrap();
        assert_eq!(
            got,
            args(&[
                "q",
                "haar-sample",
                "--count",
                "3",
                "--output-dir",
                "x",
                "--qubits",
                "2",
                "--seed",
                "5",
                "--seed",
                "9"
            ])
        );
    }

    #[test]
    fn conflicting_command_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"command":"cover"}"#).unwrap();
        let arg = format!("--config={}", path.display());
        assert!(matches!(
            expand(args(&["q", "witness", &arg])),
            Err(Error::Contract(_))
        ));
    }
}
