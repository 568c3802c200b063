//! `--config file.json`: an object keyed by long flag names. Its entries
//! are appended to the command line unless the flag is already present.
//! `true` becomes a bare switch, `false` and `null` are skipped, arrays are
//! joined with commas.

use serde_json::Value;

fn config_path(argv: &[String]) -> Option<(usize, String)> {
    argv.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            argv.get(i + 1).map(|p| (i, p.clone()))
        } else {
            a.strip_prefix("--config=").map(|p| (i, p.to_string()))
        }
    })
}

fn scalar(v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(format!("unsupported config value {other}")),
    }
}

pub fn merge(mut argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some((_, path)) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let Value::Object(map) = serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))? else {
        return Err(format!("{path}: expected a JSON object"));
    };
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let present = argv.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if present {
            continue;
        }
        match value {
            Value::Bool(true) => argv.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                argv.push(flag);
                argv.push(parts.join(","));
            }
            v => {
                argv.push(flag);
                argv.push(scalar(&v)?);
            }
        }
    }
    Ok(argv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_line_wins() {
        let dir = std::env::temp_dir().join(format!("di-toolkit-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("c.json");
        std::fs::write(&p, r#"{"n": 5, "gamma": 0.5, "block": true, "values": [1, 2]}"#).unwrap();
        let argv: Vec<String> = ["prog", "mu-opt", "--config", p.to_str().unwrap(), "--n", "7"].iter().map(|s| s.to_string()).collect();
        let out = merge(argv).unwrap();
        assert_eq!(out.iter().filter(|a| *a == "--n").count(), 1);
        assert!(out.windows(2).any(|w| w[0] == "--n" && w[1] == "7"));
        assert!(out.windows(2).any(|w| w[0] == "--gamma" && w[1] == "0.5"));
        assert!(out.contains(&"--block".to_string()));
        assert!(out.windows(2).any(|w| w[0] == "--values" && w[1] == "1,2"));
    }
}
