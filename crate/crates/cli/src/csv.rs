use serde_json::Value;

/// `key,value` rows for every scalar leaf, keys joined with dots.
pub fn flatten(v: &Value) -> String {
    let mut out = String::from("key,value\n");
    walk(v, String::new(), &mut out);
    out
}

fn walk(v: &Value, prefix: String, out: &mut String) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                walk(x, join(k), out);
            }
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                walk(x, join(&i.to_string()), out);
            }
        }
        Value::String(s) => out.push_str(&format!("{prefix},{}\n", quote(s))),
        other => out.push_str(&format!("{prefix},{other}\n")),
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_paths() {
        let v: Value = serde_json::from_str(r#"{"a":{"b":[1,2]},"c":"x,y"}"#).unwrap();
        assert_eq!(flatten(&v), "key,value\na.b.0,1\na.b.1,2\nc,\"x,y\"\n");
    }
}
