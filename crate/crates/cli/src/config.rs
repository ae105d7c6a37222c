use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Parse a JSON config file into an object.
pub fn read_config_file(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("config {} is not valid JSON: {e}", path.display())))?;
    if !value.is_object() {
        return Err(CliError::validation(format!("config {} must be a JSON object", path.display())));
    }
    Ok(value)
}

/// Reject keys in `overlay` that `base` does not have.
fn check_known(overlay: &Value, base: &Value, path: &str) -> CliResult<()> {
    if let (Value::Object(o), Value::Object(b)) = (overlay, base) {
        for (k, v) in o {
            let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
            match b.get(k) {
                None => return Err(CliError::validation(format!("unknown config key `{here}`"))),
                Some(bv) => check_known(v, bv, &here)?,
            }
        }
    }
    Ok(())
}

/// Recursive object merge; non-object values in `overlay` replace those in `base`.
pub fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// `defaults` overridden by the keys present in `file`.
pub fn layer<T: Serialize + DeserializeOwned>(defaults: &T, file: Option<&Value>) -> CliResult<T> {
    let Some(file) = file else {
        return serde_json::from_value(serde_json::to_value(defaults).map_err(json_err)?).map_err(json_err);
    };
    let mut base = serde_json::to_value(defaults).map_err(json_err)?;
    check_known(file, &base, "")?;
    merge(&mut base, file);
    serde_json::from_value(base).map_err(|e| CliError::validation(format!("invalid config: {e}")))
}

fn json_err(e: serde_json::Error) -> CliError {
    CliError::validation(format!("invalid config: {e}"))
}

/// Take `key` out of a config object, if present.
pub fn take_key(file: &mut Option<Value>, key: &str) -> Option<Value> {
    file.as_mut().and_then(|v| v.as_object_mut()).and_then(|o| o.remove(key))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;
    use serde_json::json;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Inner {
        a: f64,
        b: u32,
    }

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Outer {
        name: String,
        inner: Inner,
        list: Vec<u32>,
    }

    fn defaults() -> Outer {
        Outer { name: "x".into(), inner: Inner { a: 1.0, b: 2 }, list: vec![1, 2] }
    }

    #[test]
    fn file_overrides_defaults_per_key() {
        let file = json!({ "inner": { "b": 7 }, "list": [9] });
        let got = layer(&defaults(), Some(&file)).unwrap();
        assert_eq!(got, Outer { name: "x".into(), inner: Inner { a: 1.0, b: 7 }, list: vec![9] });
        assert_eq!(layer(&defaults(), None).unwrap(), defaults());
    }

    #[test]
    fn unknown_and_mistyped_keys_are_validation_errors() {
        let e = layer(&defaults(), Some(&json!({ "inner": { "c": 1 } }))).unwrap_err();
        assert!(e.message.contains("inner.c"), "{}", e.message);
        assert_eq!(e.exit_code(), 2);
        assert!(layer(&defaults(), Some(&json!({ "inner": { "b": "seven" } }))).is_err());
    }
}
