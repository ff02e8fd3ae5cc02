//! `--set key=value` overrides on top of a TOML experiment file.

use toml::{Table, Value};

/// Parses `key=value`. The value is read as a TOML literal when it is one
/// (`0.1`, `[100, 200]`, `true`) and as a bare string otherwise.
pub fn parse(raw: &str) -> Result<(String, Value), String> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| format!("override `{raw}` is not of the form key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(format!("override `{raw}` has an empty key"));
    }
    let value = value.trim();
    let parsed = toml::from_str::<Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

/// Sets a dotted `key` in `doc`. Every segment must already exist, so typos
/// are reported instead of silently ignored; numeric segments index arrays.
pub fn apply(doc: &mut Table, key: &str, value: Value) -> Result<(), String> {
    let segments: Vec<&str> = key.split('.').collect();
    let unknown = || format!("unknown configuration key `{key}`");
    let (last, parents) = segments.split_last().ok_or_else(unknown)?;

    let mut node: &mut Value = doc.get_mut(parents.first().copied().unwrap_or(last)).ok_or_else(unknown)?;
    if parents.is_empty() {
        *node = coerce(node, value);
        return Ok(());
    }
    for seg in parents[1..].iter().chain(std::iter::once(last)) {
        node = match node {
            Value::Table(t) => t.get_mut(*seg).ok_or_else(unknown)?,
            Value::Array(a) => {
                let i: usize = seg.parse().map_err(|_| unknown())?;
                a.get_mut(i).ok_or_else(unknown)?
            }
            _ => return Err(unknown()),
        };
    }
    *node = coerce(node, value);
    Ok(())
}

/// Keeps floats floats when an integer literal is given (`lambda=1`).
fn coerce(old: &Value, new: Value) -> Value {
    match (old, new) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (_, new) => new,
    }
}
