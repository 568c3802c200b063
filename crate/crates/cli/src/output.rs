//! Rendering of results: JSON with numbers rounded to 9 significant digits,
//! and CSV with fixed headers.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

/// `x` rounded to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// Shortest text for `x` after rounding to 9 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    round_sig(x).to_string()
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => {
            if let Some(f) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(f)) {
                    *n = r;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn json<T: Serialize>(v: &T) -> String {
    let mut v = serde_json::to_value(v).expect("results serialise");
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("value serialises");
    s.push('\n');
    s
}

/// CSV text with `header` and string rows.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

/// Writes everything at once to `path` or stdout.
pub fn emit(text: &str, path: Option<&Path>) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}
