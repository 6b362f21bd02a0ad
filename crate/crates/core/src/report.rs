//! Number formatting and table export shared by reports.
//!
//! Every float leaves the crate rounded to 12 significant digits so reruns are
//! byte-identical across thread counts.

use serde_json::Value;

/// `x` with 12 significant digits, scientific notation. Non-finite values are
/// written `inf`, `-inf` and `nan`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.11e}")
    }
}

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    fmt_f64(x).parse().expect("formatted float parses")
}

/// JSON value for a float: a rounded number, or a string for non-finite values.
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        serde_json::Number::from_f64(round12(x)).map(Value::Number).unwrap_or(Value::Null)
    } else {
        Value::String(fmt_f64(x))
    }
}

/// Round every float inside a JSON value.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => json_f64(n.as_f64().unwrap()),
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_json).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, x)| (k, round_json(x))).collect()),
        other => other,
    }
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| escape(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Floats joined with `;` for a single CSV cell.
pub fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(";")
}
