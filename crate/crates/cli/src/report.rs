//! Run reports with a byte-stable JSON and CSV encoding.

use std::fmt::Write as _;

use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail | Verdict::Inconclusive => 1,
        }
    }

    pub fn from_check(deviation: f64, tol: f64) -> Self {
        if !deviation.is_finite() {
            Verdict::Inconclusive
        } else if deviation <= tol {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub setup: Map<String, Value>,
    pub rows: Vec<(f64, f64)>,
    pub verdict: Verdict,
    pub max_deviation: Option<f64>,
    pub target: Option<f64>,
    pub branch: Option<String>,
    /// Command-specific summary fields.
    pub extra: Map<String, Value>,
}

impl RunReport {
    pub fn new(setup: Map<String, Value>, rows: Vec<(f64, f64)>, verdict: Verdict) -> Self {
        RunReport {
            setup,
            rows,
            verdict,
            max_deviation: None,
            target: None,
            branch: None,
            extra: Map::new(),
        }
    }

    pub fn deviation(mut self, d: f64) -> Self {
        self.max_deviation = Some(d);
        self
    }

    pub fn target(mut self, t: Option<f64>) -> Self {
        self.target = t;
        self
    }

    pub fn branch(mut self, b: Option<impl Into<String>>) -> Self {
        self.branch = b.map(Into::into);
        self
    }

    pub fn extra(mut self, key: &str, v: Value) -> Self {
        self.extra.insert(key.into(), v);
        self
    }

    /// The report tree with floats rounded; `wall` is added only when given.
    pub fn to_value(&self, wall: Option<f64>) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|&(p, v)| {
                let mut row = Map::new();
                row.insert("point".into(), num(p));
                row.insert("value".into(), num(v));
                Value::Object(row)
            })
            .collect();
        let mut summary = self.extra.clone();
        summary.insert("verdict".into(), self.verdict.label().into());
        summary.insert("max_deviation".into(), self.max_deviation.map_or(Value::Null, num));
        summary.insert("target".into(), self.target.map_or(Value::Null, num));
        summary.insert("branch".into(), self.branch.clone().map_or(Value::Null, Value::String));
        if let Some(w) = wall {
            summary.insert("wall_time_s".into(), num(w));
        }
        let mut root = Map::new();
        root.insert("schema_version".into(), SCHEMA_VERSION.into());
        root.insert("setup".into(), Value::Object(self.setup.clone()));
        root.insert("rows".into(), Value::Array(rows));
        root.insert("summary".into(), Value::Object(summary));
        let mut root = Value::Object(root);
        round_tree(&mut root);
        root
    }

    pub fn to_json(&self, wall: Option<f64>) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value(wall)).expect("report is plain data");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("point,value\n");
        for &(p, v) in &self.rows {
            writeln!(out, "{},{}", fmt_float(p), fmt_float(v)).unwrap();
        }
        out
    }
}

/// Rounds to 15 significant digits.
pub fn round15(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.14e}").parse().unwrap_or(x)
    } else {
        x
    }
}

/// A JSON number rounded to 15 significant digits; non-finite values become null.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(round15(x)).map_or(Value::Null, Value::Number)
}

/// Rounds every float in a JSON tree, leaving integers alone.
fn round_tree(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => *v = num(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(items) => items.iter_mut().for_each(round_tree),
        Value::Object(map) => map.values_mut().for_each(round_tree),
        _ => {}
    }
}

fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        round15(x).to_string()
    } else {
        String::new()
    }
}

/// The machine-readable error object.
pub fn error_json(kind: &str, message: &str) -> String {
    let mut err = Map::new();
    err.insert("kind".into(), kind.into());
    err.insert("message".into(), message.into());
    let mut root = Map::new();
    root.insert("schema_version".into(), SCHEMA_VERSION.into());
    root.insert("error".into(), Value::Object(err));
    let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("error is plain data");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_fifteen_digits() {
        assert_eq!(round15(20.0 / 9.0).to_string(), "2.22222222222222");
        assert_eq!(round15(0.1 + 0.2).to_string(), "0.3");
        assert_eq!(num(f64::NAN), Value::Null);
    }

    #[test]
    fn keys_come_out_sorted() {
        let r = RunReport::new(Map::new(), vec![(0.0, 1.0)], Verdict::Pass).extra("alpha", 1.into());
        let s = r.to_json(None);
        let order: Vec<usize> = ["\"rows\"", "\"schema_version\"", "\"setup\"", "\"summary\""]
            .iter()
            .map(|k| s.find(k).unwrap())
            .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
        assert!(s.find("\"alpha\"").unwrap() < s.find("\"verdict\"").unwrap());
    }
}
