//! CSV and JSON writers with fixed number formatting.

use shearwave::{Error, Result};
use std::path::Path;

/// Format like C's `%.17g`.
pub fn g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let e: i32 = exp.parse().unwrap();
    if !(-4..17).contains(&e) {
        let mant = trim_zeros(mant);
        let sign = if e < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", e.abs())
    } else {
        let decimals = (16 - e).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// In-memory CSV table with a schema line.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(schema: &str, columns: &[&str]) -> Self {
        let mut buf = format!("# schema: {schema} v1\n");
        buf.push_str(&columns.join(","));
        buf.push('\n');
        Self { buf }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let mut first = true;
        for c in cells {
            if !first {
                self.buf.push(',');
            }
            first = false;
            match c {
                Cell::F(v) => self.buf.push_str(&g17(*v)),
                Cell::S(s) => self.buf.push_str(s),
            }
        }
        self.buf.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.buf).map_err(|e| Error::InvalidSpec(format!("cannot write {}: {e}", path.display())))
    }
}

pub enum Cell {
    F(f64),
    S(String),
}

pub fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Numerical(e.to_string()))?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::InvalidSpec(format!("cannot write {}: {e}", path.display())))
}

/// JSON number, or null when not finite.
pub fn num(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map(serde_json::Value::Number).unwrap_or(serde_json::Value::Null)
}
