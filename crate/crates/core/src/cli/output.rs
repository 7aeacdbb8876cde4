use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Shortest representation that parses back to the same `f64`. Positional for
/// moderate magnitudes, scientific otherwise.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if x == 0.0 {
        return "0".into();
    }
    if (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Content hash in git's object format: `sha256("blob <len>\0" + content)`.
pub fn config_hash(content: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// CSV table with a fixed header; cells are pre-formatted strings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_floats(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|&v| fmt_f64(v)).collect());
    }

    /// Prefix every row with the sweep columns.
    pub fn with_sweep(self, param: &str, value: f64) -> Self {
        let mut header = vec!["sweep_param".to_string(), "sweep_value".to_string()];
        header.extend(self.header);
        let rows = self
            .rows
            .into_iter()
            .map(|r| {
                let mut row = vec![param.to_string(), fmt_f64(value)];
                row.extend(r);
                row
            })
            .collect();
        Table { header, rows }
    }

    /// Concatenate tables sharing a header.
    pub fn concat(tables: Vec<Table>) -> Table {
        let mut it = tables.into_iter();
        let Some(mut first) = it.next() else { return Table::default() };
        for t in it {
            first.rows.extend(t.rows);
        }
        first
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
        w.write_record(&self.header).map_err(csv_io)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> crate::error::Error {
    std::io::Error::other(e.to_string()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Checks {
    pub trace_drift: f64,
    pub leakage: f64,
    pub converged: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Checks { trace_drift: 0.0, leakage: 0.0, converged: true }
    }
}

impl Checks {
    pub fn merge(self, o: Checks) -> Checks {
        Checks {
            trace_drift: self.trace_drift.max(o.trace_drift),
            leakage: self.leakage.max(o.leakage),
            converged: self.converged && o.converged,
        }
    }
}

#[derive(Serialize)]
pub struct Summary<'a, P: Serialize, R: Serialize> {
    pub command: &'a str,
    pub config_hash: String,
    pub params: &'a P,
    pub results: R,
    pub checks: Checks,
    pub runtime_s: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| std::io::Error::other(e.to_string()))?;
    fs::write(path, s + "\n")?;
    Ok(())
}
