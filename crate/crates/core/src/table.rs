//! Sweep output tables: `#`-prefixed `key=value` metadata lines, a column
//! header row, then data rows with 17 significant digits.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits (round-trips exactly).
/// Negative zero prints as zero.
pub fn fmt_f64(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    command: String,
    metadata: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl SweepTable {
    /// The first column is the sweep parameter.
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            metadata: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get_meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Parse(format!("row has {} values for {} columns", row.len(), self.columns.len())));
        }
        if let Some((i, v)) = row.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Parse(format!("non-finite value {v} in column {}", self.columns[i])));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Stable sort by the sweep parameter.
    pub fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Replaces column `name` by its values divided by the column maximum.
    pub fn normalized_column(&self, name: &str) -> Option<Vec<f64>> {
        let col = self.column(name)?;
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some(col.iter().map(|v| if max > 0.0 { v / max } else { 0.0 }).collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# command={}", self.command)?;
        for (k, v) in &self.metadata {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("table output is ASCII")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut command = None;
        let mut metadata = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for line in r.lines() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            let line = line.trim_end();
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta
                    .trim_start()
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("metadata line without '=': {line:?}")))?;
                if k == "command" {
                    command = Some(v.to_string());
                } else {
                    metadata.push((k.to_string(), v.to_string()));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            match &columns {
                None => columns = Some(line.split(',').map(str::to_string).collect()),
                Some(cols) => {
                    let row: Vec<f64> = line
                        .split(',')
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::Parse(format!("{e} in row {line:?}")))?;
                    if row.len() != cols.len() {
                        return Err(Error::Parse(format!("row {line:?} does not match header")));
                    }
                    rows.push(row);
                }
            }
        }
        Ok(Self {
            command: command.ok_or_else(|| Error::Parse("missing command metadata".into()))?,
            metadata,
            columns: columns.ok_or_else(|| Error::Parse("missing column header".into()))?,
            rows,
        })
    }
}
