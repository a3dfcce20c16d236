//! Trajectory CSV: `t, v1, omega, phi_1..phi_N, x, y, psi, energy, residual_max, k`,
//! every value with 17 significant digits so re-reading is bit-exact.

use std::fmt::Write as _;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CsvError {
    #[error("empty file")]
    Empty,
    #[error("unexpected header: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
}

pub fn header(links: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["t", "v1", "omega"].iter().map(|s| s.to_string()).collect();
    cols.extend((1..=links).map(|i| format!("phi_{i}")));
    cols.extend(["x", "y", "psi", "energy", "residual_max", "k"].iter().map(|s| s.to_string()));
    cols
}

pub fn column_count(links: usize) -> usize {
    links + 9
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub links: usize,
    pub rows: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn new(links: usize) -> Self {
        Self { links, rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = header(self.links).iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = header(self.links).join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CsvError> {
        let mut lines = text.lines();
        let head = lines.next().ok_or(CsvError::Empty)?;
        let cols: Vec<&str> = head.split(',').map(str::trim).collect();
        let links = cols
            .len()
            .checked_sub(9)
            .ok_or_else(|| CsvError::Header(head.to_string()))?;
        if cols != header(links) {
            return Err(CsvError::Header(head.to_string()));
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| CsvError::Row { line: k + 2, message: e.to_string() })?;
            if row.len() != cols.len() {
                return Err(CsvError::Row {
                    line: k + 2,
                    message: format!("{} fields, expected {}", row.len(), cols.len()),
                });
            }
            rows.push(row);
        }
        Ok(Self { links, rows })
    }
}
