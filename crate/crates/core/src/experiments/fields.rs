use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::table::{Metadata, OutputFormat};
use crate::error::{Error, Result};
use crate::grid::{DiscreteDensity, SpatialGrid};

/// Named numeric columns with one row per record, e.g. per grid cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldTable {
    pub metadata: Metadata,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FieldTable {
    /// Columns `cell, x1[, x2]` followed by one probability column per density.
    pub fn cells(metadata: Metadata, grid: &SpatialGrid, named: &[(&str, &DiscreteDensity)]) -> Result<Self> {
        for (_, d) in named {
            d.ensure_grid(grid)?;
        }
        let mut columns = vec!["cell".to_string(), "x1".to_string()];
        if grid.dim() == 2 {
            columns.push("x2".to_string());
        }
        columns.extend(named.iter().map(|(n, _)| n.to_string()));
        let rows = (0..grid.len())
            .map(|c| {
                let x = grid.midpoint(c);
                let mut row = vec![c as f64];
                row.extend_from_slice(&x[..grid.dim()]);
                row.extend(named.iter().map(|(_, d)| d.probs()[c]));
                row
            })
            .collect();
        Ok(Self { metadata, columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata.0 {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut table = FieldTable::default();
        let mut header = false;
        for (idx, line) in text.lines().enumerate() {
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta
                    .trim_start()
                    .split_once(": ")
                    .ok_or_else(|| Error::Parse(format!("line {}: bad metadata", idx + 1)))?;
                table.metadata.push(k, v);
            } else if line.trim().is_empty() {
                continue;
            } else if !header {
                table.columns = line.split(',').map(|s| s.trim().to_string()).collect();
                header = true;
            } else {
                let row = line
                    .split(',')
                    .map(|f| f.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
                if row.len() != table.columns.len() {
                    return Err(Error::Parse(format!("line {}: wrong field count", idx + 1)));
                }
                table.rows.push(row);
            }
        }
        if !header {
            return Err(Error::Parse("missing header".into()));
        }
        Ok(table)
    }

    pub fn to_pretty(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata.0 {
            let _ = writeln!(out, "{k:>24}  {v}");
        }
        out.push('\n');
        for c in &self.columns {
            let _ = write!(out, "{c:>14}");
        }
        out.push('\n');
        for row in &self.rows {
            for x in row {
                if x.fract() == 0.0 && x.abs() < 1e9 {
                    let _ = write!(out, "{:>14}", *x as i64);
                } else {
                    let _ = write!(out, "{x:>14.6e}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => serde_json::to_string_pretty(self).expect("table serializes"),
            OutputFormat::Pretty => self.to_pretty(),
        }
    }
}
