use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "alpha,N,e_l1,e_l2,e_w,rate_l1,rate_l2,rate_w";

/// Output encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Pretty,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "pretty" => Ok(OutputFormat::Pretty),
            other => Err(Error::Parse(format!("unknown format '{other}'"))),
        }
    }
}

/// Errors of one coarse run against the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub alpha: f64,
    pub steps: usize,
    pub e_l1: f64,
    pub e_l2: f64,
    pub e_w: f64,
}

/// Fitted rates for one `alpha`; `None` when there is nothing to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub alpha: f64,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub w: Option<f64>,
}

/// Ordered `key = value` pairs describing how a table was produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata(pub Vec<(String, String)>);

impl Metadata {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub metadata: Metadata,
    pub rows: Vec<ErrorRow>,
    pub rates: Vec<RateRow>,
}

fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad number '{field}'")))
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(field, line).map(Some)
    }
}

impl ErrorTable {
    pub fn rate(&self, alpha: f64) -> Option<&RateRow> {
        self.rates.iter().find(|r| r.alpha == alpha)
    }

    pub fn rows_for(&self, alpha: f64) -> impl Iterator<Item = &ErrorRow> {
        self.rows.iter().filter(move |r| r.alpha == alpha)
    }

    /// Metadata as `# key: value` lines, then the header and one row per run.
    /// Rates repeat on every row of their `alpha`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata.0 {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let rate = self.rate(row.alpha);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                row.alpha,
                row.steps,
                fmt_f64(row.e_l1),
                fmt_f64(row.e_l2),
                fmt_f64(row.e_w),
                fmt_opt(rate.and_then(|r| r.l1)),
                fmt_opt(rate.and_then(|r| r.l2)),
                fmt_opt(rate.and_then(|r| r.w)),
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut table = ErrorTable::default();
        let mut header_seen = false;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta
                    .trim_start()
                    .split_once(": ")
                    .ok_or_else(|| Error::Parse(format!("line {lineno}: bad metadata")))?;
                table.metadata.push(k, v);
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if !header_seen {
                if line.trim() != CSV_HEADER {
                    return Err(Error::Parse(format!("line {lineno}: unexpected header")));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(Error::Parse(format!("line {lineno}: expected 8 fields")));
            }
            let alpha = parse_f64(fields[0], lineno)?;
            let steps = fields[1]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {lineno}: bad N '{}'", fields[1])))?;
            table.rows.push(ErrorRow {
                alpha,
                steps,
                e_l1: parse_f64(fields[2], lineno)?,
                e_l2: parse_f64(fields[3], lineno)?,
                e_w: parse_f64(fields[4], lineno)?,
            });
            let rate = RateRow {
                alpha,
                l1: parse_opt(fields[5], lineno)?,
                l2: parse_opt(fields[6], lineno)?,
                w: parse_opt(fields[7], lineno)?,
            };
            match table.rate(alpha) {
                Some(existing) if *existing != rate => {
                    return Err(Error::Parse(format!("line {lineno}: rates differ within alpha {alpha}")));
                }
                Some(_) => {}
                None => table.rates.push(rate),
            }
        }
        if !header_seen {
            return Err(Error::Parse("missing header".into()));
        }
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// One block per `alpha`, one line per metric, columns by `N`.
    pub fn to_pretty(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata.0 {
            let _ = writeln!(out, "{k:>16}  {v}");
        }
        for rate in &self.rates {
            let rows: Vec<&ErrorRow> = self.rows_for(rate.alpha).collect();
            let _ = writeln!(out, "\nalpha = {}", rate.alpha);
            let _ = write!(out, "{:>6}", "N");
            for r in &rows {
                let _ = write!(out, "{:>12}", r.steps);
            }
            let _ = writeln!(out, "{:>8}", "rate");
            let lines: [(&str, fn(&ErrorRow) -> f64, Option<f64>); 3] = [
                ("L1", |r| r.e_l1, rate.l1),
                ("L2", |r| r.e_l2, rate.l2),
                ("W", |r| r.e_w, rate.w),
            ];
            for (name, get, fitted) in lines {
                let _ = write!(out, "{name:>6}");
                for r in &rows {
                    let _ = write!(out, "{:>12.3e}", get(r));
                }
                match fitted {
                    Some(v) => {
                        let _ = writeln!(out, "{v:>8.2}");
                    }
                    None => {
                        let _ = writeln!(out, "{:>8}", "-");
                    }
                }
            }
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
            OutputFormat::Pretty => self.to_pretty(),
        }
    }
}
