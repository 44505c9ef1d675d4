//! Columnar text results format shared by every subcommand: `# key = value`
//! metadata lines, one `# cols:` line naming the columns, then one
//! space-separated row per record with full-precision floats. Output is
//! deterministic: identical tables render to identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{HomogError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Ordered metadata, rendered as `# key = value`.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table {
            meta: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Table {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            writeln!(out, "# {k} = {v}").unwrap();
        }
        writeln!(out, "# cols: {}", self.columns.join(" ")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{}", cells.join(" ")).unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Table> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Table> {
        let mut meta = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(cols) = rest.strip_prefix("cols:") {
                    columns = Some(cols.split_whitespace().map(str::to_string).collect());
                } else if let Some((k, v)) = rest.split_once('=') {
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|c| {
                    c.parse::<f64>().map_err(|e| {
                        HomogError::InvalidConfig(format!("line {}: bad number {c:?}: {e}", ln + 1))
                    })
                })
                .collect::<Result<_>>()?;
            if let Some(cols) = &columns {
                if row.len() != cols.len() {
                    return Err(HomogError::InvalidConfig(format!(
                        "line {}: expected {} columns, found {}",
                        ln + 1,
                        cols.len(),
                        row.len()
                    )));
                }
            }
            rows.push(row);
        }
        let columns = columns
            .ok_or_else(|| HomogError::InvalidConfig("missing '# cols:' line".into()))?;
        Ok(Table { meta, columns, rows })
    }
}

/// Structured key/value summary record written once per run.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    pub entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Summary {
        Summary::default()
    }

    pub fn put(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["xi", "hat_a", "residual"])
            .with_meta("d", 1)
            .with_meta("family", "linear");
        t.push_row(vec![-1.0, -1.5, 1e-14]);
        t.push_row(vec![0.5, 0.75, 2e-13]);
        t
    }

    #[test]
    fn roundtrip_preserves_everything() {
        let t = sample();
        let parsed = Table::parse(&t.render()).unwrap();
        assert_eq!(t, parsed);
    }

    #[test]
    fn render_is_deterministic() {
        assert_eq!(sample().render(), sample().render());
        let r = sample().render();
        assert!(r.starts_with("# d = 1\n# family = linear\n# cols: xi hat_a residual\n"));
    }

    #[test]
    fn full_precision_roundtrip() {
        let mut t = Table::new(&["v"]);
        let vals = [std::f64::consts::PI, 1.0 / 3.0, 6.02e23, -1.6e-19, 0.0];
        for v in vals {
            t.push_row(vec![v]);
        }
        let parsed = Table::parse(&t.render()).unwrap();
        for (row, v) in parsed.rows.iter().zip(vals) {
            assert_eq!(row[0], v, "bit-exact float roundtrip");
        }
    }

    #[test]
    fn malformed_inputs_rejected() {
        assert!(Table::parse("1.0 2.0\n").is_err(), "no cols line");
        assert!(Table::parse("# cols: a b\n1.0\n").is_err(), "width mismatch");
        assert!(Table::parse("# cols: a\nnot-a-number\n").is_err());
    }

    #[test]
    fn summary_renders_in_order() {
        let mut s = Summary::new();
        s.put("verdict", "pass");
        s.put("fitted_c", 1.0);
        assert_eq!(s.render(), "verdict = pass\nfitted_c = 1\n");
    }
}
