//! Result tables and their CSV, JSON and SVG renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Output encoding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(CliError::Config(format!("unknown format `{other}`"))),
        }
    }
}

/// A tolerance comparison recorded alongside the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub achieved: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Rectangular table of finite values with a metadata block.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: BTreeMap<String, String>,
    pub checks: Vec<Check>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), ..Self::default() }
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<(), CliError> {
        if row.len() != self.columns.len() {
            return Err(CliError::Internal(format!("row of length {} for {} columns", row.len(), self.columns.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Numerical(fdt_core::FdtError::NonFinite("result row")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.insert(key.into(), value.to_string());
    }

    /// Records `achieved ≤ tolerance`; NaN fails.
    pub fn check(&mut self, name: impl Into<String>, achieved: f64, tolerance: f64) -> bool {
        let passed = achieved <= tolerance;
        self.checks.push(Check { name: name.into(), achieved, tolerance, passed });
        passed
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Metadata followed by one `check.<name>` entry per comparison.
    fn preamble(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self.metadata.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        for c in &self.checks {
            out.push((
                format!("check.{}", c.name),
                format!("{} achieved={:e} tolerance={:e}", if c.passed { "pass" } else { "fail" }, c.achieved, c.tolerance),
            ));
        }
        out.push(("status".into(), if self.passed() { "pass".into() } else { "fail".into() }));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.preamble() {
            let _ = writeln!(s, "# {k}={v}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    /// Parses the output of [`ResultTable::to_csv`]. Checks come back as
    /// plain metadata entries.
    pub fn from_csv(text: &str) -> Result<Self, CliError> {
        let mut metadata = BTreeMap::new();
        let mut lines = text.lines();
        let header = loop {
            match lines.next() {
                Some(l) if l.starts_with("# ") => {
                    let (k, v) = l[2..].split_once('=').ok_or_else(|| CliError::Config(format!("bad metadata line `{l}`")))?;
                    metadata.insert(k.to_string(), v.to_string());
                }
                Some(l) => break l,
                None => return Err(CliError::Config("CSV has no header row".into())),
            }
        };
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for l in lines {
            let row = l
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| CliError::Config(format!("bad cell `{c}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Self { columns, rows, metadata, checks: Vec::new() })
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        #[derive(Serialize)]
        struct Doc<'a> {
            columns: &'a [String],
            rows: &'a [Vec<f64>],
            metadata: BTreeMap<String, String>,
            checks: &'a [Check],
            status: &'static str,
        }
        let doc = Doc {
            columns: &self.columns,
            rows: &self.rows,
            metadata: self.metadata.clone(),
            checks: &self.checks,
            status: if self.passed() { "pass" } else { "fail" },
        };
        serde_json::to_string_pretty(&doc)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| CliError::Internal(e.to_string()))
    }

    /// Line chart of every column against the first.
    pub fn to_svg(&self, title: &str) -> String {
        const W: f64 = 800.0;
        const H: f64 = 500.0;
        const PAD: f64 = 60.0;
        const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        if self.columns.len() < 2 || self.rows.is_empty() {
            s.push_str("</svg>\n");
            return s;
        }
        let bounds = |vals: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x0, x1) = bounds(&mut self.rows.iter().map(|r| r[0]));
        let (y0, y1) = bounds(&mut self.rows.iter().flat_map(|r| r[1..].iter().copied()));
        let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
        let _ = writeln!(
            s,
            r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        for (v, x, y, anchor) in [
            (x0, PAD, H - PAD + 18.0, "start"),
            (x1, W - PAD, H - PAD + 18.0, "end"),
            (y0, PAD - 6.0, H - PAD, "end"),
            (y1, PAD - 6.0, PAD + 10.0, "end"),
        ] {
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{v:.4e}</text>"#
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 16.0,
            escape(&self.columns[0])
        );
        for (j, name) in self.columns.iter().enumerate().skip(1) {
            let color = COLORS[(j - 1) % COLORS.len()];
            let mut points = String::new();
            for r in &self.rows {
                let _ = write!(points, "{:.2},{:.2} ", px(r[0]), py(r[j]));
            }
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, points.trim_end());
            let ly = PAD + 16.0 * j as f64;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="12" fill="{color}" text-anchor="end">{}</text>"#,
                W - PAD - 8.0,
                escape(name)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn render(&self, format: Format, title: &str) -> Result<String, CliError> {
        match format {
            Format::Csv => Ok(self.to_csv()),
            Format::Json => self.to_json(),
            Format::Svg => Ok(self.to_svg(title)),
        }
    }

    /// Writes `<dir>/<name>.<ext>`, creating `dir` if needed.
    pub fn write(&self, dir: &Path, name: &str, format: Format) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })?;
        let path = dir.join(format!("{name}.{}", format.extension()));
        let body = self.render(format, name)?;
        std::fs::write(&path, body).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
        Ok(path)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultTable {
        let mut t = ResultTable::new(["t", "phi"]);
        t.meta("seed", 7);
        t.push_row(vec![0.0, 0.1]).unwrap();
        t.push_row(vec![0.5, 1.0 / 3.0]).unwrap();
        t.push_row(vec![1.0, -2.5e-300]).unwrap();
        t
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = ResultTable::new(["a", "b"]);
        assert_eq!(t.to_csv(), "# status=pass\na,b\n");
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let t = sample();
        let back = ResultTable::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.columns, t.columns);
        for (a, b) in back.rows.iter().flatten().zip(t.rows.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.metadata["seed"], "7");
    }

    #[test]
    fn seventeen_significant_digits() {
        let csv = sample().to_csv();
        assert!(csv.contains("3.3333333333333331e-1"));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn rows_must_fit_and_be_finite() {
        let mut t = ResultTable::new(["a"]);
        assert!(t.push_row(vec![1.0, 2.0]).is_err());
        assert!(t.push_row(vec![f64::NAN]).is_err());
        assert!(t.rows.is_empty());
    }

    #[test]
    fn checks_feed_the_status() {
        let mut t = sample();
        assert!(t.check("err", 1e-9, 1e-8));
        assert!(t.passed());
        assert!(!t.check("bad", f64::NAN, 1.0));
        assert!(!t.passed());
        let csv = t.to_csv();
        assert!(csv.contains("# check.bad=fail"));
        assert!(csv.contains("# status=fail"));
    }

    #[test]
    fn json_and_svg_render() {
        let t = sample();
        let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(v["columns"][1], "phi");
        assert_eq!(v["metadata"]["seed"], "7");
        let svg = t.to_svg("demo <1>");
        assert!(svg.starts_with("<svg") && svg.contains("polyline") && svg.contains("demo &lt;1&gt;"));
    }
}
