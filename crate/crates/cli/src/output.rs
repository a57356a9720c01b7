//! `<name>.csv`, `<name>.svg` and `<name>.json` writers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use semilpp::env::fmt17;
use semilpp::ExperimentReport;

/// What one command produces besides its report.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub report: ExperimentReport,
    pub csv_columns: Vec<String>,
    pub csv_rows: Vec<Vec<CsvCell>>,
    pub svg: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CsvCell {
    Real(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for CsvCell {
    fn from(v: f64) -> Self {
        CsvCell::Real(v)
    }
}

impl From<usize> for CsvCell {
    fn from(v: usize) -> Self {
        CsvCell::Int(v as i64)
    }
}

impl From<&str> for CsvCell {
    fn from(v: &str) -> Self {
        CsvCell::Text(v.to_string())
    }
}

/// One-line provenance string: seed and the full parameter set.
pub fn provenance(report: &ExperimentReport) -> String {
    format!(
        "semilpp {} seed={} params={}",
        report.name,
        report.seed,
        serde_json::to_string(&report.params).expect("params serialize")
    )
}

pub fn render_csv(a: &Artifacts) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# semilpp {}", a.report.name);
    let _ = writeln!(out, "# seed = {}", a.report.seed);
    let _ = writeln!(
        out,
        "# params = {}",
        serde_json::to_string(&a.report.params).expect("params serialize")
    );
    out.push_str(&a.csv_columns.join(","));
    out.push('\n');
    for row in &a.csv_rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                CsvCell::Real(v) => fmt17(*v),
                CsvCell::Int(i) => i.to_string(),
                CsvCell::Text(s) => s.clone(),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Writes the three output files into `dir` and returns their paths.
pub fn write_all(dir: &Path, a: &Artifacts) -> Result<[PathBuf; 3]> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let base = dir.join(&a.report.name);
    let paths = [base.with_extension("csv"), base.with_extension("svg"), base.with_extension("json")];
    std::fs::write(&paths[0], render_csv(a))?;
    std::fs::write(&paths[1], &a.svg)?;
    std::fs::write(&paths[2], a.report.to_json() + "\n")?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_provenance_header() {
        let mut report = ExperimentReport::new("demo", 42);
        report.param("n", 3);
        let a = Artifacts {
            report,
            csv_columns: vec!["x".into(), "label".into(), "k".into()],
            csv_rows: vec![vec![0.1.into(), "a".into(), 2usize.into()]],
            svg: String::new(),
        };
        assert_eq!(
            render_csv(&a),
            "# semilpp demo\n# seed = 42\n# params = {\"n\":3}\nx,label,k\n1.0000000000000001e-1,a,2\n"
        );
    }
}
