//! Criterion rows, `report.csv` and `summary.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Cmp {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Cmp {
    fn holds(self, measured: f64, tolerance: f64) -> bool {
        match self {
            Cmp::AtMost => measured <= tolerance,
            Cmp::AtLeast => measured >= tolerance,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::AtMost => "<=",
            Cmp::AtLeast => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub criterion: String,
    pub parameter: String,
    pub measured: f64,
    pub tolerance: f64,
    pub comparison: Cmp,
    pub pass: bool,
}

/// Worst row of a criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionSummary {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub comparison: Cmp,
    pub pass: bool,
    pub rows: usize,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    suite: &'a str,
    seed: u64,
    pass: bool,
    criteria: Vec<CriterionSummary>,
    error: Option<String>,
}

pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub out: PathBuf,
    pub rows: Vec<Row>,
}

impl Report {
    pub fn new(suite: &str, seed: u64, out: &Path) -> Self {
        Self {
            suite: suite.to_string(),
            seed,
            out: out.to_path_buf(),
            rows: Vec::new(),
        }
    }

    pub fn check(&mut self, criterion: &str, parameter: impl Into<String>, measured: f64, tolerance: f64, cmp: Cmp) {
        let pass = measured.is_finite() && cmp.holds(measured, tolerance);
        self.rows.push(Row {
            criterion: criterion.to_string(),
            parameter: parameter.into(),
            measured,
            tolerance,
            comparison: cmp,
            pass,
        });
    }

    /// Opens an auxiliary output file in the report directory.
    pub fn artifact(&self, name: &str) -> std::io::Result<fs::File> {
        fs::File::create(self.out.join(name))
    }

    pub fn criteria(&self) -> Vec<CriterionSummary> {
        let mut names: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !names.contains(&r.criterion.as_str()) {
                names.push(&r.criterion);
            }
        }
        names
            .into_iter()
            .map(|n| {
                let rows: Vec<&Row> = self.rows.iter().filter(|r| r.criterion == n).collect();
                let worst = rows
                    .iter()
                    .copied()
                    .find(|r| !r.pass)
                    .unwrap_or_else(|| {
                        rows.iter()
                            .copied()
                            .max_by(|a, b| {
                                let key = |r: &Row| match r.comparison {
                                    Cmp::AtMost => r.measured / r.tolerance,
                                    Cmp::AtLeast => r.tolerance / r.measured,
                                };
                                key(a).total_cmp(&key(b))
                            })
                            .expect("criterion has rows")
                    });
                CriterionSummary {
                    name: n.to_string(),
                    measured: worst.measured,
                    tolerance: worst.tolerance,
                    comparison: worst.comparison,
                    pass: rows.iter().all(|r| r.pass),
                    rows: rows.len(),
                }
            })
            .collect()
    }

    pub fn pass(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    /// Writes `report.csv` and `summary.json`; `error` marks an aborted run.
    pub fn write(&self, error: Option<String>) -> std::io::Result<()> {
        fs::create_dir_all(&self.out)?;
        let mut csv = fs::File::create(self.out.join("report.csv"))?;
        writeln!(csv, "criterion,parameter,measured,tolerance,comparison,pass")?;
        for r in &self.rows {
            writeln!(
                csv,
                "{},{},{:e},{:e},{},{}",
                r.criterion,
                r.parameter,
                r.measured,
                r.tolerance,
                r.comparison.symbol(),
                if r.pass { "PASS" } else { "FAIL" }
            )?;
        }
        let summary = Summary {
            suite: &self.suite,
            seed: self.seed,
            pass: error.is_none() && self.pass(),
            criteria: self.criteria(),
            error,
        };
        let json = serde_json::to_string_pretty(&summary).map_err(std::io::Error::other)?;
        fs::write(self.out.join("summary.json"), json + "\n")
    }
}
