use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    /// Floats in `{:.16e}`; `+∞` as `inf`.
    pub fn render(&self) -> String {
        match self {
            Cell::Float(v) if *v == f64::INFINITY => "inf".to_string(),
            Cell::Float(v) if *v == f64::NEG_INFINITY => "-inf".to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Renders floats joined by `;` for list-valued cells.
pub fn join_floats(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(";")
}

/// A named assertion of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub pass_count: usize,
    pub fail_count: usize,
    pub anomaly_count: usize,
}

/// How a run ended, mapped onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Unconverged,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
            Outcome::Unconverged => 3,
        }
    }
}

/// Output of one command: a table plus a summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub dim: usize,
    pub params: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Summary,
    pub checks: Vec<Check>,
    pub unconverged: bool,
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    command: &'a str,
    seed: u64,
    dim: usize,
    params: &'a BTreeMap<String, String>,
    rows: usize,
    summary: Summary,
    outcome: Outcome,
    checks: &'a [Check],
}

impl RunReport {
    pub fn new(command: &str, seed: u64, dim: usize, columns: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            seed,
            dim,
            params: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: Summary::default(),
            checks: Vec::new(),
            unconverged: false,
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Records a check and counts it as a pass or a failure.
    pub fn check(&mut self, check: Check) {
        if check.passed {
            self.summary.pass_count += 1;
        } else {
            self.summary.fail_count += 1;
        }
        self.checks.push(check);
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn outcome(&self) -> Outcome {
        if self.summary.fail_count > 0 || self.summary.anomaly_count > 0 {
            Outcome::Fail
        } else if self.unconverged {
            Outcome::Unconverged
        } else {
            Outcome::Pass
        }
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn summary_json(&self) -> String {
        let doc = SummaryDocument {
            command: &self.command,
            seed: self.seed,
            dim: self.dim,
            params: &self.params,
            rows: self.rows.len(),
            summary: self.summary,
            outcome: self.outcome(),
            checks: &self.checks,
        };
        serde_json::to_string_pretty(&doc).expect("summary serializes")
    }
}
