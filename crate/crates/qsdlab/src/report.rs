//! Run reports: `summary.json`, CSV tables and the `run.log` sidecar.
//!
//! Everything except `run.log` is a pure function of the config and seed.

use serde::Serialize;
use serde_json::{Map, Value};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, Format, Task};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub task: String,
    pub model: String,
    pub seed: u64,
    /// True when a numerical step failed; `results` then holds what was
    /// computed before the failure.
    pub incomplete: bool,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    pub results: Map<String, Value>,
    pub files: Vec<String>,
}

impl Report {
    pub fn new(task: Task, model: &str, seed: u64) -> Self {
        Self {
            task: task.name().into(),
            model: model.into(),
            seed,
            incomplete: false,
            errors: Vec::new(),
            warnings: Vec::new(),
            results: Map::new(),
            files: Vec::new(),
        }
    }

    pub fn put<T: Serialize>(&mut self, key: &str, v: T) {
        let v = serde_json::to_value(v).unwrap_or(Value::Null);
        self.results.insert(key.into(), v);
    }

    pub fn fail(&mut self, msg: impl ToString) {
        self.incomplete = true;
        self.errors.push(msg.to_string());
    }

    pub fn warn(&mut self, msg: impl ToString) {
        self.warnings.push(msg.to_string());
    }
}

/// A CSV table. Numbers go through [`num`]; `NaN` becomes an empty field.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        String::new()
    }
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.push_cells(row.into_iter().map(num).collect());
    }

    pub fn push_cells(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

pub struct Writer {
    pub dir: PathBuf,
    formats: Vec<Format>,
}

impl Writer {
    pub fn new(dir: &Path, cfg: &ExperimentConfig) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), formats: cfg.output.formats.clone() })
    }

    pub fn table(&self, report: &mut Report, t: &Table) -> io::Result<()> {
        if !self.formats.contains(&Format::Csv) {
            return Ok(());
        }
        let file = format!("{}.csv", t.name);
        std::fs::write(self.dir.join(&file), t.to_csv())?;
        report.files.push(file);
        Ok(())
    }

    pub fn json<T: Serialize>(&self, report: &mut Report, name: &str, v: &T) -> io::Result<()> {
        if !self.formats.contains(&Format::Json) {
            return Ok(());
        }
        let file = format!("{name}.json");
        std::fs::write(self.dir.join(&file), pretty(v)?)?;
        report.files.push(file);
        Ok(())
    }

    /// `summary.json` is always written.
    pub fn summary(&self, report: &mut Report) -> io::Result<()> {
        report.files.push("summary.json".into());
        std::fs::write(self.dir.join("summary.json"), pretty(report)?)
    }

    pub fn log(&self, lines: &[String]) -> io::Result<()> {
        let mut f = std::fs::File::create(self.dir.join("run.log"))?;
        for l in lines {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}

fn pretty<T: Serialize>(v: &T) -> io::Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(io::Error::other)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_formats_missing_values_as_empty() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1.5, f64::NAN]);
        t.push(vec![f64::INFINITY, 0.1]);
        assert_eq!(t.to_csv(), "a,b\n1.5,\ninf,0.1\n");
    }

    #[test]
    fn empty_report_serializes_with_empty_arrays() {
        let mut r = Report::new(Task::Qsd, "m", 1);
        r.fail("spectral solve failed");
        let v: Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["incomplete"], Value::Bool(true));
        assert_eq!(v["files"], Value::Array(vec![]));
        assert_eq!(v["results"], Value::Object(Map::new()));
        assert_eq!(v["errors"][0], "spectral solve failed");
    }
}
