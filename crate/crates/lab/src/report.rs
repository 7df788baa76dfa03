//! Experiment reports: a JSON summary plus one CSV file per series.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use transport_core::stats::Estimate;

/// A named table of doubles with a fixed column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width for series {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Header row, then one line per row in full double precision.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                write!(s, "{v:.16e}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// Pass/fail outcome of one check, with the bounds it was held to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub samples: usize,
    pub detail: String,
}

impl Verdict {
    fn build(name: &str, value: f64, lower: Option<f64>, upper: Option<f64>, samples: usize, detail: String) -> Self {
        // NaN compares false and so always fails.
        let passed = lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u) && !value.is_nan();
        Self { name: name.into(), passed, value, lower, upper, samples, detail }
    }

    pub fn at_most(name: &str, value: f64, upper: f64, samples: usize, detail: impl Into<String>) -> Self {
        Self::build(name, value, None, Some(upper), samples, detail.into())
    }

    pub fn at_least(name: &str, value: f64, lower: f64, samples: usize, detail: impl Into<String>) -> Self {
        Self::build(name, value, Some(lower), None, samples, detail.into())
    }

    pub fn within(name: &str, value: f64, lower: f64, upper: f64, samples: usize, detail: impl Into<String>) -> Self {
        Self::build(name, value, Some(lower), Some(upper), samples, detail.into())
    }

    /// A boolean check recorded as value 1 (true) against lower bound 1.
    pub fn holds(name: &str, ok: bool, samples: usize, detail: impl Into<String>) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0, samples, detail)
    }

    fn bounds(&self) -> String {
        match (self.lower, self.upper) {
            (Some(l), Some(u)) => format!("in [{l:.4e}, {u:.4e}]"),
            (Some(l), None) => format!(">= {l:.4e}"),
            (None, Some(u)) => format!("<= {u:.4e}"),
            (None, None) => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: serde_json::Value,
    pub series: Vec<Series>,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    pub wall_clock_seconds: f64,
    pub versions: BTreeMap<String, String>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: serde_json::Value) -> Self {
        let versions = BTreeMap::from([
            ("transport-core".to_string(), transport_core::VERSION.to_string()),
            ("transport-lab".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        Self {
            experiment: experiment.into(),
            config,
            series: Vec::new(),
            verdicts: Vec::new(),
            warnings: Vec::new(),
            notes: Vec::new(),
            wall_clock_seconds: 0.0,
            versions,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    /// 0 when every verdict passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `<experiment>.report.json` and `<experiment>.<series>.csv` into
    /// `dir`, returning the paths written.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let report = dir.join(format!("{}.report.json", self.experiment));
        std::fs::write(&report, self.to_json())?;
        written.push(report);
        for s in &self.series {
            let path = dir.join(format!("{}.{}.csv", self.experiment, s.name));
            std::fs::write(&path, s.to_csv())?;
            written.push(path);
        }
        Ok(written)
    }

    /// One line per verdict, for terminal output.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for v in &self.verdicts {
            let tag = if v.passed { "PASS" } else { "FAIL" };
            writeln!(s, "{tag} {}: {:.6e} {} (N={}) {}", v.name, v.value, v.bounds(), v.samples, v.detail).unwrap();
        }
        for w in &self.warnings {
            writeln!(s, "warning: {w}").unwrap();
        }
        s
    }
}

/// Mean and half-width as two CSV cells.
pub fn cells(e: &Estimate) -> [f64; 2] {
    [e.mean, e.half_width]
}
