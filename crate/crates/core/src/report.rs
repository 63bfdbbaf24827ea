//! Check reports and CSV profile output.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::weighted::{ComparisonParams, NValue};

/// Maximum number of grid points kept in a JSON report.
pub const REPORT_GRID_CAP: usize = 2000;

/// `f64` that serializes non-finite values as `"inf"`, `"-inf"`, `"nan"`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_finite() {
            s.serialize_f64(x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// A theorem hypothesis failed sampled validation; nothing was checked.
    Rejected,
    /// The numerics could not produce the required quantities.
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct ReportParams {
    pub N: NValue,
    pub eps: f64,
    pub K: f64,
    pub a: f64,
    pub b: Option<f64>,
    pub c: f64,
}

impl From<&ComparisonParams> for ReportParams {
    fn from(p: &ComparisonParams) -> Self {
        ReportParams { N: p.n, eps: p.eps, K: p.k, a: p.a, b: p.b, c: p.c }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub scenario: String,
    pub params: Option<ReportParams>,
    pub grid: Vec<Num>,
    pub residuals: Vec<Num>,
    pub max_violation: Num,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub values: BTreeMap<String, Num>,
    pub notes: Vec<String>,
}

impl CheckReport {
    /// Pass iff every residual is at most `tolerance` (NaN fails).
    pub fn from_residuals(name: &str, grid: Vec<f64>, residuals: Vec<f64>, tolerance: f64) -> Self {
        let max = residuals.iter().copied().fold(f64::NEG_INFINITY, |acc, r| if r.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(r) });
        let verdict = if max <= tolerance { Verdict::Pass } else { Verdict::Fail };
        CheckReport {
            name: name.into(),
            scenario: String::new(),
            params: None,
            grid: grid.into_iter().map(Num).collect(),
            residuals: residuals.into_iter().map(Num).collect(),
            max_violation: Num(max),
            tolerance,
            verdict,
            values: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn rejected(name: &str, reason: String) -> Self {
        let mut r = Self::from_residuals(name, vec![], vec![], 0.0);
        r.max_violation = Num(f64::NAN);
        r.verdict = Verdict::Rejected;
        r.notes.push(reason);
        r
    }

    pub fn numerical_error(name: &str, reason: String) -> Self {
        let mut r = Self::rejected(name, reason);
        r.verdict = Verdict::Error;
        r
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn with_params(mut self, p: &ComparisonParams) -> Self {
        self.params = Some(p.into());
        self
    }

    pub fn with_scenario(mut self, id: &str) -> Self {
        self.scenario = id.into();
        self
    }

    pub fn value(mut self, key: &str, x: f64) -> Self {
        self.values.insert(key.into(), Num(x));
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).map(|n| n.0)
    }

    /// Copy with grid and residuals thinned to at most [`REPORT_GRID_CAP`]
    /// points (first and last kept, stride otherwise).
    pub fn capped(&self) -> Self {
        let mut r = self.clone();
        let n = r.grid.len().max(r.residuals.len());
        if n > REPORT_GRID_CAP {
            let pick = |v: &Vec<Num>| -> Vec<Num> {
                (0..REPORT_GRID_CAP).map(|i| v[i * (v.len() - 1) / (REPORT_GRID_CAP - 1)]).collect()
            };
            if r.grid.len() > REPORT_GRID_CAP {
                r.grid = pick(&r.grid);
            }
            if r.residuals.len() > REPORT_GRID_CAP {
                r.residuals = pick(&r.residuals);
            }
        }
        r
    }

    /// Merges per-geodesic reports of the same check, in order.
    pub fn merge(name: &str, parts: &[CheckReport], tolerance: f64) -> Self {
        let mut grid = Vec::new();
        let mut res = Vec::new();
        for p in parts {
            grid.extend(p.grid.iter().map(|n| n.0));
            res.extend(p.residuals.iter().map(|n| n.0));
        }
        let mut r = Self::from_residuals(name, grid, res, tolerance);
        for (i, p) in parts.iter().enumerate() {
            for (k, v) in &p.values {
                r.values.insert(format!("{k}[{i}]"), *v);
            }
            for n in &p.notes {
                r.notes.push(format!("[{i}] {n}"));
            }
            if p.verdict == Verdict::Error || p.verdict == Verdict::Rejected {
                r.verdict = p.verdict;
            }
        }
        r
    }
}

/// Writes rows of numbers with a header line.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::other)?;
    w.write_record(header).map_err(std::io::Error::other)?;
    for row in rows {
        w.write_record(row.iter().map(|x| format!("{x}"))).map_err(std::io::Error::other)?;
    }
    w.flush()?;
    Ok(())
}
