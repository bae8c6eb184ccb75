//! Named inequality checks and their CSV form.

use std::path::Path;

use crate::error::{Error, Result};

/// One verified inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub check: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// The inequality or identity being checked, as a formula.
    pub anchor: String,
}

impl Entry {
    pub fn new(check: &str, measured: f64, tolerance: f64, passed: bool, anchor: &str) -> Self {
        Self {
            check: check.to_string(),
            measured,
            tolerance,
            passed,
            anchor: anchor.to_string(),
        }
    }

    /// Passes when `measured <= tolerance`.
    pub fn at_most(check: &str, measured: f64, tolerance: f64, anchor: &str) -> Self {
        Self::new(check, measured, tolerance, measured <= tolerance, anchor)
    }

    /// Passes when `measured >= tolerance`.
    pub fn at_least(check: &str, measured: f64, tolerance: f64, anchor: &str) -> Self {
        Self::new(check, measured, tolerance, measured >= tolerance, anchor)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerificationReport {
    pub entries: Vec<Entry>,
}

pub const HEADER: [&str; 5] = ["check", "measured", "tolerance", "passed", "anchor"];

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e: Entry) {
        self.entries.push(e);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.entries.extend(other.entries);
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn get(&self, check: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.check == check)
    }

    /// Union of several reports. Later duplicates of a check name are
    /// dropped and the result is sorted by name.
    pub fn merge(reports: impl IntoIterator<Item = VerificationReport>) -> Self {
        let mut out: Vec<Entry> = Vec::new();
        for r in reports {
            for e in r.entries {
                if !out.iter().any(|o| o.check == e.check) {
                    out.push(e);
                }
            }
        }
        out.sort_by(|a, b| a.check.cmp(&b.check));
        Self { entries: out }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = crate::io::writer(path)?;
        w.write_record(HEADER).map_err(|e| crate::io::csv_err(path, e))?;
        for e in &self.entries {
            w.write_record([
                e.check.clone(),
                crate::io::fmt(e.measured),
                crate::io::fmt(e.tolerance),
                e.passed.to_string(),
                e.anchor.clone(),
            ])
            .map_err(|err| crate::io::csv_err(path, err))?;
        }
        w.flush().map_err(|err| Error::io(path, err))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| crate::io::csv_err(path, e))?;
        let mut entries = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| crate::io::csv_err(path, e))?;
            let field = |k: usize| rec.get(k).unwrap_or_default();
            let num = |k: usize| -> Result<f64> {
                crate::io::parse(field(k)).ok_or_else(|| {
                    Error::InvalidInput(format!("{}: bad number `{}`", path.display(), field(k)))
                })
            };
            entries.push(Entry {
                check: field(0).to_string(),
                measured: num(1)?,
                tolerance: num(2)?,
                passed: field(3) == "true",
                anchor: field(4).to_string(),
            });
        }
        Ok(Self { entries })
    }
}
