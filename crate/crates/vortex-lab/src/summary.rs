//! Machine-readable pass/fail table.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Check {
    /// |value − target| ≤ tolerance
    Within,
    /// value ≤ target (tolerance column is 0)
    AtMost,
    /// a stage that did not produce a value
    Failed,
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub criterion: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub check: Check,
    pub note: String,
}

impl SummaryRow {
    pub fn within(criterion: &str, value: f64, target: f64, tolerance: f64) -> Self {
        SummaryRow { criterion: criterion.into(), value, target, tolerance, check: Check::Within, note: String::new() }
    }

    pub fn at_most(criterion: &str, value: f64, bound: f64) -> Self {
        SummaryRow { criterion: criterion.into(), value, target: bound, tolerance: 0.0, check: Check::AtMost, note: "upper bound".into() }
    }

    pub fn failed(criterion: &str, message: &str) -> Self {
        SummaryRow { criterion: criterion.into(), value: f64::NAN, target: f64::NAN, tolerance: f64::NAN, check: Check::Failed, note: message.into() }
    }

    pub fn pass(&self) -> bool {
        match self.check {
            Check::Within => (self.value - self.target).abs() <= self.tolerance,
            Check::AtMost => self.value <= self.target,
            Check::Failed => false,
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    writeln!(f, "criterion,value,target,tolerance,pass,note")?;
    for r in rows {
        writeln!(f, "{},{:.6e},{:e},{:e},{},{}", csv_field(&r.criterion), r.value, r.target, r.tolerance, r.pass(), csv_field(&r.note))?;
    }
    f.flush()?;
    Ok(())
}
