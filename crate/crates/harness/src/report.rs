//! Cross-variant comparison of final objectives.

use std::io::Write;

use tsi_core::pgrid::fmt_f64;

use crate::error::{HarnessError, Result};
use crate::experiment::RunReport;

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub final_value: f64,
    /// Final objective relative to the first run.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn ratio(&self, label: &str, base: &str) -> Option<f64> {
        let get = |l: &str| self.rows.iter().find(|r| r.label == l).map(|r| r.final_value);
        Some(ratio(get(label)?, get(base)?))
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "label,final,ratio")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.label, fmt_f64(r.final_value), fmt_f64(r.ratio))?;
        }
        Ok(())
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

/// Tabulates the final objectives of runs that differ only in their variant
/// (smoother, transform kind, field nodes and step settings).
pub fn compare_report(runs: &[RunReport]) -> Result<Comparison> {
    let first = runs.first().ok_or_else(|| HarnessError::Config("nothing to compare".into()))?;
    let shared = |r: &RunReport| {
        let mut c = r.config.clone();
        c.variants.clear();
        c
    };
    let base = shared(first);
    if let Some(r) = runs.iter().find(|r| shared(r) != base) {
        return Err(HarnessError::Config(format!(
            "run {} does not share the configuration of run {}",
            r.label, first.label
        )));
    }
    Ok(Comparison {
        rows: runs
            .iter()
            .map(|r| ComparisonRow {
                label: r.label.clone(),
                final_value: r.final_value(),
                ratio: ratio(r.final_value(), first.final_value()),
            })
            .collect(),
    })
}
