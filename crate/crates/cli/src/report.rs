//! Merges per-run `run.json` files into one table.

use crate::error::CliError;
use crate::run::{RunStatus, RunSummary};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<RunSummary>,
    /// Subdirectories without a readable `run.json`.
    pub missing: Vec<String>,
    pub failed: usize,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn to_text(&self) -> String {
        let keys: BTreeSet<&str> = self.rows.iter().flat_map(|r| r.metrics.keys().map(String::as_str)).collect();
        let mut s = String::new();
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        if self.rows.is_empty() {
            return s;
        }
        let _ = write!(s, "label\trecipe\tstatus\tclassification");
        for k in &keys {
            let _ = write!(s, "\t{k}");
        }
        s.push('\n');
        for r in &self.rows {
            let status = match r.status {
                RunStatus::Completed => "completed",
                RunStatus::Failed => "FAILED",
            };
            let _ = write!(s, "{}\t{}\t{status}\t{}", r.label, r.recipe, r.classification.as_deref().unwrap_or("-"));
            for k in &keys {
                match r.metrics.get(*k) {
                    Some(v) => {
                        let _ = write!(s, "\t{v:.6e}");
                    }
                    None => s.push_str("\t-"),
                }
            }
            s.push('\n');
            if let Some(e) = &r.error {
                let _ = writeln!(s, "  error: {e}");
            }
        }
        s
    }
}

/// Reads `<dir>/*/run.json` and writes `report.json` and `report.txt` into `dir`.
pub fn emit_report(dir: &Path) -> Result<Report, CliError> {
    let mut report = Report::default();
    let mut subdirs: Vec<_> = fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.path())
        .collect();
    subdirs.sort();
    for d in subdirs {
        let name = d.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let run = d.join("run.json");
        match fs::read_to_string(&run).ok().and_then(|t| serde_json::from_str::<RunSummary>(&t).ok()) {
            Some(r) => {
                if r.status == RunStatus::Failed {
                    report.failed += 1;
                }
                report.rows.push(r);
            }
            None => report.missing.push(name),
        }
    }
    if report.rows.is_empty() {
        report.warnings.push(format!("no runs found under {}", dir.display()));
    }
    if !report.missing.is_empty() {
        report.warnings.push(format!("directories without run.json: {}", report.missing.join(", ")));
    }
    if report.failed > 0 {
        report.warnings.push(format!("{} run(s) failed", report.failed));
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    let p = dir.join("report.json");
    fs::write(&p, json).map_err(CliError::io(&p))?;
    let p = dir.join("report.txt");
    fs::write(&p, report.to_text()).map_err(CliError::io(&p))?;
    Ok(report)
}
