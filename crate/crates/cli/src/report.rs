//! Report persistence: full JSON plus a long-format CSV of claim norms.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::sweep::SweepReport;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "norms.csv";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_owned(),
        source,
    }
}

/// One row per claim and ε: `claim,epsilon,norm,below_floor`.
pub fn to_csv(report: &SweepReport) -> String {
    let mut out = String::from("claim,epsilon,norm,below_floor\n");
    for c in &report.claims {
        for ((eps, norm), floor) in report.epsilons.iter().zip(&c.norms).zip(&c.below_floor) {
            let norm = norm.map(|v| format!("{v:e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{eps:e},{norm},{floor}", c.label);
        }
    }
    out
}

/// Writes `report.json` and `norms.csv` into `dir`, creating it if needed.
pub fn export_report(report: &SweepReport, dir: &Path) -> Result<(PathBuf, PathBuf), ReportError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let json = dir.join(REPORT_JSON);
    let csv = dir.join(REPORT_CSV);
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(&json, text).map_err(io(&json))?;
    fs::write(&csv, to_csv(report)).map_err(io(&csv))?;
    Ok((json, csv))
}

pub fn read_report(path: &Path) -> Result<SweepReport, ReportError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    Ok(serde_json::from_str(&text)?)
}
