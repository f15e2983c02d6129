//! Report files. Output depends only on the report contents, so a fixed
//! configuration and seed give identical bytes; timings go to a separate file.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::experiments::{ExperimentReport, Timing};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown format {other}"))),
        }
    }
}

pub const CSV_HEADER: [&str; 8] = ["s", "lambda", "mass", "sup_norm", "residual", "holder_gap", "rho0", "pass"];

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else {
        "nan".into()
    }
}

/// Writes the report to `{dir}/{name}.json` or `{dir}/{name}.csv` and returns
/// the path.
pub fn emit_report(report: &ExperimentReport, format: Format, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    match format {
        Format::Csv => {
            let path = dir.join(format!("{}.csv", report.name));
            write_csv(report, std::fs::File::create(&path)?)?;
            Ok(path)
        }
        Format::Json => {
            let path = dir.join(format!("{}.json", report.name));
            let mut f = std::fs::File::create(&path)?;
            serde_json::to_writer_pretty(&mut f, report)?;
            writeln!(f)?;
            write_timings(&report.timings, &dir.join(format!("{}.timings.json", report.name)))?;
            Ok(path)
        }
    }
}

/// Writes the report rows as CSV. The `residual` column is the relative
/// Pohozaev residual.
pub fn write_csv(report: &ExperimentReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &report.records {
        w.write_record([
            num(r.s),
            num(r.lambda),
            num(r.mass),
            num(r.sup_norm),
            num(r.identity_residual),
            num(r.holder_gap),
            num(r.rho0),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_timings(timings: &[Timing], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, timings)?;
    writeln!(f)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::builtin;

    #[test]
    fn empty_report_gives_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let report = ExperimentReport::empty(builtin("E1").unwrap().remove(0));
        let path = emit_report(&report, Format::Csv, dir.path()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, "s,lambda,mass,sup_norm,residual,holder_gap,rho0,pass\n");
        assert!(!report.all_pass());
    }

    #[test]
    fn format_parsing() {
        assert_eq!("JSON".parse::<Format>().unwrap(), Format::Json);
        assert!("xml".parse::<Format>().is_err());
    }
}
