//! CSV, JSON and plain-text renderings of a [`MetricsTable`].

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{MetricsTable, TrialRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// One row per trial.
    Csv,
    /// The whole table.
    Json,
    /// Aligned summary followed by per-trial lines.
    Text,
}

impl ReportFormat {
    /// From a file extension: `.csv`, `.json`, anything else is text.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => ReportFormat::Csv,
            Some("json") => ReportFormat::Json,
            _ => ReportFormat::Text,
        }
    }
}

const CSV_HEADER: &str =
    "id,condition,method,target_deg,interferer_deg,estimate_deg,error_deg,captured,failure";

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

pub fn emit_report(table: &MetricsTable, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            if table.records.is_empty() {
                return Ok(format!("{CSV_HEADER}\n"));
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &table.records {
                w.serialize(r)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Json => serde_json::to_string_pretty(table)
            .map(|s| s + "\n")
            .map_err(|e| Error::Config(e.to_string())),
        ReportFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "{:<16} {:<9} {:>6} {:>6} {:>9} {:>7}",
                "condition", "method", "trials", "failed", "rmse_deg", "p_s_%"
            );
            for c in &table.conditions {
                let _ = writeln!(
                    out,
                    "{:<16} {:<9} {:>6} {:>6} {:>9} {:>7.1}",
                    c.condition,
                    format!("{:?}", c.method).to_lowercase(),
                    c.trials,
                    c.failures,
                    fmt_opt(c.rmse, 2),
                    c.p_s
                );
            }
            if !table.records.is_empty() {
                out.push('\n');
            }
            for r in &table.records {
                let _ = writeln!(
                    out,
                    "{:<24} {:<9} truth {:>6.1} est {:>6} err {:>6}{}{}",
                    r.id,
                    format!("{:?}", r.method).to_lowercase(),
                    r.target_deg,
                    fmt_opt(r.estimate_deg, 1),
                    fmt_opt(r.error_deg, 1),
                    if r.captured { " captured" } else { "" },
                    r.failure.as_ref().map(|f| format!(" failed: {f}")).unwrap_or_default()
                );
            }
            Ok(out)
        }
    }
}

/// Parses the per-trial CSV produced by [`emit_report`].
pub fn parse_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_report(table: &MetricsTable, path: &Path) -> Result<()> {
    let text = emit_report(table, ReportFormat::for_path(path))?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::rmse;
    use crate::pipeline::Method;

    fn table() -> MetricsTable {
        MetricsTable::from_records(vec![
            TrialRecord::from_parts("t1", "room", Method::Proposed, 36.0, None, Some(35.0), None),
            TrialRecord::from_parts("t2", "room", Method::Proposed, -60.0, Some(70.0), Some(-57.5), None),
            TrialRecord::from_parts("t3", "room", Method::Baseline, 0.0, None, None, Some("too short, really".into())),
            TrialRecord::from_parts("t4", "room", Method::Proposed, 0.1 + 0.2, None, Some(1.0 / 3.0), None),
        ])
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = MetricsTable::from_records(Vec::new());
        assert_eq!(emit_report(&t, ReportFormat::Csv).unwrap(), format!("{CSV_HEADER}\n"));
        assert!(emit_report(&t, ReportFormat::Text).unwrap().lines().count() == 1);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let t = table();
        let text = emit_report(&t, ReportFormat::Csv).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        let back = parse_csv(&text).unwrap();
        assert_eq!(back, t.records);
        let errs: Vec<f64> = back
            .iter()
            .filter(|r| r.method == Method::Proposed && !r.captured)
            .filter_map(|r| r.error_deg)
            .collect();
        assert_eq!(rmse(&errs), t.get("room", Method::Proposed).unwrap().rmse);
    }

    #[test]
    fn one_trial_one_row() {
        let t = MetricsTable::from_records(vec![TrialRecord::from_parts(
            "only", "c", Method::Proposed, 10.0, None, Some(12.0), None,
        )]);
        let text = emit_report(&t, ReportFormat::Csv).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1], "only,c,proposed,10.0,,12.0,2.0,false,");
    }

    #[test]
    fn json_round_trip() {
        let t = table();
        let text = emit_report(&t, ReportFormat::Json).unwrap();
        let back: MetricsTable = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(emit_report(&t, ReportFormat::Text).unwrap(), emit_report(&t, ReportFormat::Text).unwrap());
    }
}
