//! Consolidated reports over several run artifacts.
//!
//! An ordinary experiment contributes one row (its overall status); the
//! acceptance suite contributes one row per acceptance criterion.

use crate::accept::ACCEPT_EXPERIMENT;
use crate::artifact::RunArtifact;
use crate::error::{CliError, Result};
use serde::Serialize;

/// One row of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    /// Row identifier: the criterion id for acceptance rows, the experiment
    /// name otherwise.
    pub id: String,
    /// Experiment the row comes from.
    pub experiment: String,
    /// What was checked.
    pub description: String,
    /// Whether it passed.
    pub pass: bool,
    /// Observed values or assertion counts.
    pub detail: String,
}

/// Consolidated report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    /// Common schema version of the artifacts (absent for an empty report).
    pub schema_version: Option<u32>,
    /// Rows in artifact order.
    pub rows: Vec<ReportRow>,
    /// `true` iff every row passed (vacuously for an empty report).
    pub pass: bool,
}

impl Report {
    /// Pretty-printed JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fixed-width text table with one line per row.
    pub fn table(&self) -> String {
        let wid = self.rows.iter().map(|r| r.id.chars().count()).max().unwrap_or(2).max(2);
        let wdesc = self.rows.iter().map(|r| r.description.chars().count()).max().unwrap_or(11).clamp(11, 60);
        let mut s = format!("{:<wid$}  {:<wdesc$}  {:<6}  {}\n", "id", "description", "status", "detail");
        for r in &self.rows {
            let desc: String = r.description.chars().take(wdesc).collect();
            s.push_str(&format!(
                "{:<wid$}  {:<wdesc$}  {:<6}  {}\n",
                r.id,
                desc,
                if r.pass { "PASS" } else { "FAIL" },
                r.detail
            ));
        }
        s
    }

    /// Exit code: 0 iff every row passed.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            crate::error::EXIT_PASS
        } else {
            crate::error::EXIT_FAIL
        }
    }
}

/// Combines artifacts of one schema version into a report.
///
/// Errors with [`CliError::SchemaVersion`] when the artifacts mix versions.
pub fn emit_report(artifacts: &[RunArtifact]) -> Result<Report> {
    let schema_version = artifacts.first().map(|a| a.manifest.schema_version);
    let mut rows = Vec::new();
    for a in artifacts {
        let m = &a.manifest;
        if Some(m.schema_version) != schema_version {
            return Err(CliError::SchemaVersion {
                expected: schema_version.unwrap_or_default(),
                found: m.schema_version,
                artifact: m.experiment.clone(),
            });
        }
        if m.experiment == ACCEPT_EXPERIMENT {
            rows.extend(m.assertions.iter().map(|x| ReportRow {
                id: x.id.clone(),
                experiment: m.experiment.clone(),
                description: x.description.clone(),
                pass: x.pass,
                detail: x.detail.clone(),
            }));
        } else {
            let passed = m.assertions.iter().filter(|x| x.pass).count();
            let failed: Vec<&str> = m.assertions.iter().filter(|x| !x.pass).map(|x| x.id.as_str()).collect();
            let mut detail = format!("{passed}/{} assertions passed", m.assertions.len());
            if !failed.is_empty() {
                detail.push_str(&format!("; failed: {}", failed.join(", ")));
            }
            rows.push(ReportRow {
                id: m.experiment.clone(),
                experiment: m.experiment.clone(),
                description: crate::registry::lookup(&m.experiment).map_or_else(|| m.experiment.clone(), |e| e.claim.to_string()),
                pass: m.pass,
                detail,
            });
        }
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(Report { schema_version, rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::Assertion;

    fn artifact(name: &str, pass: bool) -> RunArtifact {
        RunArtifact::new(name, serde_json::json!({}), 1, 0.0, vec![], vec![Assertion::new("a", "x", pass, "")])
    }

    #[test]
    fn empty_report_passes() {
        let r = emit_report(&[]).unwrap();
        assert!(r.rows.is_empty());
        assert!(r.pass);
        assert_eq!(r.exit_code(), 0);
        assert_eq!(r.table().lines().count(), 1);
    }

    #[test]
    fn single_artifact_single_row() {
        let r = emit_report(&[artifact("warmup", true)]).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.table().lines().count(), 2);
        assert!(r.pass);
        let r = emit_report(&[artifact("warmup", true), artifact("rods", false)]).unwrap();
        assert!(!r.pass);
        assert_eq!(r.exit_code(), 1);
    }

    #[test]
    fn acceptance_artifact_expands_to_criteria() {
        let a = RunArtifact::new(
            ACCEPT_EXPERIMENT,
            serde_json::json!({}),
            1,
            0.0,
            vec![],
            (1..=3).map(|i| Assertion::new(&format!("C{i}"), "criterion", true, "")).collect(),
        );
        let r = emit_report(&[a]).unwrap();
        assert_eq!(r.rows.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["C1", "C2", "C3"]);
    }

    #[test]
    fn mixed_versions_rejected() {
        let mut b = artifact("rods", true);
        b.manifest.schema_version += 1;
        assert!(matches!(emit_report(&[artifact("warmup", true), b]), Err(CliError::SchemaVersion { .. })));
    }
}
