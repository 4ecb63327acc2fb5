//! Run artifacts: a manifest, data files and the outcome of every assertion.
//!
//! An artifact directory contains the data files (CSV and JSON), a
//! `manifest.json` with the configuration echo, code version, seed, wall
//! time and assertion outcomes, and a plain-text `summary.txt`. Data files
//! depend only on the configuration and seed, so rerunning a configuration
//! reproduces them byte for byte; wall time lives in the manifest only.
//!
//! Every file is written to a temporary file in the target directory and
//! renamed into place, and the manifest is written last: a directory with a
//! manifest is a complete artifact.

use crate::config::SCHEMA_VERSION;
use crate::error::{CliError, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Name of the manifest file inside an artifact directory.
pub const MANIFEST_FILE: &str = "manifest.json";
/// Name of the human-readable summary inside an artifact directory.
pub const SUMMARY_FILE: &str = "summary.txt";

/// Outcome of one checked statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    /// Short identifier, unique within the run.
    pub id: String,
    /// What is asserted.
    pub description: String,
    /// Whether it held.
    pub pass: bool,
    /// Observed values.
    pub detail: String,
}

impl Assertion {
    /// Builds an assertion outcome.
    pub fn new(id: &str, description: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self { id: id.to_string(), description: description.to_string(), pass, detail: detail.into() }
    }
}

/// Provenance record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Artifact schema version.
    pub schema_version: u32,
    /// Experiment name.
    pub experiment: String,
    /// Effective configuration (with the seed actually used).
    pub config: serde_json::Value,
    /// Version of the laboratory that produced the run.
    pub code_version: String,
    /// Master seed.
    pub seed: u64,
    /// Wall-clock duration of the run in seconds.
    pub wall_time_s: f64,
    /// Data files written alongside the manifest.
    pub files: Vec<String>,
    /// Every assertion evaluated by the run.
    pub assertions: Vec<Assertion>,
    /// `true` iff every assertion passed.
    pub pass: bool,
}

/// A data file produced by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    /// File name (no directories).
    pub name: String,
    /// Contents.
    pub contents: String,
}

/// Complete result of [`crate::run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    /// Provenance and assertion outcomes.
    pub manifest: Manifest,
    /// Data files.
    pub files: Vec<DataFile>,
}

impl RunArtifact {
    /// Assembles an artifact; the manifest's file list and pass flag are
    /// derived from `files` and `assertions`.
    pub fn new(
        experiment: &str,
        config: serde_json::Value,
        seed: u64,
        wall_time_s: f64,
        files: Vec<DataFile>,
        assertions: Vec<Assertion>,
    ) -> Self {
        let pass = assertions.iter().all(|a| a.pass);
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            config,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            wall_time_s,
            files: files.iter().map(|f| f.name.clone()).collect(),
            assertions,
            pass,
        };
        Self { manifest, files }
    }

    /// `true` iff every assertion passed.
    pub fn pass(&self) -> bool {
        self.manifest.pass
    }

    /// Process exit code: 0 iff every assertion passed.
    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            crate::error::EXIT_PASS
        } else {
            crate::error::EXIT_FAIL
        }
    }

    /// Data file by name.
    pub fn file(&self, name: &str) -> Option<&DataFile> {
        self.files.iter().find(|f| f.name == name)
    }

    /// Plain-text summary: one line per assertion.
    pub fn summary(&self) -> String {
        let m = &self.manifest;
        let mut s = format!(
            "{} (seed {}, {:.2} s): {}\n",
            m.experiment,
            m.seed,
            m.wall_time_s,
            if m.pass { "PASS" } else { "FAIL" }
        );
        for a in &m.assertions {
            s.push_str(&format!("  [{}] {}: {} — {}\n", if a.pass { "PASS" } else { "FAIL" }, a.id, a.description, a.detail));
        }
        s
    }

    /// Writes the artifact into `dir` (created if needed). Each file is
    /// written atomically; the manifest comes last.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        for f in &self.files {
            write_atomic(dir, &f.name, f.contents.as_bytes())?;
        }
        write_atomic(dir, SUMMARY_FILE, self.summary().as_bytes())?;
        let manifest = serde_json::to_string_pretty(&self.manifest)?;
        write_atomic(dir, MANIFEST_FILE, manifest.as_bytes())
    }

    /// Loads the manifest and data files of an artifact directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let manifest: Manifest = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::config(format!("{}:{}", path.display(), e.path()), e.inner().to_string()))?;
        let mut files = Vec::with_capacity(manifest.files.len());
        for name in &manifest.files {
            let p = dir.join(name);
            let contents = std::fs::read_to_string(&p).map_err(|source| CliError::Io { path: p.clone(), source })?;
            files.push(DataFile { name: name.clone(), contents });
        }
        Ok(Self { manifest, files })
    }
}

/// Writes `bytes` to `dir/name` through a temporary file in `dir` and an
/// atomic rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let target: PathBuf = dir.join(name);
    let io = |source| CliError::Io { path: target.clone(), source };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(&target).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunArtifact {
        RunArtifact::new(
            "demo",
            serde_json::json!({"experiment": "demo"}),
            3,
            0.25,
            vec![DataFile { name: "data.csv".into(), contents: "x,value\n0,1\n".into() }],
            vec![Assertion::new("a", "holds", true, "ok"), Assertion::new("b", "fails", false, "no")],
        )
    }

    #[test]
    fn pass_flag_and_exit_code() {
        let a = sample();
        assert!(!a.pass());
        assert_eq!(a.exit_code(), 1);
        assert_eq!(a.manifest.files, vec!["data.csv".to_string()]);
        assert!(a.summary().contains("[FAIL] b"));
    }

    #[test]
    fn write_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = sample();
        a.write(dir.path()).unwrap();
        let b = RunArtifact::load(dir.path()).unwrap();
        assert_eq!(a, b);
        // No temporary files are left behind.
        let mut names: Vec<String> =
            std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        names.sort();
        assert_eq!(names, vec!["data.csv", "manifest.json", "summary.txt"]);
    }
}
