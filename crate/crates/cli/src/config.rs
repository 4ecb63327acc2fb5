//! JSON experiment configuration.
//!
//! A configuration names one registered experiment and carries its
//! parameters:
//!
//! ```json
//! {
//!   "experiment": "warmup",
//!   "seed": 7,
//!   "service": { "kind": "exponential" },
//!   "out": "runs/warmup",
//!   "params": { "h": 0.001, "x_max": 50.0 }
//! }
//! ```
//!
//! Every field except `experiment` is optional; omitted parameters take the
//! experiment's documented defaults. Unknown fields are rejected, and every
//! error names the dotted path of the offending field.

use crate::error::{CliError, Result};
use phlab_core::dists::{DistSpec, ServiceDistribution};
use phlab_core::selfavg::KernelFamily;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Version of the artifact and configuration schema.
pub const SCHEMA_VERSION: u32 = 1;

/// Master seed used when neither the configuration nor the command line
/// provides one.
pub const DEFAULT_SEED: u64 = 1;

/// Top-level configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Registered experiment name (see [`crate::registry::REGISTRY`]).
    pub experiment: String,
    /// Master seed; per-component streams are derived from it.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Service law; defaults to the unit exponential.
    #[serde(default)]
    pub service: Option<DistSpec>,
    /// Output directory; defaults to `runs/<experiment>`.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Experiment-specific parameters.
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl ExperimentConfig {
    /// A configuration with all defaults for `experiment`.
    pub fn new(experiment: &str) -> Self {
        Self { experiment: experiment.to_string(), seed: None, service: None, out: None, params: empty_object() }
    }

    /// Parses a JSON document; schema violations report the field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| path_error("", e))
    }

    /// Reads and parses a configuration file.
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    /// Effective master seed.
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Effective output directory.
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(&self.experiment))
    }

    /// The validated service law (unit exponential by default).
    pub fn service(&self) -> Result<ServiceDistribution> {
        match &self.service {
            None => Ok(ServiceDistribution::exponential()),
            Some(spec) => service_from(spec, "service"),
        }
    }

    /// Deserializes `params` into the experiment's typed parameter block.
    pub fn params<T: DeserializeOwned>(&self) -> Result<T> {
        serde_path_to_error::deserialize(self.params.clone()).map_err(|e| path_error("params", e))
    }
}

/// Builds a normalized service law, reporting failures at `path`.
pub fn service_from(spec: &DistSpec, path: &str) -> Result<ServiceDistribution> {
    ServiceDistribution::new(spec.clone()).map_err(|e| CliError::config(path, e.to_string()))
}

fn path_error<E: std::fmt::Display>(prefix: &str, e: serde_path_to_error::Error<E>) -> CliError {
    let inner = e.path().to_string();
    let path = match (prefix.is_empty(), inner.as_str()) {
        (true, p) => p.to_string(),
        (false, ".") => prefix.to_string(),
        (false, p) => format!("{prefix}.{p}"),
    };
    CliError::config(path, e.inner().to_string())
}

/// Fails with a configuration error at `path` unless `ok`.
pub fn require(ok: bool, path: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(path, message))
    }
}

/// Serializable description of a kernel family `x ↦ q_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `q_x = p` for every `x`, with `p` the given (normalized) service law.
    Stationary {
        /// Service law.
        service: DistSpec,
    },
    /// Finite-range modulated family on `[0, T)`.
    FiniteRange {
        /// Support length.
        t: f64,
        /// Modulation depth, `|a| < 1`.
        a: f64,
        /// Modulation frequency.
        omega: f64,
    },
    /// The escaping family whose walk jumps over `[−T, 0]`.
    Escaping {
        /// Interval length.
        t: f64,
    },
    /// Heavy-tailed family `(α − 1)(1 + t)^{−α}`.
    PowerTail {
        /// Tail exponent.
        alpha: f64,
    },
}

impl KernelSpec {
    /// Builds and validates the family, reporting failures at `path`.
    pub fn build(&self, path: &str) -> Result<KernelFamily> {
        let k = match self {
            KernelSpec::Stationary { service } => KernelFamily::Stationary(service_from(service, &format!("{path}.service"))?),
            KernelSpec::FiniteRange { t, a, omega } => KernelFamily::FiniteRange { t: *t, a: *a, omega: *omega },
            KernelSpec::Escaping { t } => KernelFamily::Escaping { t: *t },
            KernelSpec::PowerTail { alpha } => KernelFamily::PowerTail { alpha: *alpha },
        };
        k.validate().map_err(|e| CliError::config(path, e.to_string()))?;
        Ok(k)
    }
}
