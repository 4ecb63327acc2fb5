//! Registry of experiments: each entry maps a command to the statement it
//! checks.

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiments::Outcome;

/// A registered experiment.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentInfo {
    /// Command and configuration name.
    pub name: &'static str,
    /// Statement the experiment checks.
    pub claim: &'static str,
    /// Data files produced.
    pub outputs: &'static str,
    /// Implementation.
    pub(crate) run: fn(&ExperimentConfig) -> Result<Outcome>,
}

/// Every registered experiment.
pub const REGISTRY: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "rods",
        claim: "the X-hit count over all n! length assignments equals n! for generic rods",
        outputs: "totals.csv | counts.csv, count.json",
        run: crate::experiments::rods,
    },
    ExperimentInfo {
        name: "gfp",
        claim: "event-driven FIFO server under inhomogeneous Poisson input (departure rate, idle probabilities)",
        outputs: "path.csv, flow.csv, replicas.json",
        run: crate::experiments::gfp,
    },
    ExperimentInfo {
        name: "network",
        claim: "in a large closed network the input to a node is Poisson and nodes decorrelate",
        outputs: "pooled_distribution.csv, tagged_ks.csv, flow_node0.csv, pooled.json",
        run: crate::experiments::network,
    },
    ExperimentInfo {
        name: "nmp",
        claim: "the mean-field process conserves the mean queue and relaxes to a constant rate",
        outputs: "rates.csv, snapshots.csv, relaxation.json",
        run: crate::experiments::nmp,
    },
    ExperimentInfo {
        name: "warmup",
        claim: "uniform warm-up: f jumps from 1 to 1/2 at 0 and tends to 2/3",
        outputs: "f.csv, summary.json",
        run: crate::experiments::warmup,
    },
    ExperimentInfo {
        name: "renewal",
        claim: "the renewal density tends to the inverse mean service time",
        outputs: "renewal.csv, summary.json",
        run: crate::experiments::renewal,
    },
    ExperimentInfo {
        name: "selfavg",
        claim: "the departure rate is the convolution of the input rate with a probability kernel",
        outputs: "kernel.csv, bounds.json, summary.json",
        run: crate::experiments::selfavg,
    },
    ExperimentInfo {
        name: "walk",
        claim: "the backward walk driven by the kernel family visits the history interval",
        outputs: "walk.json, kernel_report.json",
        run: crate::experiments::walk,
    },
    ExperimentInfo {
        name: crate::accept::ACCEPT_EXPERIMENT,
        claim: "the full acceptance suite",
        outputs: "acceptance.json",
        run: crate::accept::run_from_config,
    },
];

/// Looks up an experiment by name.
pub fn lookup(name: &str) -> Option<&'static ExperimentInfo> {
    REGISTRY.iter().find(|e| e.name == name)
}

/// Comma-separated list of registered names.
pub fn names() -> String {
    REGISTRY.iter().map(|e| e.name).collect::<Vec<_>>().join(", ")
}
