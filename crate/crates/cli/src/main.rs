//! `phlab`: command-line front end of the queueing laboratory.
//!
//! ```text
//! phlab warmup --seed 3 --out runs/warmup
//! phlab rods --config configs/rods.json
//! phlab accept --only 3,4 --out runs/accept
//! phlab report runs/warmup runs/accept
//! ```
//!
//! Exit codes: 0 when every assertion passed, 1 on an assertion failure or a
//! runtime error, 2 on a configuration error.

use clap::{Args, Parser, Subcommand};
use phlab_cli::error::{CliError, EXIT_CONFIG};
use phlab_cli::{emit_report, ExperimentConfig, RunArtifact};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "phlab", version, about = "Mean-field queueing laboratory: experiments and acceptance suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed (overrides the configuration).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory (overrides the configuration).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for parallel replicas (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Hard-rod hit counting (`verify`, `blocked` or `count` mode).
    Rods(Common),
    /// Single FIFO server under inhomogeneous Poisson input.
    Gfp(Common),
    /// Closed network: Poisson-flow and decorrelation tests.
    Network(Common),
    /// Mean-field particle integration: conservation and relaxation.
    Nmp(Common),
    /// Uniform warm-up of the self-averaging equation.
    Warmup(Common),
    /// Renewal density and its limit.
    Renewal(Common),
    /// Monte Carlo self-averaging kernel against the simulation oracle.
    Selfavg(Common),
    /// Backward walk visit probability and kernel validation.
    Walk(Common),
    /// The full acceptance suite.
    Accept {
        #[command(flatten)]
        common: Common,
        /// Run only these criteria (comma-separated ids).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
    /// Lists the registered experiments.
    List,
    /// Combines artifact directories into one report.
    Report {
        /// Artifact directories.
        dirs: Vec<PathBuf>,
        /// Also write the JSON report to this file.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
}

fn build_config(verb: &str, common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::new(verb),
    };
    if cfg.experiment != verb {
        return Err(CliError::config("experiment", format!("configuration is for `{}`, command is `{verb}`", cfg.experiment)));
    }
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    Ok(cfg)
}

fn set_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::config("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("--threads", e.to_string()))?;
    }
    Ok(())
}

fn run(verb: &str, common: &Common, only: Option<&[u32]>) -> Result<i32, CliError> {
    set_threads(common.threads)?;
    let mut cfg = build_config(verb, common)?;
    if let Some(ids) = only.filter(|ids| !ids.is_empty()) {
        cfg.params = serde_json::json!({ "only": ids });
    }
    let artifact = phlab_cli::run_experiment(&cfg)?;
    print!("{}", artifact.summary());
    if verb == phlab_cli::accept::ACCEPT_EXPERIMENT {
        print!("{}", emit_report(std::slice::from_ref(&artifact))?.table());
    }
    println!("artifacts written to {}", cfg.out_dir().display());
    Ok(artifact.exit_code())
}

fn report(dirs: &[PathBuf], json: Option<&PathBuf>) -> Result<i32, CliError> {
    let artifacts = dirs.iter().map(|d| RunArtifact::load(d)).collect::<Result<Vec<_>, _>>()?;
    let r = emit_report(&artifacts)?;
    print!("{}", r.table());
    if let Some(path) = json {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(std::path::Path::new("."));
        let name = path.file_name().and_then(|n| n.to_str()).ok_or_else(|| CliError::config("--json", "needs a file name"))?;
        phlab_cli::artifact::write_atomic(dir, name, r.to_json()?.as_bytes())?;
    }
    Ok(r.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rods(c) => run("rods", c, None),
        Command::Gfp(c) => run("gfp", c, None),
        Command::Network(c) => run("network", c, None),
        Command::Nmp(c) => run("nmp", c, None),
        Command::Warmup(c) => run("warmup", c, None),
        Command::Renewal(c) => run("renewal", c, None),
        Command::Selfavg(c) => run("selfavg", c, None),
        Command::Walk(c) => run("walk", c, None),
        Command::Accept { common, only } => run(phlab_cli::accept::ACCEPT_EXPERIMENT, common, Some(only)),
        Command::List => {
            for e in phlab_cli::registry::REGISTRY {
                println!("{:<8} {}\n         outputs: {}", e.name, e.claim, e.outputs);
            }
            Ok(0)
        }
        Command::Report { dirs, json } => report(dirs, json.as_ref()),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("phlab: {e}");
            let code = e.exit_code();
            debug_assert!(code == EXIT_CONFIG || code == 1);
            ExitCode::from(code as u8)
        }
    }
}
