//! Experiment implementations behind the registry.
//!
//! Each experiment deserializes its typed parameter block, validates it
//! completely, and only then runs; the output is a set of data files plus
//! assertion outcomes.

use crate::artifact::{Assertion, DataFile};
use crate::config::{require, ExperimentConfig, KernelSpec};
use crate::error::{Context, Result};
use phlab_core::dists::{GridDensity, ServiceDistribution};
use phlab_core::nmp::{conservation_check, relaxation_estimate, c_from_q, CFromQOptions, EnsembleInit, EvolveOptions, ParticleEnsemble};
use phlab_core::queue_sim::{
    gfp_replicas, poisson_flow_test, simulate_gfp, simulate_network, Intensity, NetworkConfig, NetworkInit, ServerState,
};
use phlab_core::rods::{count_hits_total_flagged, factorial, verify_blocked_sweep, verify_sweep, VerifyRow};
use phlab_core::selfavg::{
    bound_probe_points, closed_form_uniform, exit_rate_selfavg, kernel_bounds_check, renewal_density, residual,
    solve_forward, validate_kernel_family, visit_probability, warmup_history, warmup_kernel, SelfAvgConfig, ValidateConfig,
};
use serde::{Deserialize, Serialize};

/// Data files and assertion outcomes of one experiment.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    /// Data files.
    pub files: Vec<DataFile>,
    /// Assertion outcomes.
    pub assertions: Vec<Assertion>,
}

impl Outcome {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push(DataFile { name: name.to_string(), contents });
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.file(name, text + "\n");
        Ok(())
    }

    fn check(&mut self, id: &str, description: &str, pass: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion::new(id, description, pass, detail));
    }
}

// ---------------------------------------------------------------- rods

/// What the `rods` experiment does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RodsMode {
    /// Random generic instances: every total must equal `n!`.
    #[default]
    Verify,
    /// Random blocked instances satisfying `L + Σl < T`.
    Blocked,
    /// Per-permutation counts of one explicit instance.
    Count,
}

/// Parameters of the `rods` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RodsParams {
    /// Mode.
    #[serde(default)]
    pub mode: RodsMode,
    /// Largest rod count of the sweeps (1..=8).
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Instances per rod count.
    #[serde(default = "default_instances")]
    pub instances: usize,
    /// Fixed rod positions of the `count` mode.
    #[serde(default = "default_fixed_x")]
    pub fixed_x: Vec<f64>,
    /// Length multiset of the `count` mode (one more than `fixed_x`).
    #[serde(default = "default_lengths")]
    pub lengths: Vec<f64>,
}

fn default_n_max() -> usize {
    6
}
fn default_instances() -> usize {
    1000
}
fn default_fixed_x() -> Vec<f64> {
    vec![-3.0]
}
fn default_lengths() -> Vec<f64> {
    vec![1.0, 10.0]
}

fn sweep_csv(rows: &[VerifyRow]) -> String {
    let mut s = String::from("n,instance,total,expected,pass\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.n, r.instance, r.total, r.expected, r.pass));
    }
    s
}

pub(crate) fn rods(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: RodsParams = cfg.params()?;
    match p.mode {
        RodsMode::Verify | RodsMode::Blocked => {
            require((1..=8).contains(&p.n_max), "params.n_max", "must lie in 1..=8")?;
            require(p.instances >= 1, "params.instances", "must be at least 1")?;
        }
        RodsMode::Count => {
            require(!p.lengths.is_empty() && p.lengths.len() <= 8, "params.lengths", "need between 1 and 8 lengths")?;
            require(p.fixed_x.len() + 1 == p.lengths.len(), "params.fixed_x", "need exactly one fewer position than lengths")?;
        }
    }
    let mut out = Outcome::default();
    match p.mode {
        RodsMode::Verify | RodsMode::Blocked => {
            let rows = if p.mode == RodsMode::Verify {
                verify_sweep(p.n_max, p.instances, cfg.seed()).context("rod sweep")?
            } else {
                verify_blocked_sweep(p.n_max, p.instances, cfg.seed()).context("blocked rod sweep")?
            };
            out.file("totals.csv", sweep_csv(&rows));
            for n in 1..=p.n_max {
                let of_n: Vec<&VerifyRow> = rows.iter().filter(|r| r.n == n).collect();
                let ok = of_n.iter().filter(|r| r.pass).count();
                out.check(
                    &format!("n{n}"),
                    &format!("every total equals {n}! = {}", factorial(n)),
                    ok == of_n.len(),
                    format!("{ok}/{} instances", of_n.len()),
                );
            }
        }
        RodsMode::Count => {
            let hc = count_hits_total_flagged(&p.fixed_x, &p.lengths).context("rod count")?;
            let mut s = String::from("permutation,count\n");
            for pc in &hc.per_permutation {
                let perm: Vec<String> = pc.perm.iter().map(|i| i.to_string()).collect();
                s.push_str(&format!("{},{}\n", perm.join(" "), pc.count));
            }
            out.file("counts.csv", s);
            out.json("count.json", &hc)?;
            let n = p.lengths.len();
            let counts: Vec<usize> = hc.per_permutation.iter().map(|c| c.count).collect();
            out.check(
                "total",
                &format!("total equals {n}! = {}", factorial(n)),
                !hc.degenerate && hc.total == factorial(n),
                format!("total {}, per permutation {counts:?}", hc.total),
            );
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- gfp

/// Parameters of the `gfp` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GfpParams {
    /// Arrival intensity.
    #[serde(default = "default_intensity")]
    pub intensity: Intensity,
    /// Initial state.
    #[serde(default = "ServerState::empty")]
    pub init: ServerState,
    /// Run horizon.
    #[serde(default = "default_gfp_horizon")]
    pub horizon: f64,
    /// Replicas of the departure-rate estimate.
    #[serde(default = "default_gfp_replicas")]
    pub replicas: u64,
    /// Width of the departure bin ending at the horizon.
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    /// Times at which the idle probability is estimated.
    #[serde(default)]
    pub probes: Vec<f64>,
}

fn default_intensity() -> Intensity {
    Intensity::Sinusoid { level: 0.3, amplitude: 1.0, omega: 1.0, phase: 0.0 }
}
fn default_gfp_horizon() -> f64 {
    20.0
}
fn default_gfp_replicas() -> u64 {
    100_000
}
fn default_bin_width() -> f64 {
    0.1
}

pub(crate) fn gfp(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: GfpParams = cfg.params()?;
    let d = cfg.service()?;
    p.intensity.validate().map_err(|e| crate::error::CliError::config("params.intensity", e.to_string()))?;
    p.init.validate().map_err(|e| crate::error::CliError::config("params.init", e.to_string()))?;
    require(p.horizon > 0.0 && p.horizon.is_finite(), "params.horizon", "must be positive and finite")?;
    require(p.replicas >= 2, "params.replicas", "need at least two replicas")?;
    require(p.bin_width > 0.0 && p.bin_width <= p.horizon, "params.bin_width", "must lie in (0, horizon]")?;
    require(p.probes.iter().all(|&t| t >= 0.0 && t <= p.horizon), "params.probes", "probe times must lie in [0, horizon]")?;

    let mut out = Outcome::default();
    let (traj, log) = simulate_gfp(&p.init, &p.intensity, &d, p.horizon, cfg.seed()).context("GFP path")?;
    let mut s = String::from("t,n\n");
    for (t, n) in traj.times.iter().zip(&traj.n) {
        s.push_str(&format!("{t},{n}\n"));
    }
    out.file("path.csv", s);
    out.file("flow.csv", log.to_csv());
    let final_n = *traj.n.last().unwrap_or(&p.init.n) as i64;
    let balance = p.init.n as i64 + log.arrivals.len() as i64 - log.departures.len() as i64;
    out.check(
        "balance",
        "final count = initial + arrivals − departures",
        final_n == balance,
        format!("final {final_n}, balance {balance}"),
    );
    let bin = (p.horizon - p.bin_width, p.horizon);
    let sum = gfp_replicas(&p.init, &p.intensity, &d, p.horizon, bin, &p.probes, p.replicas, cfg.seed()).context("GFP replicas")?;
    out.json("replicas.json", &sum)?;
    let in_range = sum.rate.value >= 0.0 && sum.idle.iter().all(|e| (0.0..=1.0).contains(&e.value));
    out.check(
        "ranges",
        "departure rate ≥ 0 and idle probabilities in [0, 1]",
        in_range,
        format!("rate {:.5} ± {:.5}", sum.rate.value, sum.rate.std_error),
    );
    Ok(out)
}

// ---------------------------------------------------------------- network

/// Parameters of the `network` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkParams {
    /// Number of servers.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Number of customers.
    #[serde(default = "default_m")]
    pub n: usize,
    /// Run horizon.
    #[serde(default = "default_net_horizon")]
    pub horizon: f64,
    /// Discarded initial period.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    /// Number of tagged nodes (nodes `0..tagged`).
    #[serde(default = "default_tagged")]
    pub tagged: usize,
    /// Sampling interval of the pairwise correlation.
    #[serde(default = "default_corr_dt")]
    pub corr_dt: f64,
    /// Initial placement.
    #[serde(default)]
    pub init: NetworkInit,
    /// Significance level of the per-node KS tests.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Required fraction of tagged nodes passing the KS test.
    #[serde(default = "default_pass_fraction")]
    pub min_pass_fraction: f64,
    /// Bound on the pooled pair correlation.
    #[serde(default = "default_max_corr")]
    pub max_abs_corr: f64,
}

fn default_m() -> usize {
    2000
}
fn default_net_horizon() -> f64 {
    500.0
}
fn default_burn_in() -> f64 {
    10.0
}
fn default_tagged() -> usize {
    40
}
fn default_corr_dt() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    0.01
}
fn default_pass_fraction() -> f64 {
    0.95
}
fn default_max_corr() -> f64 {
    0.05
}

/// Per-node Poisson-flow verdicts of a network run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub(crate) struct NodeKs {
    pub node: usize,
    pub interarrivals: usize,
    pub rate: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
    pub error: Option<String>,
}

/// KS verdict of each tagged node; a node with too few arrivals fails.
pub(crate) fn tagged_ks(run: &phlab_core::queue_sim::NetworkRun, burn_in: f64, alpha: f64) -> Vec<NodeKs> {
    run.logs
        .iter()
        .enumerate()
        .map(|(node, log)| match poisson_flow_test(log, burn_in, 4) {
            Ok(ft) => NodeKs {
                node,
                interarrivals: ft.interarrivals,
                rate: ft.rate,
                statistic: ft.ks.statistic,
                p_value: ft.ks.p_value,
                pass: ft.ks.p_value >= alpha,
                error: None,
            },
            Err(e) => NodeKs {
                node,
                interarrivals: log.arrivals.iter().filter(|&&t| t >= burn_in).count().saturating_sub(1),
                rate: f64::NAN,
                statistic: f64::NAN,
                p_value: f64::NAN,
                pass: false,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

pub(crate) fn network(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: NetworkParams = cfg.params()?;
    let d = cfg.service()?;
    require(p.m >= 2, "params.m", "need at least two servers")?;
    require(p.n >= 1, "params.n", "need at least one customer")?;
    require(p.horizon > 0.0 && p.horizon.is_finite(), "params.horizon", "must be positive and finite")?;
    require(p.burn_in >= 0.0 && p.burn_in < p.horizon, "params.burn_in", "must lie in [0, horizon)")?;
    require(p.tagged <= p.m, "params.tagged", "cannot exceed the number of servers")?;
    require(p.corr_dt > 0.0, "params.corr_dt", "must be positive")?;
    require(p.alpha > 0.0 && p.alpha < 1.0, "params.alpha", "must lie in (0, 1)")?;
    require((0.0..=1.0).contains(&p.min_pass_fraction), "params.min_pass_fraction", "must lie in [0, 1]")?;

    let net = NetworkConfig {
        m: p.m,
        n: p.n,
        horizon: p.horizon,
        burn_in: p.burn_in,
        tagged: (0..p.tagged).collect(),
        corr_dt: p.corr_dt,
        init: p.init,
    };
    let run = simulate_network(&net, &d, cfg.seed()).context("network simulation")?;
    let mut out = Outcome::default();
    let mut s = String::from("n,probability\n");
    for (k, pr) in &run.pooled.dist {
        s.push_str(&format!("{k},{pr}\n"));
    }
    out.file("pooled_distribution.csv", s);
    let ks = tagged_ks(&run, p.burn_in, p.alpha);
    let mut s = String::from("node,interarrivals,rate,ks_statistic,p_value,pass\n");
    for k in &ks {
        s.push_str(&format!("{},{},{},{},{},{}\n", k.node, k.interarrivals, k.rate, k.statistic, k.p_value, k.pass));
    }
    out.file("tagged_ks.csv", s);
    if let Some(log) = run.logs.first() {
        out.file("flow_node0.csv", log.to_csv());
    }
    out.json(
        "pooled.json",
        &serde_json::json!({ "pooled": run.pooled, "events": run.events, "conservation_audits": run.conservation_audits }),
    )?;
    if !ks.is_empty() {
        let passed = ks.iter().filter(|k| k.pass).count();
        out.check(
            "poisson_flow",
            "tagged-node interarrivals pass the KS test in enough nodes",
            passed as f64 >= p.min_pass_fraction * ks.len() as f64,
            format!("{passed}/{} at α = {}", ks.len(), p.alpha),
        );
    }
    let corr = run.pooled.corr.unwrap_or(f64::NAN);
    out.check("chaos", "pooled pair correlation is small", corr.abs() < p.max_abs_corr, format!("ρ = {corr:.5}"));
    let mean = run.pooled.mean_queue;
    let expected = p.n as f64 / p.m as f64;
    out.check(
        "conservation",
        "pooled mean queue equals N/M",
        (mean - expected).abs() < 1e-9 * expected.max(1.0),
        format!("{mean} vs {expected} ({} audits)", run.conservation_audits),
    );
    Ok(out)
}

// ---------------------------------------------------------------- nmp

/// Parameters of the `nmp` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmpParams {
    /// Ensemble size.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Initial ensemble.
    #[serde(default = "default_ensemble_init")]
    pub init: EnsembleInit,
    /// Integration options.
    #[serde(default = "default_evolve")]
    pub evolve: EvolveOptions,
    /// Tail fraction of the relaxation summary.
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
    /// Bound on the trailing oscillation of `λ̂`.
    #[serde(default = "default_osc_tol")]
    pub osc_tol: f64,
    /// Compare the tail rate with the stationary rate of this mean queue.
    #[serde(default)]
    pub q: Option<f64>,
    /// Tolerance of that comparison.
    #[serde(default = "default_osc_tol")]
    pub c_tol: f64,
}

fn default_k() -> usize {
    100_000
}
fn default_ensemble_init() -> EnsembleInit {
    EnsembleInit::Burst { n: 1 }
}
fn default_evolve() -> EvolveOptions {
    EvolveOptions::with_horizon(120.0)
}
fn default_tail() -> f64 {
    0.25
}
fn default_osc_tol() -> f64 {
    0.02
}

pub(crate) fn nmp(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: NmpParams = cfg.params()?;
    let d = cfg.service()?;
    require(p.k >= 1, "params.k", "need at least one particle")?;
    require(p.evolve.horizon > 0.0 && p.evolve.horizon.is_finite(), "params.evolve.horizon", "must be positive and finite")?;
    require(p.evolve.dt > 0.0 && p.evolve.dt <= 0.01, "params.evolve.dt", "must lie in (0, 0.01]")?;
    require(p.tail_fraction > 0.0 && p.tail_fraction <= 1.0, "params.tail_fraction", "must lie in (0, 1]")?;
    if let Some(q) = p.q {
        require(q > 0.0 && q.is_finite(), "params.q", "must be positive")?;
    }
    let mut e = ParticleEnsemble::new(d.clone(), &p.init, p.k).map_err(|e| crate::error::CliError::config("params.init", e.to_string()))?;
    let ev = e.evolve(&p.evolve, cfg.seed()).context("particle integration")?;
    let mut out = Outcome::default();
    out.file("rates.csv", ev.rates.to_csv());
    let mut s = String::from("t,mean_queue,idle_frac,c2\n");
    for sn in &ev.snapshots {
        s.push_str(&format!("{},{},{},{}\n", sn.t, sn.mean_queue, sn.idle_frac, sn.c2));
    }
    out.file("snapshots.csv", s);
    let cons = conservation_check(&ev.snapshots).context("conservation check")?;
    out.check(
        "conservation",
        "mean-queue drift stays below 4σ_K",
        cons.pass,
        format!("drift {:.3e}, σ_K {:.3e}, ratio {:.2}", cons.max_drift, cons.sigma, cons.ratio),
    );
    out.check("cap", "binned rates respect the hazard cap", ev.cap_violations == 0, format!("{} violations", ev.cap_violations));
    let rel = relaxation_estimate(&ev.rates, &ev.snapshots, p.tail_fraction).context("relaxation summary")?;
    out.json("relaxation.json", &serde_json::json!({ "relaxation": rel, "conservation": { "max_drift": cons.max_drift, "sigma": cons.sigma } }))?;
    out.check("oscillation", "trailing oscillation of λ̂ is small", rel.oscillation < p.osc_tol, format!("{:.4}", rel.oscillation));
    out.check("idle", "tail idle fraction is positive", rel.tail_idle > 0.0, format!("{:.4}", rel.tail_idle));
    out.check(
        "subcritical",
        "tail and time averages of λ̂ stay below 1",
        rel.c_hat.value < 1.0 && rel.time_average < 1.0,
        format!("tail {:.4}, time average {:.4}", rel.c_hat.value, rel.time_average),
    );
    if let Some(q) = p.q {
        let c = c_from_q(q, &d, &CFromQOptions { seed: cfg.seed(), ..Default::default() }).context("c from q")?;
        out.check(
            "c_from_q",
            "tail rate matches the stationary rate of the conserved mean queue",
            (rel.c_hat.value - c.c).abs() < p.c_tol,
            format!("ĉ {:.4} vs c(q) {:.4}", rel.c_hat.value, c.c),
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------- warmup

/// Parameters of the `warmup` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmupParams {
    /// Grid step.
    #[serde(default = "default_warm_h")]
    pub h: f64,
    /// Right end of the solution range.
    #[serde(default = "default_warm_x")]
    pub x_max: f64,
}

fn default_warm_h() -> f64 {
    1e-3
}
fn default_warm_x() -> f64 {
    50.0
}

/// Values reported by the `warmup` experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarmupSummary {
    /// `f(0⁺)`.
    pub f0: f64,
    /// `f(X_max)`.
    pub f_tail: f64,
    /// Fixed-point residual.
    pub residual: f64,
    /// `sup |f − closed form|` on the grid nodes of `[0, min(10, X_max)]`.
    pub closed_form_sup_diff: f64,
}

/// Sup difference between a solved warm-up curve and the closed form on the
/// grid nodes of `[0, x_end]`.
pub(crate) fn closed_form_gap(f: &phlab_core::selfavg::RateFunction, x_end: f64) -> Result<f64> {
    let z = f.zero_index().unwrap_or(0);
    let mut worst: f64 = 0.0;
    for i in z..f.len() {
        let x = f.x(i);
        if x > x_end + 1e-12 {
            break;
        }
        // f(0) holds the right limit 1/2; the closed form gives the left
        // limit 1 at exactly 0, so compare with the limit x → 0⁺ there.
        let exact = if i == z { 0.5 } else { closed_form_uniform(x).context("closed form")? };
        worst = worst.max((f.value(i) - exact).abs());
    }
    Ok(worst)
}

pub(crate) fn warmup(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: WarmupParams = cfg.params()?;
    require(p.h > 0.0 && p.h <= 0.01, "params.h", "must lie in (0, 0.01]")?;
    require(p.x_max >= 1.0 && p.x_max <= 700.0, "params.x_max", "must lie in [1, 700]")?;
    let hist = warmup_history(p.h).context("warm-up history")?;
    let k = warmup_kernel().context("warm-up kernel")?;
    let f = solve_forward(&hist, &k, p.x_max).context("forward march")?;
    let res = residual(&f, &k).context("residual")?;
    let z = f.zero_index().unwrap_or(0);
    let summary = WarmupSummary {
        f0: f.value(z),
        f_tail: f.value(f.len() - 1),
        residual: res,
        closed_form_sup_diff: closed_form_gap(&f, p.x_max.min(10.0))?,
    };
    let mut out = Outcome::default();
    out.file("f.csv", f.to_csv());
    out.json("summary.json", &summary)?;
    out.check("jump", "f(0⁺) = 1/2", (summary.f0 - 0.5).abs() < 1e-9, format!("{:.12}", summary.f0));
    out.check("residual", "fixed-point residual below 1e-8", res < 1e-8, format!("{res:.3e}"));
    out.check(
        "closed_form",
        "agreement with the closed form on [0, 10]",
        summary.closed_form_sup_diff < 1e-6,
        format!("{:.3e}", summary.closed_form_sup_diff),
    );
    if p.x_max >= 50.0 {
        out.check("limit", "f(X_max) within 1e-4 of 2/3", (summary.f_tail - 2.0 / 3.0).abs() < 1e-4, format!("{:.8}", summary.f_tail));
    }
    Ok(out)
}

// ---------------------------------------------------------------- renewal

/// Parameters of the `renewal` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalParams {
    /// Grid step.
    #[serde(default = "default_warm_h")]
    pub h: f64,
    /// Right end of the range.
    #[serde(default = "default_renewal_x")]
    pub x_max: f64,
    /// Relative tolerance of `s(X_max)` against `1/m`.
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_renewal_x() -> f64 {
    30.0
}
fn default_rel_tol() -> f64 {
    0.01
}

pub(crate) fn renewal(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: RenewalParams = cfg.params()?;
    // The renewal limit is 1/m for the law as given, so it is not normalized.
    let d = match &cfg.service {
        None => ServiceDistribution::exponential(),
        Some(spec) => ServiceDistribution::raw(spec.clone()).map_err(|e| crate::error::CliError::config("service", e.to_string()))?,
    };
    require(p.h > 0.0 && p.h <= d.mean() / 100.0, "params.h", "must lie in (0, m/100]")?;
    require(p.x_max > 0.0 && p.x_max.is_finite(), "params.x_max", "must be positive")?;
    require(p.rel_tol > 0.0, "params.rel_tol", "must be positive")?;
    let grid = GridDensity::from_distribution(&d, p.h, p.x_max).context("service grid")?;
    let r = renewal_density(&grid, p.x_max, None).context("renewal series")?;
    let mut s = String::from("x,value\n");
    for i in 0..r.density.len() {
        s.push_str(&format!("{},{}\n", r.density.t(i), r.density.right(i)));
    }
    let mut out = Outcome::default();
    out.file("renewal.csv", s);
    out.json(
        "summary.json",
        &serde_json::json!({ "s_at_end": r.s_at_end, "inv_mean": r.inv_mean, "terms": r.terms, "tail_bound": r.tail_bound }),
    )?;
    let rel = (r.s_at_end - r.inv_mean).abs() / r.inv_mean;
    out.check("limit", "s(X_max) approaches 1/m", rel < p.rel_tol, format!("s = {:.6}, 1/m = {:.6}", r.s_at_end, r.inv_mean));
    out.check("series", "omitted convolution powers are negligible", r.tail_bound < 1e-8, format!("{:.2e}", r.tail_bound));
    Ok(out)
}

// ---------------------------------------------------------------- selfavg

/// Parameters of the `selfavg` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfAvgParams {
    /// Input intensity on `[0, y]`.
    #[serde(default = "default_intensity")]
    pub intensity: Intensity,
    /// Target time.
    #[serde(default = "default_y")]
    pub y: f64,
    /// Monte Carlo realizations of the kernel estimate.
    #[serde(default = "default_samples")]
    pub samples: u64,
    /// Simulation replicas of the departure-rate oracle.
    #[serde(default = "default_samples")]
    pub sim_replicas: u64,
    /// Number of bound probe points.
    #[serde(default = "default_probes")]
    pub probes: usize,
}

fn default_y() -> f64 {
    5.0
}
fn default_samples() -> u64 {
    200_000
}
fn default_probes() -> usize {
    20
}

/// Half-width of the departure bin used by the simulation oracle.
pub(crate) const SIM_HALF_BIN: f64 = 0.05;

/// Self-averaging estimate against the GFP simulation oracle.
pub(crate) struct SelfAvgRun {
    pub ke: phlab_core::selfavg::KernelEstimate,
    pub sim: phlab_core::queue_sim::GfpReplicaSummary,
    pub bounds: phlab_core::selfavg::BoundsReport,
    pub sigma: f64,
}

pub(crate) fn selfavg_run(lambda: &Intensity, d: &ServiceDistribution, y: f64, samples: u64, replicas: u64, probes: usize, seed: u64) -> Result<SelfAvgRun> {
    let ke = exit_rate_selfavg(lambda, d, &SelfAvgConfig::new(y, samples), seed).context("self-averaging kernel")?;
    let probe_t = bound_probe_points(&ke, probes);
    let idle_t: Vec<f64> = probe_t.iter().map(|t| y - t).collect();
    let sim = gfp_replicas(
        &ServerState::empty(),
        lambda,
        d,
        y + SIM_HALF_BIN,
        (y - SIM_HALF_BIN, y + SIM_HALF_BIN),
        &idle_t,
        replicas,
        phlab_core::rng::child_seed(seed, 1),
    )
    .context("GFP oracle")?;
    let bounds = kernel_bounds_check(&ke, d, &sim.idle, lambda, &probe_t, y).context("kernel bounds")?;
    let sigma = (ke.b_direct.std_error.powi(2) + sim.rate.std_error.powi(2)).sqrt();
    Ok(SelfAvgRun { ke, sim, bounds, sigma })
}

pub(crate) fn selfavg(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: SelfAvgParams = cfg.params()?;
    let d = cfg.service()?;
    p.intensity.validate().map_err(|e| crate::error::CliError::config("params.intensity", e.to_string()))?;
    require(p.y > SIM_HALF_BIN && p.y.is_finite(), "params.y", "must exceed the oracle bin half-width 0.05")?;
    require(p.samples >= 2, "params.samples", "need at least two realizations")?;
    require(p.sim_replicas >= 2, "params.sim_replicas", "need at least two replicas")?;
    require(p.probes >= 1, "params.probes", "need at least one probe")?;
    let run = selfavg_run(&p.intensity, &d, p.y, p.samples, p.sim_replicas, p.probes, cfg.seed())?;
    let mut out = Outcome::default();
    out.file("kernel.csv", run.ke.to_csv());
    out.json("bounds.json", &run.bounds)?;
    out.json(
        "summary.json",
        &serde_json::json!({
            "b_selfavg": run.ke.b_direct, "b_convolved": run.ke.b_conv, "b_sim": run.sim.rate,
            "mass": run.ke.mass, "n_max": run.ke.n_max, "tail_count": run.ke.tail_count, "warnings": run.ke.warnings,
        }),
    )?;
    let gap = run.ke.b_direct.value - run.sim.rate.value;
    out.check(
        "identity",
        "self-averaged rate within 3σ of the simulated departure rate",
        gap.abs() < 3.0 * run.sigma,
        format!("{:.5} vs {:.5} (z = {:.2})", run.ke.b_direct.value, run.sim.rate.value, gap / run.sigma),
    );
    out.check(
        "triangle",
        "direct and convolved rates agree",
        (run.ke.b_direct.value - run.ke.b_conv).abs() < 1e-12,
        format!("{:.3e}", (run.ke.b_direct.value - run.ke.b_conv).abs()),
    );
    out.check("mass", "kernel mass within 1e-3 of 1", (run.ke.mass - 1.0).abs() < 1e-3, format!("{:.6}", run.ke.mass));
    let ok = run.bounds.probes.iter().filter(|b| b.lower_ok && b.upper_ok).count();
    out.check(
        "bounds",
        "kernel within its lower/upper bounds and cap",
        run.bounds.all_pass,
        format!("{ok}/{} probes, sup q̂ {:.3} vs cap {:.3}", run.bounds.probes.len(), run.bounds.sup_q, run.bounds.cap),
    );
    Ok(out)
}

// ---------------------------------------------------------------- walk

/// Parameters of the `walk` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkParams {
    /// Kernel family.
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    /// Start of the walk.
    #[serde(default = "default_walk_x")]
    pub x: f64,
    /// Length of the target interval `[−T, 0]`.
    #[serde(default = "default_walk_t")]
    pub t: f64,
    /// Number of walks.
    #[serde(default = "default_reps")]
    pub reps: u64,
    /// Assert the visit probability is at least this.
    #[serde(default)]
    pub min_probability: Option<f64>,
    /// Assert the visit probability is at most this.
    #[serde(default)]
    pub max_probability: Option<f64>,
    /// Probe positions of the kernel validation (skipped when empty).
    #[serde(default)]
    pub probes: Vec<f64>,
}

fn default_kernel() -> KernelSpec {
    KernelSpec::Stationary { service: phlab_core::dists::DistSpec::Exponential { mean: 1.0 } }
}
fn default_walk_x() -> f64 {
    30.0
}
fn default_walk_t() -> f64 {
    20.0
}
fn default_reps() -> u64 {
    10_000
}

pub(crate) fn walk(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p: WalkParams = cfg.params()?;
    let k = p.kernel.build("params.kernel")?;
    require(p.t > 0.0 && p.t.is_finite(), "params.t", "must be positive")?;
    require(p.x.is_finite() && p.x >= -p.t, "params.x", "must be finite and ≥ −T")?;
    require(p.reps >= 2, "params.reps", "need at least two walks")?;
    let v = visit_probability(&k, p.x, p.t, p.reps, cfg.seed()).context("walk")?;
    let mut out = Outcome::default();
    out.json("walk.json", &v)?;
    let est = v.probability.value;
    let detail = format!("{est:.4} ({} visits, {} budget misses, {} underflow misses)", v.visits, v.budget_misses, v.underflow_misses);
    if let Some(lo) = p.min_probability {
        out.check("visit_min", &format!("visit probability ≥ {lo}"), est >= lo, detail.clone());
    }
    if let Some(hi) = p.max_probability {
        out.check("visit_max", &format!("visit probability ≤ {hi}"), est <= hi, detail.clone());
    }
    if !p.probes.is_empty() {
        let report = validate_kernel_family(&k, &p.probes, &ValidateConfig::default()).context("kernel validation")?;
        out.json("kernel_report.json", &report)?;
    }
    Ok(out)
}
