//! Exact event-driven simulation of the single-server General Flow Process
//! (a FIFO server fed by an inhomogeneous Poisson stream) and of the closed
//! `M`-server, `N`-customer network with uniform routing. Also provides
//! flow statistics, a Poisson-flow test, stationary single-server estimates
//! and the coupled monotone (red/blue) construction.
//!
//! Service durations are sampled when a customer's identity is created, i.e.
//! exactly, not by hazard discretization. Departure epochs of a FIFO server
//! follow from the recursion `D_k = max(A_k, D_{k−1}) + S_k`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dists::ServiceDistribution;
use crate::error::{Error, Result};
use crate::rng::{component, stream, Stream};
use crate::stats::{batch_means, ks_test, mean_var, Estimate, KsResult};

/// State of a single server: `n` customers (including the one in service),
/// elapsed service time `τ` and, optionally, the already-sampled remaining
/// service time of the customer in service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerState {
    /// Customers in the system.
    pub n: u32,
    /// Elapsed service time of the customer in service (absent iff `n = 0`).
    pub tau: Option<f64>,
    /// Remaining service time; when absent for a busy server it is drawn
    /// from the residual law at `τ` when a simulation starts.
    pub remaining: Option<f64>,
}

impl ServerState {
    /// The empty state.
    pub const fn empty() -> Self {
        Self { n: 0, tau: None, remaining: None }
    }

    /// `n ≥ 1` customers with the one in service having been served for `τ`.
    pub fn busy(n: u32, tau: f64) -> Result<Self> {
        let s = Self { n, tau: Some(tau), remaining: None };
        s.validate()?;
        Ok(s)
    }

    /// Checks `n = 0 ⟺ τ absent`, `τ ≥ 0` and `remaining > 0`.
    pub fn validate(&self) -> Result<()> {
        match (self.n, self.tau, self.remaining) {
            (0, None, None) => Ok(()),
            (0, _, _) => Err(Error::Config("an empty server has no elapsed or remaining service".into())),
            (_, None, _) => Err(Error::Config("a busy server needs an elapsed service time".into())),
            (_, Some(t), r) => {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(Error::Config("elapsed service time must be finite and ≥ 0".into()));
                }
                if let Some(r) = r {
                    if !(r > 0.0 && r.is_finite()) {
                        return Err(Error::Config("remaining service time must be positive".into()));
                    }
                }
                Ok(())
            }
        }
    }

    /// Remaining service of the customer in service, sampled from the
    /// residual law if not fixed.
    fn draw_remaining<R: Rng + ?Sized>(&self, d: &ServiceDistribution, rng: &mut R) -> Result<Option<f64>> {
        match (self.n, self.remaining, self.tau) {
            (0, _, _) => Ok(None),
            (_, Some(r), _) => Ok(Some(r)),
            (_, None, Some(tau)) => Ok(Some(d.residual(tau)?.sample(rng))),
            (_, None, None) => Err(Error::Config("a busy server needs an elapsed service time".into())),
        }
    }
}

/// Arrival intensity `λ(t) ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Intensity {
    /// `λ(t) = rate`.
    Constant {
        /// Rate.
        rate: f64,
    },
    /// `λ(t) = level · (1 + amplitude · sin(omega·t + phase))`, `|amplitude| ≤ 1`.
    Sinusoid {
        /// Mean level.
        level: f64,
        /// Relative amplitude.
        amplitude: f64,
        /// Angular frequency.
        omega: f64,
        /// Phase.
        #[serde(default)]
        phase: f64,
    },
    /// Piecewise-linear interpolation of `(t, values)`; zero outside `[t₀, t_last]`.
    Table {
        /// Increasing abscissae.
        t: Vec<f64>,
        /// Nonnegative values.
        values: Vec<f64>,
    },
}

impl Intensity {
    /// Validates parameters (finite, nonnegative, bounded).
    pub fn validate(&self) -> Result<()> {
        match self {
            Intensity::Constant { rate } => {
                if !(*rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::Config("constant intensity must be finite and ≥ 0".into()));
                }
            }
            Intensity::Sinusoid { level, amplitude, omega, phase } => {
                if !(*level >= 0.0 && level.is_finite()) || !(amplitude.abs() <= 1.0) || !omega.is_finite() || !phase.is_finite() {
                    return Err(Error::Config("sinusoid intensity needs level ≥ 0, |amplitude| ≤ 1, finite omega and phase".into()));
                }
            }
            Intensity::Table { t, values } => {
                if t.len() != values.len() || t.is_empty() {
                    return Err(Error::Config("intensity table needs matching nonempty columns".into()));
                }
                if t.windows(2).any(|w| !(w[1] > w[0])) || t.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Config("intensity table abscissae must increase".into()));
                }
                if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::Config("intensity table values must be finite and ≥ 0 (unbounded rate)".into()));
                }
            }
        }
        Ok(())
    }

    /// `λ(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Intensity::Constant { rate } => *rate,
            Intensity::Sinusoid { level, amplitude, omega, phase } => (level * (1.0 + amplitude * (omega * t + phase).sin())).max(0.0),
            Intensity::Table { t: ts, values } => {
                if t < ts[0] || t > ts[ts.len() - 1] {
                    return 0.0;
                }
                let i = ts.partition_point(|&s| s <= t);
                if i == 0 || i >= ts.len() {
                    return values[i.min(ts.len() - 1)];
                }
                let w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
                values[i - 1] + w * (values[i] - values[i - 1])
            }
        }
    }

    /// An upper bound of `λ` on `[a, b]`.
    pub fn majorant(&self, a: f64, b: f64) -> f64 {
        match self {
            Intensity::Constant { rate } => *rate,
            Intensity::Sinusoid { level, amplitude, .. } => level * (1.0 + amplitude.abs()),
            Intensity::Table { t, values } => {
                let lo = t.partition_point(|&s| s < a).saturating_sub(1);
                let hi = (t.partition_point(|&s| s <= b) + 1).min(t.len());
                values[lo..hi].iter().fold(0.0f64, |m, v| m.max(*v))
            }
        }
    }

    /// `∫_a^b λ(t) dt`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            Intensity::Constant { rate } => rate * (b - a),
            Intensity::Sinusoid { level, amplitude, omega, phase } => {
                if *omega == 0.0 {
                    level * (1.0 + amplitude * phase.sin()) * (b - a)
                } else {
                    level * ((b - a) - amplitude / omega * ((omega * b + phase).cos() - (omega * a + phase).cos()))
                }
            }
            Intensity::Table { t, .. } => {
                // Exact for a piecewise-linear function: integrate over the
                // breakpoints inside [a, b].
                let mut pts = vec![a];
                pts.extend(t.iter().copied().filter(|&s| s > a && s < b));
                pts.push(b);
                pts.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (self.eval_inner(w[0], true) + self.eval_inner(w[1], false))).sum()
            }
        }
    }

    /// One-sided evaluation used by the table integral (`right = true` takes
    /// the limit from the right).
    fn eval_inner(&self, x: f64, right: bool) -> f64 {
        match self {
            Intensity::Table { t, values } => {
                let (t0, t1) = (t[0], t[t.len() - 1]);
                if (right && x == t1) || (!right && x == t0) {
                    return 0.0;
                }
                if x == t0 {
                    return values[0];
                }
                if x == t1 {
                    return values[values.len() - 1];
                }
                self.eval(x)
            }
            _ => self.eval(x),
        }
    }
}

/// Piecewise-constant path of the number in system: `n[i]` holds on
/// `[times[i], times[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Event times, starting with 0.
    pub times: Vec<f64>,
    /// Number in system after each event.
    pub n: Vec<u32>,
}

impl Trajectory {
    /// Value at time `t` (right-continuous).
    pub fn at(&self, t: f64) -> u32 {
        let i = self.times.partition_point(|&s| s <= t);
        self.n[i.saturating_sub(1)]
    }
}

/// Arrival and departure epochs of one server over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowLog {
    /// Arrival timestamps (nondecreasing).
    pub arrivals: Vec<f64>,
    /// Departure timestamps (nondecreasing).
    pub departures: Vec<f64>,
    /// Run horizon.
    pub horizon: f64,
}

impl FlowLog {
    /// CSV export with columns `stream,timestamp`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("stream,timestamp\n");
        for a in &self.arrivals {
            s.push_str(&format!("arrival,{a}\n"));
        }
        for d in &self.departures {
            s.push_str(&format!("departure,{d}\n"));
        }
        s
    }
}

/// Inhomogeneous Poisson epochs on `[0, horizon]` by thinning against the
/// majorant of `λ` on that interval.
pub fn poisson_epochs<R: Rng + ?Sized>(lambda: &Intensity, horizon: f64, rng: &mut R) -> Result<Vec<f64>> {
    lambda.validate()?;
    let lmax = lambda.majorant(0.0, horizon);
    if !lmax.is_finite() {
        return Err(Error::Config("intensity is unbounded on the horizon".into()));
    }
    let mut out = Vec::new();
    if lmax <= 0.0 {
        return Ok(out);
    }
    let constant = matches!(lambda, Intensity::Constant { .. });
    let mut t = 0.0;
    loop {
        let e: f64 = Exp1.sample(rng);
        t += e / lmax;
        if t > horizon {
            break;
        }
        if constant || rng.random::<f64>() * lmax < lambda.eval(t) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Departure epochs of a FIFO server: initial customers (the first of which
/// completes at `first_remaining`) followed by `arrivals`; `services` yields
/// the duration of each later customer in order.
fn fifo_departures(n0: u32, first_remaining: Option<f64>, arrivals: &[f64], mut services: impl FnMut() -> f64) -> Vec<f64> {
    let mut d = Vec::with_capacity(n0 as usize + arrivals.len());
    let mut last = 0.0f64;
    if n0 > 0 {
        last = first_remaining.expect("busy server has a remaining time");
        d.push(last);
        for _ in 1..n0 {
            last += services();
            d.push(last);
        }
    }
    for &a in arrivals {
        last = last.max(a) + services();
        d.push(last);
    }
    d
}

/// Builds the trajectory of the number in system from sorted arrivals and
/// departures, up to `horizon`.
fn trajectory_from(n0: u32, arrivals: &[f64], departures: &[f64], horizon: f64) -> Trajectory {
    let mut times = vec![0.0];
    let mut n = vec![n0];
    let (mut i, mut j) = (0, 0);
    let mut cur = n0 as i64;
    loop {
        let ta = arrivals.get(i).copied().filter(|&t| t <= horizon);
        let td = departures.get(j).copied().filter(|&t| t <= horizon);
        let (t, delta) = match (ta, td) {
            (None, None) => break,
            (Some(a), Some(d)) if a <= d => {
                i += 1;
                (a, 1)
            }
            (Some(a), None) => {
                i += 1;
                (a, 1)
            }
            (_, Some(d)) => {
                j += 1;
                (d, -1)
            }
        };
        cur += delta;
        debug_assert!(cur >= 0);
        times.push(t);
        n.push(cur as u32);
    }
    Trajectory { times, n }
}

/// Arrivals, departures and number-in-system path of one GFP realization.
fn gfp_core<R: Rng + ?Sized>(
    init: &ServerState,
    lambda: &Intensity,
    d: &ServiceDistribution,
    horizon: f64,
    arrivals_rng: &mut R,
    service_rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    init.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Config("horizon must be positive and finite".into()));
    }
    let arrivals = poisson_epochs(lambda, horizon, arrivals_rng)?;
    let first = init.draw_remaining(d, service_rng)?;
    let deps = fifo_departures(init.n, first, &arrivals, || d.sample(service_rng));
    Ok((arrivals, deps))
}

/// Simulates the General Flow Process on `[0, horizon]`: a FIFO server
/// starting from `init`, fed by Poisson arrivals of intensity `λ`, with
/// i.i.d. service durations from `d` (the customer initially in service gets
/// a residual duration). Replica 0 of the GFP component under `seed`.
pub fn simulate_gfp(
    init: &ServerState,
    lambda: &Intensity,
    d: &ServiceDistribution,
    horizon: f64,
    seed: u64,
) -> Result<(Trajectory, FlowLog)> {
    simulate_gfp_replica(init, lambda, d, horizon, seed, 0)
}

/// Replica `r` of [`simulate_gfp`]; arrivals and services use distinct streams.
pub fn simulate_gfp_replica(
    init: &ServerState,
    lambda: &Intensity,
    d: &ServiceDistribution,
    horizon: f64,
    seed: u64,
    r: u64,
) -> Result<(Trajectory, FlowLog)> {
    let mut ra = stream(seed, component::GFP, 2 * r);
    let mut rs = stream(seed, component::GFP, 2 * r + 1);
    let (arrivals, mut deps) = gfp_core(init, lambda, d, horizon, &mut ra, &mut rs)?;
    deps.retain(|&t| t <= horizon);
    let traj = trajectory_from(init.n, &arrivals, &deps, horizon);
    Ok((traj, FlowLog { arrivals, departures: deps, horizon }))
}

/// Replica summary of GFP runs: departure rate in a bin and idle
/// probabilities at probe times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GfpReplicaSummary {
    /// Number of replicas.
    pub replicas: u64,
    /// Departure-rate estimate `E[#departures in (lo, hi]] / (hi − lo)`.
    pub rate: Estimate,
    /// Probe times.
    pub probes: Vec<f64>,
    /// `P{n(probe) = 0}` estimates.
    pub idle: Vec<Estimate>,
}

/// Runs `replicas` independent GFP realizations (in parallel, deterministic
/// reduction) and summarizes the departure count in `(bin.0, bin.1]` and the
/// idle indicator at each probe time.
pub fn gfp_replicas(
    init: &ServerState,
    lambda: &Intensity,
    d: &ServiceDistribution,
    horizon: f64,
    bin: (f64, f64),
    probes: &[f64],
    replicas: u64,
    seed: u64,
) -> Result<GfpReplicaSummary> {
    if !(bin.1 > bin.0) || bin.1 > horizon {
        return Err(Error::Config("departure bin must be a nonempty subinterval of the horizon".into()));
    }
    if probes.iter().any(|&p| !(p >= 0.0 && p <= horizon)) {
        return Err(Error::Config("probe times must lie in [0, horizon]".into()));
    }
    if replicas < 2 {
        return Err(Error::Config("need at least two replicas".into()));
    }
    const CHUNK: u64 = 4096;
    let chunks = replicas.div_ceil(CHUNK);
    // Integer sums make the reduction exact and order independent.
    let partial: Vec<Result<(u64, u64, Vec<u64>)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s1 = 0u64;
            let mut s2 = 0u64;
            let mut idle = vec![0u64; probes.len()];
            for r in c * CHUNK..((c + 1) * CHUNK).min(replicas) {
                let mut ra = stream(seed, component::GFP, 2 * r);
                let mut rs = stream(seed, component::GFP, 2 * r + 1);
                let (arr, dep) = gfp_core(init, lambda, d, horizon, &mut ra, &mut rs)?;
                let k = dep.iter().filter(|&&t| t > bin.0 && t <= bin.1).count() as u64;
                s1 += k;
                s2 += k * k;
                for (slot, &p) in idle.iter_mut().zip(probes) {
                    let na = arr.partition_point(|&t| t <= p) as i64;
                    let nd = dep.partition_point(|&t| t <= p) as i64;
                    if init.n as i64 + na - nd == 0 {
                        *slot += 1;
                    }
                }
            }
            Ok((s1, s2, idle))
        })
        .collect();
    let mut s1 = 0u64;
    let mut s2 = 0u64;
    let mut idle = vec![0u64; probes.len()];
    for p in partial {
        let (a, b, c) = p?;
        s1 += a;
        s2 += b;
        for (x, y) in idle.iter_mut().zip(c) {
            *x += y;
        }
    }
    let nf = replicas as f64;
    let width = bin.1 - bin.0;
    let mean = s1 as f64 / nf;
    let var = (s2 as f64 / nf - mean * mean) * nf / (nf - 1.0);
    let rate = Estimate::new(mean / width, (var.max(0.0) / nf).sqrt() / width);
    let idle = idle
        .into_iter()
        .map(|k| {
            let p = k as f64 / nf;
            Estimate::new(p, (p * (1.0 - p) / nf).sqrt())
        })
        .collect();
    Ok(GfpReplicaSummary { replicas, rate, probes: probes.to_vec(), idle })
}

/// Initial placement of customers in the closed network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NetworkInit {
    /// Customer `k` starts at node `k mod M`.
    RoundRobin,
    /// Queue lengths drawn uniformly among all compositions of `N` into `M`
    /// parts (the stationary law for exponential service).
    #[default]
    UniformComposition,
}

/// Closed-network run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Number of servers `M ≥ 1`.
    pub m: usize,
    /// Number of customers `N ≥ 1`.
    pub n: usize,
    /// Run horizon.
    pub horizon: f64,
    /// Statistics and flow logs ignore `[0, burn_in)`.
    #[serde(default)]
    pub burn_in: f64,
    /// Nodes whose flows and queue statistics are logged.
    #[serde(default)]
    pub tagged: Vec<usize>,
    /// Sampling interval of the pairwise correlation estimate.
    #[serde(default = "default_corr_dt")]
    pub corr_dt: f64,
    /// Initial placement.
    #[serde(default)]
    pub init: NetworkInit,
}

fn default_corr_dt() -> f64 {
    1.0
}

/// Time-averaged queue statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    /// Mean queue length.
    pub mean_queue: f64,
    /// Fraction of time idle.
    pub idle_frac: f64,
    /// Queue-length distribution `(n, probability)`, trailing zeros dropped.
    pub dist: Vec<(usize, f64)>,
    /// Correlation of the queue lengths of disjoint node pairs `(2k, 2k+1)`,
    /// pooled over pairs and sampling times (absent for single nodes).
    pub corr: Option<f64>,
}

impl RunStats {
    fn from_hist(hist: &[f64], corr: Option<f64>) -> Self {
        let total: f64 = hist.iter().sum();
        let mut dist: Vec<(usize, f64)> = hist.iter().enumerate().map(|(k, &v)| (k, if total > 0.0 { v / total } else { 0.0 })).collect();
        while dist.len() > 1 && dist.last().is_some_and(|d| d.1 == 0.0) {
            dist.pop();
        }
        let mean_queue = dist.iter().map(|(k, p)| *k as f64 * p).sum();
        let idle_frac = dist.first().map_or(0.0, |d| d.1);
        Self { mean_queue, idle_frac, dist, corr }
    }

    /// Distribution as a dense probability vector.
    pub fn probabilities(&self) -> Vec<f64> {
        self.dist.iter().map(|d| d.1).collect()
    }
}

/// Output of [`simulate_network`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkRun {
    /// Flow log of each tagged node (timestamps ≥ burn-in).
    pub logs: Vec<FlowLog>,
    /// Statistics of each tagged node.
    pub tagged_stats: Vec<RunStats>,
    /// Statistics pooled over all nodes, with the pairwise correlation.
    pub pooled: RunStats,
    /// Number of service completions processed.
    pub events: u64,
    /// Number of full `Σnᵢ = N` audits performed (all passed, or the run
    /// would have failed).
    pub conservation_audits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Departure {
    t: f64,
    node: u32,
}

impl Eq for Departure {}

impl Ord for Departure {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so that BinaryHeap pops the earliest event.
        other.t.total_cmp(&self.t).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn initial_counts<R: Rng + ?Sized>(m: usize, n: usize, init: NetworkInit, rng: &mut R) -> Vec<usize> {
    match init {
        NetworkInit::RoundRobin => (0..m).map(|i| n / m + usize::from(i < n % m)).collect(),
        NetworkInit::UniformComposition => {
            // Stars and bars: M−1 bar positions among N+M−1 slots.
            let mut bars: Vec<usize> = rand::seq::index::sample(rng, n + m - 1, m - 1).into_vec();
            bars.sort_unstable();
            let mut counts = Vec::with_capacity(m);
            let mut prev = 0usize;
            for (k, &b) in bars.iter().enumerate() {
                counts.push(b - prev - usize::from(k > 0));
                prev = b;
            }
            let last = n + m - 1 - prev - usize::from(m > 1);
            counts.push(last);
            counts
        }
    }
}

/// Simulates the closed network of `M` FIFO servers and `N` customers: after
/// each service completion the customer joins a uniformly chosen queue (the
/// origin included) as the last in line.
pub fn simulate_network(cfg: &NetworkConfig, d: &ServiceDistribution, seed: u64) -> Result<NetworkRun> {
    let (m, n) = (cfg.m, cfg.n);
    if m == 0 || n == 0 {
        return Err(Error::Config("network needs M ≥ 1 and N ≥ 1".into()));
    }
    if m > u32::MAX as usize || n > u32::MAX as usize {
        return Err(Error::Config("network too large".into()));
    }
    if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) || !(cfg.burn_in >= 0.0 && cfg.burn_in < cfg.horizon) {
        return Err(Error::Config("need 0 ≤ burn_in < horizon < ∞".into()));
    }
    if !(cfg.corr_dt > 0.0) {
        return Err(Error::Config("corr_dt must be positive".into()));
    }
    if let Some(&t) = cfg.tagged.iter().find(|&&t| t >= m) {
        return Err(Error::Config(format!("tagged node {t} out of range")));
    }
    let mut rng: Stream = stream(seed, component::NETWORK, 0);
    let counts = initial_counts(m, n, cfg.init, &mut rng);
    let mut queues: Vec<VecDeque<u32>> = vec![VecDeque::new(); m];
    let mut next_id = 0u32;
    for (i, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            queues[i].push_back(next_id);
            next_id += 1;
        }
    }
    let mut tag_of = vec![usize::MAX; m];
    for (k, &t) in cfg.tagged.iter().enumerate() {
        tag_of[t] = k;
    }
    let burn = cfg.burn_in;
    let mut heap = BinaryHeap::with_capacity(m);
    for (i, q) in queues.iter().enumerate() {
        if !q.is_empty() {
            heap.push(Departure { t: d.sample(&mut rng), node: i as u32 });
        }
    }
    let mut last = vec![0.0f64; m];
    let mut pooled = vec![0.0f64; n + 1];
    let mut tag_hist = vec![vec![0.0f64; n + 1]; cfg.tagged.len()];
    let mut logs: Vec<FlowLog> =
        cfg.tagged.iter().map(|_| FlowLog { arrivals: vec![], departures: vec![], horizon: cfg.horizon }).collect();
    let mut sums = [0.0f64; 5]; // Σa, Σb, Σa², Σb², Σab
    let mut samples = 0u64;
    let mut next_sample = burn;
    let mut events = 0u64;
    let mut audits = 0u64;

    let accumulate = |node: usize, now: f64, len: usize, last: &mut [f64], pooled: &mut [f64], tag_hist: &mut [Vec<f64>]| {
        let from = last[node].max(burn);
        if now > from {
            pooled[len] += now - from;
            if tag_of[node] != usize::MAX {
                tag_hist[tag_of[node]][len] += now - from;
            }
        }
        last[node] = now;
    };

    let mut sample_until = |t: f64, queues: &[VecDeque<u32>], sums: &mut [f64; 5], samples: &mut u64, audits: &mut u64| -> Result<()> {
        while next_sample <= t && next_sample <= cfg.horizon {
            let total: usize = queues.iter().map(VecDeque::len).sum();
            if total != n {
                return Err(Error::Numeric(format!("closed network lost customers: {total} ≠ {n}")));
            }
            *audits += 1;
            for k in 0..m / 2 {
                let a = queues[2 * k].len() as f64;
                let b = queues[2 * k + 1].len() as f64;
                sums[0] += a;
                sums[1] += b;
                sums[2] += a * a;
                sums[3] += b * b;
                sums[4] += a * b;
                *samples += 1;
            }
            next_sample += cfg.corr_dt;
        }
        Ok(())
    };

    while let Some(ev) = heap.pop() {
        if ev.t > cfg.horizon {
            break;
        }
        sample_until(ev.t, &queues, &mut sums, &mut samples, &mut audits)?;
        events += 1;
        let from = ev.node as usize;
        let to = rng.random_range(0..m);
        let len = queues[from].len();
        accumulate(from, ev.t, len, &mut last, &mut pooled, &mut tag_hist);
        let cust = queues[from].pop_front().expect("departure from a busy server");
        if tag_of[from] != usize::MAX && ev.t >= burn {
            logs[tag_of[from]].departures.push(ev.t);
        }
        if to != from {
            let len_to = queues[to].len();
            accumulate(to, ev.t, len_to, &mut last, &mut pooled, &mut tag_hist);
        }
        queues[to].push_back(cust);
        if tag_of[to] != usize::MAX && ev.t >= burn {
            logs[tag_of[to]].arrivals.push(ev.t);
        }
        // Start new services: at the origin if its queue is nonempty, and at
        // the destination if the customer found it empty.
        if !queues[from].is_empty() {
            heap.push(Departure { t: ev.t + d.sample(&mut rng), node: from as u32 });
        }
        if to != from && queues[to].len() == 1 {
            heap.push(Departure { t: ev.t + d.sample(&mut rng), node: to as u32 });
        }
    }
    sample_until(cfg.horizon, &queues, &mut sums, &mut samples, &mut audits)?;
    for i in 0..m {
        let len = queues[i].len();
        accumulate(i, cfg.horizon, len, &mut last, &mut pooled, &mut tag_hist);
    }
    let corr = if samples >= 2 {
        let s = samples as f64;
        let (ma, mb) = (sums[0] / s, sums[1] / s);
        let cov = sums[4] / s - ma * mb;
        let va = sums[2] / s - ma * ma;
        let vb = sums[3] / s - mb * mb;
        Some(if va > 0.0 && vb > 0.0 { cov / (va * vb).sqrt() } else { 0.0 })
    } else {
        None
    };
    Ok(NetworkRun {
        logs,
        tagged_stats: tag_hist.iter().map(|h| RunStats::from_hist(h, None)).collect(),
        pooled: RunStats::from_hist(&pooled, corr),
        events,
        conservation_audits: audits,
    })
}

/// Result of [`poisson_flow_test`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTest {
    /// Number of interarrival times tested.
    pub interarrivals: usize,
    /// Estimated rate (interarrivals / elapsed time).
    pub rate: f64,
    /// KS test of the rescaled interarrivals against Exp(1).
    pub ks: KsResult,
    /// Arrival counts per window.
    pub window_counts: Vec<usize>,
    /// Variance-to-mean ratio of the window counts (≈ 1 for Poisson).
    pub dispersion_index: f64,
    /// KS p-values of windows with at least 10 interarrivals.
    pub window_p_values: Vec<f64>,
    /// Fraction of those windows passing at `α = 0.01`.
    pub window_pass_fraction: Option<f64>,
}

fn ks_exponential(times: &[f64]) -> Result<(f64, KsResult)> {
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let total: f64 = gaps.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Data("arrival times span no time".into()));
    }
    let rate = gaps.len() as f64 / total;
    let scaled: Vec<f64> = gaps.iter().map(|g| g * rate).collect();
    Ok((rate, ks_test(&scaled, |x| if x <= 0.0 { 0.0 } else { -(-x).exp_m1() })?))
}

/// Tests the arrival stream of `log` after `burn_in` for Poissonity: KS test
/// of the interarrival times rescaled by the estimated rate against Exp(1),
/// plus the dispersion index of counts in `n_windows` equal windows.
pub fn poisson_flow_test(log: &FlowLog, burn_in: f64, n_windows: usize) -> Result<FlowTest> {
    if n_windows < 2 {
        return Err(Error::Config("need at least two windows".into()));
    }
    if !(burn_in < log.horizon) {
        return Err(Error::Config("burn-in must precede the horizon".into()));
    }
    let times: Vec<f64> = log.arrivals.iter().copied().filter(|&t| t >= burn_in).collect();
    if times.len() < 201 {
        return Err(Error::Data(format!("{} interarrivals after burn-in; at least 200 needed", times.len().saturating_sub(1))));
    }
    let (rate, ks) = ks_exponential(&times)?;
    let width = (log.horizon - burn_in) / n_windows as f64;
    let mut window_counts = vec![0usize; n_windows];
    let mut per_window: Vec<Vec<f64>> = vec![Vec::new(); n_windows];
    for &t in &times {
        let w = (((t - burn_in) / width) as usize).min(n_windows - 1);
        window_counts[w] += 1;
        per_window[w].push(t);
    }
    let counts_f: Vec<f64> = window_counts.iter().map(|&c| c as f64).collect();
    let (m, v) = mean_var(&counts_f);
    let dispersion_index = if m > 0.0 { v / m } else { f64::NAN };
    let mut window_p_values = Vec::new();
    for w in &per_window {
        if w.len() >= 11 {
            window_p_values.push(ks_exponential(w)?.1.p_value);
        }
    }
    let window_pass_fraction = if window_p_values.is_empty() {
        None
    } else {
        Some(window_p_values.iter().filter(|&&p| p >= 0.01).count() as f64 / window_p_values.len() as f64)
    };
    Ok(FlowTest { interarrivals: times.len() - 1, rate, ks, window_counts, dispersion_index, window_p_values, window_pass_fraction })
}

/// Stationary estimate of a single server under Poisson(`c`) input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryEstimate {
    /// Arrival rate.
    pub c: f64,
    /// Mean number in system, batch-means CI.
    pub mean_queue: Estimate,
    /// Idle probability, batch-means CI.
    pub idle_prob: Estimate,
    /// Time-averaged queue-length distribution.
    pub dist: Vec<f64>,
    /// Customers simulated.
    pub customers: usize,
}

/// Number of batches of the batch-means estimator.
pub const STATIONARY_BATCHES: usize = 20;
/// Fraction of the horizon discarded as warm-up.
pub const STATIONARY_BURN: f64 = 0.1;

/// Long-run averages of an initially empty server fed by Poisson(`c`)
/// arrivals, `c ∈ [0, 1)`, over `[0, horizon]`, with the first 10% discarded
/// and 20 batch means.
///
/// Randomness is common across `c`: the arrival epochs are unit-rate Poisson
/// epochs divided by `c`, and the `k`-th customer always receives the `k`-th
/// service draw. The estimate is therefore pathwise nondecreasing in `c`.
pub fn stationary_single_server(c: f64, d: &ServiceDistribution, horizon: f64, seed: u64) -> Result<StationaryEstimate> {
    if !(c >= 0.0) || c >= 1.0 || !c.is_finite() {
        return Err(Error::Config(format!("arrival rate c = {c} must lie in [0, 1) for stability")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Config("horizon must be positive".into()));
    }
    if c == 0.0 {
        return Ok(StationaryEstimate {
            c,
            mean_queue: Estimate::new(0.0, 0.0),
            idle_prob: Estimate::new(1.0, 0.0),
            dist: vec![1.0],
            customers: 0,
        });
    }
    let mut ra = stream(seed, component::STATIONARY, 0);
    let mut rs = stream(seed, component::STATIONARY, 1);
    let mut arrivals = Vec::new();
    let mut e = 0.0;
    loop {
        let x: f64 = Exp1.sample(&mut ra);
        e += x;
        let t = e / c;
        if t > horizon {
            break;
        }
        arrivals.push(t);
    }
    let deps = fifo_departures(0, None, &arrivals, || d.sample(&mut rs));
    let t0 = STATIONARY_BURN * horizon;
    let blen = (horizon - t0) / STATIONARY_BATCHES as f64;
    let mut area = vec![0.0f64; STATIONARY_BATCHES];
    let mut idle = vec![0.0f64; STATIONARY_BATCHES];
    let mut dist: Vec<f64> = vec![0.0];
    let mut add = |a: f64, b: f64, n: usize| {
        let (a, b) = (a.max(t0), b.min(horizon));
        if b <= a {
            return;
        }
        if dist.len() <= n {
            dist.resize(n + 1, 0.0);
        }
        dist[n] += b - a;
        let mut s = a;
        while s < b {
            let k = (((s - t0) / blen) as usize).min(STATIONARY_BATCHES - 1);
            let end = (t0 + (k + 1) as f64 * blen).min(b);
            let end = if k == STATIONARY_BATCHES - 1 { b } else { end };
            area[k] += (end - s) * n as f64;
            if n == 0 {
                idle[k] += end - s;
            }
            if end <= s {
                break;
            }
            s = end;
        }
    };
    let (mut i, mut j, mut n, mut t) = (0usize, 0usize, 0usize, 0.0f64);
    loop {
        let ta = arrivals.get(i).copied().unwrap_or(f64::INFINITY);
        let td = deps.get(j).copied().unwrap_or(f64::INFINITY);
        let next = ta.min(td).min(horizon);
        add(t, next, n);
        t = next;
        if t >= horizon {
            break;
        }
        if ta <= td {
            n += 1;
            i += 1;
        } else {
            n -= 1;
            j += 1;
        }
    }
    let total: f64 = dist.iter().sum();
    for v in &mut dist {
        *v /= total;
    }
    let nb: Vec<f64> = area.iter().map(|a| a / blen).collect();
    let ib: Vec<f64> = idle.iter().map(|a| a / blen).collect();
    Ok(StationaryEstimate { c, mean_queue: batch_means(&nb)?, idle_prob: batch_means(&ib)?, dist, customers: arrivals.len() })
}

/// Output of [`coupled_monotone_run`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledRun {
    /// Path of the system fed by `λ₁` (red and blue customers).
    pub upper: Trajectory,
    /// Path of the system fed by `λ₂` (red customers only).
    pub lower: Trajectory,
    /// Event times at which `N₁(t) < N₂(t)` was observed.
    pub violations: usize,
    /// Number of event times checked.
    pub checked: usize,
}

/// Checks the dominance precondition: `init₂` empty, or both busy with the
/// same elapsed time (and remaining time, if fixed) and `n₁ ≥ n₂`.
fn dominates(a: &ServerState, b: &ServerState) -> bool {
    b.n == 0 || (a.n >= b.n && a.tau == b.tau && a.remaining == b.remaining)
}

/// Runs two coupled FIFO servers over `[0, horizon]`. Red customers arrive
/// at rate `λ₂` and join both systems; blue customers arrive at rate
/// `λ₁ − λ₂` and join only the first. Every customer carries one service
/// duration shared by both systems; the initial customers of system 2 are
/// red, and system 1's extra initial customers are blue and queue behind
/// them. The color-blind input of system 1 is Poisson(`λ₁`).
pub fn coupled_monotone_run(
    init1: &ServerState,
    init2: &ServerState,
    lambda1: &Intensity,
    lambda2: &Intensity,
    d: &ServiceDistribution,
    horizon: f64,
    seed: u64,
    replica: u64,
) -> Result<CoupledRun> {
    init1.validate()?;
    init2.validate()?;
    lambda1.validate()?;
    lambda2.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Config("horizon must be positive".into()));
    }
    if !dominates(init1, init2) {
        return Err(Error::Config("initial state 1 must dominate initial state 2".into()));
    }
    let grid = 10_000;
    for k in 0..=grid {
        let t = horizon * k as f64 / grid as f64;
        if lambda1.eval(t) + 1e-12 < lambda2.eval(t) {
            return Err(Error::Config(format!("λ₁ < λ₂ at t = {t}")));
        }
    }
    let base = 4 * replica;
    let mut r_red = stream(seed, component::COUPLING, base);
    let mut r_blue = stream(seed, component::COUPLING, base + 1);
    let mut s_red = stream(seed, component::COUPLING, base + 2);
    let mut s_blue = stream(seed, component::COUPLING, base + 3);

    let red_arr = poisson_epochs(lambda2, horizon, &mut r_red)?;
    // Blue stream: thinning of λ₁'s majorant with acceptance (λ₁ − λ₂)/λ̄.
    let lmax = lambda1.majorant(0.0, horizon);
    let mut blue_arr = Vec::new();
    if lmax > 0.0 {
        let mut t = 0.0;
        loop {
            let e: f64 = Exp1.sample(&mut r_blue);
            t += e / lmax;
            if t > horizon {
                break;
            }
            if r_blue.random::<f64>() * lmax < (lambda1.eval(t) - lambda2.eval(t)).max(0.0) {
                blue_arr.push(t);
            }
        }
    }
    // Shared first remaining service (system 2's in-service customer is also
    // system 1's); otherwise system 1's own.
    let first = if init2.n > 0 { init2.draw_remaining(d, &mut s_red)? } else { init1.draw_remaining(d, &mut s_blue)? };
    let init_red: Vec<f64> = (1..init2.n).map(|_| d.sample(&mut s_red)).collect();
    let red_serv: Vec<f64> = red_arr.iter().map(|_| d.sample(&mut s_red)).collect();
    let extra = init1.n - init2.n;
    let extra_first = usize::from(init2.n == 0 && init1.n > 0);
    let init_blue: Vec<f64> = (extra_first as u32..extra).map(|_| d.sample(&mut s_blue)).collect();
    let blue_serv: Vec<f64> = blue_arr.iter().map(|_| d.sample(&mut s_blue)).collect();

    // System 2: initial reds, then red arrivals.
    let mut it2 = init_red.iter().chain(red_serv.iter()).copied();
    let dep2 = fifo_departures(init2.n, first.filter(|_| init2.n > 0), &red_arr, || it2.next().expect("red duration"));
    // System 1: initial reds, initial blues, then merged arrivals.
    let mut merged: Vec<(f64, f64)> = red_arr.iter().copied().zip(red_serv.iter().copied()).collect();
    merged.extend(blue_arr.iter().copied().zip(blue_serv.iter().copied()));
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let arr1: Vec<f64> = merged.iter().map(|x| x.0).collect();
    let mut it1 = init_red.iter().chain(init_blue.iter()).copied().chain(merged.iter().map(|x| x.1));
    let dep1 = fifo_departures(init1.n, first.filter(|_| init1.n > 0), &arr1, || it1.next().expect("duration"));

    let mut dep1s = dep1;
    dep1s.retain(|&t| t <= horizon);
    let mut dep2s = dep2;
    dep2s.retain(|&t| t <= horizon);
    let upper = trajectory_from(init1.n, &arr1, &dep1s, horizon);
    let lower = trajectory_from(init2.n, &red_arr, &dep2s, horizon);
    let mut times: Vec<f64> = upper.times.iter().chain(lower.times.iter()).copied().collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let violations = times.iter().filter(|&&t| upper.at(t) < lower.at(t)).count();
    Ok(CoupledRun { upper, lower, violations, checked: times.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_test;

    fn exp() -> ServiceDistribution {
        ServiceDistribution::exponential()
    }

    #[test]
    fn server_state_invariants() {
        assert!(ServerState::empty().validate().is_ok());
        assert!(ServerState::busy(0, 0.0).is_err());
        assert!(ServerState { n: 0, tau: Some(1.0), remaining: None }.validate().is_err());
        assert!(ServerState { n: 2, tau: Some(0.5), remaining: Some(-1.0) }.validate().is_err());
        assert!(ServerState::busy(3, 0.7).is_ok());
    }

    #[test]
    fn intensity_integrals() {
        let s = Intensity::Sinusoid { level: 0.3, amplitude: 1.0, omega: 1.0, phase: 0.0 };
        // ∫₀^y 0.3(1 + sin t) dt = 0.3(y + 1 − cos y)
        assert!((s.integral(0.0, 8.0) - 0.3 * (8.0 + 1.0 - 8f64.cos())).abs() < 1e-12);
        assert_eq!(s.majorant(0.0, 10.0), 0.6);
        let tab = Intensity::Table { t: vec![0.0, 1.0, 2.0], values: vec![0.0, 1.0, 1.0] };
        assert!((tab.integral(0.0, 2.0) - 1.5).abs() < 1e-12);
        assert!((tab.integral(-1.0, 3.0) - 1.5).abs() < 1e-12);
        assert!((tab.integral(0.5, 1.5) - (0.375 + 0.5)).abs() < 1e-12);
        assert_eq!(tab.eval(3.0), 0.0);
        assert!(Intensity::Constant { rate: f64::INFINITY }.validate().is_err());
        assert!(Intensity::Table { t: vec![0.0, 1.0], values: vec![1.0, f64::INFINITY] }.validate().is_err());
    }

    #[test]
    fn no_arrivals_single_customer_departs_once() {
        let init = ServerState::busy(1, 0.0).unwrap();
        let zero = Intensity::Constant { rate: 0.0 };
        let mut samples = Vec::new();
        for r in 0..4000 {
            let (_, log) = simulate_gfp_replica(&init, &zero, &exp(), 1e9, 11, r).unwrap();
            assert!(log.arrivals.is_empty());
            assert_eq!(log.departures.len(), 1);
            samples.push(log.departures[0]);
        }
        let ks = ks_test(&samples, |x| 1.0 - (-x).exp()).unwrap();
        assert!(ks.p_value > 1e-3, "{ks:?}");
    }

    #[test]
    fn empty_start_without_input_stays_empty() {
        let (traj, log) = simulate_gfp(&ServerState::empty(), &Intensity::Constant { rate: 0.0 }, &exp(), 100.0, 1).unwrap();
        assert!(log.arrivals.is_empty() && log.departures.is_empty());
        assert_eq!(traj.n, vec![0]);
    }

    #[test]
    fn flow_balance_of_stable_queue() {
        let h = 1e5;
        let (traj, log) = simulate_gfp(&ServerState::empty(), &Intensity::Constant { rate: 0.5 }, &exp(), h, 2).unwrap();
        // For M/M/1 at load ρ the asymptotic variance of the departure count
        // is ≈ ρ·H (a Poisson output); allow 3σ.
        let rate = log.departures.len() as f64 / h;
        assert!((rate - 0.5).abs() < 3.0 * (0.5 / h).sqrt() + 1.0 / h, "rate {rate}");
        // FIFO/work conservation: number in system never negative, and
        // the path matches arrival − departure counts.
        assert_eq!(*traj.n.last().unwrap() as usize, log.arrivals.len() - log.departures.len());
    }

    #[test]
    fn gfp_is_deterministic() {
        let l = Intensity::Sinusoid { level: 0.3, amplitude: 1.0, omega: 1.0, phase: 0.0 };
        let a = simulate_gfp(&ServerState::busy(2, 0.3).unwrap(), &l, &exp(), 50.0, 9).unwrap();
        let b = simulate_gfp(&ServerState::busy(2, 0.3).unwrap(), &l, &exp(), 50.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replica_idle_probability_of_empty_start() {
        // With λ ≡ c and exponential service from the empty state, the idle
        // probability at small t is ≈ 1 − ct.
        let s = gfp_replicas(&ServerState::empty(), &Intensity::Constant { rate: 0.5 }, &exp(), 1.0, (0.0, 1.0), &[0.01], 20_000, 3)
            .unwrap();
        assert!(s.idle[0].within_sigmas(1.0 - 0.005, 4.0), "{:?}", s.idle[0]);
    }

    #[test]
    fn single_node_network() {
        let cfg = NetworkConfig { m: 1, n: 1, horizon: 2000.0, burn_in: 0.0, tagged: vec![0], corr_dt: 1.0, init: NetworkInit::RoundRobin };
        let run = simulate_network(&cfg, &exp(), 4).unwrap();
        assert_eq!(run.tagged_stats[0].dist, vec![(0, 0.0), (1, 1.0)]);
        let deps = &run.logs[0].departures;
        let gaps: Vec<f64> = std::iter::once(deps[0]).chain(deps.windows(2).map(|w| w[1] - w[0])).collect();
        assert!(ks_test(&gaps, |x| 1.0 - (-x).exp()).unwrap().p_value > 1e-3);
    }

    #[test]
    fn uniform_composition_counts() {
        let mut rng = stream(1, 0, 0);
        for (m, n) in [(1, 5), (3, 3), (5, 1), (10, 40)] {
            let c = initial_counts(m, n, NetworkInit::UniformComposition, &mut rng);
            assert_eq!(c.len(), m);
            assert_eq!(c.iter().sum::<usize>(), n);
        }
        // All 10 compositions of 3 into 3 parts are equally likely.
        let mut freq = std::collections::HashMap::new();
        for _ in 0..20_000 {
            *freq.entry(initial_counts(3, 3, NetworkInit::UniformComposition, &mut rng)).or_insert(0usize) += 1;
        }
        assert_eq!(freq.len(), 10);
        assert!(freq.values().all(|&k| (k as f64 - 2000.0).abs() < 200.0));
    }

    #[test]
    fn network_conserves_customers() {
        let cfg = NetworkConfig { m: 7, n: 13, horizon: 300.0, burn_in: 0.0, tagged: vec![0, 3], corr_dt: 0.5, init: NetworkInit::RoundRobin };
        let run = simulate_network(&cfg, &exp(), 5).unwrap();
        assert!(run.conservation_audits > 500);
        let mean_sum = run.pooled.mean_queue * 7.0;
        assert!((mean_sum - 13.0).abs() < 1e-9, "{mean_sum}");
        let total: f64 = run.pooled.dist.iter().map(|d| d.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flow_test_calibration() {
        let mut passes = 0;
        for s in 0..100 {
            let mut rng = stream(s, 0, 7);
            let arrivals = poisson_epochs(&Intensity::Constant { rate: 2.0 }, 500.0, &mut rng).unwrap();
            let t = poisson_flow_test(&FlowLog { arrivals, departures: vec![], horizon: 500.0 }, 0.0, 10).unwrap();
            if t.ks.p_value >= 0.01 {
                passes += 1;
            }
            assert!((t.dispersion_index - 1.0).abs() < 1.5);
        }
        assert!(passes >= 95, "{passes}");
        let arrivals: Vec<f64> = (1..=400).map(|k| k as f64).collect();
        let t = poisson_flow_test(&FlowLog { arrivals, departures: vec![], horizon: 401.0 }, 0.0, 4).unwrap();
        assert!(t.ks.p_value < 1e-6);
        let few = FlowLog { arrivals: vec![1.0, 2.0], departures: vec![], horizon: 3.0 };
        assert!(matches!(poisson_flow_test(&few, 0.0, 2), Err(Error::Data(_))));
    }

    #[test]
    fn stationary_exponential_matches_birth_death() {
        assert!(matches!(stationary_single_server(1.0, &exp(), 10.0, 1), Err(Error::Config(_))));
        let z = stationary_single_server(0.0, &exp(), 10.0, 1).unwrap();
        assert_eq!((z.mean_queue.value, z.idle_prob.value), (0.0, 1.0));
        let s = stationary_single_server(0.5, &exp(), 2e5, 1).unwrap();
        assert!(s.mean_queue.within_sigmas(1.0, 4.0), "{:?}", s.mean_queue);
        assert!(s.idle_prob.within_sigmas(0.5, 4.0), "{:?}", s.idle_prob);
        assert!((s.dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stationary_common_numbers_monotone() {
        let d = exp();
        let mut prev = 0.0;
        for k in 1..10 {
            let s = stationary_single_server(0.1 * k as f64, &d, 2e4, 3).unwrap();
            assert!(s.mean_queue.value >= prev);
            prev = s.mean_queue.value;
        }
    }

    #[test]
    fn coupling_identical_inputs_identical_paths() {
        let i = ServerState::busy(2, 0.4).unwrap();
        let l = Intensity::Constant { rate: 0.4 };
        let r = coupled_monotone_run(&i, &i, &l, &l, &exp(), 100.0, 1, 0).unwrap();
        assert_eq!(r.upper, r.lower);
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn coupling_dominance_sweep() {
        let d = ServiceDistribution::hyperexponential(&[0.5, 0.5], &[2.0, 0.5]).unwrap();
        let i1 = ServerState::busy(3, 0.7).unwrap();
        let i2 = ServerState::busy(1, 0.7).unwrap();
        let l = Intensity::Constant { rate: 0.4 };
        for s in 0..100 {
            let r = coupled_monotone_run(&i1, &i2, &l, &l, &d, 200.0, 17, s).unwrap();
            assert_eq!(r.violations, 0);
        }
        let zero = Intensity::Constant { rate: 0.0 };
        let half = Intensity::Constant { rate: 0.5 };
        let r = coupled_monotone_run(&i2, &i2, &half, &zero, &exp(), 200.0, 2, 0).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.checked > 50);
        assert!(coupled_monotone_run(&i2, &i1, &l, &l, &exp(), 10.0, 1, 0).is_err());
        assert!(coupled_monotone_run(&i1, &i2, &zero, &half, &exp(), 10.0, 1, 0).is_err());
    }
}
