//! Particle approximation of the non-linear Markov process: `K` independent
//! copies of a single server whose common arrival rate at each instant is the
//! ensemble-mean departure hazard.
//!
//! Time advances in steps of `Δt`. At step `s` a busy particle whose
//! customer has been in service for `j` steps departs with probability
//! `h(jΔt)·Δt`, and every particle receives an arrival with probability
//! `c₂Δt`, where `c₂ = K⁻¹ Σ h(τ)` is evaluated on the state at the start of
//! the step. The departure step of each service is sampled once, at service
//! start, from the discrete survival function of these per-step hazards —
//! the same law as per-step Bernoulli trials, without touching idle time.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dists::ServiceDistribution;
use crate::error::{Error, Result};
use crate::queue_sim::{stationary_single_server, Intensity, ServerState};
use crate::rng::{component, stream, Stream};
use crate::stats::{Estimate, Welford};

/// Default time step.
pub const DEFAULT_DT: f64 = 0.005;
/// Default width of the rate bins, in service means.
pub const DEFAULT_BIN: f64 = 0.25;
/// Survival level below which the hazard table is continued geometrically.
const SURVIVAL_FLOOR: f64 = 1e-12;
/// Longest hazard table built.
const MAX_TABLE: usize = 1 << 24;
const RING: usize = 1 << 13;

/// Initial ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleInit {
    /// Every particle idle.
    Empty,
    /// Every particle holds `n` customers, the first just entering service.
    Burst {
        /// Customers per particle.
        n: u32,
    },
    /// Explicit states, e.g. from [`stationary_snapshot`].
    Snapshot {
        /// One state per particle.
        states: Vec<ServerState>,
    },
}

/// Ensemble of `K` server states evolving under the mean-field dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    d: ServiceDistribution,
    n: Vec<u32>,
    tau: Vec<f64>,
    time: f64,
}

impl ParticleEnsemble {
    /// Builds an ensemble of `k` particles.
    pub fn new(d: ServiceDistribution, init: &EnsembleInit, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("ensemble needs at least one particle".into()));
        }
        let (n, tau) = match init {
            EnsembleInit::Empty => (vec![0; k], vec![0.0; k]),
            EnsembleInit::Burst { n } => (vec![*n; k], vec![0.0; k]),
            EnsembleInit::Snapshot { states } => {
                if states.len() != k {
                    return Err(Error::Config(format!("snapshot has {} states, expected {k}", states.len())));
                }
                for s in states {
                    s.validate()?;
                }
                (states.iter().map(|s| s.n).collect(), states.iter().map(|s| s.tau.unwrap_or(0.0)).collect())
            }
        };
        Ok(Self { d, n, tau, time: 0.0 })
    }

    /// Number of particles `K`.
    pub fn len(&self) -> usize {
        self.n.len()
    }

    /// True if the ensemble has no particles (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    /// Current time.
    pub fn time(&self) -> f64 {
        self.time
    }

    /// Service law.
    pub fn distribution(&self) -> &ServiceDistribution {
        &self.d
    }

    /// Current states.
    pub fn states(&self) -> Vec<ServerState> {
        self.n
            .iter()
            .zip(&self.tau)
            .map(|(&n, &t)| if n == 0 { ServerState::empty() } else { ServerState { n, tau: Some(t), remaining: None } })
            .collect()
    }

    /// Empirical mean queue `N(μ̂)`.
    pub fn mean_queue(&self) -> f64 {
        self.n.iter().map(|&n| n as f64).sum::<f64>() / self.len() as f64
    }

    /// Fraction of idle particles.
    pub fn idle_fraction(&self) -> f64 {
        self.n.iter().filter(|&&n| n == 0).count() as f64 / self.len() as f64
    }

    /// Mean expected remaining work `S(μ̂)`: residual mean of the customer in
    /// service plus a full mean for each waiting customer. Reported as a
    /// diagnostic next to `N(μ̂)`.
    pub fn expected_work(&self) -> Result<f64> {
        let m = self.d.mean();
        let mut s = 0.0;
        for (&n, &t) in self.n.iter().zip(&self.tau) {
            if n > 0 {
                s += self.d.residual_mean(t)? + (n - 1) as f64 * m;
            }
        }
        Ok(s / self.len() as f64)
    }

    /// Queue-length histogram.
    pub fn histogram(&self) -> Vec<u64> {
        histogram(&self.n)
    }

    /// Advances the ensemble by `opts.horizon` and returns the binned rate
    /// trajectory and periodic snapshots.
    pub fn evolve(&mut self, opts: &EvolveOptions, seed: u64) -> Result<Evolution> {
        evolve_impl(self, opts, seed)
    }
}

fn histogram(n: &[u32]) -> Vec<u64> {
    let max = n.iter().copied().max().unwrap_or(0) as usize;
    let mut h = vec![0u64; max + 1];
    for &x in n {
        h[x as usize] += 1;
    }
    h
}

/// Options of [`ParticleEnsemble::evolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveOptions {
    /// Time step `Δt ≤ 0.01`.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Evolution horizon.
    pub horizon: f64,
    /// Rate bin width `Δ`.
    #[serde(default = "default_bin")]
    pub bin: f64,
    /// Snapshot interval.
    #[serde(default = "default_snapshot")]
    pub snapshot_every: f64,
    /// Upper bound for the binned rates; defaults to the supremum of the
    /// hazard (the ensemble-mean hazard can never exceed it).
    #[serde(default)]
    pub cap: Option<f64>,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_bin() -> f64 {
    DEFAULT_BIN
}
fn default_snapshot() -> f64 {
    1.0
}

impl EvolveOptions {
    /// Defaults with the given horizon.
    pub fn with_horizon(horizon: f64) -> Self {
        Self { dt: DEFAULT_DT, horizon, bin: DEFAULT_BIN, snapshot_every: 1.0, cap: None }
    }
}

/// Binned output rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTrajectory {
    /// Bin width `Δ`.
    pub bin: f64,
    /// Bin midpoints.
    pub t: Vec<f64>,
    /// Departure-rate estimates `λ̂ = departures / (KΔ)`.
    pub lambda_hat: Vec<f64>,
    /// Standard errors `√departures / (KΔ)`.
    pub se: Vec<f64>,
    /// Arrival-rate estimates in the same bins.
    pub arrival_hat: Vec<f64>,
}

impl RateTrajectory {
    /// CSV export with columns `t,lambda_hat,se`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,lambda_hat,se\n");
        for i in 0..self.t.len() {
            s.push_str(&format!("{},{},{}\n", self.t[i], self.lambda_hat[i], self.se[i]));
        }
        s
    }
}

/// State summary at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Time.
    pub t: f64,
    /// `N(μ̂_t)`.
    pub mean_queue: f64,
    /// Fraction of idle particles.
    pub idle_frac: f64,
    /// Ensemble-mean hazard `c₂`.
    pub c2: f64,
    /// Accumulated Monte Carlo variance of `N(μ̂_t) − N(μ̂_0)`:
    /// `Σ 2c₂Δt / K` over the elapsed steps.
    pub cum_var: f64,
    /// Queue-length histogram.
    pub hist: Vec<u64>,
}

/// Output of [`ParticleEnsemble::evolve`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evolution {
    /// Binned rates.
    pub rates: RateTrajectory,
    /// Snapshots, including the initial and final states.
    pub snapshots: Vec<Snapshot>,
    /// Rate cap used.
    pub cap: f64,
    /// Bins with `λ̂ > cap + 5·se`.
    pub cap_violations: usize,
}

/// Discrete-time hazard table of a service law.
struct HazardTable {
    /// Hazard rates `h(jΔt)` for `j < L`.
    rate: Vec<f64>,
    /// Survival `S[j] = Π_{i<j} (1 − h(iΔt)Δt)`, `j ≤ L`.
    surv: Vec<f64>,
    /// Per-step departure probability beyond the table.
    tail_p: f64,
    dt: f64,
    constant: Option<f64>,
}

impl HazardTable {
    fn new(d: &ServiceDistribution, dt: f64) -> Result<Self> {
        let mut rate = Vec::new();
        let mut surv = vec![1.0];
        loop {
            let j = rate.len();
            let h = d.hazard(j as f64 * dt).map_err(|e| Error::Numeric(format!("hazard unavailable at τ = {}: {e}", j as f64 * dt)))?;
            let p = h * dt;
            if !p.is_finite() || p > 1.0 {
                return Err(Error::Numeric(format!(
                    "per-step departure probability {p} at τ = {} exceeds 1; reduce Δt or avoid the support edge",
                    j as f64 * dt
                )));
            }
            rate.push(h);
            let s = surv[j] * (1.0 - p);
            surv.push(s);
            if s < SURVIVAL_FLOOR || rate.len() >= MAX_TABLE {
                break;
            }
        }
        let tail_p = rate[rate.len() - 1] * dt;
        if !(tail_p > 0.0) {
            return Err(Error::Numeric("hazard vanishes beyond the tabulated range".into()));
        }
        let constant = if d.has_constant_hazard() { Some(rate[0]) } else { None };
        Ok(Self { rate, surv, tail_p, dt, constant })
    }

    fn len(&self) -> usize {
        self.rate.len()
    }

    fn rate_at(&self, age: i64) -> f64 {
        let a = age.max(0) as usize;
        if a < self.rate.len() {
            self.rate[a]
        } else {
            self.tail_p / self.dt
        }
    }

    fn survival(&self, age: i64) -> f64 {
        let l = self.len();
        let a = age.max(0) as usize;
        if a <= l {
            self.surv[a]
        } else {
            self.surv[l] * (1.0 - self.tail_p).powf((a - l) as f64)
        }
    }

    /// Samples the age (in steps) at which a service of current age `j0`
    /// ends: the smallest `j ≥ j0` with `S(j+1) ≤ U·S(j0)`.
    fn sample_end<R: Rng + ?Sized>(&self, j0: i64, rng: &mut R) -> i64 {
        let u = 1.0 - rng.random::<f64>(); // (0, 1]
        let target = u * self.survival(j0);
        let l = self.len();
        let sl = self.surv[l];
        let j = if target >= sl && (j0 as usize) < l {
            // Smallest j in [j0, L) with surv[j+1] ≤ target.
            let lo = j0 as usize;
            let k = self.surv[lo + 1..=l].partition_point(|&s| s > target);
            (lo + k) as i64
        } else {
            let steps = ((target / sl).ln() / (1.0 - self.tail_p).ln()).ceil();
            l as i64 - 1 + steps.max(1.0) as i64
        };
        j.max(j0)
    }
}

fn evolve_impl(e: &mut ParticleEnsemble, opts: &EvolveOptions, seed: u64) -> Result<Evolution> {
    let dt = opts.dt;
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(Error::Config(format!("time step Δt = {dt} must lie in (0, 0.01]")));
    }
    if !(opts.horizon > 0.0 && opts.horizon.is_finite()) {
        return Err(Error::Config("horizon must be positive".into()));
    }
    let steps_per_bin = (opts.bin / dt).round() as i64;
    let steps_per_snap = (opts.snapshot_every / dt).round() as i64;
    if steps_per_bin < 1 || steps_per_snap < 1 {
        return Err(Error::Config("bin and snapshot interval must be at least one step".into()));
    }
    let table = HazardTable::new(&e.d, dt)?;
    let cap = opts.cap.unwrap_or_else(|| table.rate.iter().copied().fold(table.tail_p / dt, f64::max));
    let k = e.len();
    let kf = k as f64;
    let total_steps = (opts.horizon / dt).round() as i64;
    let mut rng: Stream = stream(seed, component::NMP, 0);

    // Service bookkeeping.
    let mut start = vec![0i64; k];
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); RING];
    let mut overflow: Vec<(i64, u32)> = Vec::new();
    let mask = (RING - 1) as i64;
    let mut first_start = 0i64;
    let mut counts: VecDeque<u64> = VecDeque::new();
    let mut busy = 0u64;

    let schedule = |step: i64, i: u32, now: i64, buckets: &mut Vec<Vec<u32>>, overflow: &mut Vec<(i64, u32)>| {
        if step - now < RING as i64 {
            buckets[(step & mask) as usize].push(i);
        } else {
            overflow.push((step, i));
        }
    };

    // Initial services: age j0 = round(τ/Δt), start step −j0.
    let mut min_start = 0i64;
    for i in 0..k {
        if e.n[i] > 0 {
            min_start = min_start.min(-((e.tau[i] / dt).round() as i64));
        }
    }
    first_start = first_start.min(min_start);
    for i in 0..k {
        if e.n[i] > 0 {
            let j0 = (e.tau[i] / dt).round() as i64;
            start[i] = -j0;
            let idx = (start[i] - first_start) as usize;
            if counts.len() <= idx {
                counts.resize(idx + 1, 0);
            }
            counts[idx] += 1;
            busy += 1;
            let end = table.sample_end(j0, &mut rng);
            schedule(start[i] + end, i as u32, 0, &mut buckets, &mut overflow);
        }
    }

    let nbins = ((total_steps + steps_per_bin - 1) / steps_per_bin) as usize;
    let mut dep_bins = vec![0u64; nbins];
    let mut arr_bins = vec![0u64; nbins];
    let mut snapshots = Vec::new();
    let mut dep_stamp = vec![u32::MAX; k];
    let mut arr_stamp = vec![u32::MAX; k];
    let mut cum_var = 0.0;
    let mut sum_n: u64 = e.n.iter().map(|&x| u64::from(x)).sum();
    let mut idle: u64 = e.n.iter().filter(|&&x| x == 0).count() as u64;
    let mut chosen: Vec<u32> = Vec::new();
    let t0 = e.time;

    for s in 0..=total_steps {
        if s % RING as i64 == 0 {
            let mut keep = Vec::with_capacity(overflow.len());
            for (step, i) in overflow.drain(..) {
                if step - s < RING as i64 {
                    buckets[(step & mask) as usize].push(i);
                } else {
                    keep.push((step, i));
                }
            }
            overflow = keep;
        }
        // Trim exhausted start steps.
        while counts.front() == Some(&0) && first_start < s {
            counts.pop_front();
            first_start += 1;
        }
        // Ensemble-mean hazard from the pre-step state.
        let c2 = match table.constant {
            Some(h) => h * busy as f64 / kf,
            None => counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| c as f64 * table.rate_at(s - (first_start + i as i64))).sum::<f64>() / kf,
        };
        if !c2.is_finite() {
            return Err(Error::Numeric("ensemble-mean hazard is not finite".into()));
        }
        if s % steps_per_snap == 0 || s == total_steps {
            snapshots.push(Snapshot {
                t: t0 + s as f64 * dt,
                mean_queue: sum_n as f64 / kf,
                idle_frac: idle as f64 / kf,
                c2,
                cum_var,
                hist: histogram(&e.n),
            });
        }
        if s == total_steps {
            break;
        }
        let stamp = s as u32;
        let bin = (s / steps_per_bin) as usize;
        let p = c2 * dt;
        if p > 1.0 {
            return Err(Error::Numeric(format!("arrival probability c₂Δt = {p} exceeds 1")));
        }
        cum_var += 2.0 * p / kf;

        // Departures scheduled for this step.
        let slot = (s & mask) as usize;
        let deps = std::mem::take(&mut buckets[slot]);
        for &i in &deps {
            let i = i as usize;
            e.n[i] -= 1;
            sum_n -= 1;
            if e.n[i] == 0 {
                idle += 1;
            }
            counts[(start[i] - first_start) as usize] -= 1;
            busy -= 1;
            dep_stamp[i] = stamp;
        }
        dep_bins[bin] += deps.len() as u64;

        // Arrivals: a Binomial number of distinct particles.
        let a = if p > 0.0 { Binomial::new(k as u64, p).map_err(|e| Error::Numeric(e.to_string()))?.sample(&mut rng) } else { 0 } as usize;
        chosen.clear();
        if a > k / 4 {
            chosen.extend(rand::seq::index::sample(&mut rng, k, a).into_iter().map(|i| i as u32));
        } else {
            while chosen.len() < a {
                let i = rng.random_range(0..k);
                if arr_stamp[i] != stamp {
                    arr_stamp[i] = stamp;
                    chosen.push(i as u32);
                }
            }
        }
        arr_bins[bin] += a as u64;
        let next = s + 1;
        let mut begin = |i: usize, counts: &mut VecDeque<u64>, rng: &mut Stream, buckets: &mut Vec<Vec<u32>>, overflow: &mut Vec<(i64, u32)>| {
            start[i] = next;
            let idx = (next - first_start) as usize;
            if counts.len() <= idx {
                counts.resize(idx + 1, 0);
            }
            counts[idx] += 1;
            let end = table.sample_end(0, rng);
            schedule(next + end, i as u32, s, buckets, overflow);
        };
        for &i in &chosen {
            let i = i as usize;
            e.n[i] += 1;
            sum_n += 1;
            if e.n[i] == 1 {
                idle -= 1;
                if dep_stamp[i] != stamp {
                    busy += 1;
                    begin(i, &mut counts, &mut rng, &mut buckets, &mut overflow);
                }
            }
        }
        for &i in &deps {
            let i = i as usize;
            if e.n[i] > 0 {
                busy += 1;
                begin(i, &mut counts, &mut rng, &mut buckets, &mut overflow);
            }
        }
        let mut deps = deps;
        deps.clear();
        buckets[slot] = deps;
    }

    // Write back elapsed service times.
    for i in 0..k {
        e.tau[i] = if e.n[i] > 0 { (total_steps - start[i]).max(0) as f64 * dt } else { 0.0 };
    }
    e.time = t0 + total_steps as f64 * dt;

    let width = steps_per_bin as f64 * dt;
    let mut rates = RateTrajectory { bin: width, t: vec![], lambda_hat: vec![], se: vec![], arrival_hat: vec![] };
    for b in 0..nbins {
        let steps = (steps_per_bin).min(total_steps - b as i64 * steps_per_bin) as f64;
        let w = steps * dt;
        rates.t.push(t0 + b as f64 * width + 0.5 * w);
        rates.lambda_hat.push(dep_bins[b] as f64 / (kf * w));
        rates.se.push((dep_bins[b] as f64).sqrt() / (kf * w));
        rates.arrival_hat.push(arr_bins[b] as f64 / (kf * w));
    }
    let cap_violations = rates.lambda_hat.iter().zip(&rates.se).filter(|(l, s)| **l > cap + 5.0 * **s).count();
    Ok(Evolution { rates, snapshots, cap, cap_violations })
}

/// Drift of `N(μ̂_t)` against its Monte Carlo band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationReport {
    /// `(t, N(μ̂_t))` series.
    pub series: Vec<(f64, f64)>,
    /// `max_t |N(μ̂_t) − N(μ̂_0)|`.
    pub max_drift: f64,
    /// `σ_K`: standard deviation of the final increment under binomial noise.
    pub sigma: f64,
    /// `max_drift / σ_K` (0 when both vanish).
    pub ratio: f64,
    /// `max_drift < 4σ_K`, or no drift at all.
    pub pass: bool,
}

/// Checks conservation of the mean queue along a series of snapshots.
pub fn conservation_check(snapshots: &[Snapshot]) -> Result<ConservationReport> {
    if snapshots.len() < 2 {
        return Err(Error::Data("conservation check needs at least two snapshots".into()));
    }
    let n0 = snapshots[0].mean_queue;
    let series: Vec<(f64, f64)> = snapshots.iter().map(|s| (s.t, s.mean_queue)).collect();
    let max_drift = series.iter().map(|(_, n)| (n - n0).abs()).fold(0.0, f64::max);
    let sigma = (snapshots[snapshots.len() - 1].cum_var - snapshots[0].cum_var).max(0.0).sqrt();
    let ratio = if sigma > 0.0 { max_drift / sigma } else if max_drift == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(ConservationReport { series, max_drift, sigma, ratio, pass: max_drift == 0.0 || max_drift < 4.0 * sigma })
}

/// Root-mean-square drift `√E[(N(μ̂_t) − N(μ̂_0))²]` over `replicas`
/// independent ensembles of size `k` and all snapshot times.
pub fn drift_rms(d: &ServiceDistribution, init: &EnsembleInit, k: usize, replicas: u64, opts: &EvolveOptions, seed: u64) -> Result<f64> {
    let per: Vec<Result<(f64, usize)>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut e = ParticleEnsemble::new(d.clone(), init, k)?;
            let ev = e.evolve(opts, crate::rng::child_seed(seed, r))?;
            let n0 = ev.snapshots[0].mean_queue;
            let ss: f64 = ev.snapshots[1..].iter().map(|s| (s.mean_queue - n0).powi(2)).sum();
            Ok((ss, ev.snapshots.len() - 1))
        })
        .collect();
    let (mut ss, mut cnt) = (0.0, 0usize);
    for p in per {
        let (a, b) = p?;
        ss += a;
        cnt += b;
    }
    Ok((ss / cnt as f64).sqrt())
}

/// Tail summary of a rate trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Relaxation {
    /// Mean of `λ̂` over the tail.
    pub c_hat: Estimate,
    /// `max − min` of `λ̂` over the tail.
    pub oscillation: f64,
    /// Mean idle fraction over tail snapshots.
    pub tail_idle: f64,
    /// `∫₀ᵀ λ̂ / T` over the whole run.
    pub time_average: f64,
    /// Number of tail bins.
    pub tail_bins: usize,
}

/// Summarizes the last `tail_fraction` of a run.
pub fn relaxation_estimate(rt: &RateTrajectory, snapshots: &[Snapshot], tail_fraction: f64) -> Result<Relaxation> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::Config("tail fraction must lie in (0, 1]".into()));
    }
    let nb = rt.lambda_hat.len();
    let horizon = nb as f64 * rt.bin;
    if horizon < 10.0 {
        return Err(Error::Data(format!("horizon {horizon} shorter than 10 service means")));
    }
    let tail = (tail_fraction * nb as f64).floor() as usize;
    if tail < 4 {
        return Err(Error::Data("fewer than 4 tail bins".into()));
    }
    let xs = &rt.lambda_hat[nb - tail..];
    let mut w = Welford::default();
    for &x in xs {
        w.push(x);
    }
    let oscillation = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) - xs.iter().copied().fold(f64::INFINITY, f64::min);
    let t_tail = rt.t[nb - tail] - 0.5 * rt.bin;
    let tail_snaps: Vec<f64> = snapshots.iter().filter(|s| s.t >= t_tail).map(|s| s.idle_frac).collect();
    let tail_idle = if tail_snaps.is_empty() { f64::NAN } else { tail_snaps.iter().sum::<f64>() / tail_snaps.len() as f64 };
    let time_average = rt.lambda_hat.iter().sum::<f64>() * rt.bin / horizon;
    Ok(Relaxation { c_hat: Estimate::new(w.mean(), w.std_error()), oscillation, tail_idle, time_average, tail_bins: tail })
}

/// Options of [`c_from_q`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CFromQOptions {
    /// Horizon of each stationary run.
    pub horizon: f64,
    /// Seed shared by every bisection step (common random numbers).
    pub seed: u64,
    /// Tolerance on `|N(ν_c) − q|`.
    pub tol: f64,
    /// Bracket resolution in `c`.
    pub c_tol: f64,
    /// The search range is `[0, 1 − delta_max]`.
    pub delta_max: f64,
}

impl Default for CFromQOptions {
    fn default() -> Self {
        Self { horizon: 2e5, seed: 0, tol: 1e-3, c_tol: 1e-5, delta_max: 0.01 }
    }
}

/// Result of [`c_from_q`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CFromQ {
    /// Rate `c` with `N(ν_c) ≈ q`.
    pub c: f64,
    /// `N(ν_c)` at the returned `c`.
    pub n_at_c: f64,
    /// Bisection steps taken.
    pub iterations: usize,
}

/// Inverts the increasing map `c ↦ N(ν_c)` by bisection on `[0, 1 − δ_max]`,
/// estimating `N(ν_c)` with [`stationary_single_server`] under common random
/// numbers. Asserts monotonicity of the bracket values.
pub fn c_from_q(q: f64, d: &ServiceDistribution, opts: &CFromQOptions) -> Result<CFromQ> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::Config("target mean queue must be finite and ≥ 0".into()));
    }
    if q == 0.0 {
        return Ok(CFromQ { c: 0.0, n_at_c: 0.0, iterations: 0 });
    }
    let eval = |c: f64| -> Result<f64> { Ok(stationary_single_server(c, d, opts.horizon, opts.seed)?.mean_queue.value) };
    let (mut lo, mut n_lo) = (0.0, 0.0);
    let mut hi = 1.0 - opts.delta_max;
    let mut n_hi = eval(hi)?;
    if n_hi < q {
        return Err(Error::Range(format!("N(ν_c) = {n_hi} < q = {q} at c = {hi}")));
    }
    let mut iterations = 0;
    while hi - lo > opts.c_tol {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let n_mid = eval(mid)?;
        if !(n_lo <= n_mid && n_mid <= n_hi) {
            return Err(Error::Numeric(format!("N(ν_c) not monotone: {n_lo} ≤ {n_mid} ≤ {n_hi} fails on [{lo}, {hi}]")));
        }
        if (n_mid - q).abs() < opts.tol {
            return Ok(CFromQ { c: mid, n_at_c: n_mid, iterations });
        }
        if n_mid < q {
            lo = mid;
            n_lo = n_mid;
        } else {
            hi = mid;
            n_hi = n_mid;
        }
    }
    let c = 0.5 * (lo + hi);
    Ok(CFromQ { c, n_at_c: eval(c)?, iterations })
}

/// Monte Carlo estimate of `ε(x) = P{η₁ + … + η_{n+m} ≥ x}`, where `(n, τ)`
/// is drawn uniformly from `init` (the empty state if `init` is empty), `m`
/// is Poisson with mean `∫₀ˣ λ`, `η₁` is the residual duration at `τ` when
/// `n ≥ 1`, and the other `η_k` are i.i.d. from `d`.
pub fn epsilon_estimate(init: &[ServerState], lambda: &Intensity, d: &ServiceDistribution, x: f64, reps: u64, seed: u64) -> Result<Estimate> {
    if !(x >= 0.0) {
        return Err(Error::Config("x must be ≥ 0".into()));
    }
    if reps < 2 {
        return Err(Error::Config("need at least two replicas".into()));
    }
    lambda.validate()?;
    let mu = lambda.integral(0.0, x);
    let pois = if mu > 0.0 { Some(Poisson::new(mu).map_err(|e| Error::Numeric(e.to_string()))?) } else { None };
    const CHUNK: u64 = 4096;
    let hits: Vec<Result<u64>> = (0..reps.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, component::EPSILON, c);
            let mut hits = 0u64;
            for _ in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                let s = if init.is_empty() { ServerState::empty() } else { init[rng.random_range(0..init.len())] };
                let m = pois.as_ref().map_or(0, |p| p.sample(&mut rng) as u64);
                let total = u64::from(s.n) + m;
                let mut sum = 0.0;
                let mut k = 0u64;
                if s.n > 0 {
                    sum += match s.remaining {
                        Some(r) => r,
                        None => d.residual(s.tau.unwrap_or(0.0))?.sample(&mut rng),
                    };
                    k = 1;
                }
                while k < total && sum < x {
                    sum += d.sample(&mut rng);
                    k += 1;
                }
                if sum >= x {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect();
    let mut h = 0u64;
    for x in hits {
        h += x?;
    }
    let p = h as f64 / reps as f64;
    Ok(Estimate::new(p, (p * (1.0 - p) / reps as f64).sqrt()))
}

/// `K` states sampled from a long single-server run at constant rate `c`,
/// taken every `spacing` time units after a warm-up of `burn_in`.
pub fn stationary_snapshot(c: f64, d: &ServiceDistribution, k: usize, burn_in: f64, spacing: f64, seed: u64) -> Result<Vec<ServerState>> {
    if !(c >= 0.0 && c < 1.0) {
        return Err(Error::Config("snapshot rate must lie in [0, 1)".into()));
    }
    if !(spacing > 0.0) || !(burn_in >= 0.0) {
        return Err(Error::Config("spacing must be positive and burn-in ≥ 0".into()));
    }
    let horizon = burn_in + spacing * k as f64;
    let mut ra = stream(seed, component::STATIONARY, 2);
    let mut rs = stream(seed, component::STATIONARY, 3);
    let arrivals = crate::queue_sim::poisson_epochs(&Intensity::Constant { rate: c }, horizon, &mut ra)?;
    // Service starts and departures by the FIFO recursion.
    let mut starts = Vec::with_capacity(arrivals.len());
    let mut deps = Vec::with_capacity(arrivals.len());
    let mut last = 0.0f64;
    for &a in &arrivals {
        let st = last.max(a);
        starts.push(st);
        last = st + d.sample(&mut rs);
        deps.push(last);
    }
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let t = burn_in + spacing * (i as f64 + 1.0);
        let na = arrivals.partition_point(|&x| x <= t);
        let nd = deps.partition_point(|&x| x <= t);
        let n = (na - nd) as u32;
        if n == 0 {
            out.push(ServerState::empty());
        } else {
            // The customer in service is the first not yet departed.
            out.push(ServerState { n, tau: Some(t - starts[nd]), remaining: Some(deps[nd] - t) });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::total_variation;

    fn exp() -> ServiceDistribution {
        ServiceDistribution::exponential()
    }

    #[test]
    fn hazard_table_sampling_matches_geometric() {
        let t = HazardTable::new(&exp(), 0.01).unwrap();
        let mut rng = stream(1, 0, 0);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| (t.sample_end(0, &mut rng) + 1) as f64 * 0.01).sum::<f64>() / n as f64;
        // Geometric(Δt) steps of length Δt: mean exactly 1.
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        // Sampling beyond the table stays in the geometric tail and is ≥ j0.
        let j0 = t.len() as i64 + 50;
        for _ in 0..100 {
            assert!(t.sample_end(j0, &mut rng) >= j0);
        }
    }

    #[test]
    fn hazard_table_guard_at_support_edge() {
        let u = ServiceDistribution::raw(crate::dists::DistSpec::Uniform { a: 1.0 }).unwrap();
        // A grid aligned with the support end reaches probability exactly 1.
        assert!(HazardTable::new(&u, 0.005).is_ok());
        // A misaligned grid overshoots it near τ = 1.
        assert!(matches!(HazardTable::new(&u, 0.003), Err(Error::Numeric(_))));
    }

    #[test]
    fn empty_ensemble_is_a_fixed_point() {
        let mut e = ParticleEnsemble::new(exp(), &EnsembleInit::Empty, 1000).unwrap();
        let ev = e.evolve(&EvolveOptions::with_horizon(5.0), 1).unwrap();
        assert!(ev.rates.lambda_hat.iter().all(|&l| l == 0.0));
        let c = conservation_check(&ev.snapshots).unwrap();
        assert_eq!(c.max_drift, 0.0);
        assert!(c.pass);
    }

    #[test]
    fn rejects_large_step() {
        let mut e = ParticleEnsemble::new(exp(), &EnsembleInit::Empty, 1000).unwrap();
        let mut o = EvolveOptions::with_horizon(1.0);
        o.dt = 0.02;
        assert!(matches!(e.evolve(&o, 1), Err(Error::Config(_))));
    }

    #[test]
    fn conservation_and_cap() {
        let mut e = ParticleEnsemble::new(exp(), &EnsembleInit::Burst { n: 3 }, 20_000).unwrap();
        let ev = e.evolve(&EvolveOptions::with_horizon(30.0), 2).unwrap();
        let c = conservation_check(&ev.snapshots).unwrap();
        assert!(c.pass, "{} vs σ {}", c.max_drift, c.sigma);
        assert_eq!(ev.cap, 1.0);
        assert_eq!(ev.cap_violations, 0);
        assert!((e.mean_queue() - 3.0).abs() < 4.0 * c.sigma + 1e-12);
        assert!(e.expected_work().unwrap() > 0.0);
    }

    #[test]
    fn stationary_start_stays_flat() {
        let d = exp();
        let k = 20_000;
        let snap = stationary_snapshot(0.5, &d, k, 100.0, 10.0, 3).unwrap();
        let mut e = ParticleEnsemble::new(d, &EnsembleInit::Snapshot { states: snap }, k).unwrap();
        let ev = e.evolve(&EvolveOptions::with_horizon(20.0), 4).unwrap();
        // Compare bins of width 2 to avoid 80 individual noisy comparisons.
        let lh = &ev.rates.lambda_hat;
        for chunk in lh.chunks(8) {
            let m = chunk.iter().sum::<f64>() / chunk.len() as f64;
            let se = (0.5 / (k as f64 * 2.0)).sqrt();
            assert!((m - 0.5).abs() < 4.0 * se + 0.01, "{m}");
        }
    }

    #[test]
    fn relaxation_of_burst_to_birth_death_rate() {
        let k = 50_000;
        let mut e = ParticleEnsemble::new(exp(), &EnsembleInit::Burst { n: 1 }, k).unwrap();
        let ev = e.evolve(&EvolveOptions::with_horizon(60.0), 5).unwrap();
        let r = relaxation_estimate(&ev.rates, &ev.snapshots, 0.25).unwrap();
        // N = c/(1−c) = 1 ⇒ c = 1/2.
        assert!((r.c_hat.value - 0.5).abs() < 0.02, "{:?}", r.c_hat);
        assert!(r.tail_idle > 0.3);
        assert!(r.time_average < 1.0);
        // Mean-field consistency: settled marginal vs stationary M/M/1.
        let st = stationary_single_server(r.c_hat.value, &ServiceDistribution::exponential(), 1e5, 1).unwrap();
        let h = e.histogram();
        let p: Vec<f64> = h.iter().map(|&x| x as f64 / k as f64).collect();
        assert!(total_variation(&p, &st.dist) < 0.03);
    }

    #[test]
    fn relaxation_needs_long_horizon() {
        let rt = RateTrajectory { bin: 0.25, t: vec![0.125; 8], lambda_hat: vec![0.5; 8], se: vec![0.0; 8], arrival_hat: vec![0.5; 8] };
        assert!(matches!(relaxation_estimate(&rt, &[], 0.5), Err(Error::Data(_))));
        let rt = RateTrajectory { bin: 0.25, t: (0..80).map(|i| 0.125 + 0.25 * i as f64).collect(), lambda_hat: vec![0.5; 80], se: vec![0.0; 80], arrival_hat: vec![0.5; 80] };
        let r = relaxation_estimate(&rt, &[], 0.5).unwrap();
        assert_eq!(r.oscillation, 0.0);
    }

    #[test]
    fn c_from_q_matches_oracles() {
        let opts = CFromQOptions { horizon: 1e5, seed: 7, ..Default::default() };
        assert_eq!(c_from_q(0.0, &exp(), &opts).unwrap().c, 0.0);
        let c1 = c_from_q(1.0, &exp(), &opts).unwrap().c;
        assert!((c1 - 0.5).abs() < 0.01, "{c1}");
        let c2 = c_from_q(2.0, &exp(), &opts).unwrap().c;
        assert!(c2 > c1);
        assert!((c2 - 2.0 / 3.0).abs() < 0.01);
        assert!(matches!(c_from_q(1e6, &exp(), &opts), Err(Error::Range(_))));
    }

    #[test]
    fn epsilon_examples() {
        let d = exp();
        let busy = [ServerState::busy(1, 0.0).unwrap()];
        assert_eq!(epsilon_estimate(&busy, &Intensity::Constant { rate: 0.5 }, &d, 0.0, 100, 1).unwrap().value, 1.0);
        assert_eq!(epsilon_estimate(&[], &Intensity::Constant { rate: 0.0 }, &d, 3.0, 100, 1).unwrap().value, 0.0);
        let e = epsilon_estimate(&busy, &Intensity::Constant { rate: 0.5 }, &d, 50.0, 100_000, 1).unwrap();
        assert!(e.value < 0.01);
        // Decreasing in x.
        let a = epsilon_estimate(&busy, &Intensity::Constant { rate: 0.5 }, &d, 2.0, 100_000, 2).unwrap().value;
        let b = epsilon_estimate(&busy, &Intensity::Constant { rate: 0.5 }, &d, 6.0, 100_000, 2).unwrap().value;
        assert!(a > b);
        // Oracle: one busy customer, no input ⇒ P{η ≥ x} = e^{−x}.
        let z = epsilon_estimate(&busy, &Intensity::Constant { rate: 0.0 }, &d, 1.0, 200_000, 3).unwrap();
        assert!(z.within_sigmas((-1.0f64).exp(), 4.0));
    }

    #[test]
    fn snapshot_states_are_valid() {
        let s = stationary_snapshot(0.5, &exp(), 2000, 50.0, 5.0, 1).unwrap();
        assert!(s.iter().all(|x| x.validate().is_ok()));
        let idle = s.iter().filter(|x| x.n == 0).count() as f64 / 2000.0;
        assert!((idle - 0.5).abs() < 0.05);
    }
}
