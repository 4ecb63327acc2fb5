//! Kernel families `x ↦ q_x`, the left-moving walk they drive, and checks
//! of the regularity conditions placed on them.

use crate::dists::{GridDensity, ServiceDistribution};
use crate::error::{Error, Result};
use crate::rng::{component, stream};
use crate::stats::Estimate;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

/// A family of probability densities `q_x(t)` on `t > 0`, indexed by the
/// position `x`.
#[derive(Debug, Clone)]
pub enum KernelFamily {
    /// `q_x = p` for every `x`.
    Stationary(ServiceDistribution),
    /// `q_x(t) = (1/T)(1 + a·sin(ωx)·cos(2πt/T))` on `[0, T)`: supported on a
    /// finite range with the explicit floor `κ = (1 − |a|)/T`.
    FiniteRange {
        /// Support length `T`.
        t: f64,
        /// Modulation depth, `|a| < 1`.
        a: f64,
        /// Modulation frequency in `x`.
        omega: f64,
    },
    /// The escaping family: for `x ∈ (k, k+1]`, `k ≥ 1`, uniform on
    /// `[k−1, k]`; for `x ∈ (2^{−k}, 2^{−k+1}]`, mass `1 − e^{−(T+1)}` spread
    /// uniformly over `[x − 2^{−k}, x − 2^{−k−1}]` plus the tail `e^{−t}` on
    /// `t > T + 1`. The walk creeps geometrically towards 0 and leaves only by
    /// a jump over `[−T, 0]`. For `x ≤ 0` the kernel is the unit exponential.
    Escaping {
        /// Interval length `T` the tail jumps over.
        t: f64,
    },
    /// Tabulated densities: `q_x = tables[j]` for `xs[j] ≤ x < xs[j+1]`
    /// (the first table below `xs[0]`).
    Empirical {
        /// Increasing breakpoints.
        xs: Vec<f64>,
        /// One density per breakpoint, on grids starting at `t = 0`.
        tables: Vec<GridDensity>,
    },
    /// `q_x(t) = (α − 1)(1 + t)^{−α}` for every `x` (a heavy tail `∝ t^{−α}`).
    PowerTail {
        /// Tail exponent, `α > 1`.
        alpha: f64,
    },
}

impl KernelFamily {
    /// Checks parameters; kernels putting mass on `t < 0` are ill-posed.
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelFamily::Stationary(_) => Ok(()),
            KernelFamily::FiniteRange { t, a, omega } => {
                if !(*t > 0.0 && t.is_finite()) || !(a.abs() < 1.0) || !omega.is_finite() {
                    return Err(Error::Config("finite-range kernel needs T > 0, |a| < 1 and finite ω".into()));
                }
                Ok(())
            }
            KernelFamily::Escaping { t } => {
                if !(*t > 0.0 && t.is_finite()) {
                    return Err(Error::Config("escaping kernel needs T > 0".into()));
                }
                Ok(())
            }
            KernelFamily::Empirical { xs, tables } => {
                if xs.is_empty() || xs.len() != tables.len() || xs.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("empirical kernel needs increasing breakpoints, one table each".into()));
                }
                for g in tables {
                    if g.origin() < 0.0 && (0..g.len()).any(|i| g.t(i) < 0.0 && g.right(i) > 0.0) {
                        return Err(Error::IllPosed("kernel table puts mass on t < 0".into()));
                    }
                    if g.origin() > 0.0 {
                        return Err(Error::Config("kernel tables must start at t ≤ 0".into()));
                    }
                    if (g.mass() - 1.0).abs() > 1e-6 {
                        return Err(Error::Range(format!("kernel table mass {} differs from 1", g.mass())));
                    }
                }
                Ok(())
            }
            KernelFamily::PowerTail { alpha } => {
                if !(*alpha > 1.0 && alpha.is_finite()) {
                    return Err(Error::Config("power-tail kernel needs α > 1".into()));
                }
                Ok(())
            }
        }
    }

    /// Short name of the mode.
    pub fn label(&self) -> &'static str {
        match self {
            KernelFamily::Stationary(_) => "stationary",
            KernelFamily::FiniteRange { .. } => "finite_range",
            KernelFamily::Escaping { .. } => "escaping",
            KernelFamily::Empirical { .. } => "empirical",
            KernelFamily::PowerTail { .. } => "power_tail",
        }
    }

    /// True when `q_x` does not depend on `x`.
    pub fn is_stationary(&self) -> bool {
        matches!(self, KernelFamily::Stationary(_) | KernelFamily::PowerTail { .. })
            || matches!(self, KernelFamily::Empirical { xs, .. } if xs.len() == 1)
    }

    /// Declared support bound (`q_x(t) = 0` for `t ≥ bound` for every `x`),
    /// `None` for infinite range.
    pub fn support_bound(&self) -> Option<f64> {
        match self {
            KernelFamily::Stationary(d) => d.support_end(),
            KernelFamily::FiniteRange { t, .. } => Some(*t),
            KernelFamily::Escaping { .. } | KernelFamily::PowerTail { .. } => None,
            KernelFamily::Empirical { tables, .. } => {
                Some(tables.iter().map(|g| g.t(g.len() - 1)).fold(0.0, f64::max))
            }
        }
    }

    /// Nominal step length used to size walk budgets: the mean of `q_x` where
    /// it is independent of `x`, `T/2` for the finite-range family, and 1
    /// for the escaping family (whose steps have no common scale).
    pub fn nominal_mean(&self) -> f64 {
        match self {
            KernelFamily::Stationary(d) => d.mean(),
            KernelFamily::FiniteRange { t, .. } => t / 2.0,
            KernelFamily::Escaping { .. } => 1.0,
            KernelFamily::Empirical { tables, .. } => tables[0].mean().max(f64::MIN_POSITIVE),
            KernelFamily::PowerTail { alpha } => {
                if *alpha > 2.0 {
                    1.0 / (alpha - 2.0)
                } else {
                    1.0
                }
            }
        }
    }

    fn table(&self, x: f64) -> Option<&GridDensity> {
        match self {
            KernelFamily::Empirical { xs, tables } => {
                let j = xs.partition_point(|&s| s <= x).saturating_sub(1);
                Some(&tables[j])
            }
            _ => None,
        }
    }

    /// Right value `q_x(t+)`; zero for `t < 0`.
    pub fn density(&self, x: f64, t: f64) -> f64 {
        self.density_sided(x, t, true)
    }

    /// Left limit `q_x(t−)`; zero for `t ≤ 0`.
    pub fn density_left(&self, x: f64, t: f64) -> f64 {
        self.density_sided(x, t, false)
    }

    fn density_sided(&self, x: f64, t: f64, right: bool) -> f64 {
        // `inside(a, b)` is membership of the open/closed side matching the
        // requested one-sided limit.
        let inside = |a: f64, b: f64| if right { t >= a && t < b } else { t > a && t <= b };
        match self {
            KernelFamily::Stationary(d) => {
                if right {
                    d.pdf(t)
                } else {
                    d.pdf_left(t)
                }
            }
            KernelFamily::FiniteRange { t: big_t, a, omega } => {
                if inside(0.0, *big_t) {
                    (1.0 + a * (omega * x).sin() * (2.0 * std::f64::consts::PI * t / big_t).cos()) / big_t
                } else {
                    0.0
                }
            }
            KernelFamily::Escaping { t: big_t } => {
                if x > 1.0 {
                    let k = x.ceil() - 1.0;
                    if inside(k - 1.0, k) {
                        1.0
                    } else {
                        0.0
                    }
                } else if x > 0.0 {
                    let (lo, hi, c) = escaping_window(x, *big_t);
                    let tail = if inside(big_t + 1.0, f64::INFINITY) { (-t).exp() } else { 0.0 };
                    tail + if inside(lo, hi) { c } else { 0.0 }
                } else if inside(0.0, f64::INFINITY) {
                    (-t).exp()
                } else {
                    0.0
                }
            }
            KernelFamily::Empirical { .. } => {
                let g = self.table(x).expect("empirical");
                if !inside(0.0, f64::INFINITY) {
                    return 0.0;
                }
                let u = (t - g.origin()) / g.step();
                let i = u.round();
                if (u - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < g.len() {
                    let i = i as usize;
                    return if right { g.right(i) } else { g.left(i) };
                }
                g.eval(t)
            }
            KernelFamily::PowerTail { alpha } => {
                if inside(0.0, f64::INFINITY) {
                    (alpha - 1.0) * (1.0 + t).powf(-alpha)
                } else {
                    0.0
                }
            }
        }
    }

    /// Distribution function `∫_0^t q_x`.
    pub fn cdf(&self, x: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            KernelFamily::Stationary(d) => d.cdf(t),
            KernelFamily::FiniteRange { t: big_t, a, omega } => {
                if t >= *big_t {
                    1.0
                } else {
                    let w = 2.0 * std::f64::consts::PI / big_t;
                    t / big_t + a * (omega * x).sin() * (w * t).sin() / (w * big_t)
                }
            }
            KernelFamily::Escaping { t: big_t } => {
                if x > 1.0 {
                    let k = x.ceil() - 1.0;
                    (t - (k - 1.0)).clamp(0.0, 1.0)
                } else if x > 0.0 {
                    let (lo, hi, _) = escaping_window(x, *big_t);
                    let tail = (-(big_t + 1.0)).exp();
                    let body = (1.0 - tail) * ((t - lo) / (hi - lo)).clamp(0.0, 1.0);
                    body + if t > big_t + 1.0 { tail - (-t).exp() } else { 0.0 }
                } else {
                    1.0 - (-t).exp()
                }
            }
            KernelFamily::Empirical { .. } => {
                let g = self.table(x).expect("empirical");
                let mut s = 0.0;
                for i in 0..g.len().saturating_sub(1) {
                    let (a, b) = (g.t(i), g.t(i + 1));
                    if b <= 0.0 {
                        continue;
                    }
                    if a >= t {
                        break;
                    }
                    if b <= t {
                        s += 0.5 * g.step() * (g.right(i) + g.left(i + 1));
                    } else {
                        let w = (t - a) / g.step();
                        let mid = g.right(i) + w * (g.left(i + 1) - g.right(i));
                        s += 0.5 * (t - a) * (g.right(i) + mid);
                    }
                }
                s.min(1.0)
            }
            KernelFamily::PowerTail { alpha } => 1.0 - (1.0 + t).powf(1.0 - alpha),
        }
    }

    /// Draws a step `t ~ q_x`.
    pub fn sample<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        match self {
            KernelFamily::Stationary(d) => d.sample(rng),
            KernelFamily::Escaping { t: big_t } => {
                if x > 1.0 {
                    x.ceil() - 2.0 + rng.random::<f64>()
                } else if x > 0.0 {
                    if rng.random::<f64>() < (-(big_t + 1.0)).exp() {
                        big_t + 1.0 + <Exp1 as Distribution<f64>>::sample(&Exp1, rng)
                    } else {
                        let (lo, hi, _) = escaping_window(x, *big_t);
                        lo + rng.random::<f64>() * (hi - lo)
                    }
                } else {
                    <Exp1 as Distribution<f64>>::sample(&Exp1, rng)
                }
            }
            KernelFamily::PowerTail { alpha } => {
                let u: f64 = rng.random();
                (1.0 - u).powf(-1.0 / (alpha - 1.0)) - 1.0
            }
            _ => {
                // Inversion by bisection on the distribution function.
                let u: f64 = rng.random();
                let mut hi = self.support_bound().unwrap_or(1.0).max(1e-12);
                while self.cdf(x, hi) < u && hi < 1e12 {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(x, mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Right values and left limits of `q_x` at `t_j = j·h`, `j = 0..n`.
    pub fn row(&self, x: f64, h: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let r = (0..n).map(|j| self.density(x, j as f64 * h)).collect();
        let l = (0..n).map(|j| self.density_left(x, j as f64 * h)).collect();
        (r, l)
    }

    /// `q_x` sampled on `[0, t_max]` with step `h` (mass may fall short of 1
    /// when the support exceeds `t_max`).
    pub fn grid(&self, x: f64, h: f64, t_max: f64) -> Result<GridDensity> {
        let n = (t_max / h).round() as usize + 1;
        let (r, l) = self.row(x, h, n);
        let jumps = (1..n).filter(|&j| l[j] != r[j]).map(|j| (j, l[j])).collect();
        GridDensity::unnormalized(0.0, h, r, jumps)
    }

    /// Supremum of `q_x` over `t ∈ [a, b]` (exact for the escaping family,
    /// a fine-grid maximum otherwise).
    pub fn sup_on(&self, x: f64, a: f64, b: f64) -> f64 {
        if let KernelFamily::Escaping { t: big_t } = self {
            if x > 0.0 && x <= 1.0 {
                let (lo, hi, c) = escaping_window(x, *big_t);
                let mut s = if lo < b && hi > a { c } else { 0.0 };
                if b > big_t + 1.0 {
                    s += (-(a.max(big_t + 1.0))).exp();
                }
                return s;
            }
        }
        let n = 4000;
        (0..=n)
            .map(|i| a + (b - a) * i as f64 / n as f64)
            .map(|t| self.density(x, t).max(self.density_left(x, t)))
            .fold(0.0, f64::max)
    }
}

/// `(lo, hi, height)` of the near-origin window of the escaping kernel at
/// `x ∈ (2^{−k}, 2^{−k+1}]`.
fn escaping_window(x: f64, big_t: f64) -> (f64, f64, f64) {
    let mut k = 1i32;
    while (-(k as f64)).exp2() >= x && k < 1100 {
        k += 1;
    }
    let lo = x - (-(k as f64)).exp2();
    let hi = x - (-(k as f64) - 1.0).exp2();
    let c = (k as f64 + 1.0).exp2() * (1.0 - (-(big_t + 1.0)).exp());
    (lo, hi, c)
}

/// Monte Carlo estimate of `P_x{walk visits [−T, 0]}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisitEstimate {
    /// Visit probability with its standard error.
    pub probability: Estimate,
    /// Number of walks.
    pub reps: u64,
    /// Walks that landed in `[−T, 0]`.
    pub visits: u64,
    /// Walks stopped by the step budget (counted as misses).
    pub budget_misses: u64,
    /// Walks whose position underflowed to the smallest representable
    /// scale before a decision (counted as misses).
    pub underflow_misses: u64,
    /// Step budget `⌈50·(x + T)/m⌉`.
    pub budget: u64,
}

/// Estimates the probability that the walk `X_0 = x`, `X_{k+1} = X_k − t_k`,
/// `t_k ~ q_{X_k}`, lands in `[−T, 0]` before jumping past it.
///
/// A walk still above 0 after the step budget `⌈50(x + T)/m⌉` (with `m` the
/// family's [`nominal_mean`](KernelFamily::nominal_mean)), or whose position
/// shrinks below `1e-300`, is counted as a flagged miss.
pub fn visit_probability(k: &KernelFamily, x: f64, t_len: f64, reps: u64, seed: u64) -> Result<VisitEstimate> {
    k.validate()?;
    if !(t_len > 0.0) || !x.is_finite() || x < -t_len {
        return Err(Error::Domain("walk needs T > 0 and a start x ≥ −T".into()));
    }
    if reps < 2 {
        return Err(Error::Config("need at least two walks".into()));
    }
    let budget = (50.0 * (x.max(0.0) + t_len) / k.nominal_mean()).ceil().max(1.0) as u64;
    if x <= 0.0 {
        return Ok(VisitEstimate {
            probability: Estimate::new(1.0, 0.0),
            reps,
            visits: reps,
            budget_misses: 0,
            underflow_misses: 0,
            budget,
        });
    }
    const CHUNK: u64 = 1024;
    let parts: Vec<(u64, u64, u64)> = (0..reps.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let (mut v, mut bm, mut um) = (0, 0, 0);
            for r in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                let mut rng = stream(seed, component::WALK, r);
                let mut pos = x;
                let mut steps = 0u64;
                loop {
                    if steps >= budget {
                        bm += 1;
                        break;
                    }
                    if pos < 1e-300 {
                        um += 1;
                        break;
                    }
                    pos -= k.sample(pos, &mut rng);
                    steps += 1;
                    if pos <= 0.0 {
                        if pos >= -t_len {
                            v += 1;
                        }
                        break;
                    }
                }
            }
            (v, bm, um)
        })
        .collect();
    let (visits, budget_misses, underflow_misses) =
        parts.iter().fold((0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let p = visits as f64 / reps as f64;
    Ok(VisitEstimate {
        probability: Estimate::new(p, (p * (1.0 - p) / reps as f64).sqrt()),
        reps,
        visits,
        budget_misses,
        underflow_misses,
        budget,
    })
}

/// Options of [`validate_kernel_family`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidateConfig {
    /// Range `T` for the floor and `F_T(δ)` checks (defaults to the declared
    /// support bound, else 20).
    pub t_range: Option<f64>,
    /// Moment exponent `δ` of the service law the kernels come from.
    pub delta: f64,
    /// Moment order `b` (defaults to `δ/4`; `b ≥ δ/2` is out of contract).
    pub b: Option<f64>,
    /// Bound on `sup_{t ≤ 1} q_x(t)` regarded as "bounded near the origin".
    pub origin_cap: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { t_range: None, delta: crate::dists::DEFAULT_DELTA, b: None, origin_cap: 100.0 }
    }
}

/// Per-probe regularity profile of `q_x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    /// Probe position.
    pub x: f64,
    /// Total mass from the distribution function.
    pub mass: f64,
    /// Mass beyond `T`.
    pub tail_beyond_t: f64,
    /// Minimum of `q_x` over the interior of `[0, T]`.
    pub kappa_floor: f64,
    /// Supremum of `q_x` over `[0, 1]`.
    pub sup_origin: f64,
    /// Supremum of `q_x` over `[0, T]`.
    pub sup_range: f64,
    /// `(ε, K(ε))`: smallest `K` with `∫_0^K q_x ≥ 1 − ε` (`None` if beyond 1e9).
    pub k_eps: Vec<(f64, Option<f64>)>,
    /// `(δ, F_T(δ))`: least mass of `q_x` on a subset of `[0, T]` of measure `δ`.
    pub f_t: Vec<(f64, f64)>,
    /// Tail exponent `γ` of `1 − F(t) ≈ t^{−γ}` (infinite for light tails).
    pub tail_exponent: f64,
    /// `∫ t^b q_x(t) dt`, `None` when it diverges.
    pub moment: Option<f64>,
}

/// Regularity report of a kernel family over a set of probes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    /// Kernel mode.
    pub mode: String,
    /// Range `T` used.
    pub t_range: f64,
    /// Moment order checked.
    pub b: f64,
    /// Moment exponent `δ`.
    pub delta: f64,
    /// Per-probe profiles.
    pub probes: Vec<ProbeReport>,
    /// Finite-range conditions: support in `[0, T]`, unit mass, bounded and
    /// floored by a positive `κ`.
    pub finite_range_ok: bool,
    /// Infinite-range conditions: tightness `K(ε) < ∞`, `F_T(δ) > 0`, finite
    /// moment of order `b`, bounded near the origin.
    pub infinite_range_ok: bool,
    /// `sup_{t ≤ 1} q_x(t) ≤ origin_cap` at every probe.
    pub origin_bounded: bool,
    /// `b ≥ δ/2` was requested.
    pub moment_out_of_contract: bool,
    /// Human-readable flags.
    pub flags: Vec<String>,
}

/// Profiles `q_x` at each probe and matches the family against the
/// finite-range and infinite-range sets of conditions.
pub fn validate_kernel_family(k: &KernelFamily, probes: &[f64], cfg: &ValidateConfig) -> Result<KernelReport> {
    k.validate()?;
    if probes.is_empty() {
        return Err(Error::Config("need at least one probe".into()));
    }
    let t_range = cfg.t_range.or(k.support_bound()).unwrap_or(20.0);
    let b = cfg.b.unwrap_or(cfg.delta / 4.0);
    let moment_out_of_contract = b >= cfg.delta / 2.0;
    let mut flags = Vec::new();
    if moment_out_of_contract {
        flags.push(format!("moment order b = {b} ≥ δ/2 = {} is out of contract", cfg.delta / 2.0));
    }
    let mut reports = Vec::with_capacity(probes.len());
    for &x in probes {
        let mass = k.cdf(x, 1e15);
        let tail_beyond_t = 1.0 - k.cdf(x, t_range);
        let n = 2000;
        let kappa_floor = (1..n)
            .map(|i| t_range * i as f64 / n as f64)
            .map(|t| k.density(x, t).min(k.density_left(x, t)))
            .fold(f64::INFINITY, f64::min);
        let sup_origin = k.sup_on(x, 0.0, 1.0);
        let sup_range = k.sup_on(x, 0.0, t_range);
        let k_eps = [0.1, 0.01].iter().map(|&e| (e, quantile_k(k, x, e))).collect();
        let cell = t_range / n as f64;
        let mut cells: Vec<f64> =
            (0..n).map(|i| k.cdf(x, cell * (i + 1) as f64) - k.cdf(x, cell * i as f64)).collect();
        cells.sort_by(f64::total_cmp);
        let f_t = [0.1 * t_range, 0.01 * t_range]
            .iter()
            .map(|&d| (d, cells.iter().take((d / cell).ceil() as usize).sum::<f64>()))
            .collect();
        let tail_exponent = tail_exponent(k, x);
        let moment = if b < tail_exponent { Some(moment_of(k, x, b, tail_exponent)) } else { None };
        reports.push(ProbeReport {
            x,
            mass,
            tail_beyond_t,
            kappa_floor,
            sup_origin,
            sup_range,
            k_eps,
            f_t,
            tail_exponent,
            moment,
        });
    }
    let origin_bounded = reports.iter().all(|r| r.sup_origin <= cfg.origin_cap);
    if !origin_bounded {
        let worst = reports.iter().map(|r| r.sup_origin).fold(0.0, f64::max);
        flags.push(format!("q_x is unbounded near the origin (sup over t ≤ 1 reaches {worst:.3e})"));
    }
    let finite_range_ok = reports.iter().all(|r| {
        (r.mass - 1.0).abs() <= 1e-6 && r.tail_beyond_t <= 1e-12 && r.kappa_floor > 0.0 && r.sup_range <= cfg.origin_cap
    });
    let infinite_range_ok = origin_bounded
        && !moment_out_of_contract
        && reports.iter().all(|r| {
            (r.mass - 1.0).abs() <= 1e-6
                && r.k_eps.iter().all(|(_, v)| v.is_some())
                && r.f_t.iter().all(|(_, v)| *v > 0.0)
                && r.moment.is_some()
        });
    if reports.iter().any(|r| r.moment.is_none()) {
        flags.push(format!("moment of order {b} diverges at some probe"));
    }
    if reports.iter().any(|r| (r.mass - 1.0).abs() > 1e-6) {
        flags.push("some q_x does not have unit mass".into());
    }
    Ok(KernelReport {
        mode: k.label().into(),
        t_range,
        b,
        delta: cfg.delta,
        probes: reports,
        finite_range_ok,
        infinite_range_ok,
        origin_bounded,
        moment_out_of_contract,
        flags,
    })
}

fn quantile_k(k: &KernelFamily, x: f64, eps: f64) -> Option<f64> {
    let target = 1.0 - eps;
    let mut hi = 1.0;
    while k.cdf(x, hi) < target {
        hi *= 2.0;
        if hi > 1e9 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if k.cdf(x, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// Log-log slope of the survival function between `1e6` and `2e6`.
fn tail_exponent(k: &KernelFamily, x: f64) -> f64 {
    let (t1, t2) = (1e6, 2e6);
    let (s1, s2) = (1.0 - k.cdf(x, t1), 1.0 - k.cdf(x, t2));
    if s1 <= 1e-300 || s2 <= 1e-300 {
        return f64::INFINITY;
    }
    (s1 / s2).ln() / (t2 / t1).ln()
}

/// `∫ t^b q_x = ∫_0^∞ b t^{b−1} (1 − F(t)) dt` by Simpson's rule in
/// `u = ln t`, with a power-law correction beyond `1e8`.
fn moment_of(k: &KernelFamily, x: f64, b: f64, gamma: f64) -> f64 {
    if b == 0.0 {
        return k.cdf(x, 1e15);
    }
    let (u0, u1) = ((1e-10f64).ln(), (1e8f64).ln());
    let n = 20_000;
    let h = (u1 - u0) / n as f64;
    let g = |u: f64| {
        let t = u.exp();
        b * t.powf(b) * (1.0 - k.cdf(x, t))
    };
    let mut s = g(u0) + g(u1);
    for i in 1..n {
        s += g(u0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let mut val = s * h / 3.0 + 1e-10f64.powf(b);
    if gamma.is_finite() {
        // ∫_{t1}^∞ b t^{b−1} S(t1)(t/t1)^{−γ} dt = b S(t1) t1^b / (γ − b).
        let t1 = 1e8;
        val += b * (1.0 - k.cdf(x, t1)) * t1.powf(b) / (gamma - b);
    }
    val
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_kernel() -> KernelFamily {
        KernelFamily::Stationary(ServiceDistribution::exponential())
    }

    #[test]
    fn escaping_kernel_has_unit_mass_and_consistent_cdf() {
        let k = KernelFamily::Escaping { t: 3.0 };
        for &x in &[0.3, 0.75, 1.0, 1.5, 4.2, 1e-5] {
            assert!((k.cdf(x, 1e9) - 1.0).abs() < 1e-12, "x={x}");
            // Numeric integration of the density against the cdf.
            let n = 200_000;
            let tmax = 40.0;
            let h = tmax / n as f64;
            let mut s = 0.0;
            for i in 0..n {
                s += 0.5 * h * (k.density(x, i as f64 * h) + k.density_left(x, (i + 1) as f64 * h));
            }
            if x > 1e-3 {
                assert!((s - k.cdf(x, tmax)).abs() < 2e-3, "x={x}: {s}");
            }
        }
    }

    #[test]
    fn escaping_steps_stay_positive_or_jump_past_the_interval() {
        let k = KernelFamily::Escaping { t: 2.0 };
        let mut rng = stream(3, 0, 0);
        for _ in 0..10_000 {
            let x: f64 = 0.001 + rng.random::<f64>() * 6.0;
            let y = x - k.sample(x, &mut rng);
            assert!(y > 0.0 || y < -2.0, "x={x} → {y}");
        }
    }

    #[test]
    fn start_inside_interval_visits_trivially() {
        let v = visit_probability(&exp_kernel(), -1.0, 5.0, 10, 1).unwrap();
        assert_eq!(v.probability.value, 1.0);
    }

    #[test]
    fn exponential_walk_visits_and_escaping_walk_does_not() {
        let v = visit_probability(&exp_kernel(), 30.0, 20.0, 2000, 5).unwrap();
        assert!(v.probability.value >= 0.99, "{v:?}");
        let e = visit_probability(&KernelFamily::Escaping { t: 20.0 }, 5.0, 20.0, 500, 5).unwrap();
        assert!(e.probability.value <= 0.01, "{e:?}");
        assert_eq!(e.visits, 0);
    }

    #[test]
    fn finite_range_kernel_passes_floor_conditions() {
        let k = KernelFamily::FiniteRange { t: 2.0, a: 0.5, omega: 1.3 };
        let r = validate_kernel_family(&k, &[0.0, 0.7, 3.0, 10.0], &ValidateConfig::default()).unwrap();
        assert!(r.finite_range_ok, "{r:?}");
        for p in &r.probes {
            assert!(p.kappa_floor >= 0.25 / 2.0 - 1e-9);
            assert!((p.mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn escaping_kernel_flagged_unbounded_near_origin() {
        let k = KernelFamily::Escaping { t: 20.0 };
        let probes: Vec<f64> = (1..=20).map(|j| 0.75 * (-(j as f64)).exp2()).collect();
        let r = validate_kernel_family(&k, &probes, &ValidateConfig::default()).unwrap();
        assert!(!r.origin_bounded);
        assert!(!r.infinite_range_ok);
        assert!(r.flags.iter().any(|f| f.contains("unbounded")));
        // The window heights grow like 2^{k+1}.
        assert!(r.probes[19].sup_origin > 1e6);
    }

    #[test]
    fn heavy_tail_moment_flagged_out_of_contract() {
        let k = KernelFamily::PowerTail { alpha: 2.0 };
        let ok = validate_kernel_family(&k, &[0.0], &ValidateConfig::default()).unwrap();
        assert!(!ok.moment_out_of_contract);
        // E t^{1/4} for density (1+t)^{-2} equals Γ(5/4)Γ(3/4).
        let exact = 1.225_416_702_465_177_6 * 0.906_402_477_055_477; // Γ(3/4)·Γ(5/4)
        let m = ok.probes[0].moment.unwrap();
        assert!((m - exact).abs() < 1e-3, "{m} vs {exact}");
        assert!((ok.probes[0].tail_exponent - 1.0).abs() < 1e-3);
        let cfg = ValidateConfig { b: Some(0.6), ..Default::default() };
        let bad = validate_kernel_family(&k, &[0.0], &cfg).unwrap();
        assert!(bad.moment_out_of_contract);
        assert!(!bad.infinite_range_ok);
        let cfg = ValidateConfig { b: Some(1.5), delta: 4.0, ..Default::default() };
        let div = validate_kernel_family(&k, &[0.0], &cfg).unwrap();
        assert!(div.probes[0].moment.is_none());
    }

    #[test]
    fn exponential_kernel_profile() {
        let r = validate_kernel_family(&exp_kernel(), &[1.0], &ValidateConfig::default()).unwrap();
        let p = &r.probes[0];
        assert!((p.k_eps[0].1.unwrap() - 10f64.ln()).abs() < 1e-9);
        assert!((p.k_eps[1].1.unwrap() - 100f64.ln()).abs() < 1e-9);
        // Least mass on a set of measure δ sits at the far end of [0, T].
        let (d, f) = p.f_t[0];
        let exact = (-(20.0 - d)).exp() - (-20.0f64).exp();
        assert!((f - exact).abs() < 1e-6 * exact.max(1e-12) + 1e-12, "{f} vs {exact}");
        // E t^{1/4} = Γ(5/4).
        assert!((p.moment.unwrap() - 0.906_402_477_055_477).abs() < 1e-4);
        assert!(r.infinite_range_ok);
    }

    #[test]
    fn empirical_kernel_with_negative_mass_is_ill_posed() {
        let g = GridDensity::unnormalized(-0.5, 0.5, vec![0.5, 0.5, 0.5, 0.0], vec![]).unwrap();
        let k = KernelFamily::Empirical { xs: vec![0.0], tables: vec![g] };
        assert!(matches!(k.validate(), Err(Error::IllPosed(_))));
    }
}
