//! Monte Carlo estimate of the exit kernel `q_{λ,y}` and of the departure
//! rate `b(y) = [λ ∗ q_{λ,y}](y)` from the Poisson mixture of rod
//! configurations, and the a-priori bounds on the kernel.
//!
//! A realization draws a Poisson point set `x₁ < … < x_m` with intensity
//! `λ` on `[−T, y]` and `n = m + 1` i.i.d. service lengths. For every
//! assignment of the lengths to the `m` fixed rods and the free rod, each
//! X-hit of the target `y` receives weight `1/n!`; since the total number of
//! hits over all assignments is `n!`, the weights sum to 1 and the hit
//! lengths `ξ = y − X` are a sample of `q_{λ,y}`. The contribution to `b(y)`
//! is `Σ weight·λ(X)`.

use super::renewal::renewal_density;
use crate::dists::{GridDensity, ServiceDistribution};
use crate::error::{Error, Result};
use crate::queue_sim::Intensity;
use crate::rng::{component, stream};
use crate::rods::{next_permutation, permutation_hits};
use crate::stats::{poisson_tail, Estimate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

/// Parameters of [`exit_rate_selfavg`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfAvgConfig {
    /// Target time `y > 0`.
    pub y: f64,
    /// History length `T ≥ 0`: `λ` is used on `[−T, y]` and taken as zero
    /// before.
    pub history: f64,
    /// Number of realizations.
    pub samples: u64,
    /// Largest rod count `n = m + 1` enumerated; `None` picks the smallest
    /// `n` with `P{m ≥ n} < 1e-7`.
    pub n_max: Option<usize>,
    /// All `n!` assignments are enumerated for `n ≤ exact_up_to`.
    pub exact_up_to: usize,
    /// Uniformly drawn assignments per realization beyond `exact_up_to`.
    pub sampled_permutations: usize,
    /// Bin width of the kernel estimate.
    pub h_xi: f64,
    /// Kernel bins cover `[0, xi_max)`; hits beyond land in an overflow bucket.
    pub xi_max: f64,
}

impl SelfAvgConfig {
    /// Defaults: empty history, adaptive `n_max`, exact enumeration up to
    /// `n = 5`, 120 sampled assignments beyond, bins of width 0.02 over
    /// `[0, y + T + 30)`.
    pub fn new(y: f64, samples: u64) -> Self {
        Self {
            y,
            history: 0.0,
            samples,
            n_max: None,
            exact_up_to: 5,
            sampled_permutations: 120,
            h_xi: 0.02,
            xi_max: y + 30.0,
        }
    }

    /// Sets the history length (and widens the kernel range accordingly).
    pub fn with_history(mut self, t: f64) -> Self {
        self.history = t;
        self.xi_max = self.y + t + 30.0;
        self
    }
}

/// Monte Carlo kernel estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelEstimate {
    /// Target time.
    pub y: f64,
    /// History start `−T`.
    pub history_start: f64,
    /// Bin width.
    pub h_xi: f64,
    /// Bin densities `q̂` on `[j·h_ξ, (j+1)·h_ξ)`.
    pub q_hat: Vec<f64>,
    /// Standard errors of the bin densities.
    pub q_se: Vec<f64>,
    /// Mass beyond the last bin.
    pub overflow_mass: f64,
    /// Total mass `Σ q̂·h_ξ + overflow`.
    pub mass: f64,
    /// `b(y)` from the hit-weighted sum `Σ w·λ(X)`.
    pub b_direct: Estimate,
    /// `b(y)` as `[λ ∗ q̂](y) = Σ w·λ(y − ξ)`, accumulated alongside.
    pub b_conv: f64,
    /// Number of realizations.
    pub samples: u64,
    /// Largest enumerated rod count.
    pub n_max: usize,
    /// Realizations with `n > n_max` (left out of the estimate).
    pub tail_count: u64,
    /// `I = ∫_{−T}^{y} λ`.
    pub intensity_integral: f64,
    /// `I = 0`: only the single-rod term `b₁(y) = ∫λ(y − l)p(l)dl` exists and
    /// is returned by quadrature.
    pub zero_intensity: bool,
    /// Warnings (tail realizations, zero intensity).
    pub warnings: Vec<String>,
}

impl KernelEstimate {
    /// Bin value and standard error at `t` (zero outside the bins).
    pub fn q_at(&self, t: f64) -> (f64, f64) {
        if t < 0.0 {
            return (0.0, 0.0);
        }
        let j = (t / self.h_xi).floor() as usize;
        if j >= self.q_hat.len() {
            return (0.0, 0.0);
        }
        (self.q_hat[j], self.q_se[j])
    }

    /// CSV export `t,q_hat,se` at bin centres.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,q_hat,se\n");
        for (j, (q, e)) in self.q_hat.iter().zip(&self.q_se).enumerate() {
            s.push_str(&format!("{},{},{}\n", (j as f64 + 0.5) * self.h_xi, q, e));
        }
        s
    }
}

struct Partial {
    sb: f64,
    sb2: f64,
    sconv: f64,
    bins: Vec<f64>,
    bins2: Vec<f64>,
    overflow: f64,
    tail: u64,
}

fn factorial_f64(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Estimates `q_{λ,y}` and `b(y)` by Monte Carlo (see the module docs).
///
/// Realizations with more than `n_max` rods are counted in `tail_count`
/// with a warning and contribute nothing, so the estimated mass falls short
/// of 1 by their frequency.
pub fn exit_rate_selfavg(
    lambda: &Intensity,
    p: &ServiceDistribution,
    cfg: &SelfAvgConfig,
    seed: u64,
) -> Result<KernelEstimate> {
    lambda.validate()?;
    if !(cfg.y > 0.0 && cfg.y.is_finite()) || !(cfg.history >= 0.0 && cfg.history.is_finite()) {
        return Err(Error::Config("need y > 0 and a finite history T ≥ 0".into()));
    }
    if cfg.samples < 2 || !(cfg.h_xi > 0.0) || !(cfg.xi_max > cfg.h_xi) || cfg.sampled_permutations == 0 {
        return Err(Error::Config("need ≥ 2 samples, h_ξ > 0, ξ_max > h_ξ and sampled permutations ≥ 1".into()));
    }
    let (a, y) = (-cfg.history, cfg.y);
    let lam = |t: f64| if t >= a && t <= y { lambda.eval(t) } else { 0.0 };
    let big_i = lambda.integral(a, y);
    if !big_i.is_finite() {
        return Err(Error::Domain("∫λ over the history is not finite".into()));
    }
    let nb = (cfg.xi_max / cfg.h_xi).ceil() as usize;
    let mut warnings = Vec::new();
    if big_i == 0.0 {
        // No Poisson points: the kernel is p itself and b = b₁.
        let n = 20_000;
        let hq = (y - a) / n as f64;
        let g = |l: f64| lam(y - l) * p.pdf(l);
        let mut s = g(0.0) + g(y - a);
        for i in 1..n {
            s += g(i as f64 * hq) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let b1 = s * hq / 3.0;
        let q_hat: Vec<f64> =
            (0..nb).map(|j| (p.cdf((j + 1) as f64 * cfg.h_xi) - p.cdf(j as f64 * cfg.h_xi)) / cfg.h_xi).collect();
        let overflow = p.sf(nb as f64 * cfg.h_xi);
        warnings.push("intensity integrates to zero: returning the single-rod term b₁".into());
        return Ok(KernelEstimate {
            y,
            history_start: a,
            h_xi: cfg.h_xi,
            mass: q_hat.iter().sum::<f64>() * cfg.h_xi + overflow,
            q_se: vec![0.0; nb],
            q_hat,
            overflow_mass: overflow,
            b_direct: Estimate::new(b1, 0.0),
            b_conv: b1,
            samples: cfg.samples,
            n_max: 1,
            tail_count: 0,
            intensity_integral: 0.0,
            zero_intensity: true,
            warnings,
        });
    }
    let n_max = match cfg.n_max {
        Some(n) if n >= 1 => n,
        Some(_) => return Err(Error::Config("n_max must be ≥ 1".into())),
        None => {
            let mut n = 1usize;
            while poisson_tail(big_i, n as u64) >= 1e-7 {
                n += 1;
            }
            n
        }
    };
    let poisson = Poisson::new(big_i).map_err(|e| Error::Config(format!("Poisson law: {e}")))?;
    let major = lambda.majorant(a, y);
    const CHUNK: u64 = 4096;
    let parts: Vec<Partial> = (0..cfg.samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut part = Partial {
                sb: 0.0,
                sb2: 0.0,
                sconv: 0.0,
                bins: vec![0.0; nb],
                bins2: vec![0.0; nb],
                overflow: 0.0,
                tail: 0,
            };
            let mut xs = Vec::new();
            let mut lens = Vec::new();
            let mut fixed = Vec::new();
            let mut hits = Vec::new();
            let mut touched: Vec<(usize, f64)> = Vec::new();
            let mut perm: Vec<usize> = Vec::new();
            for r in c * CHUNK..((c + 1) * CHUNK).min(cfg.samples) {
                let mut rng = stream(seed, component::SELFAVG, r);
                let m = poisson.sample(&mut rng) as usize;
                let n = m + 1;
                if n > n_max {
                    part.tail += 1;
                    continue;
                }
                xs.clear();
                while xs.len() < m {
                    let t = a + rng.random::<f64>() * (y - a);
                    if rng.random::<f64>() * major <= lambda.eval(t) {
                        xs.push(t);
                    }
                }
                xs.sort_by(f64::total_cmp);
                lens.clear();
                lens.extend((0..n).map(|_| p.sample(&mut rng)));
                perm.clear();
                perm.extend(0..n);
                touched.clear();
                let (mut b_r, mut conv_r) = (0.0, 0.0);
                let mut visit = |perm: &[usize], w: f64, part: &mut Partial| {
                    fixed.clear();
                    fixed.extend(perm[..m].iter().map(|&i| lens[i]));
                    hits.clear();
                    permutation_hits(&xs, &fixed, lens[perm[m]], y, &mut hits);
                    for &(x, xi) in &hits {
                        b_r += w * lam(x);
                        conv_r += w * lam(y - xi);
                        let j = (xi / cfg.h_xi).floor();
                        if j >= 0.0 && (j as usize) < nb {
                            touched.push((j as usize, w));
                        } else {
                            part.overflow += w;
                        }
                    }
                };
                if n <= cfg.exact_up_to {
                    let w = 1.0 / factorial_f64(n);
                    loop {
                        visit(&perm, w, &mut part);
                        if !next_permutation(&mut perm) {
                            break;
                        }
                    }
                } else {
                    let w = 1.0 / cfg.sampled_permutations as f64;
                    for _ in 0..cfg.sampled_permutations {
                        perm.shuffle(&mut rng);
                        visit(&perm, w, &mut part);
                    }
                }
                part.sb += b_r;
                part.sb2 += b_r * b_r;
                part.sconv += conv_r;
                touched.sort_by_key(|t| t.0);
                let mut k = 0;
                while k < touched.len() {
                    let j = touched[k].0;
                    let mut s = 0.0;
                    while k < touched.len() && touched[k].0 == j {
                        s += touched[k].1;
                        k += 1;
                    }
                    part.bins[j] += s;
                    part.bins2[j] += s * s;
                }
            }
            part
        })
        .collect();
    let (mut sb, mut sb2, mut sconv, mut overflow, mut tail) = (0.0, 0.0, 0.0, 0.0, 0u64);
    let mut bins = vec![0.0; nb];
    let mut bins2 = vec![0.0; nb];
    for p in parts {
        sb += p.sb;
        sb2 += p.sb2;
        sconv += p.sconv;
        overflow += p.overflow;
        tail += p.tail;
        for j in 0..nb {
            bins[j] += p.bins[j];
            bins2[j] += p.bins2[j];
        }
    }
    let nf = cfg.samples as f64;
    let se_of = |s: f64, s2: f64| {
        let mean = s / nf;
        ((s2 / nf - mean * mean).max(0.0) / (nf - 1.0)).sqrt()
    };
    let q_hat: Vec<f64> = bins.iter().map(|s| s / nf / cfg.h_xi).collect();
    let q_se: Vec<f64> = bins.iter().zip(&bins2).map(|(s, s2)| se_of(*s, *s2) / cfg.h_xi).collect();
    let overflow_mass = overflow / nf;
    if tail > 0 {
        warnings.push(format!("{tail} realizations exceeded n_max = {n_max} and were left in the tail bucket"));
    }
    Ok(KernelEstimate {
        y,
        history_start: a,
        h_xi: cfg.h_xi,
        mass: bins.iter().sum::<f64>() / nf + overflow_mass,
        q_hat,
        q_se,
        overflow_mass,
        b_direct: Estimate::new(sb / nf, se_of(sb, sb2)),
        b_conv: sconv / nf,
        samples: cfg.samples,
        n_max,
        tail_count: tail,
        intensity_integral: big_i,
        zero_intensity: false,
        warnings,
    })
}

/// `count` probe abscissae at bin centres, spread evenly over `(0, y + T)`.
pub fn bound_probe_points(ke: &KernelEstimate, count: usize) -> Vec<f64> {
    let span = ke.y - ke.history_start;
    (0..count)
        .map(|k| {
            let t = (k as f64 + 0.5) / count as f64 * span;
            ((t / ke.h_xi).floor() + 0.5) * ke.h_xi
        })
        .collect()
}

/// One probe of [`kernel_bounds_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundProbe {
    /// Abscissa.
    pub t: f64,
    /// Kernel estimate and its standard error.
    pub q_hat: f64,
    /// Standard error of `q_hat`.
    pub q_se: f64,
    /// Lower bound `p(t)·P{idle at y − t}`.
    pub lower: f64,
    /// Standard error of the lower bound.
    pub lower_se: f64,
    /// Upper bound `Σ_{n ≤ n_max} p^{*n}(t)·P{N_t ≥ n − 1}`.
    pub upper: f64,
    /// `q̂ ≥ lower − 3σ`.
    pub lower_ok: bool,
    /// `q̂ ≤ upper + 3σ`.
    pub upper_ok: bool,
}

/// Result of [`kernel_bounds_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    /// Per-probe comparisons.
    pub probes: Vec<BoundProbe>,
    /// Range `C` of the supremum check.
    pub c_probe: f64,
    /// Cap `sup p · (1 + Σ_{n≥1} P{η₁+…+η_n ≤ C})`.
    pub cap: f64,
    /// `sup_{t ≤ C} q̂(t)`.
    pub sup_q: f64,
    /// `sup q̂ ≤ cap + 3σ` at the maximizing bin.
    pub sup_ok: bool,
    /// Every check passed.
    pub all_pass: bool,
}

/// Compares the kernel estimate with its a-priori bounds at the probes.
///
/// * Lower: a customer served alone from an idle instant `y − t` leaves at
///   `y` with density `p(t)`, so `q(t) ≥ p(t)·P{idle at y − t}`.
/// * Upper: a departure at `y` after a sojourn `t` needs the service of the
///   customer and of those found ahead of it, at most `N_t` (the arrivals in
///   `[y − t, y]`), so `q(t) ≤ Σ_n p^{*n}(t)·P{N_t ≥ n − 1}`.
/// * Cap: since `p^{*n}(t) ≤ sup p · P{η₁+…+η_{n−1} ≤ t}`, the upper bound
///   is at most `sup p · (1 + U(C))` on `t ≤ C`, `U` the renewal function.
///
/// `idle[k]` must estimate `P{idle at y − probes[k]}`.
pub fn kernel_bounds_check(
    ke: &KernelEstimate,
    p: &ServiceDistribution,
    idle: &[Estimate],
    lambda: &Intensity,
    probes: &[f64],
    c_probe: f64,
) -> Result<BoundsReport> {
    if idle.len() != probes.len() {
        return Err(Error::Config("need one idle-probability estimate per probe".into()));
    }
    if !(c_probe > 0.0) {
        return Err(Error::Config("C must be positive".into()));
    }
    let h = 1e-3;
    let t_hi = probes.iter().fold(c_probe, |m, t| m.max(*t)) + 1.0;
    let base = GridDensity::from_distribution(p, h, t_hi)?;
    let mut powers = vec![base.clone()];
    while powers.len() < ke.n_max {
        let next = powers.last().expect("nonempty").convolve_truncated(&base)?;
        powers.push(next);
    }
    let mut out = Vec::with_capacity(probes.len());
    for (&t, id) in probes.iter().zip(idle) {
        let (q, se) = ke.q_at(t);
        let lower = p.pdf(t) * id.value;
        let lower_se = p.pdf(t) * id.std_error;
        let a = (ke.y - t).max(ke.history_start);
        let mu = lambda.integral(a, ke.y);
        let upper: f64 = powers.iter().enumerate().map(|(k, g)| g.eval(t) * poisson_tail(mu, k as u64)).sum();
        let lower_ok = q >= lower - 3.0 * (se * se + lower_se * lower_se).sqrt();
        let upper_ok = q <= upper + 3.0 * se;
        out.push(BoundProbe { t, q_hat: q, q_se: se, lower, lower_se, upper, lower_ok, upper_ok });
    }
    // Renewal function on [0, C] from the renewal density.
    let u_c = if base.mean() > 0.0 && h <= base.mean() / 100.0 {
        let r = renewal_density(&base, c_probe, None)?;
        r.density.mass()
    } else {
        f64::INFINITY
    };
    let cap = p.sup_density() * (1.0 + u_c);
    let (mut sup_q, mut sup_se) = (0.0f64, 0.0);
    for (j, (&q, &e)) in ke.q_hat.iter().zip(&ke.q_se).enumerate() {
        if (j as f64) * ke.h_xi <= c_probe && q > sup_q {
            sup_q = q;
            sup_se = e;
        }
    }
    let sup_ok = sup_q <= cap + 3.0 * sup_se;
    let all_pass = sup_ok && out.iter().all(|b| b.lower_ok && b.upper_ok);
    Ok(BoundsReport { probes: out, c_probe, cap, sup_q, sup_ok, all_pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_mass_is_one_and_estimates_agree() {
        let lambda = Intensity::Sinusoid { level: 0.3, amplitude: 1.0, omega: 1.0, phase: 0.0 };
        let d = ServiceDistribution::exponential();
        let ke = exit_rate_selfavg(&lambda, &d, &SelfAvgConfig::new(5.0, 20_000), 3).unwrap();
        assert!((ke.mass - 1.0).abs() < 1e-3, "{}", ke.mass);
        assert!((ke.b_direct.value - ke.b_conv).abs() < 1e-12);
        assert!(ke.b_direct.std_error > 0.0);
    }

    #[test]
    fn constant_rate_on_long_history_is_stationary() {
        let c = 0.3;
        let lambda = Intensity::Constant { rate: c };
        let d = ServiceDistribution::exponential();
        let cfg = SelfAvgConfig::new(5.0, 20_000).with_history(30.0);
        let ke = exit_rate_selfavg(&lambda, &d, &cfg, 11).unwrap();
        assert!(ke.b_direct.within_sigmas(c, 3.0), "{:?}", ke.b_direct);
        assert!((ke.mass - 1.0).abs() < 1e-3);
    }

    #[test]
    fn single_customer_kernel_is_p() {
        // With a vanishing intensity only n = 1 occurs: q = p exactly.
        let lambda = Intensity::Constant { rate: 0.0 };
        let d = ServiceDistribution::exponential();
        let ke = exit_rate_selfavg(&lambda, &d, &SelfAvgConfig::new(3.0, 100), 1).unwrap();
        assert!(ke.zero_intensity);
        assert_eq!(ke.b_direct.value, 0.0);
        assert!((ke.q_at(0.5).0 - (-0.5f64).exp()).abs() < 0.02);
    }

    #[test]
    fn tiny_n_max_fills_the_tail_bucket() {
        let lambda = Intensity::Constant { rate: 1.0 };
        let d = ServiceDistribution::exponential();
        let cfg = SelfAvgConfig { n_max: Some(2), ..SelfAvgConfig::new(4.0, 2000) };
        let ke = exit_rate_selfavg(&lambda, &d, &cfg, 1).unwrap();
        assert!(ke.tail_count > 0);
        assert!(!ke.warnings.is_empty());
        assert!(ke.mass < 1.0);
    }

    #[test]
    fn beyond_sampled_range_estimate_is_zero() {
        let lambda = Intensity::Constant { rate: 0.2 };
        let d = ServiceDistribution::exponential();
        let ke = exit_rate_selfavg(&lambda, &d, &SelfAvgConfig::new(2.0, 1000), 1).unwrap();
        assert_eq!(ke.q_at(1e6), (0.0, 0.0));
    }
}
