//! Service-time laws η and the objects derived from them: survival function,
//! hazard rate, residual laws η|τ, grid densities and their convolution
//! powers, and a validator for the standing regularity assumptions.
//!
//! Every law is rescaled to mean 1 at construction (the time unit is one mean
//! service time); the original mean is kept as [`ServiceDistribution::scale`].
//! [`ServiceDistribution::raw`] skips the rescaling for the few places where a
//! law must be used exactly as written (the uniform warm-up law on `[0,1]`
//! has mean ½ by design).

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default moment order excess δ in the `2+δ` moment condition.
pub const DEFAULT_DELTA: f64 = 1.0;
/// Default bound `M_δ` on the residual `2+δ` moments.
pub const DEFAULT_M_DELTA: f64 = 1000.0;
/// Default quadrature step (in mean service times).
pub const DEFAULT_STEP: f64 = 1e-3;
/// Default quadrature range `[0, DEFAULT_RANGE]`.
pub const DEFAULT_RANGE: f64 = 40.0;

/// Serializable description of a service law, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    /// Exponential law with the given mean.
    Exponential {
        /// Mean service time before normalization.
        #[serde(default = "one")]
        mean: f64,
    },
    /// Finite mixture of exponentials.
    Hyperexponential {
        /// Mixture weights (normalized to sum 1).
        weights: Vec<f64>,
        /// Component rates.
        rates: Vec<f64>,
    },
    /// Uniform law on `[0, a]`.
    Uniform {
        /// Right end of the support.
        a: f64,
    },
    /// Piecewise-linear density through the points `(t[i], p[i])`.
    Tabulated {
        /// Strictly increasing abscissae, `t[0] ≥ 0`.
        t: Vec<f64>,
        /// Nonnegative density values (rescaled to unit mass).
        p: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl DistSpec {
    /// Parses a two-column `t,p` CSV table (an optional header line is skipped).
    pub fn tabulated_from_csv(text: &str) -> Result<Self> {
        let mut t = Vec::new();
        let mut p = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::Config(format!("line {}: expected two columns", lineno + 1))),
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    t.push(x);
                    p.push(y);
                }
                _ if t.is_empty() => continue, // header
                _ => return Err(Error::Config(format!("line {}: not numeric", lineno + 1))),
            }
        }
        Ok(DistSpec::Tabulated { t, p })
    }
}

/// Piecewise-linear density table, unit mass.
#[derive(Debug, Clone, PartialEq)]
struct Table {
    t: Vec<f64>,
    p: Vec<f64>,
    /// CDF at the nodes.
    cum: Vec<f64>,
}

impl Table {
    fn new(t: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if t.len() < 2 || t.len() != p.len() {
            return Err(Error::Config("tabulated density needs ≥ 2 points with matching columns".into()));
        }
        if t[0] < 0.0 || t.windows(2).any(|w| w[1] <= w[0]) || t.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("tabulated abscissae must be finite, ≥ 0 and strictly increasing".into()));
        }
        if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("tabulated density values must be finite and ≥ 0".into()));
        }
        let mut cum = vec![0.0; t.len()];
        for k in 1..t.len() {
            cum[k] = cum[k - 1] + 0.5 * (t[k] - t[k - 1]) * (p[k] + p[k - 1]);
        }
        let mass = cum[t.len() - 1];
        if !(mass > 0.0) {
            return Err(Error::Config("tabulated density has zero mass".into()));
        }
        let p = p.iter().map(|v| v / mass).collect();
        let cum = cum.iter().map(|v| v / mass).collect();
        Ok(Self { t, p, cum })
    }

    /// Raw moment `E η^k` for integer k ∈ {1, 2} (Simpson is exact on each segment).
    fn moment(&self, k: i32) -> f64 {
        let mut s = 0.0;
        for i in 1..self.t.len() {
            let (a, b) = (self.t[i - 1], self.t[i]);
            let (pa, pb) = (self.p[i - 1], self.p[i]);
            let m = 0.5 * (a + b);
            s += (b - a) / 6.0 * (a.powi(k) * pa + 4.0 * m.powi(k) * 0.5 * (pa + pb) + b.powi(k) * pb);
        }
        s
    }

    fn rescaled(&self, mean: f64) -> Self {
        Self {
            t: self.t.iter().map(|x| x / mean).collect(),
            p: self.p.iter().map(|v| v * mean).collect(),
            cum: self.cum.clone(),
        }
    }

    fn segment(&self, t: f64) -> Option<usize> {
        if t < self.t[0] || t >= *self.t.last().unwrap() {
            return None;
        }
        Some(self.t.partition_point(|&x| x <= t) - 1)
    }

    fn interp(&self, k: usize, t: f64) -> f64 {
        let w = (t - self.t[k]) / (self.t[k + 1] - self.t[k]);
        self.p[k] + w * (self.p[k + 1] - self.p[k])
    }

    fn pdf(&self, t: f64) -> f64 {
        self.segment(t).map_or(0.0, |k| self.interp(k, t))
    }

    fn pdf_left(&self, t: f64) -> f64 {
        if t <= self.t[0] || t > *self.t.last().unwrap() {
            return 0.0;
        }
        let k = self.t.partition_point(|&x| x < t) - 1;
        self.interp(k, t)
    }

    fn cdf(&self, t: f64) -> f64 {
        match self.segment(t) {
            None if t < self.t[0] => 0.0,
            None => 1.0,
            Some(k) => {
                let x = t - self.t[k];
                let s = (self.p[k + 1] - self.p[k]) / (self.t[k + 1] - self.t[k]);
                (self.cum[k] + self.p[k] * x + 0.5 * s * x * x).min(1.0)
            }
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        let n = self.t.len();
        let k = (self.cum.partition_point(|&c| c <= u).max(1) - 1).min(n - 2);
        let r = (u - self.cum[k]).max(0.0);
        let pk = self.p[k];
        let s = (self.p[k + 1] - pk) / (self.t[k + 1] - self.t[k]);
        let disc = (pk * pk + 2.0 * s * r).max(0.0);
        let denom = pk + disc.sqrt();
        let x = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        (self.t[k] + x).min(self.t[k + 1])
    }

    fn sup(&self) -> f64 {
        self.p.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Law {
    Exp { rate: f64 },
    HyperExp { weights: Vec<f64>, rates: Vec<f64> },
    Uniform { a: f64 },
    Table(Arc<Table>),
}

/// A service-time law η with density `p`, survival `F(t) = P{η ≥ t}` and
/// hazard `p/F`.
///
/// Instances are immutable and cheap to clone; they may be shared freely
/// across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceDistribution {
    law: Law,
    spec: DistSpec,
    scale: f64,
    normalized: bool,
    delta: f64,
    m_delta: f64,
}

impl ServiceDistribution {
    /// Builds the law described by `spec`, rescaled to mean 1.
    pub fn new(spec: DistSpec) -> Result<Self> {
        Self::build(spec, true)
    }

    /// Builds the law exactly as specified, without rescaling the mean.
    pub fn raw(spec: DistSpec) -> Result<Self> {
        Self::build(spec, false)
    }

    /// Exponential law with mean 1.
    pub fn exponential() -> Self {
        Self::new(DistSpec::Exponential { mean: 1.0 }).expect("valid spec")
    }

    /// Two-or-more component hyperexponential law, rescaled to mean 1.
    pub fn hyperexponential(weights: &[f64], rates: &[f64]) -> Result<Self> {
        Self::new(DistSpec::Hyperexponential { weights: weights.to_vec(), rates: rates.to_vec() })
    }

    /// Uniform law on `[0, a]`, rescaled to mean 1 (i.e. uniform on `[0, 2]`).
    pub fn uniform(a: f64) -> Result<Self> {
        Self::new(DistSpec::Uniform { a })
    }

    /// Uniform law on `[0, a]` exactly as given (mean `a/2`), as used by the
    /// warm-up of the convolution equation.
    pub fn uniform_raw(a: f64) -> Result<Self> {
        Self::raw(DistSpec::Uniform { a })
    }

    fn build(spec: DistSpec, normalize: bool) -> Result<Self> {
        let (law, mean) = match &spec {
            DistSpec::Exponential { mean } => {
                if !(*mean > 0.0 && mean.is_finite()) {
                    return Err(Error::Config("exponential mean must be positive and finite".into()));
                }
                (Law::Exp { rate: 1.0 / mean }, *mean)
            }
            DistSpec::Hyperexponential { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(Error::Config("hyperexponential needs matching nonempty weights and rates".into()));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                    return Err(Error::Config("hyperexponential weights must be ≥ 0 and rates > 0".into()));
                }
                let tw: f64 = weights.iter().sum();
                if !(tw > 0.0) {
                    return Err(Error::Config("hyperexponential weights sum to zero".into()));
                }
                let w: Vec<f64> = weights.iter().map(|x| x / tw).collect();
                let mean = w.iter().zip(rates).map(|(w, r)| w / r).sum();
                (Law::HyperExp { weights: w, rates: rates.clone() }, mean)
            }
            DistSpec::Uniform { a } => {
                if !(*a > 0.0 && a.is_finite()) {
                    return Err(Error::Config("uniform support end must be positive".into()));
                }
                (Law::Uniform { a: *a }, a / 2.0)
            }
            DistSpec::Tabulated { t, p } => {
                let table = Table::new(t.clone(), p.clone())?;
                let mean = table.moment(1);
                (Law::Table(Arc::new(table)), mean)
            }
        };
        let (law, scale) = if normalize {
            let law = match law {
                Law::Exp { rate } => Law::Exp { rate: rate * mean },
                Law::HyperExp { weights, rates } => Law::HyperExp { weights, rates: rates.iter().map(|r| r * mean).collect() },
                Law::Uniform { a } => Law::Uniform { a: a / mean },
                Law::Table(t) => Law::Table(Arc::new(t.rescaled(mean))),
            };
            (law, mean)
        } else {
            (law, 1.0)
        };
        Ok(Self { law, spec, scale, normalized: normalize, delta: DEFAULT_DELTA, m_delta: DEFAULT_M_DELTA })
    }

    /// Replaces the moment-condition parameters `δ` and `M_δ`.
    pub fn with_moment_bound(mut self, delta: f64, m_delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !(m_delta > 0.0) {
            return Err(Error::Config("δ and M_δ must be positive".into()));
        }
        self.delta = delta;
        self.m_delta = m_delta;
        Ok(self)
    }

    /// The specification this law was built from.
    pub fn spec(&self) -> &DistSpec {
        &self.spec
    }
    /// Original mean divided out at construction (1 for raw laws).
    pub fn scale(&self) -> f64 {
        self.scale
    }
    /// Whether the law was rescaled to mean 1.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }
    /// Moment excess δ.
    pub fn delta(&self) -> f64 {
        self.delta
    }
    /// Moment bound `M_δ`.
    pub fn m_delta(&self) -> f64 {
        self.m_delta
    }

    /// Short human-readable label.
    pub fn label(&self) -> &'static str {
        match self.law {
            Law::Exp { .. } => "exponential",
            Law::HyperExp { .. } => "hyperexponential",
            Law::Uniform { .. } => "uniform",
            Law::Table(_) => "tabulated",
        }
    }

    /// True if the law has a memoryless (constant) hazard.
    pub fn has_constant_hazard(&self) -> bool {
        match &self.law {
            Law::Exp { .. } => true,
            Law::HyperExp { rates, weights } => {
                rates.iter().zip(weights).filter(|(_, w)| **w > 0.0).all(|(r, _)| (r - rates[0]).abs() == 0.0)
            }
            _ => false,
        }
    }

    /// Right end of the support, if bounded.
    pub fn support_end(&self) -> Option<f64> {
        match &self.law {
            Law::Exp { .. } | Law::HyperExp { .. } => None,
            Law::Uniform { a } => Some(*a),
            Law::Table(t) => Some(*t.t.last().unwrap()),
        }
    }

    /// Capability flag: laws whose density vanishes somewhere on `t ≥ 0`
    /// violate the standing positivity assumption and may only be used where
    /// that assumption is not needed (the warm-up convolution equation).
    pub fn warm_up_only(&self) -> bool {
        match &self.law {
            Law::Exp { .. } | Law::HyperExp { .. } => false,
            Law::Uniform { .. } => true,
            // A table has compact support, so its density vanishes beyond the last node.
            Law::Table(_) => true,
        }
    }

    /// Density (right-continuous version).
    pub fn pdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match &self.law {
            Law::Exp { rate } => rate * (-rate * t).exp(),
            Law::HyperExp { weights, rates } => weights.iter().zip(rates).map(|(w, r)| w * r * (-r * t).exp()).sum(),
            Law::Uniform { a } => {
                if t < *a {
                    1.0 / a
                } else {
                    0.0
                }
            }
            Law::Table(tab) => tab.pdf(t),
        }
    }

    /// Left limit of the density at `t`.
    pub fn pdf_left(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.law {
            Law::Uniform { a } => {
                if t <= *a {
                    1.0 / a
                } else {
                    0.0
                }
            }
            Law::Table(tab) => tab.pdf_left(t),
            _ => self.pdf(t),
        }
    }

    /// Survival function `F(t) = P{η ≥ t}`.
    pub fn sf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match &self.law {
            Law::Exp { rate } => (-rate * t).exp(),
            Law::HyperExp { weights, rates } => weights.iter().zip(rates).map(|(w, r)| w * (-r * t).exp()).sum(),
            Law::Uniform { a } => (1.0 - t / a).max(0.0),
            Law::Table(tab) => 1.0 - tab.cdf(t),
        }
    }

    /// Distribution function `P{η < t}`.
    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.sf(t)
    }

    /// Mean of η.
    pub fn mean(&self) -> f64 {
        match &self.law {
            Law::Exp { rate } => 1.0 / rate,
            Law::HyperExp { weights, rates } => weights.iter().zip(rates).map(|(w, r)| w / r).sum(),
            Law::Uniform { a } => a / 2.0,
            Law::Table(t) => t.moment(1),
        }
    }

    /// Variance of η.
    pub fn variance(&self) -> f64 {
        let second = match &self.law {
            Law::Exp { rate } => 2.0 / (rate * rate),
            Law::HyperExp { weights, rates } => weights.iter().zip(rates).map(|(w, r)| 2.0 * w / (r * r)).sum(),
            Law::Uniform { a } => a * a / 3.0,
            Law::Table(t) => t.moment(2),
        };
        second - self.mean().powi(2)
    }

    /// Supremum of the density.
    pub fn sup_density(&self) -> f64 {
        match &self.law {
            Law::Exp { rate } => *rate,
            Law::HyperExp { .. } => self.pdf(0.0),
            Law::Uniform { a } => 1.0 / a,
            Law::Table(t) => t.sup(),
        }
    }

    /// Hazard rate `p(τ)/F(τ)`, the departure intensity of a customer whose
    /// service has lasted `τ`.
    pub fn hazard(&self, tau: f64) -> Result<f64> {
        if tau < 0.0 {
            return Err(Error::Domain(format!("elapsed service time τ={tau} is negative")));
        }
        match &self.law {
            Law::Exp { rate } => Ok(*rate),
            Law::HyperExp { .. } => {
                let w = self.residual_weights(tau);
                let Law::HyperExp { rates, .. } = &self.law else { unreachable!() };
                Ok(w.iter().zip(rates).map(|(w, r)| w * r).sum())
            }
            _ => {
                let f = self.sf(tau);
                if !(f > 0.0) {
                    return Err(Error::Domain(format!("F(τ)=0 at τ={tau}: beyond the support")));
                }
                Ok(self.pdf(tau) / f)
            }
        }
    }

    /// Mixture weights of a hyperexponential law conditioned on `η > τ`
    /// (computed in log space so large τ is safe).
    fn residual_weights(&self, tau: f64) -> Vec<f64> {
        let Law::HyperExp { weights, rates } = &self.law else { return vec![] };
        let logs: Vec<f64> = weights
            .iter()
            .zip(rates)
            .map(|(w, r)| if *w > 0.0 { w.ln() - r * tau } else { f64::NEG_INFINITY })
            .collect();
        let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logs.iter().map(|l| (l - mx).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|x| x / s).collect()
    }

    /// Residual law `η|τ = (η − τ | η > τ)`.
    pub fn residual(&self, tau: f64) -> Result<ResidualDistribution> {
        if tau < 0.0 {
            return Err(Error::Domain(format!("elapsed service time τ={tau} is negative")));
        }
        let sf_tau = self.sf(tau);
        if !(sf_tau > 0.0) {
            return Err(Error::Domain(format!("F(τ)=0 at τ={tau}: no residual law")));
        }
        Ok(ResidualDistribution { base: self.clone(), tau, sf_tau })
    }

    /// Mean residual life `E(η|τ)`.
    pub fn residual_mean(&self, tau: f64) -> Result<f64> {
        self.residual_moment(tau, 1.0)
    }

    /// Residual moment `E[(η|τ)^k]` for real `k > 0`.
    pub fn residual_moment(&self, tau: f64, k: f64) -> Result<f64> {
        let sf_tau = self.sf(tau);
        if tau < 0.0 || !(sf_tau > 0.0) {
            return Err(Error::Domain(format!("no residual law at τ={tau}")));
        }
        let g = statrs::function::gamma::gamma(k + 1.0);
        Ok(match &self.law {
            Law::Exp { rate } => g / rate.powf(k),
            Law::HyperExp { rates, .. } => {
                self.residual_weights(tau).iter().zip(rates).map(|(w, r)| w * g / r.powf(k)).sum()
            }
            Law::Uniform { a } => (a - tau).powf(k) / (k + 1.0),
            Law::Table(tab) => {
                // Composite Simpson on each linear piece beyond τ.
                let mut total = 0.0;
                for i in 1..tab.t.len() {
                    let (a, b) = (tab.t[i - 1].max(tau), tab.t[i]);
                    if b <= a {
                        continue;
                    }
                    let m = 16;
                    let hh = (b - a) / m as f64;
                    let mut seg = 0.0;
                    for j in 0..=m {
                        let t = a + j as f64 * hh;
                        let wgt = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
                        let pv = if j == m { tab.pdf_left(t) } else { tab.pdf(t) };
                        seg += wgt * (t - tau).powf(k) * pv;
                    }
                    total += seg * hh / 3.0;
                }
                total / sf_tau
            }
        })
    }

    /// Draws one service duration.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            Law::Exp { rate } => Exp::new(*rate).expect("positive rate").sample(rng),
            Law::HyperExp { weights, rates } => {
                let k = pick(weights, rng.random::<f64>());
                Exp::new(rates[k]).expect("positive rate").sample(rng)
            }
            Law::Uniform { a } => a * rng.random::<f64>(),
            Law::Table(t) => t.quantile(rng.random::<f64>()),
        }
    }

    /// Quantile function (inverse CDF) for `u ∈ [0,1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match &self.law {
            Law::Exp { rate } => -(1.0 - u).ln() / rate,
            Law::Uniform { a } => a * u,
            Law::Table(t) => t.quantile(u),
            Law::HyperExp { .. } => {
                // Bisection on the monotone CDF.
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                while self.cdf(hi) < u {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Samples a residual duration `η|τ` directly from the law.
    fn sample_residual<R: Rng + ?Sized>(&self, tau: f64, sf_tau: f64, rng: &mut R) -> f64 {
        match &self.law {
            Law::Exp { rate } => Exp::new(*rate).expect("positive rate").sample(rng),
            Law::HyperExp { rates, .. } => {
                let w = self.residual_weights(tau);
                let k = pick(&w, rng.random::<f64>());
                Exp::new(rates[k]).expect("positive rate").sample(rng)
            }
            Law::Uniform { a } => (a - tau) * rng.random::<f64>(),
            Law::Table(t) => {
                let u = 1.0 - sf_tau * (1.0 - rng.random::<f64>());
                (t.quantile(u.min(1.0 - 1e-16)) - tau).max(0.0)
            }
        }
    }
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Anything that can produce service durations.
pub trait Sampler {
    /// Draws one duration.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
}

impl Sampler for ServiceDistribution {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample(rng)
    }
}

impl Sampler for ResidualDistribution {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample(rng)
    }
}

/// Draws one duration from a service or residual law.
pub fn sample<S: Sampler, R: Rng + ?Sized>(law: &S, rng: &mut R) -> f64 {
    law.draw(rng)
}

/// Residual law `η|τ` of a service law: density `p(t+τ)/F(τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualDistribution {
    base: ServiceDistribution,
    tau: f64,
    sf_tau: f64,
}

impl ResidualDistribution {
    /// Underlying service law.
    pub fn base(&self) -> &ServiceDistribution {
        &self.base
    }
    /// Elapsed service time τ.
    pub fn elapsed(&self) -> f64 {
        self.tau
    }
    /// Density at `t ≥ 0`.
    pub fn pdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            self.base.pdf(t + self.tau) / self.sf_tau
        }
    }
    /// Survival function.
    pub fn sf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            1.0
        } else {
            self.base.sf(t + self.tau) / self.sf_tau
        }
    }
    /// Distribution function.
    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.sf(t)
    }
    /// Mean residual life.
    pub fn mean(&self) -> f64 {
        self.base.residual_mean(self.tau).expect("validated at construction")
    }
    /// Draws one residual duration.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.base.sample_residual(self.tau, self.sf_tau, rng)
    }
}

/// A function sampled on the uniform grid `origin + i·h`, carrying right
/// values at the nodes and explicit left limits at marked jump nodes.
///
/// Probability densities satisfy `mass ≤ 1 + 1e-6`; grid functions that are
/// not probability densities (renewal densities) are built with
/// [`GridDensity::unnormalized`] and skip that check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    origin: f64,
    h: f64,
    values: Vec<f64>,
    /// `(index, left limit)` pairs, sorted by index, for nodes where the
    /// function jumps.
    jumps: Vec<(usize, f64)>,
}

const MASS_SLACK: f64 = 1e-6;

impl GridDensity {
    /// Builds a probability density from right values and jump markers.
    pub fn new(origin: f64, h: f64, values: Vec<f64>, jumps: Vec<(usize, f64)>) -> Result<Self> {
        let g = Self::unnormalized(origin, h, values, jumps)?;
        let m = g.mass();
        if m > 1.0 + MASS_SLACK {
            return Err(Error::Range(format!("grid density mass {m} exceeds 1")));
        }
        Ok(g)
    }

    /// Builds a nonnegative grid function without the unit-mass check.
    pub fn unnormalized(origin: f64, h: f64, values: Vec<f64>, mut jumps: Vec<(usize, f64)>) -> Result<Self> {
        if !(h > 0.0) || values.is_empty() {
            return Err(Error::Config("grid needs a positive step and at least one value".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Numeric("grid values must be finite and nonnegative".into()));
        }
        jumps.sort_by_key(|j| j.0);
        jumps.dedup_by_key(|j| j.0);
        if jumps.iter().any(|(i, v)| *i >= values.len() || !(*v >= 0.0)) {
            return Err(Error::Config("jump marker outside the grid or negative".into()));
        }
        Ok(Self { origin, h, values, jumps })
    }

    /// Samples the density of `d` on `[0, t_max]` with step `h`, marking jumps.
    pub fn from_distribution(d: &ServiceDistribution, h: f64, t_max: f64) -> Result<Self> {
        let n = (t_max / h).round() as usize + 1;
        Self::from_fn(0.0, h, n, |t| d.pdf(t), |t| d.pdf_left(t))
    }

    /// Samples right values `right(t)` and left limits `left(t)` on `n` nodes;
    /// nodes where the two differ become jump markers.
    pub fn from_fn(origin: f64, h: f64, n: usize, right: impl Fn(f64) -> f64, left: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(n);
        let mut jumps = Vec::new();
        for i in 0..n {
            let t = origin + i as f64 * h;
            let r = right(t);
            values.push(r);
            if i > 0 {
                let l = left(t);
                if l != r {
                    jumps.push((i, l));
                }
            }
        }
        Self::new(origin, h, values, jumps)
    }

    /// Grid origin.
    pub fn origin(&self) -> f64 {
        self.origin
    }
    /// Grid step.
    pub fn step(&self) -> f64 {
        self.h
    }
    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.values.len()
    }
    /// True if the grid has no nodes (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    /// Abscissa of node `i`.
    pub fn t(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.h
    }
    /// Right values at the nodes.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    /// Jump markers `(index, left limit)`.
    pub fn jumps(&self) -> &[(usize, f64)] {
        &self.jumps
    }
    /// Right value at node `i`.
    pub fn right(&self, i: usize) -> f64 {
        self.values[i]
    }
    /// Left limit at node `i` (zero at the origin, where the function starts).
    pub fn left(&self, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        match self.jumps.binary_search_by_key(&i, |j| j.0) {
            Ok(k) => self.jumps[k].1,
            Err(_) => self.values[i],
        }
    }
    /// Left-limit array (index 0 holds 0).
    pub fn left_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v[0] = 0.0;
        for &(i, l) in &self.jumps {
            v[i] = l;
        }
        v
    }

    /// Piecewise-linear evaluation between nodes (right-continuous at jumps,
    /// zero outside the grid).
    pub fn eval(&self, t: f64) -> f64 {
        let x = (t - self.origin) / self.h;
        if x < 0.0 || x > (self.len() - 1) as f64 {
            return 0.0;
        }
        let i = x.floor() as usize;
        if i + 1 >= self.len() {
            return self.values[self.len() - 1];
        }
        let w = x - i as f64;
        if w == 0.0 {
            return self.values[i];
        }
        (1.0 - w) * self.values[i] + w * self.left(i + 1)
    }

    /// Trapezoid mass using one-sided limits on each cell.
    pub fn mass(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.len().saturating_sub(1) {
            s += self.values[i] + self.left(i + 1);
        }
        0.5 * self.h * s
    }

    /// Trapezoid first moment.
    pub fn mean(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.len().saturating_sub(1) {
            s += self.t(i) * self.values[i] + self.t(i + 1) * self.left(i + 1);
        }
        0.5 * self.h * s
    }

    /// `1 − mass`, the probability not captured by the grid.
    pub fn mass_deficit(&self) -> f64 {
        1.0 - self.mass()
    }

    /// Convolution on the common grid, truncated to this grid's length and
    /// without any mass check. The trapezoid rule is applied cell by cell with
    /// the inner one-sided limits of both factors, so jumps at nodes are
    /// integrated exactly for piecewise-linear integrands.
    pub fn convolve_truncated(&self, other: &GridDensity) -> Result<GridDensity> {
        if (self.h - other.h).abs() > 1e-12 * self.h {
            return Err(Error::Config("convolution needs equal grid steps".into()));
        }
        let n = self.len();
        let fp = &self.values;
        let fm = self.left_values();
        let gp: Vec<f64> = other.values.iter().take(n).copied().collect();
        let gm: Vec<f64> = other.left_values().into_iter().take(n).collect();
        let size = (n + gp.len()).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let lift = |v: &[f64]| {
            let mut c = vec![Complex64::new(0.0, 0.0); size];
            for (dst, src) in c.iter_mut().zip(v) {
                dst.re = *src;
            }
            fwd.process(&mut c);
            c
        };
        let (a, b, c, d) = (lift(&fm), lift(&gp), lift(fp), lift(&gm));
        let mut acc: Vec<Complex64> = (0..size).map(|k| a[k] * b[k] + c[k] * d[k]).collect();
        inv.process(&mut acc);
        let scale = 0.5 * self.h / size as f64;
        let values: Vec<f64> = acc.iter().take(n).map(|z| (z.re * scale).max(0.0)).collect();
        GridDensity::unnormalized(self.origin + other.origin, self.h, values, Vec::new())
    }

    /// Convolution of two probability densities on a common grid.
    pub fn convolve(&self, other: &GridDensity) -> Result<GridDensity> {
        let out = self.convolve_truncated(other)?;
        let expected = self.mass() * other.mass();
        if (out.mass() - expected).abs() > MASS_SLACK {
            return Err(Error::Range(format!(
                "grid too short to hold the convolution: mass {} vs {}",
                out.mass(),
                expected
            )));
        }
        Ok(out)
    }
}

/// `n`-fold convolution power `p^{*n}` on the grid of `p`.
///
/// Errors with [`Error::Range`] when the grid is too short to hold the
/// support of the result (mass of `p^{*n}` differs from `mass(p)^n` by more
/// than 1e-6).
pub fn convolve_power(p: &GridDensity, n: usize) -> Result<GridDensity> {
    if n == 0 {
        return Err(Error::Config("convolution power needs n ≥ 1".into()));
    }
    let mut acc = p.clone();
    for _ in 1..n {
        acc = acc.convolve_truncated(p)?;
    }
    let expected = p.mass().powi(n as i32);
    if (acc.mass() - expected).abs() > MASS_SLACK {
        return Err(Error::Range(format!(
            "grid [0,{}] too short for p^*{n}: mass {} vs {}",
            p.t(p.len() - 1),
            acc.mass(),
            expected
        )));
    }
    Ok(acc)
}

/// Free function form of [`ServiceDistribution::hazard`].
pub fn hazard(d: &ServiceDistribution, tau: f64) -> Result<f64> {
    d.hazard(tau)
}

/// Free function form of [`ServiceDistribution::residual`].
pub fn residual(d: &ServiceDistribution, tau: f64) -> Result<ResidualDistribution> {
    d.residual(tau)
}

/// Outcome of a single assumption check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    /// Whether the check passed.
    pub pass: bool,
    /// Numerical witness (estimate or worst value found).
    pub value: f64,
    /// Probe point where the witness was attained.
    pub at: f64,
}

/// Report of [`validate_assumptions`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// Density positive on every probe and bounded (witness: smallest probe value).
    pub positivity: Check,
    /// Density bounded from above (witness: supremum).
    pub bounded: Check,
    /// Strong Lipschitz condition `|p(t+Δ) − p(t)| ≤ C p(t) |Δ|` (witness: estimated C).
    pub lipschitz: Check,
    /// Residual moment condition `sup_τ E(η|τ)^{2+δ} ≤ M_δ` (witness: sup found).
    pub moment: Check,
    /// Mean equals 1 (witness: mean).
    pub mean_one: Check,
    /// Upper bound `C̄` on residual means over the probe grid.
    pub residual_mean_bound: f64,
    /// δ actually used.
    pub delta: f64,
    /// Capability flag: usable only by the warm-up solver.
    pub warm_up_only: bool,
    /// Free-form notes (for example, a degenerate δ request).
    pub notes: Vec<String>,
}

impl AssumptionReport {
    /// True if every check passed.
    pub fn all_pass(&self) -> bool {
        self.positivity.pass && self.bounded.pass && self.lipschitz.pass && self.moment.pass && self.mean_one.pass
    }
}

/// Probe grid: 0 followed by a geometric grid from 1e-3 to `t_max`.
fn probe_grid(t_max: f64, points: usize) -> Vec<f64> {
    let mut v = vec![0.0];
    let (a, b) = (1e-3f64.ln(), t_max.ln());
    for i in 0..points {
        v.push((a + (b - a) * i as f64 / (points - 1) as f64).exp());
    }
    v
}

/// The probe spacing for the Lipschitz check, `min(u(t), h)` with
/// `u(t) = 0.1/(1+t)`.
pub fn lipschitz_probe_step(t: f64, h: f64) -> f64 {
    (0.1 / (1.0 + t)).min(h)
}

/// Checks the standing assumptions on the service law: positivity and
/// boundedness of the density, the strong Lipschitz condition, the residual
/// `2+δ` moment bound, and unit mean. Failures are report entries, never
/// errors. A nonpositive `delta` falls back to the law's configured δ.
pub fn validate_assumptions(d: &ServiceDistribution, delta: f64) -> AssumptionReport {
    let mut notes = Vec::new();
    let delta = if delta > 0.0 {
        delta
    } else {
        notes.push(format!("requested δ={delta} is not positive; using the configured default δ={}", d.delta()));
        d.delta()
    };
    let probes = probe_grid(DEFAULT_RANGE, 200);

    let (mut pmin, mut pmin_at) = (f64::INFINITY, 0.0);
    for &t in &probes {
        let v = d.pdf(t);
        if v < pmin {
            pmin = v;
            pmin_at = t;
        }
    }
    let sup = d.sup_density();
    let positivity = Check { pass: pmin > 0.0, value: pmin, at: pmin_at };
    let bounded = Check { pass: sup.is_finite(), value: sup, at: 0.0 };

    let (mut c_hat, mut c_at) = (0.0f64, 0.0);
    for &t in &probes {
        let dt = lipschitz_probe_step(t, DEFAULT_STEP);
        let p = d.pdf(t);
        let mut worst = (d.pdf(t + dt) - p).abs();
        if t - dt > 0.0 {
            worst = worst.max((d.pdf(t - dt) - p).abs());
        }
        let ratio = if p > 0.0 { worst / (p * dt) } else if worst > 0.0 { f64::INFINITY } else { 0.0 };
        let ratio = if p > 0.0 { ratio } else { f64::INFINITY };
        if ratio > c_hat || ratio.is_nan() {
            c_hat = ratio;
            c_at = t;
        }
    }
    let lipschitz = Check { pass: c_hat.is_finite(), value: c_hat, at: c_at };

    let (mut msup, mut msup_at, mut cbar) = (0.0f64, 0.0, 0.0f64);
    for &tau in &probes {
        if d.sf(tau) <= 0.0 {
            continue;
        }
        if let Ok(m) = d.residual_moment(tau, 2.0 + delta) {
            if m > msup {
                msup = m;
                msup_at = tau;
            }
        }
        if let Ok(m) = d.residual_mean(tau) {
            cbar = cbar.max(m);
        }
    }
    let moment = Check { pass: msup.is_finite() && msup <= d.m_delta(), value: msup, at: msup_at };
    let mean = d.mean();
    let mean_one = Check { pass: (mean - 1.0).abs() <= 1e-8, value: mean, at: 0.0 };
    let warm_up_only = d.warm_up_only() || !positivity.pass;
    if warm_up_only {
        notes.push("density vanishes on part of t ≥ 0: warm-up-only".into());
    }
    AssumptionReport {
        positivity,
        bounded,
        lipschitz,
        moment,
        mean_one,
        residual_mean_bound: cbar,
        delta,
        warm_up_only,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::{ks_test, ks_two_sample, Welford};
    use approx::assert_abs_diff_eq;

    fn h2_raw() -> ServiceDistribution {
        ServiceDistribution::raw(DistSpec::Hyperexponential { weights: vec![0.5, 0.5], rates: vec![0.5, 1.5] }).unwrap()
    }

    #[test]
    fn exponential_hazard_is_one() {
        let d = ServiceDistribution::exponential();
        for tau in [0.0, 0.3, 5.0, 30.0] {
            assert_abs_diff_eq!(d.hazard(tau).unwrap(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn uniform_hazard_and_domain() {
        let d = ServiceDistribution::uniform(2.0).unwrap(); // already mean 1
        assert_abs_diff_eq!(d.scale(), 1.0);
        assert_abs_diff_eq!(d.pdf(1.0), 0.5);
        assert_abs_diff_eq!(d.sf(1.0), 0.5);
        assert_abs_diff_eq!(d.hazard(1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(d.hazard(2.0), Err(Error::Domain(_))));
        assert!(matches!(d.residual(2.5), Err(Error::Domain(_))));
    }

    #[test]
    fn hyperexponential_hazard_at_zero_unnormalized() {
        // Oracle: p(0) = Σ w_i r_i = ½·0.5 + ½·1.5 = 1 and F(0) = 1.
        let d = h2_raw();
        let oracle: f64 = 0.5 * 0.5 + 0.5 * 1.5;
        assert_abs_diff_eq!(d.pdf(0.0), oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(d.hazard(0.0).unwrap(), 1.0, epsilon = 1e-15);
        // Rescaled to mean 1 (original mean 4/3) the same law has p(0) = 4/3.
        let n = ServiceDistribution::hyperexponential(&[0.5, 0.5], &[0.5, 1.5]).unwrap();
        assert_abs_diff_eq!(n.scale(), 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(n.hazard(0.0).unwrap(), 4.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(n.mean(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn normalization_records_scale() {
        let d = ServiceDistribution::new(DistSpec::Exponential { mean: 3.0 }).unwrap();
        assert_abs_diff_eq!(d.mean(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.scale(), 3.0);
        let u = ServiceDistribution::uniform(1.0).unwrap();
        assert_eq!(u.support_end(), Some(2.0));
        let t = ServiceDistribution::new(DistSpec::Tabulated { t: vec![0.0, 1.0, 3.0], p: vec![2.0, 1.0, 0.0] }).unwrap();
        assert_abs_diff_eq!(t.mean(), 1.0, epsilon = 1e-12);
        // Mass of the rescaled table is still one.
        let g = GridDensity::from_distribution(&t, 1e-4, t.support_end().unwrap()).unwrap();
        assert_abs_diff_eq!(g.mass(), 1.0, epsilon = 1e-7);
    }

    #[test]
    fn residual_of_exponential_is_exponential() {
        let d = ServiceDistribution::exponential();
        let r = d.residual(3.0).unwrap();
        for t in [0.0, 0.5, 2.0, 7.0] {
            assert_abs_diff_eq!(r.pdf(t), d.pdf(t), epsilon = 1e-13);
        }
        assert_abs_diff_eq!(r.mean(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn residual_of_uniform_is_uniform() {
        let d = ServiceDistribution::uniform(2.0).unwrap();
        let r = d.residual(1.0).unwrap();
        assert_abs_diff_eq!(r.pdf(0.3), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.sf(0.25), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(r.mean(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn hyperexponential_residual_mean_matches_conditional_sampling() {
        // Oracle: rejection sampling of η conditioned on η > τ.
        let d = ServiceDistribution::hyperexponential(&[0.5, 0.5], &[0.5, 1.5]).unwrap();
        let tau = 2.0;
        let analytic = d.residual_mean(tau).unwrap();
        let mut rng = stream(11, 0, 0);
        let mut w = Welford::default();
        while w.count() < 200_000 {
            let x = d.sample(&mut rng);
            if x > tau {
                w.push(x - tau);
            }
        }
        assert!((w.mean() - analytic).abs() < 3.0 * w.std_error(), "{} vs {analytic}", w.mean());
        // And the direct residual sampler.
        let r = d.residual(tau).unwrap();
        let mut w2 = Welford::default();
        for _ in 0..200_000 {
            w2.push(r.sample(&mut rng));
        }
        assert!((w2.mean() - analytic).abs() < 3.0 * w2.std_error());
    }

    #[test]
    fn exponential_sample_mean_and_determinism() {
        let d = ServiceDistribution::exponential();
        let draw = |seed| {
            let mut rng = stream(seed, 1, 0);
            (0..1_000_000).map(|_| d.sample(&mut rng)).collect::<Vec<f64>>()
        };
        let a = draw(5);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!((mean - 1.0).abs() < 0.004, "mean {mean}");
        assert_eq!(a[..1000], draw(5)[..1000]);
        let ks = ks_test(&a, |x| d.cdf(x)).unwrap();
        assert!(ks.statistic < 0.002, "{ks:?}");
    }

    #[test]
    fn uniform_sample_ks() {
        let d = ServiceDistribution::uniform(2.0).unwrap();
        let mut rng = stream(6, 1, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| d.sample(&mut rng)).collect();
        let ks = ks_test(&xs, |x| d.cdf(x)).unwrap();
        assert!(ks.statistic < 0.002, "{ks:?}");
    }

    #[test]
    fn tabulated_sampling_matches_cdf() {
        let d = ServiceDistribution::new(DistSpec::Tabulated { t: vec![0.0, 0.5, 2.0, 4.0], p: vec![0.2, 1.0, 0.4, 0.0] }).unwrap();
        let mut rng = stream(7, 1, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| d.sample(&mut rng)).collect();
        let ks = ks_test(&xs, |x| d.cdf(x)).unwrap();
        assert!(ks.p_value > 1e-3, "{ks:?}");
    }

    #[test]
    fn rejection_and_residual_sampling_agree() {
        for d in [
            ServiceDistribution::hyperexponential(&[0.3, 0.7], &[0.4, 2.0]).unwrap(),
            ServiceDistribution::uniform(1.0).unwrap(),
            ServiceDistribution::new(DistSpec::Tabulated { t: vec![0.0, 1.0, 3.0], p: vec![1.0, 1.0, 0.0] }).unwrap(),
        ] {
            let tau = 0.7;
            let mut rng = stream(8, 1, 0);
            let mut rej = Vec::with_capacity(100_000);
            while rej.len() < 100_000 {
                let x = d.sample(&mut rng);
                if x > tau {
                    rej.push(x - tau);
                }
            }
            let r = d.residual(tau).unwrap();
            let dir: Vec<f64> = (0..100_000).map(|_| sample(&r, &mut rng)).collect();
            // Each sampler sits within 0.005 of the analytic residual CDF ...
            for xs in [&rej, &dir] {
                let one = ks_test(xs, |t| r.cdf(t)).unwrap();
                assert!(one.statistic < 0.005, "{} {one:?}", d.label());
            }
            // ... and the two samples are indistinguishable from each other.
            let d2 = ks_two_sample(&rej, &dir).unwrap();
            let en = (rej.len() as f64 / 2.0).sqrt();
            let p = crate::stats::kolmogorov_sf((en + 0.12 + 0.11 / en) * d2);
            assert!(p > 1e-3, "{} two-sample D={d2} p={p}", d.label());
        }
    }

    #[test]
    fn convolve_power_identity_and_gamma_oracle() {
        let d = ServiceDistribution::exponential();
        let p = GridDensity::from_distribution(&d, 1e-3, 20.0).unwrap();
        assert_eq!(convolve_power(&p, 1).unwrap(), p);
        let p2 = convolve_power(&p, 2).unwrap();
        let mut sup: f64 = 0.0;
        for i in 0..p2.len() {
            let t = p2.t(i);
            sup = sup.max((p2.right(i) - t * (-t).exp()).abs());
        }
        assert!(sup < 1e-4, "sup error {sup}");
    }

    #[test]
    fn uniform_square_is_triangle() {
        let d = ServiceDistribution::raw(DistSpec::Uniform { a: 1.0 }).unwrap();
        let p = GridDensity::from_distribution(&d, 1e-3, 3.0).unwrap();
        assert_eq!(p.jumps().len(), 1);
        let p2 = convolve_power(&p, 2).unwrap();
        let peak = p2.right(1000);
        assert_abs_diff_eq!(peak, 1.0, epsilon = 1e-9);
        for i in (0..p2.len()).step_by(97) {
            let t = p2.t(i);
            let tri = if t <= 1.0 { t } else if t <= 2.0 { 2.0 - t } else { 0.0 };
            assert_abs_diff_eq!(p2.right(i), tri, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(p2.mass(), p.mass().powi(2), epsilon = 1e-9);
    }

    #[test]
    fn convolution_power_range_error() {
        let d = ServiceDistribution::raw(DistSpec::Uniform { a: 1.0 }).unwrap();
        let p = GridDensity::from_distribution(&d, 1e-2, 1.5).unwrap();
        assert!(matches!(convolve_power(&p, 2), Err(Error::Range(_))));
    }

    #[test]
    fn convolution_is_associative() {
        let d = ServiceDistribution::hyperexponential(&[0.5, 0.5], &[0.5, 1.5]).unwrap();
        let p = GridDensity::from_distribution(&d, 1e-3, 40.0).unwrap();
        let p2 = convolve_power(&p, 2).unwrap();
        let p3 = convolve_power(&p, 3).unwrap();
        let p5 = convolve_power(&p, 5).unwrap();
        let q = p2.convolve(&p3).unwrap();
        let sup = (0..p5.len()).map(|i| (p5.right(i) - q.right(i)).abs()).fold(0.0, f64::max);
        assert!(sup < 1e-5, "sup {sup}");
    }

    #[test]
    fn validate_exponential() {
        let r = validate_assumptions(&ServiceDistribution::exponential(), 1.0);
        assert!(r.all_pass(), "{r:?}");
        // Oracle: |p'|/p = 1, so the probe estimate is 1 up to O(Δt).
        assert!((r.lipschitz.value - 1.0).abs() < 1e-3, "{}", r.lipschitz.value);
        assert_abs_diff_eq!(r.moment.value, 6.0, epsilon = 1e-9); // Γ(4)
        assert!(!r.warm_up_only);
    }

    #[test]
    fn validate_uniform_is_warm_up_only() {
        let r = validate_assumptions(&ServiceDistribution::raw(DistSpec::Uniform { a: 1.0 }).unwrap(), 1.0);
        assert!(!r.positivity.pass);
        assert!(r.positivity.at > 1.0);
        assert!(r.warm_up_only);
        assert!(!r.all_pass());
    }

    #[test]
    fn validate_degenerate_delta_uses_default() {
        let d = ServiceDistribution::exponential();
        let r = validate_assumptions(&d, 0.0);
        assert_eq!(r.delta, DEFAULT_DELTA);
        assert!(r.notes.iter().any(|n| n.contains("default")));
    }

    #[test]
    fn tabulated_csv_parses() {
        let spec = DistSpec::tabulated_from_csv("t,p\n0,1\n1,1\n").unwrap();
        assert_eq!(spec, DistSpec::Tabulated { t: vec![0.0, 1.0], p: vec![1.0, 1.0] });
        assert!(DistSpec::tabulated_from_csv("0,1\n1,x\n").is_err());
    }
}
