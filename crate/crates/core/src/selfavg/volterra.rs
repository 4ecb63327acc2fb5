//! Forward marching and monotone iteration for `f(x) = ∫ f(x − t) q_x(t) dt`.
//!
//! Both use the same quadrature: the trapezoid rule cell by cell, taking on
//! each cell `[t_j, t_{j+1}]` the inner one-sided limits of `q_x` and of
//! `f(x − ·)`. Jumps at grid nodes (the drop of `f` at `x = 0`, the edges of
//! a uniform kernel) are therefore integrated without smearing. The only
//! implicit term is the `t = 0` end of the first cell, which involves
//! `f(x−) = f(x)` for `x > 0` and is solved for exactly.

use super::kernel::KernelFamily;
use super::RateFunction;
use crate::dists::ServiceDistribution;
use crate::error::{Error, Result};
use serde::Serialize;

/// Initial data `φ` on `[−T_init, 0)` sampled with step `h`, with the left
/// limit `φ(0−)`. Before `−T_init` the function is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct History {
    /// Length of the history interval.
    pub t_init: f64,
    /// Grid step.
    pub h: f64,
    /// `φ(−T_init + i·h)` for `i = 0..n`, `n = T_init/h`.
    pub values: Vec<f64>,
    /// `φ(0−)`.
    pub left_at_zero: f64,
}

impl History {
    /// Samples `phi` on the grid; `phi(0)` is taken as the left limit `φ(0−)`.
    pub fn from_fn(t_init: f64, h: f64, phi: impl Fn(f64) -> f64) -> Result<Self> {
        if !(h > 0.0) || !(t_init > 0.0) {
            return Err(Error::Config("history needs T_init > 0 and h > 0".into()));
        }
        let n = (t_init / h).round();
        if (n * h - t_init).abs() > 1e-9 * t_init.max(1.0) || n < 1.0 {
            return Err(Error::Config(format!("T_init = {t_init} is not a multiple of h = {h}")));
        }
        let n = n as usize;
        let values: Vec<f64> = (0..n).map(|i| phi(-t_init + i as f64 * h)).collect();
        let left_at_zero = phi(0.0);
        if values.iter().chain(std::iter::once(&left_at_zero)).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("history must be finite and nonnegative".into()));
        }
        Ok(Self { t_init, h, values, left_at_zero })
    }

    /// The constant history `φ ≡ κ`.
    pub fn constant(t_init: f64, h: f64, kappa: f64) -> Result<Self> {
        Self::from_fn(t_init, h, |_| kappa)
    }

    /// Supremum of the history.
    pub fn sup(&self) -> f64 {
        self.values.iter().fold(self.left_at_zero, |m, v| m.max(*v))
    }
}

/// The warm-up history `φ(x) = 1 + x` on `[−1, 0)`.
pub fn warmup_history(h: f64) -> Result<History> {
    History::from_fn(1.0, h, |x| 1.0 + x)
}

/// The warm-up kernel: `q_x` uniform on `[0, 1]` for every `x`.
pub fn warmup_kernel() -> Result<KernelFamily> {
    Ok(KernelFamily::Stationary(ServiceDistribution::uniform_raw(1.0)?))
}

/// Limit `lim_{x→∞} f(x) = (1/m)∫_0^∞ [φ ∗ p](x) dx` of the stationary
/// equation, computed as `(1/m)∫_0^{T} φ(−u)·P{η > u} du` (Simpson's rule on
/// `n` cells; `phi` must be defined on `[−T_init, 0]`).
pub fn predicted_limit(phi: impl Fn(f64) -> f64, t_init: f64, p: &ServiceDistribution, n: usize) -> f64 {
    let n = n.max(2) & !1;
    let h = t_init / n as f64;
    let g = |u: f64| phi(-u) * p.sf(u);
    let mut s = g(0.0) + g(t_init);
    for i in 1..n {
        s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0 / p.mean()
}

/// Kernel rows for the march: cached when `q_x` does not depend on `x`.
struct Rows<'a> {
    k: &'a KernelFamily,
    h: f64,
    cache: Option<(Vec<f64>, Vec<f64>)>,
    /// Finite-range family: constant part and `cos(2πt/T)/T` part.
    split: Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64, f64)>,
}

impl<'a> Rows<'a> {
    fn new(k: &'a KernelFamily, h: f64, len: usize) -> Result<Self> {
        k.validate()?;
        let (r0, _) = k.row(0.0, h, 1);
        if k.density_left(0.0, 0.0) > 0.0 {
            return Err(Error::IllPosed("kernel mass reaches t ≤ 0".into()));
        }
        if 0.5 * h * r0[0] >= 1.0 {
            return Err(Error::IllPosed(format!("q(0+) = {} too large for step {h}", r0[0])));
        }
        let mut rows = Self { k, h, cache: None, split: None };
        if k.is_stationary() {
            rows.cache = Some(k.row(0.0, h, len));
        } else if let KernelFamily::FiniteRange { t, a, omega } = k {
            let flat = KernelFamily::FiniteRange { t: *t, a: 0.0, omega: 0.0 };
            let (br, bl) = flat.row(0.0, h, len);
            let w = 2.0 * std::f64::consts::PI / t;
            let cr: Vec<f64> = br.iter().enumerate().map(|(j, v)| v * (w * j as f64 * h).cos()).collect();
            let cl: Vec<f64> = bl.iter().enumerate().map(|(j, v)| v * (w * j as f64 * h).cos()).collect();
            rows.split = Some((br, bl, cr, cl, *a, *omega));
        }
        Ok(rows)
    }

    fn get(&self, x: f64, n: usize, r: &mut Vec<f64>, l: &mut Vec<f64>) {
        r.clear();
        l.clear();
        if let Some((cr, cl)) = &self.cache {
            r.extend_from_slice(&cr[..n]);
            l.extend_from_slice(&cl[..n]);
        } else if let Some((br, bl, cr, cl, a, omega)) = &self.split {
            let s = a * (omega * x).sin();
            r.extend((0..n).map(|j| br[j] + s * cr[j]));
            l.extend((0..n).map(|j| bl[j] + s * cl[j]));
        } else {
            let (rr, ll) = self.k.row(x, self.h, n);
            r.extend(rr);
            l.extend(ll);
        }
    }
}

fn reach_steps(k: &KernelFamily, h: f64) -> Option<usize> {
    k.support_bound().map(|b| (b / h).ceil() as usize + 1)
}

fn check_h(hist: &History, x_max: f64) -> Result<usize> {
    if !(x_max >= 0.0 && x_max.is_finite()) {
        return Err(Error::Config("X_max must be finite and ≥ 0".into()));
    }
    Ok((x_max / hist.h).round() as usize)
}

/// Trapezoid sum `h/2 Σ_j [f(x−t_j)⁻ q(t_j+) + f(x−t_{j+1})⁺ q(t_{j+1}−)]`
/// at node `i`, omitting the implicit `j = 0` first term.
fn explicit_part(i: usize, f: &[f64], fl: &[f64], r: &[f64], l: &[f64], h: f64) -> f64 {
    let cells = r.len() - 1;
    let mut s = 0.0;
    for j in 0..cells {
        if j > 0 {
            s += fl[i - j] * r[j];
        }
        s += f[i - j - 1] * l[j + 1];
    }
    0.5 * h * s
}

/// Marches `f(x) = ∫ f(x − t) q_x(t) dt` on `[0, X_max]` from the history.
///
/// The result lives on `[−T_init, X_max]` with jump markers at `−T_init`
/// (left limit 0) and at 0 (left limit `φ(0−)`). Kernels whose declared
/// support exceeds the history are integrated against `f = 0` before
/// `−T_init`.
///
/// Errors with [`Error::IllPosed`] when the kernel has mass at `t ≤ 0` or
/// `q(0+)` is so large that the implicit first cell cannot be solved.
pub fn solve_forward(hist: &History, k: &KernelFamily, x_max: f64) -> Result<RateFunction> {
    let h = hist.h;
    let n0 = hist.values.len();
    let total = n0 + check_h(hist, x_max)? + 1;
    let reach = reach_steps(k, h).unwrap_or(total);
    let rows = Rows::new(k, h, reach.min(total) + 1)?;
    let mut f = Vec::with_capacity(total);
    f.extend_from_slice(&hist.values);
    let mut fl = f.clone();
    fl[0] = 0.0;
    f.resize(total, 0.0);
    fl.resize(total, 0.0);
    fl[n0] = hist.left_at_zero;
    let (mut r, mut l) = (Vec::new(), Vec::new());
    for i in n0..total {
        let x = (i - n0) as f64 * h;
        let cells = reach.min(i);
        rows.get(x, cells + 1, &mut r, &mut l);
        let rest = explicit_part(i, &f, &fl, &r, &l, h);
        let v = if i == n0 { rest + 0.5 * h * fl[n0] * r[0] } else { rest / (1.0 - 0.5 * h * r[0]) };
        if !v.is_finite() {
            return Err(Error::Numeric(format!("solution not finite at x = {x}")));
        }
        f[i] = v;
        if i > n0 {
            fl[i] = v;
        }
    }
    Ok(RateFunction::from_parts(-hist.t_init, h, f, fl, Some(n0)))
}

/// Largest `|f(x) − ∫ f(x − t) q_x(t) dt|` over the nodes `x ≥ 0`, with the
/// integral re-evaluated by the same quadrature.
pub fn residual(f: &RateFunction, k: &KernelFamily) -> Result<f64> {
    let n0 = f.zero_index().ok_or_else(|| Error::Config("rate function has no node at 0".into()))?;
    let h = f.step();
    let total = f.len();
    let reach = reach_steps(k, h).unwrap_or(total);
    let rows = Rows::new(k, h, reach.min(total) + 1)?;
    let vals: Vec<f64> = (0..total).map(|i| f.value(i)).collect();
    let left: Vec<f64> = (0..total).map(|i| f.left(i)).collect();
    let (mut r, mut l) = (Vec::new(), Vec::new());
    let mut worst: f64 = 0.0;
    for i in n0..total {
        let x = f.x(i);
        let cells = reach.min(i);
        rows.get(x, cells + 1, &mut r, &mut l);
        let q = explicit_part(i, &vals, &left, &r, &l, h) + 0.5 * h * left[i] * r[0];
        worst = worst.max((vals[i] - q).abs());
    }
    Ok(worst)
}

/// Starting guess `f₀` on `[0, X_max]` for [`iterate_monotone`].
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// `f₀ = 0` on `x ≥ 0` (so `f₀ = φ` extended by zero): the iteration is
    /// then nondecreasing and monotonicity is asserted.
    Zero,
    /// Arbitrary nonnegative values on the nodes of `[0, X_max]`; the
    /// iteration still converges to the same limit but monotonicity is only
    /// reported.
    Values(Vec<f64>),
}

/// Result of the monotone iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneIteration {
    /// `f_n` on the nodes of `[0, X_max]`, `n = 0..=n_iter`.
    pub iterates: Vec<Vec<f64>>,
    /// `sup |f_{n+1} − f_n|` for each step.
    pub sup_change: Vec<f64>,
    /// Whether every step was pointwise nondecreasing.
    pub monotone: bool,
    /// Cap `sup φ` that every iterate respects.
    pub cap: f64,
    /// The last iterate as a full rate function on `[−T_init, X_max]`.
    pub limit: RateFunction,
}

/// Iterates `f_{n+1} = φ` on `x < 0`, `f_{n+1}(x) = [f_n ∗ q_x](x)` on
/// `x ≥ 0`, with the same quadrature as [`solve_forward`] (whose output is
/// therefore the exact fixed point).
///
/// Starting from [`InitialGuess::Zero`], `f_n` is pointwise nondecreasing and
/// bounded by `sup φ`; both are asserted and a violation beyond rounding is
/// an [`Error::Numeric`].
pub fn iterate_monotone(
    hist: &History,
    k: &KernelFamily,
    n_iter: usize,
    x_max: f64,
    start: &InitialGuess,
) -> Result<MonotoneIteration> {
    let h = hist.h;
    let n0 = hist.values.len();
    let m = check_h(hist, x_max)? + 1;
    let total = n0 + m;
    let reach = reach_steps(k, h).unwrap_or(total);
    let rows = Rows::new(k, h, reach.min(total) + 1)?;
    let cap = hist.sup();
    let mut f = hist.values.clone();
    match start {
        InitialGuess::Zero => f.resize(total, 0.0),
        InitialGuess::Values(v) => {
            if v.len() != m || v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::Config(format!("initial guess needs {m} nonnegative values")));
            }
            f.extend_from_slice(v);
        }
    }
    let assert_monotone = matches!(start, InitialGuess::Zero);
    let tol = 1e-12 * cap.max(1.0);
    let mut iterates = vec![f[n0..].to_vec()];
    let mut sup_change = Vec::with_capacity(n_iter);
    let mut monotone = true;
    let (mut r, mut l) = (Vec::new(), Vec::new());
    let mut next = f.clone();
    for _ in 0..n_iter {
        let mut fl = f.clone();
        fl[0] = 0.0;
        fl[n0] = hist.left_at_zero;
        let mut change: f64 = 0.0;
        for i in n0..total {
            let x = (i - n0) as f64 * h;
            let cells = reach.min(i);
            rows.get(x, cells + 1, &mut r, &mut l);
            let v = explicit_part(i, &f, &fl, &r, &l, h) + 0.5 * h * fl[i] * r[0];
            if v < f[i] - tol {
                monotone = false;
                if assert_monotone {
                    return Err(Error::Numeric(format!("monotone iteration decreased at x = {x}")));
                }
            }
            if assert_monotone && v > cap + tol {
                return Err(Error::Numeric(format!("monotone iteration exceeded the cap at x = {x}")));
            }
            change = change.max((v - f[i]).abs());
            next[i] = v;
        }
        std::mem::swap(&mut f, &mut next);
        iterates.push(f[n0..].to_vec());
        sup_change.push(change);
    }
    let mut fl = f.clone();
    fl[0] = 0.0;
    fl[n0] = hist.left_at_zero;
    let limit = RateFunction::from_parts(-hist.t_init, h, f, fl, Some(n0));
    Ok(MonotoneIteration { iterates, sup_change, monotone, cap, limit })
}

/// Oscillation `max − min` of `f` on the trailing window `[X_max − w, X_max]`.
pub fn trailing_oscillation(f: &RateFunction, w: f64) -> f64 {
    let end = f.x(f.len() - 1);
    f.oscillation(end - w, end)
}
