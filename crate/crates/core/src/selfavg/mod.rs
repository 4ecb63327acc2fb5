//! The self-averaging convolution equation `f(x) = [f ∗ q_x](x)` and its
//! consequences.
//!
//! * [`solve_forward`] marches the Volterra equation forward from a history
//!   on `[−T, 0)`; [`iterate_monotone`] builds the nondecreasing iteration
//!   `f₀ = φ, f_{n+1} = f_n ∗ q`.
//! * [`renewal_density`] and [`closed_form_uniform`] provide the renewal
//!   limit `1/m` and the explicit solution for the uniform warm-up.
//! * [`exit_rate_selfavg`] estimates the exit kernel `q_{λ,y}` and the
//!   departure rate `b(y)` by Monte Carlo over Poisson rod configurations;
//!   [`kernel_bounds_check`] compares it with its a-priori bounds.
//! * [`KernelFamily`] describes `x ↦ q_x`; [`visit_probability`] and
//!   [`validate_kernel_family`] probe the walk `X_{k+1} = X_k − t_k`,
//!   `t_k ~ q_{X_k}`, and the regularity conditions of the family.

mod closed_form;
mod exit_rate;
mod kernel;
mod renewal;
mod volterra;

pub use closed_form::closed_form_uniform;
pub use exit_rate::{
    bound_probe_points, exit_rate_selfavg, kernel_bounds_check, BoundProbe, BoundsReport, KernelEstimate, SelfAvgConfig,
};
pub use kernel::{
    validate_kernel_family, visit_probability, KernelFamily, KernelReport, ProbeReport, ValidateConfig, VisitEstimate,
};
pub use renewal::{renewal_density, RenewalDensity};
pub use volterra::{
    iterate_monotone, predicted_limit, residual, solve_forward, trailing_oscillation, warmup_history, warmup_kernel, History,
    InitialGuess, MonotoneIteration,
};

use crate::error::{Error, Result};
use serde::Serialize;

/// A function on the grid `origin + i·h`, with left limits stored at marked
/// nodes where it jumps (for solutions of the equation, at `x = 0` and at the
/// start of the history, where the function drops to zero on the left).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFunction {
    origin: f64,
    h: f64,
    values: Vec<f64>,
    left: Vec<f64>,
    zero_index: Option<usize>,
}

impl RateFunction {
    /// Builds a grid function from right values and `(index, left limit)`
    /// jump markers.
    pub fn new(origin: f64, h: f64, values: Vec<f64>, jumps: &[(usize, f64)]) -> Result<Self> {
        if !(h > 0.0) || values.is_empty() || !origin.is_finite() {
            return Err(Error::Config("rate function needs a finite origin, positive step and values".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Numeric("rate function values must be finite and nonnegative".into()));
        }
        let mut left = values.clone();
        for &(i, l) in jumps {
            if i >= values.len() || !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config("jump marker outside the grid or invalid".into()));
            }
            left[i] = l;
        }
        let z = (-origin / h).round();
        let zero_index = (z >= 0.0 && (origin + z * h).abs() <= 1e-9 * h.max(1.0) && (z as usize) < values.len()).then_some(z as usize);
        Ok(Self { origin, h, values, left, zero_index })
    }

    pub(crate) fn from_parts(origin: f64, h: f64, values: Vec<f64>, left: Vec<f64>, zero_index: Option<usize>) -> Self {
        Self { origin, h, values, left, zero_index }
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
    /// True if there are no nodes.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    /// Abscissa of node `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.h
    }
    /// Index of the node at `x = 0`, if the grid contains it.
    pub fn zero_index(&self) -> Option<usize> {
        self.zero_index
    }
    /// Right values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    /// Right value at node `i`.
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }
    /// Left limit at node `i`.
    pub fn left(&self, i: usize) -> f64 {
        self.left[i]
    }
    /// Index of the node nearest to `x` (clamped to the grid).
    pub fn index_of(&self, x: f64) -> usize {
        let i = ((x - self.origin) / self.h).round();
        i.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    /// Linear interpolation between nodes, right-continuous at jumps and zero
    /// outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.origin) / self.h;
        if u < 0.0 || u > (self.len() - 1) as f64 {
            return 0.0;
        }
        let i = u.floor() as usize;
        let w = u - i as f64;
        if w == 0.0 || i + 1 >= self.len() {
            return self.values[i];
        }
        (1.0 - w) * self.values[i] + w * self.left[i + 1]
    }

    /// `max − min` of the right values on nodes in `[a, b]`.
    pub fn oscillation(&self, a: f64, b: f64) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, &v) in self.values.iter().enumerate() {
            let x = self.x(i);
            if x >= a - 1e-12 && x <= b + 1e-12 {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if hi < lo {
            0.0
        } else {
            hi - lo
        }
    }

    /// Supremum of the stored values (right values and left limits).
    pub fn sup(&self) -> f64 {
        self.values.iter().chain(&self.left).fold(0.0, |m, v| m.max(*v))
    }

    /// CSV export with header `x,value` (one row per node; a marked node
    /// whose left limit differs gets an extra `x,left` row first).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,value\n");
        for i in 0..self.len() {
            if self.left[i] != self.values[i] {
                s.push_str(&format!("{},{}\n", self.x(i), self.left[i]));
            }
            s.push_str(&format!("{},{}\n", self.x(i), self.values[i]));
        }
        s
    }

    /// Interprets the grid function as an arrival intensity (piecewise linear
    /// between nodes, zero outside the grid).
    pub fn to_intensity(&self) -> crate::queue_sim::Intensity {
        crate::queue_sim::Intensity::Table { t: (0..self.len()).map(|i| self.x(i)).collect(), values: self.values.clone() }
    }
}
