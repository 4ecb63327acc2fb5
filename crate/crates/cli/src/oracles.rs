//! Independent reference values for the acceptance suite.
//!
//! Nothing here calls the laboratory's solvers: the closed-network
//! stationary law comes from the generator matrix, stationary rates from
//! the Pollaczek–Khinchine mean-value formula, and the warm-up limit from a
//! direct double quadrature.

use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;

/// Stationary law of the closed network of `M` exponential (rate 1) FIFO
/// servers and `N` customers with uniform routing (self-routing allowed),
/// from the full generator matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedNetworkCtmc {
    /// States: queue-length vectors summing to `N`.
    pub states: Vec<Vec<u32>>,
    /// Stationary probability of each state.
    pub pi: Vec<f64>,
}

fn compositions(n: u32, m: usize) -> Vec<Vec<u32>> {
    if m == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in compositions(n - first, m - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

impl ClosedNetworkCtmc {
    /// Builds the generator `Q` and solves `πQ = 0`, `Σπ = 1` by LU
    /// decomposition (one balance equation replaced by the normalization).
    ///
    /// Returns `None` if the linear system is singular.
    pub fn solve(m: usize, n: u32) -> Option<Self> {
        let states = compositions(n, m);
        let index: HashMap<&[u32], usize> = states.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
        let size = states.len();
        let mut q = DMatrix::<f64>::zeros(size, size);
        let route = 1.0 / m as f64;
        for (a, s) in states.iter().enumerate() {
            for i in 0..m {
                if s[i] == 0 {
                    continue;
                }
                for j in 0..m {
                    if j == i {
                        continue;
                    }
                    let mut t = s.clone();
                    t[i] -= 1;
                    t[j] += 1;
                    let b = index[t.as_slice()];
                    q[(a, b)] += route;
                    q[(a, a)] -= route;
                }
            }
        }
        let mut sys = q.transpose();
        for c in 0..size {
            sys[(size - 1, c)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(size);
        rhs[size - 1] = 1.0;
        let pi = sys.lu().solve(&rhs)?;
        Some(Self { states, pi: pi.iter().copied().collect() })
    }

    /// Stationary queue-length distribution of node `node`.
    pub fn marginal(&self, node: usize) -> Vec<f64> {
        let n = self.states.first().map_or(0, |s| s.iter().sum::<u32>()) as usize;
        let mut out = vec![0.0; n + 1];
        for (s, p) in self.states.iter().zip(&self.pi) {
            out[s[node] as usize] += p;
        }
        out
    }
}

/// Mean number in an M/G/1 system with arrival rate `c` and unit-mean
/// service with second moment `es2` (Pollaczek–Khinchine).
pub fn pk_mean_queue(c: f64, es2: f64) -> f64 {
    c + c * c * es2 / (2.0 * (1.0 - c))
}

/// Arrival rate `c ∈ (0, 1)` at which the M/G/1 mean number equals `q`:
/// the positive root of `(s₂ − 2)c² + 2(1 + q)c − 2q = 0`, `s₂ = E[S²]`.
pub fn pk_rate_for_mean_queue(q: f64, es2: f64) -> f64 {
    let a = es2 - 2.0;
    let b = 2.0 * (1.0 + q);
    if a.abs() < 1e-14 {
        return 2.0 * q / b;
    }
    // Numerically stable form of (−b + √(b² + 8aq)) / 2a.
    4.0 * q / (b + (b * b + 8.0 * a * q).sqrt())
}

/// Birth–death chain (M/M/1): `N = c/(1 − c)` inverted, `c = q/(1 + q)`.
pub fn birth_death_rate(q: f64) -> f64 {
    q / (1.0 + q)
}

const GL16: [(f64, f64); 8] = [
    (0.095_012_509_837_637_44, 0.189_450_610_455_068_5),
    (0.281_603_550_779_258_9, 0.182_603_415_044_923_6),
    (0.458_016_777_657_227_4, 0.169_156_519_395_002_5),
    (0.617_876_244_402_643_8, 0.149_595_988_816_576_7),
    (0.755_404_408_355_003_0, 0.124_628_971_255_533_9),
    (0.865_631_202_387_831_7, 0.095_158_511_682_492_78),
    (0.944_575_023_073_232_6, 0.062_253_523_938_647_89),
    (0.989_400_934_991_649_9, 0.027_152_459_411_754_09),
];

/// Composite 16-point Gauss–Legendre rule on `[a, b]` with the interval
/// split at every `breaks` point inside it and each piece into `pieces`.
pub fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], pieces: usize) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut cuts = vec![a];
    cuts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    let mut s = 0.0;
    for w in cuts.windows(2) {
        for j in 0..pieces {
            let lo = w[0] + (w[1] - w[0]) * j as f64 / pieces as f64;
            let hi = w[0] + (w[1] - w[0]) * (j + 1) as f64 / pieces as f64;
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for &(u, wt) in &GL16 {
                s += half * wt * (f(mid + half * u) + f(mid - half * u));
            }
        }
    }
    s
}

/// `(1/m) ∫₀^{x_cut} [φ ∗ p](x) dx` with `φ` supported on `[−t_init, 0)`:
/// the inner integral `∫ φ(x − t) p(t) dt` runs over `t ∈ [x, x + t_init]`,
/// split at the kinks `p_breaks` of `p`.
pub fn convolution_limit(
    phi: &dyn Fn(f64) -> f64,
    t_init: f64,
    pdf: &dyn Fn(f64) -> f64,
    mean: f64,
    p_breaks: &[f64],
    x_cut: f64,
) -> f64 {
    let inner = |x: f64| gauss_legendre(&|t: f64| phi(x - t) * pdf(t), x, x + t_init, p_breaks, 2);
    // The outer integrand has kinks where x or x + t_init crosses a kink of p.
    let mut outer_breaks: Vec<f64> = p_breaks.to_vec();
    outer_breaks.extend(p_breaks.iter().map(|b| b - t_init));
    let pieces = x_cut.ceil().max(1.0) as usize;
    gauss_legendre(&inner, 0.0, x_cut, &outer_breaks, pieces) / mean
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ctmc_matches_product_form() {
        // Equal service rates and symmetric routing: every composition is
        // equally likely, so P{n₁ = k} = (N − k + M − 2 choose M − 2) / #states.
        let c = ClosedNetworkCtmc::solve(3, 3).unwrap();
        assert_eq!(c.states.len(), 10);
        for p in &c.pi {
            assert!((p - 0.1).abs() < 1e-12);
        }
        let m = c.marginal(0);
        for (k, want) in [0.4, 0.3, 0.2, 0.1].iter().enumerate() {
            assert!((m[k] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn pk_inversion() {
        assert!((pk_rate_for_mean_queue(1.0, 2.0) - 0.5).abs() < 1e-15);
        assert!((birth_death_rate(1.0) - 0.5).abs() < 1e-15);
        for &s2 in &[1.2, 2.0, 2.5, 7.0] {
            let c = pk_rate_for_mean_queue(1.0, s2);
            assert!((pk_mean_queue(c, s2) - 1.0).abs() < 1e-12, "s2 = {s2}");
        }
        assert!((pk_rate_for_mean_queue(1.0, 2.5) - (5f64.sqrt() * 2.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn quadrature_limit_of_uniform_warmup() {
        let l = convolution_limit(
            &|x: f64| if (-1.0..0.0).contains(&x) { 1.0 + x } else { 0.0 },
            1.0,
            &|t: f64| if (0.0..=1.0).contains(&t) { 1.0 } else { 0.0 },
            0.5,
            &[1.0],
            2.0,
        );
        assert!((l - 2.0 / 3.0).abs() < 1e-12, "{l}");
    }
}
