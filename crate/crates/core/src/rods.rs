//! Hard rods on the line: FIFO conflict resolution, cluster structure, X-hit
//! enumeration and exact verification of the `n!` hit-counting identities.
//!
//! A service is drawn as a rod `[x, x + l]` on the time axis: `x` is the
//! arrival time and `l` the service duration. Resolving conflicts pushes
//! overlapping rods to the right in order of arrival,
//! `z₁ = x₁`, `zᵢ = max(z_{i−1} + l_{i−1}, xᵢ)`, so `yᵢ = zᵢ + lᵢ` are the
//! departure times of a FIFO server.
//!
//! Insert one extra *free* rod of length `L` at a position `X`. The placement
//! is an *X-hit* of a target point if, after resolution, some right end lands
//! exactly on the target and that rod's cluster is rooted at `X`. For generic
//! inputs, the number of X-hits summed over all `n!` ways of distributing the
//! lengths among the fixed rods and the free rod is exactly `n!`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative threshold below which two quantities are considered coincident.
pub const DEGENERACY_REL: f64 = 1e-12;

/// Rod placement before conflict resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RodConfig {
    left_ends: Vec<f64>,
    lengths: Vec<f64>,
}

impl RodConfig {
    /// Validates strictly increasing left ends and positive lengths.
    pub fn new(left_ends: Vec<f64>, lengths: Vec<f64>) -> Result<Self> {
        if left_ends.len() != lengths.len() {
            return Err(Error::Config("left ends and lengths differ in count".into()));
        }
        if left_ends.windows(2).any(|w| !(w[1] > w[0])) || left_ends.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("left ends must be finite and strictly increasing".into()));
        }
        if lengths.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::Config("rod lengths must be positive and finite".into()));
        }
        Ok(Self { left_ends, lengths })
    }
    /// Left ends `x₁ < … < x_n`.
    pub fn left_ends(&self) -> &[f64] {
        &self.left_ends
    }
    /// Lengths `l₁ … l_n`.
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }
    /// Number of rods.
    pub fn len(&self) -> usize {
        self.lengths.len()
    }
    /// True if there are no rods.
    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }
}

/// Conflict-free configuration obtained by [`resolve`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RConfig {
    /// Original left ends.
    pub x: Vec<f64>,
    /// Resolved left ends.
    pub z: Vec<f64>,
    /// Right ends `yᵢ = zᵢ + lᵢ`.
    pub y: Vec<f64>,
    /// Lengths.
    pub lengths: Vec<f64>,
    /// Whether rod `i` was pushed (`zᵢ > xᵢ`).
    pub pushed: Vec<bool>,
}

/// Resolves conflicts: `z₁ = x₁`, `zᵢ = max(z_{i−1} + l_{i−1}, xᵢ)`.
pub fn resolve(c: &RodConfig) -> RConfig {
    let n = c.len();
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut pushed = Vec::with_capacity(n);
    let mut prev_end = f64::NEG_INFINITY;
    for i in 0..n {
        let x = c.left_ends[i];
        let zi = if prev_end > x { prev_end } else { x };
        pushed.push(prev_end > x);
        z.push(zi);
        prev_end = zi + c.lengths[i];
        y.push(prev_end);
    }
    RConfig { x: c.left_ends.clone(), z, y, lengths: c.lengths.clone(), pushed }
}

/// A maximal run of abutting rods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    /// Index of the first rod (the root, which was not pushed).
    pub root: usize,
    /// Root point `z_root = x_root`.
    pub root_point: f64,
    /// Index of the last rod (the head).
    pub head: usize,
    /// Head point `z_head`.
    pub head_point: f64,
    /// Body `[z_root, z_head + l_head]`.
    pub body: (f64, f64),
    /// End point `z_head + l_head`.
    pub end: f64,
}

/// Decomposition of an r-configuration into clusters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterDecomposition {
    /// Clusters in left-to-right order.
    pub clusters: Vec<Cluster>,
}

impl ClusterDecomposition {
    /// Index of the cluster containing rod `i`.
    pub fn cluster_of(&self, i: usize) -> Option<usize> {
        self.clusters.iter().position(|c| c.root <= i && i <= c.head)
    }
}

/// Splits a resolved configuration into maximal clusters
/// `z_i < … < z_j` with `z_j = z_i + l_i + … + l_{j−1}`.
pub fn clusters(r: &RConfig) -> ClusterDecomposition {
    let n = r.z.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && r.z[j + 1] == r.y[j] {
            j += 1;
        }
        out.push(Cluster {
            root: i,
            root_point: r.z[i],
            head: j,
            head_point: r.z[j],
            body: (r.z[i], r.y[j]),
            end: r.y[j],
        });
        i = j + 1;
    }
    ClusterDecomposition { clusters: out }
}

/// One X-hit found by [`x_hit_positions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XHit {
    /// Position of the free rod.
    pub x: f64,
    /// Bitmask over positions of the `lengths` argument: the rods whose
    /// lengths sum to `target − X` (always contains the free rod).
    pub subset: u32,
}

/// Per-permutation hit count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationCount {
    /// `perm[k]` is the index (into the length multiset) assigned to
    /// position `k`; positions `0..n−1` are the fixed rods in left-to-right
    /// order and position `n−1` is the free rod.
    pub perm: Vec<usize>,
    /// Number of X-hits `N_π`.
    pub count: usize,
}

/// Result of a hit count over all permutations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitCount {
    /// Counts per permutation, in lexicographic order of `perm`.
    pub per_permutation: Vec<PermutationCount>,
    /// `N = Σ_π N_π`.
    pub total: usize,
    /// Multiplicity `k(A)` per subset `A` of the length multiset (bitmask over
    /// original length indices).
    pub subset_multiplicity: BTreeMap<u32, usize>,
    /// True if the input was found degenerate (counts are then empty).
    pub degenerate: bool,
    /// Warning raised by the blocked variant when its length condition fails.
    pub warning: Option<String>,
}

/// An optional blocking rod of length `len` placed at `−t`; placements of the
/// free rod are restricted to `(−t, target)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Barrier {
    t: f64,
    len: f64,
}

fn check_fixed(fixed_x: &[f64], lengths: &[f64]) -> Result<()> {
    if lengths.is_empty() || lengths.len() > 20 {
        return Err(Error::Config("need between 1 and 20 rods".into()));
    }
    if fixed_x.len() + 1 != lengths.len() {
        return Err(Error::Config(format!(
            "{} fixed positions need {} lengths, got {}",
            fixed_x.len(),
            fixed_x.len() + 1,
            lengths.len()
        )));
    }
    if fixed_x.windows(2).any(|w| !(w[1] > w[0])) || fixed_x.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("fixed positions must be finite and strictly increasing".into()));
    }
    if lengths.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::Config("rod lengths must be positive and finite".into()));
    }
    Ok(())
}

fn scale_of(fixed_x: &[f64], lengths: &[f64], target: f64, barrier: Option<Barrier>) -> f64 {
    let xmax = fixed_x.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let b = barrier.map_or(0.0, |b| b.t.abs() + b.len);
    1.0 + target.abs() + lengths.iter().sum::<f64>() + xmax + b
}

/// Candidate positions `target − Σ_{i∈A} l_i` over all nonempty subsets `A`
/// (bitmask over `lengths` indices), checked for pairwise separation and
/// separation from every fixed position.
fn candidates(fixed_x: &[f64], lengths: &[f64], target: f64, eps: f64, barrier: Option<Barrier>) -> Result<Vec<(f64, u32)>> {
    let n = lengths.len();
    let mut c: Vec<(f64, u32)> = (1u32..(1u32 << n))
        .map(|mask| {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| lengths[i]).sum();
            (target - s, mask)
        })
        .collect();
    c.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in c.windows(2) {
        if (w[1].0 - w[0].0).abs() <= eps {
            return Err(Error::Degenerate(format!(
                "candidate sums for subsets {:#b} and {:#b} coincide ({} vs {})",
                w[0].1, w[1].1, w[0].0, w[1].0
            )));
        }
    }
    let mut fixed: Vec<f64> = fixed_x.to_vec();
    if let Some(b) = barrier {
        fixed.push(-b.t);
    }
    for &(x, mask) in &c {
        if let Some(f) = fixed.iter().find(|f| (x - **f).abs() <= eps) {
            return Err(Error::Degenerate(format!("candidate {x} (subset {mask:#b}) coincides with fixed position {f}")));
        }
    }
    Ok(c)
}

/// Inserts the free rod at `x` and reports whether the placement is an X-hit
/// of `target`: the free rod is not pushed, and some right end in its cluster
/// equals `target` within `tol`. Ties between a left end and the preceding
/// resolved end are reported as degenerate.
fn verify_hit(
    fixed_x: &[f64],
    fixed_len: &[f64],
    free_len: f64,
    x: f64,
    target: f64,
    eps: f64,
    barrier: Option<Barrier>,
) -> Result<bool> {
    let tol = 0.5 * eps;
    let mut prev_end = f64::NEG_INFINITY;
    if let Some(b) = barrier {
        prev_end = -b.t + b.len;
    }
    let s = fixed_x.partition_point(|&f| f < x);
    for k in 0..s {
        if (fixed_x[k] - prev_end).abs() <= eps {
            return Err(Error::Degenerate(format!("fixed rod at {} abuts a resolved end", fixed_x[k])));
        }
        prev_end = prev_end.max(fixed_x[k]) + fixed_len[k];
    }
    if (x - prev_end).abs() <= eps {
        return Err(Error::Degenerate(format!("free rod at {x} abuts a resolved end")));
    }
    if prev_end > x {
        return Ok(false); // pushed: not a root
    }
    let mut end = x + free_len;
    let mut hit = (end - target).abs() <= tol;
    for k in s..fixed_x.len() {
        if (fixed_x[k] - end).abs() <= eps {
            return Err(Error::Degenerate(format!("fixed rod at {} abuts a resolved end", fixed_x[k])));
        }
        if fixed_x[k] > end {
            break; // the free rod's cluster ends here
        }
        end += fixed_len[k];
        hit |= (end - target).abs() <= tol;
    }
    Ok(hit)
}

fn hits_for_arrangement(
    fixed_x: &[f64],
    arranged: &[f64],
    cands: &[(f64, u32)],
    target: f64,
    eps: f64,
    barrier: Option<Barrier>,
) -> Result<Vec<XHit>> {
    let n = arranged.len();
    let free_bit = 1u32 << (n - 1);
    let mut out = Vec::new();
    for &(x, mask) in cands {
        if mask & free_bit == 0 {
            // The free rod's own length is always part of the hitting sum.
            continue;
        }
        if let Some(b) = barrier {
            if !(x > -b.t && x < target) {
                continue;
            }
        }
        if verify_hit(fixed_x, &arranged[..n - 1], arranged[n - 1], x, target, eps, barrier)? {
            out.push(XHit { x, subset: mask });
        }
    }
    Ok(out)
}

/// All X-hits of `target` when the fixed rods at `fixed_x` carry
/// `lengths[0..n−1]` (in left-to-right order) and the free rod carries
/// `lengths[n−1]`.
///
/// Candidates are exactly `{target − Σ_{i∈A} l_i : ∅ ≠ A}`; each is verified
/// by re-resolution. Coincidences within `1e-12` (relative to the scale of the
/// input) between candidates, or between a candidate and a fixed position,
/// abort with [`Error::Degenerate`].
pub fn x_hit_positions(fixed_x: &[f64], lengths: &[f64], target: f64) -> Result<Vec<XHit>> {
    check_fixed(fixed_x, lengths)?;
    let eps = DEGENERACY_REL * scale_of(fixed_x, lengths, target, None);
    let all = candidates(fixed_x, lengths, target, eps, None)?;
    hits_for_arrangement(fixed_x, lengths, &all, target, eps, None)
}

/// Lexicographic successor of a permutation; false when `p` was the last.
pub fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Fast enumeration of the X-hits of `target` for one assignment of lengths:
/// fixed rods at sorted `fixed_x` with lengths `fixed_len`, free rod of
/// length `free_len`. Appends `(X, ξ)` pairs with `ξ = target − X` (the
/// summed length of the hitting block) to `out`.
///
/// For each gap `s` (the free rod placed between fixed rods `s−1` and `s`)
/// and each block `s..=i` of fixed rods pushed by it, the only candidate is
/// `X = target − free_len − Σ_{s..=i} l`; it is a hit iff it lies in the gap,
/// is not covered by the resolved end of rod `s−1`, and every rod of the
/// block starts before the cluster reaches it. Runs in `O(n²)` and performs
/// no degeneracy checks (intended for continuous random input).
pub fn permutation_hits(fixed_x: &[f64], fixed_len: &[f64], free_len: f64, target: f64, out: &mut Vec<(f64, f64)>) {
    let m = fixed_x.len();
    debug_assert_eq!(m, fixed_len.len());
    let mut prev_end = f64::NEG_INFINITY;
    for s in 0..=m {
        if s > 0 {
            prev_end = prev_end.max(fixed_x[s - 1]) + fixed_len[s - 1];
        }
        let lower = if s > 0 { fixed_x[s - 1].max(prev_end) } else { f64::NEG_INFINITY };
        let upper = if s < m { fixed_x[s] } else { f64::INFINITY };
        let mut sum = 0.0;
        let mut reach = f64::NEG_INFINITY;
        // i = s − 1 encodes the free rod alone.
        for i in s as isize - 1..m as isize {
            if i >= s as isize {
                let j = i as usize;
                reach = reach.max(fixed_x[j] - free_len - sum);
                sum += fixed_len[j];
            }
            let x = target - free_len - sum;
            if x <= lower || reach >= x {
                break;
            }
            if x < upper {
                out.push((x, free_len + sum));
            }
        }
    }
}

fn count_all(fixed_x: &[f64], lengths: &[f64], target: f64, barrier: Option<Barrier>) -> Result<HitCount> {
    check_fixed(fixed_x, lengths)?;
    let n = lengths.len();
    let eps = DEGENERACY_REL * scale_of(fixed_x, lengths, target, barrier);
    // Candidate sums over subsets of the length multiset do not depend on the
    // permutation, so separation is checked once on original indices.
    let base = candidates(fixed_x, lengths, target, eps, barrier)?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut per_permutation = Vec::new();
    let mut subset_multiplicity = BTreeMap::new();
    let mut total = 0;
    let mut arranged = vec![0.0; n];
    loop {
        for (k, &i) in perm.iter().enumerate() {
            arranged[k] = lengths[i];
        }
        // Re-express candidate masks in arrangement positions.
        let mut pos_of = vec![0usize; n];
        for (k, &i) in perm.iter().enumerate() {
            pos_of[i] = k;
        }
        let cands: Vec<(f64, u32)> = base
            .iter()
            .map(|&(x, mask)| {
                let m = (0..n).filter(|i| mask >> i & 1 == 1).fold(0u32, |acc, i| acc | 1 << pos_of[i]);
                (x, m)
            })
            .collect();
        let hits = hits_for_arrangement(fixed_x, &arranged, &cands, target, eps, barrier)?;
        for h in &hits {
            let orig = (0..n).filter(|k| h.subset >> k & 1 == 1).fold(0u32, |acc, k| acc | 1 << perm[k]);
            *subset_multiplicity.entry(orig).or_insert(0) += 1;
        }
        total += hits.len();
        per_permutation.push(PermutationCount { perm: perm.clone(), count: hits.len() });
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(HitCount { per_permutation, total, subset_multiplicity, degenerate: false, warning: None })
}

/// Total number of X-hits of the origin over all `n!` assignments of the
/// length multiset to the `n−1` fixed rods and the free rod. Equals `n!` for
/// almost every input.
pub fn count_hits_total(fixed_x: &[f64], lengths: &[f64]) -> Result<HitCount> {
    count_all(fixed_x, lengths, 0.0, None)
}

/// Like [`count_hits_total`] with an arbitrary target point.
pub fn count_hits_at(fixed_x: &[f64], lengths: &[f64], target: f64) -> Result<HitCount> {
    count_all(fixed_x, lengths, target, None)
}

/// Like [`count_hits_total`], but a degenerate input yields an empty count
/// with the degeneracy flag set instead of an error.
pub fn count_hits_total_flagged(fixed_x: &[f64], lengths: &[f64]) -> Result<HitCount> {
    match count_hits_total(fixed_x, lengths) {
        Err(Error::Degenerate(msg)) => Ok(HitCount {
            per_permutation: vec![],
            total: 0,
            subset_multiplicity: BTreeMap::new(),
            degenerate: true,
            warning: Some(msg),
        }),
        other => other,
    }
}

/// Hit count in the presence of an additional blocking rod of length `big_l`
/// at `−t`, with fixed rods and free-rod placements restricted to `(−t, 0)`.
///
/// When `big_l + Σ l < t` the total is `n!` for generic input. Otherwise the
/// count is still returned, with a warning: the blocking rod may then push
/// would-be roots.
pub fn count_hits_blocked(t: f64, big_l: f64, fixed_x: &[f64], lengths: &[f64]) -> Result<HitCount> {
    if !(t > 0.0) || !(big_l > 0.0) {
        return Err(Error::Config("blocked count needs T > 0 and L > 0".into()));
    }
    if fixed_x.iter().any(|&x| !(x > -t && x < 0.0)) {
        return Err(Error::Config("fixed positions must lie in (−T, 0)".into()));
    }
    let mut hc = count_all(fixed_x, lengths, 0.0, Some(Barrier { t, len: big_l }))?;
    let load = big_l + lengths.iter().sum::<f64>();
    if load >= t {
        hc.warning = Some(format!("L + Σl = {load} ≥ T = {t}: the blocking rod may reach the window; n! is not guaranteed"));
    }
    Ok(hc)
}

/// `n!` as an integer.
pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Random generic instance: `n−1` sorted fixed positions uniform on
/// `(−3n, 0)` and `n` lengths uniform on `(0.1, 3)`.
pub fn random_instance<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let span = 3.0 * n as f64;
    let mut x: Vec<f64> = (0..n.saturating_sub(1)).map(|_| -span * rng.random::<f64>()).collect();
    x.sort_by(f64::total_cmp);
    let l = (0..n).map(|_| 0.1 + 2.9 * rng.random::<f64>()).collect();
    (x, l)
}

/// Random generic blocked instance satisfying `L + Σl < T`:
/// returns `(T, L, fixed_x, lengths)`.
pub fn random_blocked_instance<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (f64, f64, Vec<f64>, Vec<f64>) {
    let l: Vec<f64> = (0..n).map(|_| 0.1 + 1.9 * rng.random::<f64>()).collect();
    let big_l = 0.1 + 1.9 * rng.random::<f64>();
    let t = (big_l + l.iter().sum::<f64>()) * (1.05 + 0.5 * rng.random::<f64>());
    let mut x: Vec<f64> = (0..n - 1).map(|_| -t * rng.random::<f64>()).collect();
    x.sort_by(f64::total_cmp);
    (t, big_l, x, l)
}

/// One row of the `rods verify` sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    /// Number of rods.
    pub n: usize,
    /// Instance index.
    pub instance: usize,
    /// Observed total.
    pub total: usize,
    /// Expected total `n!`.
    pub expected: usize,
    /// Whether they agree.
    pub pass: bool,
}

/// Runs `instances` random generic instances for each `n` in `1..=n_max`.
/// Instance `(n, i)` draws from stream index `n·2²⁰ + i`, so the sweep is
/// reproducible and independent of `instances`.
pub fn verify_sweep(n_max: usize, instances: usize, seed: u64) -> Result<Vec<VerifyRow>> {
    if n_max == 0 || n_max > 8 {
        return Err(Error::Config("n_max must be between 1 and 8".into()));
    }
    let mut rows = Vec::with_capacity(n_max * instances);
    for n in 1..=n_max {
        for i in 0..instances {
            let mut rng = crate::rng::stream(seed, crate::rng::component::RODS, ((n as u64) << 20) | i as u64);
            let (x, l) = random_instance(n, &mut rng);
            let hc = count_hits_total_flagged(&x, &l)?;
            let expected = factorial(n);
            rows.push(VerifyRow { n, instance: i, total: hc.total, expected, pass: !hc.degenerate && hc.total == expected });
        }
    }
    Ok(rows)
}

/// Same sweep for the blocked variant (condition `L + Σl < T` enforced).
pub fn verify_blocked_sweep(n_max: usize, instances: usize, seed: u64) -> Result<Vec<VerifyRow>> {
    let mut rows = Vec::with_capacity(n_max * instances);
    for n in 1..=n_max {
        for i in 0..instances {
            let mut rng = crate::rng::stream(seed, crate::rng::component::RODS, (1u64 << 36) | ((n as u64) << 20) | i as u64);
            let (t, big_l, x, l) = random_blocked_instance(n, &mut rng);
            let hc = count_hits_blocked(t, big_l, &x, &l)?;
            let expected = factorial(n);
            rows.push(VerifyRow { n, instance: i, total: hc.total, expected, pass: hc.total == expected && hc.warning.is_none() });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn brute_total(fixed_x: &[f64], lengths: &[f64], target: f64) -> usize {
        // Independent oracle: for every permutation and every nonempty
        // subset, insert the candidate and resolve the *whole* configuration
        // from scratch with `resolve` and `clusters`.
        let n = lengths.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut total = 0;
        loop {
            let arranged: Vec<f64> = perm.iter().map(|&i| lengths[i]).collect();
            let mut seen: Vec<f64> = Vec::new();
            for mask in 1u32..(1 << n) {
                let x = target - (0..n).filter(|i| mask >> i & 1 == 1).map(|i| arranged[i]).sum::<f64>();
                if seen.iter().any(|s| (s - x).abs() < 1e-9) {
                    continue;
                }
                let mut rods: Vec<(f64, f64, bool)> =
                    fixed_x.iter().zip(&arranged).map(|(&a, &b)| (a, b, false)).collect();
                rods.push((x, arranged[n - 1], true));
                rods.sort_by(|a, b| a.0.total_cmp(&b.0));
                let cfg = RodConfig::new(rods.iter().map(|r| r.0).collect(), rods.iter().map(|r| r.1).collect()).unwrap();
                let r = resolve(&cfg);
                let cl = clusters(&r);
                let free = rods.iter().position(|r| r.2).unwrap();
                let c = &cl.clusters[cl.cluster_of(free).unwrap()];
                let hit = c.root == free && (free..=c.head).any(|k| (r.y[k] - target).abs() < 1e-9);
                if hit {
                    seen.push(x);
                    total += 1;
                }
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        total
    }

    #[test]
    fn resolve_examples() {
        let r = resolve(&RodConfig::new(vec![0.0, 5.0], vec![1.0, 1.0]).unwrap());
        assert_eq!(r.z, vec![0.0, 5.0]);
        let r = resolve(&RodConfig::new(vec![0.0, 1.0], vec![2.0, 5.0]).unwrap());
        assert_eq!(r.z, vec![0.0, 2.0]);
        assert_eq!(r.y, vec![2.0, 7.0]);
        assert_eq!(r.pushed, vec![false, true]);
        let r = resolve(&RodConfig::new(vec![-3.0], vec![1.0]).unwrap());
        assert_eq!(r.y, vec![-2.0]);
    }

    #[test]
    fn resolve_is_idempotent() {
        let r = resolve(&RodConfig::new(vec![0.0, 0.5, 0.7, 4.0], vec![1.0, 1.0, 0.2, 3.0]).unwrap());
        let again = resolve(&RodConfig::new(r.z.clone(), r.lengths.clone()).unwrap());
        assert_eq!(again.z, r.z);
    }

    #[test]
    fn clusters_examples() {
        let r = resolve(&RodConfig::new(vec![0.0, 5.0, 9.0], vec![1.0, 1.0, 1.0]).unwrap());
        assert_eq!(clusters(&r).clusters.len(), 3);
        let r = resolve(&RodConfig::new(vec![0.0, 0.1, 0.2, 0.3], vec![1.0, 1.0, 1.0, 1.0]).unwrap());
        let c = clusters(&r);
        assert_eq!(c.clusters.len(), 1);
        assert_eq!(c.clusters[0].root_point, 0.0);
        assert_eq!(c.clusters[0].end, 4.0);
        assert_eq!(c.clusters[0].head, 3);
    }

    #[test]
    fn single_rod_hit() {
        let h = x_hit_positions(&[], &[5.0], 0.0).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].x, -5.0);
    }

    #[test]
    fn two_rod_example() {
        let mut xs: Vec<f64> = x_hit_positions(&[-3.0], &[1.0, 10.0], 0.0).unwrap().iter().map(|h| h.x).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, vec![-11.0, -10.0]);
        assert!(x_hit_positions(&[-3.0], &[10.0, 1.0], 0.0).unwrap().is_empty());
        let hc = count_hits_total(&[-3.0], &[1.0, 10.0]).unwrap();
        let counts: Vec<usize> = hc.per_permutation.iter().map(|p| p.count).collect();
        assert_eq!(counts, vec![2, 0]);
        assert_eq!(hc.total, 2);
    }

    #[test]
    fn example_clusters_consistent_with_hits() {
        // Insert the hit X = −11 and check the hitting cluster is rooted at X.
        let cfg = RodConfig::new(vec![-11.0, -3.0], vec![10.0, 1.0]).unwrap();
        let r = resolve(&cfg);
        let c = clusters(&r);
        assert_eq!(c.clusters.len(), 1);
        assert_eq!(c.clusters[0].root_point, -11.0);
        assert_eq!(c.clusters[0].end, 0.0);
    }

    #[test]
    fn small_rods_each_permutation_once() {
        let hc = count_hits_total(&[-10.0, -5.0], &[1e-3, 1.1e-3, 1.3e-3]).unwrap();
        assert!(hc.per_permutation.iter().all(|p| p.count == 1));
        assert_eq!(hc.total, 6);
    }

    #[test]
    fn random_n4_matches_brute_force() {
        let mut rng = stream(3, 0, 0);
        for _ in 0..20 {
            let (x, l) = random_instance(4, &mut rng);
            let hc = count_hits_total(&x, &l).unwrap();
            assert_eq!(hc.total, 24);
            assert_eq!(brute_total(&x, &l, 0.0), 24);
            assert_eq!(hc.subset_multiplicity.values().sum::<usize>(), 24);
        }
    }

    #[test]
    fn fast_enumeration_matches_candidate_verify() {
        let mut rng = stream(8, 0, 0);
        for n in 1..=7 {
            for _ in 0..50 {
                let (x, l) = random_instance(n, &mut rng);
                let target = rand::Rng::random::<f64>(&mut rng) * 4.0 - 2.0;
                let mut slow: Vec<f64> = x_hit_positions(&x, &l, target).unwrap().iter().map(|h| h.x).collect();
                let mut fast = Vec::new();
                permutation_hits(&x, &l[..n - 1], l[n - 1], target, &mut fast);
                for &(xx, xi) in &fast {
                    assert!((target - xx - xi).abs() < 1e-12);
                }
                let mut fast: Vec<f64> = fast.iter().map(|h| h.0).collect();
                slow.sort_by(f64::total_cmp);
                fast.sort_by(f64::total_cmp);
                assert_eq!(slow.len(), fast.len());
                for (a, b) in slow.iter().zip(&fast) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        // Equal lengths make candidate sums coincide.
        assert!(matches!(count_hits_total(&[-3.0], &[1.0, 1.0]), Err(Error::Degenerate(_))));
        // Candidate −1 coincides with the fixed position −1.
        assert!(matches!(x_hit_positions(&[-1.0], &[1.0, 2.5], 0.0), Err(Error::Degenerate(_))));
        let flagged = count_hits_total_flagged(&[-3.0], &[1.0, 1.0]).unwrap();
        assert!(flagged.degenerate);
    }

    #[test]
    fn blocked_examples() {
        let hc = count_hits_blocked(10.0, 1.0, &[], &[2.0]).unwrap();
        assert_eq!(hc.total, 1);
        assert!(hc.warning.is_none());
        let mut rng = stream(4, 0, 0);
        for _ in 0..10 {
            let (t, big_l, x, l) = random_blocked_instance(3, &mut rng);
            let hc = count_hits_blocked(t, big_l, &x, &l).unwrap();
            assert_eq!(hc.total, 6);
            assert_eq!(brute_blocked(t, big_l, &x, &l), 6);
        }
    }

    fn brute_blocked(t: f64, big_l: f64, x: &[f64], l: &[f64]) -> usize {
        // Oracle with the blocking rod as an ordinary fixed rod at −T.
        let n = l.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut total = 0;
        loop {
            let arranged: Vec<f64> = perm.iter().map(|&i| l[i]).collect();
            for mask in 1u32..(1 << n) {
                let xx = -(0..n).filter(|i| mask >> i & 1 == 1).map(|i| arranged[i]).sum::<f64>();
                if !(xx > -t && xx < 0.0) {
                    continue;
                }
                let mut rods: Vec<(f64, f64, bool)> = vec![(-t, big_l, false)];
                rods.extend(x.iter().zip(&arranged).map(|(&a, &b)| (a, b, false)));
                rods.push((xx, arranged[n - 1], true));
                rods.sort_by(|a, b| a.0.total_cmp(&b.0));
                let cfg = RodConfig::new(rods.iter().map(|r| r.0).collect(), rods.iter().map(|r| r.1).collect()).unwrap();
                let r = resolve(&cfg);
                let cl = clusters(&r);
                let free = rods.iter().position(|r| r.2).unwrap();
                let c = &cl.clusters[cl.cluster_of(free).unwrap()];
                if c.root == free && (free..=c.head).any(|k| r.y[k].abs() < 1e-9) {
                    total += 1;
                }
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        total
    }

    #[test]
    fn blocked_violation_loses_hits() {
        // L + l = 6 > T = 5: the blocking rod [−5,−1] pushes the only
        // candidate X = −2, so no hit survives.
        let hc = count_hits_blocked(5.0, 4.0, &[], &[2.0]).unwrap();
        assert_eq!(hc.total, 0);
        assert!(hc.warning.is_some());
        assert_eq!(brute_blocked(5.0, 4.0, &[], &[2.0]), 0);
    }

    #[test]
    fn verify_sweep_small() {
        let rows = verify_sweep(4, 25, 1).unwrap();
        assert!(rows.iter().all(|r| r.pass));
        let rows = verify_blocked_sweep(3, 25, 1).unwrap();
        assert!(rows.iter().all(|r| r.pass));
    }

    #[test]
    fn balance_law_across_jump() {
        // Sweep one length through a value where a candidate crosses a fixed
        // position: per-permutation counts may change, the total may not.
        let mut rng = stream(5, 0, 0);
        let mut changed = 0;
        for _ in 0..40 {
            let (x, l) = random_instance(4, &mut rng);
            // Candidate {0, 3} crosses x[1] when l0 = −x[1] − l3.
            let star = -x[1] - l[3];
            if !(star > 0.05) {
                continue;
            }
            let mut lo = l.clone();
            lo[0] = star - 1e-6;
            let mut hi = l.clone();
            hi[0] = star + 1e-6;
            let (a, b) = match (count_hits_total(&x, &lo), count_hits_total(&x, &hi)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => continue,
            };
            assert_eq!(a.total, 24);
            assert_eq!(b.total, 24);
            if a.per_permutation != b.per_permutation {
                changed += 1;
            }
        }
        assert!(changed > 0, "no permutation count moved across the jump");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inserted_hits_reresolve_to_target(seed in 0u64..10_000, n in 1usize..6, target in -5.0f64..5.0) {
            let mut rng = stream(seed, 0, 1);
            let (mut x, l) = random_instance(n, &mut rng);
            for v in &mut x { *v += target; }
            if let Ok(hits) = x_hit_positions(&x, &l, target) {
                for h in hits {
                    let mut rods: Vec<(f64, f64)> = x.iter().copied().zip(l.iter().copied()).collect();
                    rods.truncate(n - 1);
                    rods.push((h.x, l[n - 1]));
                    rods.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let r = resolve(&RodConfig::new(rods.iter().map(|r| r.0).collect(), rods.iter().map(|r| r.1).collect()).unwrap());
                    let free = rods.iter().position(|r| r.0 == h.x).unwrap();
                    let cl = clusters(&r);
                    let c = &cl.clusters[cl.cluster_of(free).unwrap()];
                    prop_assert_eq!(c.root_point, h.x);
                    prop_assert!((free..=c.head).any(|k| (r.y[k] - target).abs() < 1e-9));
                }
            }
        }

        #[test]
        fn shift_covariance(seed in 0u64..10_000, n in 1usize..5, shift in -50.0f64..50.0) {
            let mut rng = stream(seed, 0, 2);
            let (x, l) = random_instance(n, &mut rng);
            let moved: Vec<f64> = x.iter().map(|v| v + shift).collect();
            if let (Ok(a), Ok(b)) = (count_hits_at(&x, &l, 0.0), count_hits_at(&moved, &l, shift)) {
                prop_assert_eq!(a.per_permutation, b.per_permutation);
            }
        }

        #[test]
        fn permutation_sum_is_factorial(seed in 0u64..100_000, n in 1usize..6) {
            let mut rng = stream(seed, 0, 3);
            let (x, l) = random_instance(n, &mut rng);
            let hc = count_hits_total(&x, &l).unwrap();
            prop_assert_eq!(hc.total, factorial(n));
        }
    }
}
