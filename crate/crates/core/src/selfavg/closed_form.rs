//! Explicit solution of the uniform warm-up in exact fixed-point arithmetic.
//!
//! `f(x) = 1 + x − Σ_{0≤k<x} (−1)^k/(2·k!)·(x−k)^k·e^{x−k}` is an
//! alternating sum whose terms grow like `e^{x}` while the result tends to
//! 2/3, so double precision loses every digit by `x ≈ 40`. The sum is
//! therefore evaluated with big integers scaled by `2^P`, `P` chosen from
//! the largest term plus 128 guard bits.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

/// Largest argument accepted by [`closed_form_uniform`].
pub const CLOSED_FORM_MAX_X: f64 = 700.0;

/// Evaluates the explicit warm-up solution at `x ≥ 0`.
///
/// At `x = 0` the sum is empty and the value is the left limit 1; for
/// `x → 0⁺` it tends to 1/2. Errors with [`Error::Domain`] for `x < 0` and
/// [`Error::Range`] for `x > 700`.
pub fn closed_form_uniform(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("closed form needs x ≥ 0, got {x}")));
    }
    if x > CLOSED_FORM_MAX_X {
        return Err(Error::Range(format!("closed form limited to x ≤ {CLOSED_FORM_MAX_X}; march the equation beyond")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x <= 1.0 {
        // Only the k = 0 term: no cancellation beyond 1 − 1/2.
        return Ok(1.0 + x - 0.5 * x.exp());
    }
    let kmax = (x.ceil() as u64) - 1;
    // log2 of the largest term (x−k)^k e^{x−k} / k!.
    let mut bits: f64 = 0.0;
    for k in 0..=kmax {
        let d = x - k as f64;
        let lt = k as f64 * d.ln() + d - statrs::function::gamma::ln_gamma(k as f64 + 1.0);
        bits = bits.max(lt / std::f64::consts::LN_2);
    }
    let p = bits.max(0.0).ceil() as u64 + 128;
    let one = BigInt::one() << p;
    let xf = to_fixed(x, p);
    let e1 = exp_frac(&one, &one, p);
    let mut sum = BigInt::zero();
    let mut fact = BigInt::one();
    for k in 0..=kmax {
        if k > 0 {
            fact *= k;
        }
        let d = &xf - (BigInt::from(k) << p);
        let pow = pow_fixed(&d, k, &one, p);
        let e = exp_fixed(&d, &e1, &one, p);
        let term = ((pow * e) >> p) / &fact;
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let f = &one + &xf - (sum >> 1u32);
    let shift = p.saturating_sub(60);
    let top = (f >> shift).to_f64().ok_or_else(|| Error::Numeric("closed form conversion failed".into()))?;
    Ok(top / 2f64.powi((p - shift) as i32))
}

/// `x·2^p` for a finite nonnegative double (exact when `x` has no bits below
/// `2^{−p}`).
fn to_fixed(x: f64, p: u64) -> BigInt {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = if exp == 0 { (bits & ((1 << 52) - 1)) << 1 } else { (bits & ((1 << 52) - 1)) | (1 << 52) };
    let e = exp - 1075 + p as i64;
    let m = BigInt::from(mant);
    if e >= 0 {
        m << e as u64
    } else {
        m >> (-e) as u64
    }
}

fn pow_fixed(base: &BigInt, k: u64, one: &BigInt, p: u64) -> BigInt {
    let mut acc = one.clone();
    for _ in 0..k {
        acc = (acc * base) >> p;
    }
    acc
}

/// `e^{d}` for `d ≥ 0` (fixed point): integer part by repeated
/// multiplication with `e`, fractional part by its Taylor series.
fn exp_fixed(d: &BigInt, e1: &BigInt, one: &BigInt, p: u64) -> BigInt {
    let j = (d >> p).to_u64().unwrap_or(0);
    let frac = d - (BigInt::from(j) << p);
    let mut acc = exp_frac(&frac, one, p);
    for _ in 0..j {
        acc = (acc * e1) >> p;
    }
    acc
}

/// Taylor series of `e^{f}` for `0 ≤ f ≤ 1` in fixed point.
fn exp_frac(f: &BigInt, one: &BigInt, p: u64) -> BigInt {
    let mut sum = one.clone();
    let mut term = one.clone();
    let mut n = 1u64;
    loop {
        term = ((term * f) >> p) / n;
        if term.is_zero() {
            break;
        }
        sum += &term;
        n += 1;
    }
    sum
}
