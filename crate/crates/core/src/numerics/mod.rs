//! Exact rationals, outward-rounded real intervals and the small constant
//! expression language used by the parameter calculators.
//!
//! Everything that decides membership of a point or a cube is computed with
//! [`ExactRational`]. Irrational quantities (logarithms, square roots, powers
//! of two with real exponents) only ever appear as [`RealInterval`]s whose
//! endpoints are rounded away from the enclosed value.

mod expr;
mod interval;

pub use expr::{eval_constant, Expr};
pub use interval::{guarded_ceil_log2, ln2, RealInterval};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::Error;

/// Arbitrary precision rational in canonical form.
pub type ExactRational = BigRational;

/// Default working precision of interval evaluations, in bits.
pub const DEFAULT_PRECISION: u32 = 256;

/// Environment variable that overrides [`DEFAULT_PRECISION`] for the CLI.
pub const PRECISION_ENV: &str = "DYELIM_PRECISION";

pub fn rat(n: i64, d: i64) -> ExactRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> ExactRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn big(n: impl Into<BigInt>) -> ExactRational {
    BigRational::from_integer(n.into())
}

/// `2^e` for any integer exponent.
pub fn pow2(e: i64) -> ExactRational {
    if e >= 0 {
        BigRational::from_integer(BigInt::one() << (e as usize))
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << ((-e) as usize))
    }
}

pub fn floor(x: &ExactRational) -> BigInt {
    x.numer().div_floor(x.denom())
}

pub fn ceil(x: &ExactRational) -> BigInt {
    -((-x.numer()).div_floor(x.denom()))
}

/// Distance to the nearest integer, `min_k |x - k|`.
pub fn nearest_int_dist(x: &ExactRational) -> ExactRational {
    let frac = x - big(floor(x));
    let other = ExactRational::one() - &frac;
    if frac <= other {
        frac
    } else {
        other
    }
}

/// Minimum of `‖y‖` over the closed interval `[lo, hi]`.
pub fn min_dist_over(lo: &ExactRational, hi: &ExactRational) -> ExactRational {
    debug_assert!(lo <= hi);
    let k = ceil(lo);
    if big(k.clone()) <= *hi {
        return ExactRational::zero();
    }
    // No integer inside: both ends sit in (k-1, k).
    let below = lo - big(&k - 1);
    let above = big(k) - hi;
    if below <= above {
        below
    } else {
        above
    }
}

/// `floor(log2 |x|)` for non-zero `x`.
pub fn floor_log2(x: &ExactRational) -> i64 {
    assert!(!x.is_zero(), "floor_log2 of zero");
    let n = x.numer().magnitude();
    let d = x.denom().magnitude();
    let mut e = n.bits() as i64 - d.bits() as i64;
    // 2^e <= |x| < 2^(e+1) or 2^(e-1) <= |x| < 2^e.
    if !ge_pow2(n, d, e) {
        e -= 1;
    }
    e
}

fn ge_pow2(n: &BigUint, d: &BigUint, e: i64) -> bool {
    if e >= 0 {
        *n >= d << (e as usize)
    } else {
        n << ((-e) as usize) >= *d
    }
}

/// Smallest integer `l` with `2^l >= x`, for `x > 0`.
pub fn ceil_log2(x: &ExactRational) -> i64 {
    let e = floor_log2(x);
    if *x == pow2(e) {
        e
    } else {
        e + 1
    }
}

/// Largest dyadic with `bits` significant bits that is `<= x`.
pub fn round_down(x: &ExactRational, bits: u32) -> ExactRational {
    round_dyadic(x, bits, false)
}

/// Smallest dyadic with `bits` significant bits that is `>= x`.
pub fn round_up(x: &ExactRational, bits: u32) -> ExactRational {
    round_dyadic(x, bits, true)
}

/// One unit in the last place of `x` at `bits` significant bits.
pub fn ulp(x: &ExactRational, bits: u32) -> ExactRational {
    if x.is_zero() {
        return pow2(-(bits as i64));
    }
    pow2(floor_log2(x) - bits as i64 + 1)
}

fn round_dyadic(x: &ExactRational, bits: u32, up: bool) -> ExactRational {
    if x.is_zero() {
        return x.clone();
    }
    let shift = floor_log2(x) - bits as i64 + 1;
    let scaled = x * pow2(-shift);
    if scaled.is_integer() {
        return x.clone();
    }
    let k = if up { ceil(&scaled) } else { floor(&scaled) };
    big(k) * pow2(shift)
}

/// Parses `"3"`, `"-3/4"` or a finite decimal such as `"0.4"`.
pub fn parse_rational(s: &str) -> Result<ExactRational, Error> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        let neg = ip.starts_with('-');
        let ip = ip.trim_start_matches(['-', '+']);
        if !fp.chars().all(|c| c.is_ascii_digit()) || fp.is_empty() {
            return Err(bad());
        }
        let digits = format!("{}{}", if ip.is_empty() { "0" } else { ip }, fp);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10), fp.len());
        let v = BigRational::new(n, d);
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = t.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

/// Canonical `"p/q"` rendering; integers carry an explicit `/1`.
pub fn fmt_rational(x: &ExactRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Renders a dyadic rational as `"c/2^l"`, falling back to `"p/q"`.
pub fn fmt_dyadic(x: &ExactRational) -> String {
    let d = x.denom();
    if d.sign() == Sign::Plus && (d & (d - BigInt::one())).is_zero() {
        let l = d.bits() - 1;
        format!("{}/2^{}", x.numer(), l)
    } else {
        fmt_rational(x)
    }
}

/// Parses either a `"c/2^l"` dyadic or anything [`parse_rational`] accepts.
pub fn parse_dyadic(s: &str) -> Result<ExactRational, Error> {
    if let Some((n, l)) = s.split_once("/2^") {
        let n: BigInt = n
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad dyadic {s:?}")))?;
        let l: u32 = l
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad dyadic exponent {s:?}")))?;
        return Ok(big(n) * pow2(-(l as i64)));
    }
    parse_rational(s)
}

/// Nearest `f64`, for human-facing summaries only.
pub fn to_f64(x: &ExactRational) -> f64 {
    if let (Some(n), Some(d)) = (x.numer().to_f64(), x.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let e = floor_log2(&x.abs());
    let m = (x * pow2(-e)).to_f64().unwrap_or(f64::NAN);
    m * (e as f64).exp2()
}

/// `a^k` for non-negative integer `k`.
pub fn pow_rational(a: &ExactRational, k: u64) -> ExactRational {
    num_traits::pow(a.clone(), k as usize)
}

/// Smallest integer `m` with `m^t >= x` for `x >= 0`, `t >= 1`.
pub fn ceil_root(x: &BigInt, t: u32) -> BigInt {
    assert!(!x.is_negative());
    if x.is_zero() {
        return BigInt::zero();
    }
    let r = x.nth_root(t);
    if num_traits::pow(r.clone(), t as usize) == *x {
        r
    } else {
        r + 1
    }
}
