use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{
    big, ceil_log2, floor, floor_log2, fmt_rational, int, pow2, rat, round_down, round_up, to_f64,
    ulp, ExactRational,
};
use crate::Error;

/// Closed interval `[lo, hi]` with dyadic endpoints that encloses a real
/// number. Every operation rounds its result outward to `precision_bits`
/// significant bits, so enclosure is preserved through any composition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealInterval {
    lo: ExactRational,
    hi: ExactRational,
    precision_bits: u32,
}

impl RealInterval {
    pub fn exact(x: ExactRational, precision_bits: u32) -> Self {
        Self {
            lo: x.clone(),
            hi: x,
            precision_bits,
        }
    }

    /// Encloses `x`, rounded outward to `precision_bits`.
    pub fn around(x: &ExactRational, precision_bits: u32) -> Self {
        Self {
            lo: round_down(x, precision_bits),
            hi: round_up(x, precision_bits),
            precision_bits,
        }
    }

    pub fn new(lo: ExactRational, hi: ExactRational, precision_bits: u32) -> Result<Self, Error> {
        if lo > hi {
            return Err(Error::Domain(format!(
                "empty interval [{}, {}]",
                fmt_rational(&lo),
                fmt_rational(&hi)
            )));
        }
        Ok(Self {
            lo,
            hi,
            precision_bits,
        }
        .rounded())
    }

    pub fn from_int(n: i64, precision_bits: u32) -> Self {
        Self::exact(int(n), precision_bits)
    }

    pub fn lo(&self) -> &ExactRational {
        &self.lo
    }

    pub fn hi(&self) -> &ExactRational {
        &self.hi
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn width(&self) -> ExactRational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> ExactRational {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn contains(&self, x: &ExactRational) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn contains_interval(&self, other: &RealInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.midpoint())
    }

    /// Same enclosure, re-tagged with a new working precision.
    pub fn with_precision(&self, precision_bits: u32) -> Self {
        Self {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            precision_bits,
        }
        .rounded()
    }

    /// Rounds outward to `bits` and widens by one further ulp on each side.
    /// The padding makes results computed at a finer precision nest inside.
    pub fn padded(&self, bits: u32) -> Self {
        let lo = round_down(&self.lo, bits);
        let hi = round_up(&self.hi, bits);
        let lo = &lo - ulp(&lo, bits);
        let hi = &hi + ulp(&hi, bits);
        Self {
            lo,
            hi,
            precision_bits: bits,
        }
    }

    fn rounded(mut self) -> Self {
        self.lo = round_down(&self.lo, self.precision_bits);
        self.hi = round_up(&self.hi, self.precision_bits);
        self
    }

    fn prec_with(&self, other: &RealInterval) -> u32 {
        self.precision_bits.max(other.precision_bits)
    }

    pub fn add(&self, o: &RealInterval) -> Self {
        Self {
            lo: &self.lo + &o.lo,
            hi: &self.hi + &o.hi,
            precision_bits: self.prec_with(o),
        }
        .rounded()
    }

    pub fn sub(&self, o: &RealInterval) -> Self {
        Self {
            lo: &self.lo - &o.hi,
            hi: &self.hi - &o.lo,
            precision_bits: self.prec_with(o),
        }
        .rounded()
    }

    pub fn neg(&self) -> Self {
        Self {
            lo: -self.hi.clone(),
            hi: -self.lo.clone(),
            precision_bits: self.precision_bits,
        }
    }

    pub fn mul(&self, o: &RealInterval) -> Self {
        let c = [
            &self.lo * &o.lo,
            &self.lo * &o.hi,
            &self.hi * &o.lo,
            &self.hi * &o.hi,
        ];
        let lo = c.iter().min().cloned().unwrap();
        let hi = c.iter().max().cloned().unwrap();
        Self {
            lo,
            hi,
            precision_bits: self.prec_with(o),
        }
        .rounded()
    }

    pub fn scale(&self, k: &ExactRational) -> Self {
        self.mul(&Self::exact(k.clone(), self.precision_bits))
    }

    pub fn div(&self, o: &RealInterval) -> Result<Self, Error> {
        if o.lo <= ExactRational::zero() && o.hi >= ExactRational::zero() {
            return Err(Error::Domain("division by an interval containing 0".into()));
        }
        let inv = Self {
            lo: o.hi.recip(),
            hi: o.lo.recip(),
            precision_bits: o.precision_bits,
        }
        .rounded();
        Ok(self.mul(&inv))
    }

    pub fn max(&self, o: &RealInterval) -> Self {
        Self {
            lo: (&self.lo).max(&o.lo).clone(),
            hi: (&self.hi).max(&o.hi).clone(),
            precision_bits: self.prec_with(o),
        }
    }

    pub fn min(&self, o: &RealInterval) -> Self {
        Self {
            lo: (&self.lo).min(&o.lo).clone(),
            hi: (&self.hi).min(&o.hi).clone(),
            precision_bits: self.prec_with(o),
        }
    }

    /// Integer power by repeated multiplication.
    pub fn powi(&self, k: u32) -> Self {
        let mut acc = Self::exact(int(1), self.precision_bits);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn sqrt(&self) -> Result<Self, Error> {
        if self.lo.is_negative() {
            return Err(Error::Domain("square root of a negative enclosure".into()));
        }
        let p = self.precision_bits;
        Ok(Self {
            lo: sqrt_bound(&self.lo, p, false),
            hi: sqrt_bound(&self.hi, p, true),
            precision_bits: p,
        }
        .rounded())
    }

    pub fn ln(&self) -> Result<Self, Error> {
        if !self.lo.is_positive() {
            return Err(Error::Domain("logarithm of a non-positive enclosure".into()));
        }
        let p = self.precision_bits;
        let lo = ln_rational(&self.lo, p);
        let hi = if self.is_exact() {
            lo.clone()
        } else {
            ln_rational(&self.hi, p)
        };
        Ok(Self {
            lo: lo.lo,
            hi: hi.hi,
            precision_bits: p,
        })
    }

    pub fn log2(&self) -> Result<Self, Error> {
        // Exact powers of two stay exact.
        if self.is_exact() && self.lo.is_positive() {
            let e = floor_log2(&self.lo);
            if self.lo == pow2(e) {
                return Ok(Self::from_int(e, self.precision_bits));
            }
        }
        self.ln()?.div(&ln2(self.precision_bits))
    }

    pub fn exp(&self) -> Self {
        let p = self.precision_bits;
        let lo = exp_rational(&self.lo, p);
        let hi = if self.is_exact() {
            lo.clone()
        } else {
            exp_rational(&self.hi, p)
        };
        Self {
            lo: lo.lo,
            hi: hi.hi,
            precision_bits: p,
        }
    }

    /// `2^self`.
    pub fn exp2(&self) -> Self {
        if self.is_exact() && self.lo.is_integer() {
            let e: i64 = self.lo.numer().try_into().unwrap_or(i64::MAX);
            if e.abs() < 1 << 20 {
                return Self::exact(pow2(e), self.precision_bits);
            }
        }
        self.mul(&ln2(self.precision_bits)).exp()
    }

    /// `self^e` for a positive base.
    /// `self^e` for a positive base.
    pub fn pow(&self, e: &RealInterval) -> Result<Self, Error> {
        if e.is_exact() && e.lo.is_integer() && self.lo.is_positive() {
            if let Some(k) = e.lo.to_integer().to_i32().filter(|k| k.unsigned_abs() <= 64) {
                let p = self.powi(k.unsigned_abs());
                return if k < 0 {
                    Self::from_int(1, self.precision_bits).div(&p)
                } else {
                    Ok(p)
                };
            }
        }
        Ok(self.ln()?.mul(e).exp())
    }

    pub fn abs(&self) -> Self {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            self.neg()
        } else {
            Self {
                lo: ExactRational::zero(),
                hi: (-self.lo.clone()).max(self.hi.clone()),
                precision_bits: self.precision_bits,
            }
        }
    }

    /// True when every point of `self` is `<=` every point of `o`.
    pub fn certainly_le(&self, o: &RealInterval) -> bool {
        self.hi <= o.lo
    }

    pub fn certainly_lt(&self, o: &RealInterval) -> bool {
        self.hi < o.lo
    }

    pub fn certainly_le_rat(&self, x: &ExactRational) -> bool {
        self.hi <= *x
    }

    pub fn certainly_ge_rat(&self, x: &ExactRational) -> bool {
        self.lo >= *x
    }

    /// Integer part enclosure: `(floor(lo), floor(hi))`.
    pub fn floor_bounds(&self) -> (BigInt, BigInt) {
        (floor(&self.lo), floor(&self.hi))
    }

    /// Smallest `l` with `2^l >= hi`; see [`guarded_ceil_log2`].
    pub fn guarded_ceil_log2(&self) -> Result<i64, Error> {
        guarded_ceil_log2(self)
    }
}

impl fmt::Display for RealInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.12e}, {:.12e}]", to_f64(&self.lo), to_f64(&self.hi))
    }
}

/// Outward-safe ceiling of `log2 v`: the smallest integer `l` with
/// `2^l >= v.hi`. It can exceed the true ceiling by one when the interval
/// straddles a power of two.
pub fn guarded_ceil_log2(v: &RealInterval) -> Result<i64, Error> {
    if !v.lo.is_positive() {
        return Err(Error::Domain(
            "ceil(log2) of a non-positive enclosure".into(),
        ));
    }
    Ok(ceil_log2(&v.hi))
}

const GUARD: u32 = 24;

fn sqrt_bound(x: &ExactRational, bits: u32, up: bool) -> ExactRational {
    if x.is_zero() {
        return x.clone();
    }
    // sqrt(n/d) = sqrt(n d) / d, evaluated on n d 4^k.
    let n = x.numer();
    let d = x.denom();
    let nd = n * d;
    let k = (bits as u64 + GUARD as u64).saturating_sub(nd.bits() / 2) + 2;
    let scaled: BigInt = &nd << (2 * k as usize);
    let r = scaled.sqrt();
    let exact = &r * &r == scaled;
    let r = if up && !exact { r + 1 } else { r };
    big(r) / (big(d.clone()) * pow2(k as i64))
}

thread_local! {
    static LN2_CACHE: RefCell<HashMap<u32, RealInterval>> = RefCell::new(HashMap::new());
    static LN_TABLE: RefCell<HashMap<(u32, u32), RealInterval>> = RefCell::new(HashMap::new());
}

/// `ln(1 + j/16)` at `w` bits.
fn ln_table(j: u32, w: u32) -> RealInterval {
    if let Some(v) = LN_TABLE.with(|c| c.borrow().get(&(j, w)).cloned()) {
        return v;
    }
    let z = RealInterval::exact(rat(j as i64, 32 + j as i64), w);
    let v = atanh_series(&z, w).scale(&int(2));
    LN_TABLE.with(|c| c.borrow_mut().insert((j, w), v.clone()));
    v
}

/// Interval enclosing `ln 2`.
pub fn ln2(bits: u32) -> RealInterval {
    if let Some(v) = LN2_CACHE.with(|c| c.borrow().get(&bits).cloned()) {
        return v;
    }
    let w = bits + GUARD;
    let z = RealInterval::exact(rat(1, 3), w);
    let v = atanh_series(&z, w).scale(&int(2)).with_precision(bits);
    LN2_CACHE.with(|c| c.borrow_mut().insert(bits, v.clone()));
    v
}

/// `sum_{j>=0} z^(2j+1)/(2j+1)` for `0 <= z <= 1/3`, tail included.
fn atanh_series(z: &RealInterval, w: u32) -> RealInterval {
    let z2 = z.mul(z);
    let mut power = z.clone();
    let mut sum = RealInterval::exact(int(0), w);
    let eps = pow2(-(w as i64) - 4);
    let mut j: u64 = 0;
    loop {
        let term = power.scale(&BigRational::new(BigInt::one(), BigInt::from(2 * j + 1)));
        sum = sum.add(&term);
        power = power.mul(&z2);
        j += 1;
        // Remaining terms are bounded by power/(2j+1) / (1 - z^2) <= 9/8 power/(2j+1).
        let tail = power.hi() * rat(9, 8) / int(2 * j as i64 + 1);
        if tail < eps {
            return RealInterval {
                lo: sum.lo,
                hi: &sum.hi + tail,
                precision_bits: w,
            }
            .rounded();
        }
    }
}

fn ln_rational(x: &ExactRational, bits: u32) -> RealInterval {
    let w = bits + GUARD;
    if x.is_one() {
        return RealInterval::exact(int(0), bits);
    }
    // x = 2^e c y with c = 1 + j/16 and y in [1, 17/16); ln x = e ln 2 + ln c + ln y.
    let e = floor_log2(x);
    let y = x * pow2(-e);
    let j = floor(&((&y - int(1)) * int(16)))
        .to_u32()
        .expect("mantissa in [1, 2)")
        .min(15);
    let y = y / (int(1) + rat(j as i64, 16));
    let z = (&y - int(1)) / (&y + int(1));
    let z = RealInterval::around(&z, w);
    let mut ln_y = atanh_series(&z, w).scale(&int(2));
    if j > 0 {
        ln_y = ln_y.add(&ln_table(j, w));
    }
    let res = if e == 0 {
        ln_y
    } else {
        ln2(w).scale(&int(e)).add(&ln_y)
    };
    res.with_precision(bits)
}

fn exp_rational(x: &ExactRational, bits: u32) -> RealInterval {
    if x.is_zero() {
        return RealInterval::exact(int(1), bits);
    }
    if x.is_negative() {
        let pos = exp_rational(&-x.clone(), bits + 2);
        return RealInterval::exact(int(1), bits + 2)
            .div(&pos)
            .expect("exp is positive")
            .with_precision(bits);
    }
    // exp(x) = exp(x / 2^s)^(2^s) with x / 2^s <= 2^-8.
    let s = (floor_log2(x) + 9).max(0) as u32;
    let w = bits + GUARD + s + 8;
    let y = RealInterval::around(&(x * pow2(-(s as i64))), w);
    let mut term = RealInterval::exact(int(1), w);
    let mut sum = RealInterval::exact(int(1), w);
    let eps = pow2(-(w as i64) - 4);
    let mut k = 1i64;
    loop {
        term = term.mul(&y).scale(&rat(1, k));
        sum = sum.add(&term);
        k += 1;
        // Tail after term k-1 is at most 2 * term * y.
        let tail = term.hi() * y.hi() * int(2);
        if tail < eps {
            sum = RealInterval {
                lo: sum.lo,
                hi: &sum.hi + tail,
                precision_bits: w,
            }
            .rounded();
            break;
        }
    }
    for _ in 0..s {
        sum = sum.mul(&sum);
    }
    sum.with_precision(bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(i: &RealInterval, v: f64, tol: f64) {
        assert!((i.to_f64() - v).abs() < tol, "{i} vs {v}");
    }

    #[test]
    fn ln2_encloses_reference() {
        let l = ln2(256);
        approx(&l, std::f64::consts::LN_2, 1e-15);
        assert!(l.width() < pow2(-250));
    }

    #[test]
    fn ln_exp_log2_match_f64() {
        let p = 128;
        approx(&RealInterval::from_int(30, p).log2().unwrap(), 30f64.log2(), 1e-13);
        approx(&RealInterval::from_int(1, p).exp(), std::f64::consts::E, 1e-15);
        approx(&RealInterval::exact(rat(-7, 3), p).exp(), (-7.0f64 / 3.0).exp(), 1e-15);
        approx(&RealInterval::exact(rat(1, 1000), p).ln().unwrap(), (0.001f64).ln(), 1e-13);
        approx(&RealInterval::from_int(2, p).sqrt().unwrap(), 2f64.sqrt(), 1e-15);
        approx(&RealInterval::exact(rat(3, 2), p).exp2(), 1.5f64.exp2(), 1e-15);
        approx(&RealInterval::from_int(100, p).exp(), 100f64.exp(), 1e-14 * 100f64.exp());
    }

    #[test]
    fn exact_powers_of_two() {
        assert_eq!(RealInterval::from_int(16, 64).log2().unwrap(), RealInterval::from_int(4, 64));
        assert_eq!(RealInterval::from_int(-3, 64).exp2(), RealInterval::exact(rat(1, 8), 64));
    }

    #[test]
    fn guarded_ceil_log2_examples() {
        let p = 64;
        assert_eq!(guarded_ceil_log2(&RealInterval::from_int(16, p)).unwrap(), 4);
        let straddle = RealInterval::new(rat(159, 10), rat(161, 10), p).unwrap();
        assert_eq!(guarded_ceil_log2(&straddle).unwrap(), 5);
        assert_eq!(guarded_ceil_log2(&RealInterval::from_int(1, p)).unwrap(), 0);
        assert!(guarded_ceil_log2(&RealInterval::new(int(-1), int(2), p).unwrap()).is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(RealInterval::from_int(0, 64).ln().is_err());
        assert!(RealInterval::from_int(-1, 64).sqrt().is_err());
        let z = RealInterval::new(int(-1), int(1), 64).unwrap();
        assert!(RealInterval::from_int(1, 64).div(&z).is_err());
    }
}
