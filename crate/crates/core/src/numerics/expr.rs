use std::ops;

use super::{int, ExactRational, RealInterval};
use crate::Error;

/// Constant expression over rationals. Evaluated by [`eval_constant`] into an
/// enclosing interval.
#[derive(Clone, Debug)]
pub enum Expr {
    Rat(ExactRational),
    /// A value already enclosed, e.g. an integer computed by a guarded ceiling.
    Enclosed(RealInterval),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Log2(Box<Expr>),
    Ln(Box<Expr>),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    /// `base^exponent`, base positive.
    Pow(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn int(n: i64) -> Self {
        Expr::Rat(int(n))
    }

    pub fn rat(x: ExactRational) -> Self {
        Expr::Rat(x)
    }

    pub fn log2(self) -> Self {
        Expr::Log2(Box::new(self))
    }

    pub fn ln(self) -> Self {
        Expr::Ln(Box::new(self))
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn sqrt(self) -> Self {
        Expr::Sqrt(Box::new(self))
    }

    pub fn max(self, o: Expr) -> Self {
        Expr::Max(Box::new(self), Box::new(o))
    }

    pub fn pow(self, e: Expr) -> Self {
        Expr::Pow(Box::new(self), Box::new(e))
    }

    /// `2^self`.
    pub fn exp2(self) -> Self {
        Expr::int(2).pow(self)
    }

    fn eval(&self, w: u32) -> Result<RealInterval, Error> {
        Ok(match self {
            Expr::Rat(x) => RealInterval::around(x, w),
            Expr::Enclosed(i) => i.with_precision(w),
            Expr::Add(a, b) => a.eval(w)?.add(&b.eval(w)?),
            Expr::Sub(a, b) => a.eval(w)?.sub(&b.eval(w)?),
            Expr::Mul(a, b) => a.eval(w)?.mul(&b.eval(w)?),
            Expr::Div(a, b) => a.eval(w)?.div(&b.eval(w)?)?,
            Expr::Neg(a) => a.eval(w)?.neg(),
            Expr::Log2(a) => a.eval(w)?.log2()?,
            Expr::Ln(a) => a.eval(w)?.ln()?,
            Expr::Exp(a) => a.eval(w)?.exp(),
            Expr::Sqrt(a) => a.eval(w)?.sqrt()?,
            Expr::Max(a, b) => a.eval(w)?.max(&b.eval(w)?),
            Expr::Pow(a, b) => {
                let base = a.eval(w)?;
                let e = b.eval(w)?;
                if matches!(**a, Expr::Rat(ref x) if *x == int(2)) {
                    e.exp2()
                } else {
                    base.pow(&e)?
                }
            }
        })
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $v:ident) => {
        impl ops::$tr for Expr {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                Expr::$v(Box::new(self), Box::new(o))
            }
        }
    };
}
binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl From<RealInterval> for Expr {
    fn from(i: RealInterval) -> Self {
        Expr::Enclosed(i)
    }
}

/// Evaluates `expr` with guard bits and returns an enclosure rounded outward
/// to `precision_bits`, padded by one ulp so that evaluations at higher
/// precision nest inside evaluations at lower precision.
pub fn eval_constant(expr: &Expr, precision_bits: u32) -> Result<RealInterval, Error> {
    let working = precision_bits + 32;
    Ok(expr.eval(working)?.padded(precision_bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{pow2, rat};
    use proptest::prelude::*;

    // Reference digits from an independent 50-digit evaluation (mpmath).
    const LOG2_30: (i64, i64) = (4_906_890_595_608_518, 1_000_000_000_000_000);
    const TWO_E: (i64, i64) = (5_436_563_656_918_090, 1_000_000_000_000_000);
    const LN_2: (i64, i64) = (693_147_180_559_945, 1_000_000_000_000_000);

    fn near(i: &RealInterval, (n, d): (i64, i64), tol: ExactRational) {
        let r = rat(n, d);
        assert!(
            i.lo() - &tol <= r && r <= i.hi() + &tol,
            "{i} does not contain {n}/{d}"
        );
    }

    #[test]
    fn log2_30() {
        let v = eval_constant(&Expr::int(30).log2(), 256).unwrap();
        near(&v, LOG2_30, rat(1, 1_000_000_000_000_000));
        assert!(v.width() <= rat(1, 1_000_000_000));
        assert!(v.width() <= pow2(8 - 256));
    }

    #[test]
    fn two_e() {
        let v = eval_constant(&(Expr::int(2) * Expr::int(1).exp()), 256).unwrap();
        near(&v, TWO_E, rat(1, 1_000_000_000_000_000));
        assert!(v.width() <= pow2(8 - 256));
    }

    #[test]
    fn ln_2() {
        let v = eval_constant(&Expr::int(2).ln(), 256).unwrap();
        near(&v, LN_2, rat(1, 1_000_000_000_000_000));
        assert!(v.width() <= pow2(8 - 256));
    }

    #[test]
    fn log_of_nonpositive_is_domain_error() {
        assert!(eval_constant(&Expr::int(0).log2(), 64).is_err());
        assert!(eval_constant(&(Expr::int(1) - Expr::int(3)).ln(), 64).is_err());
    }

    #[test]
    fn max_and_sqrt() {
        let v = eval_constant(&Expr::int(4).sqrt().max(Expr::rat(rat(3, 2))), 64).unwrap();
        assert!(v.contains(&int(2)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn doubling_precision_nests(n in 2i64..5000, k in 32u32..128) {
            let e = (Expr::int(n).log2() + Expr::int(4) * Expr::int(n + 30).log2())
                * Expr::int(1).exp();
            let coarse = eval_constant(&e, k).unwrap();
            let fine = eval_constant(&e, 2 * k).unwrap();
            prop_assert!(coarse.contains_interval(&fine));
        }
    }
}
