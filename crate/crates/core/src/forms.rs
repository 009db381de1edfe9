//! Linear forms `L(θ) = a·θ + b`, their `p`-norms, sequence generators and the
//! affine change of variables `θ = v + rϑ`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{canonical_json, DyadicCube};
use crate::numerics::{
    big, ceil_root, fmt_rational, int, parse_rational, pow2, pow_rational, ExactRational,
    RealInterval,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LinearForm {
    pub a: Vec<ExactRational>,
    pub b: ExactRational,
}

impl LinearForm {
    pub fn new(a: Vec<ExactRational>, b: ExactRational) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidArgument("a linear form needs d >= 1".into()));
        }
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn is_constant(&self) -> bool {
        self.a.iter().all(Zero::is_zero)
    }

    /// Exact value `a·θ + b`.
    pub fn evaluate(&self, theta: &[ExactRational]) -> Result<ExactRational> {
        self.check_dim(theta.len())?;
        Ok(self
            .a
            .iter()
            .zip(theta)
            .fold(self.b.clone(), |acc, (a, t)| acc + a * t))
    }

    /// Exact `[min, max]` of the form over the closed box `[lo, hi]`.
    pub fn range_over_box(
        &self,
        lo: &[ExactRational],
        hi: &[ExactRational],
    ) -> Result<(ExactRational, ExactRational)> {
        self.check_dim(lo.len())?;
        self.check_dim(hi.len())?;
        let mut min = self.b.clone();
        let mut max = self.b.clone();
        for ((a, l), h) in self.a.iter().zip(lo).zip(hi) {
            if a.is_negative() {
                min += a * h;
                max += a * l;
            } else {
                min += a * l;
                max += a * h;
            }
        }
        Ok((min, max))
    }

    pub fn norm(&self, p: &NormSelector, precision_bits: u32) -> Norm {
        norm(self, p, precision_bits)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .a
            .iter()
            .enumerate()
            .map(|(i, a)| format!("({})θ{}", a, i + 1))
            .collect();
        write!(f, "{} + {}", terms.join(" + "), self.b)
    }
}

/// Exact `[min, max]` of `form` over the closed cube.
pub fn affine_range(form: &LinearForm, cube: &DyadicCube) -> Result<(ExactRational, ExactRational)> {
    let (lo, hi) = cube.bounds();
    form.range_over_box(&lo, &hi)
}

/// Which `p`-norm measures the coefficient vectors.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NormSelector {
    One,
    Two,
    Inf,
    /// Rational `p >= 1`.
    General(ExactRational),
}

impl NormSelector {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(Self::One),
            "2" => Ok(Self::Two),
            "inf" | "Inf" | "infinity" | "∞" => Ok(Self::Inf),
            other => {
                let p = parse_rational(other)?;
                Self::general(p)
            }
        }
    }

    pub fn general(p: ExactRational) -> Result<Self> {
        if p < int(1) {
            return Err(Error::InvalidArgument(format!("p = {p} is below 1")));
        }
        Ok(if p == int(1) {
            Self::One
        } else if p == int(2) {
            Self::Two
        } else {
            Self::General(p)
        })
    }

    pub fn label(&self) -> String {
        match self {
            Self::One => "1".into(),
            Self::Two => "2".into(),
            Self::Inf => "inf".into(),
            Self::General(p) => fmt_rational(p),
        }
    }

    /// `1/p`, with `1/∞ = 0`.
    pub fn inv_p(&self) -> ExactRational {
        match self {
            Self::One => int(1),
            Self::Two => ExactRational::new(1.into(), 2.into()),
            Self::Inf => int(0),
            Self::General(p) => p.recip(),
        }
    }

    /// `1/q` for the Hölder conjugate, `1/p + 1/q = 1`.
    pub fn inv_q(&self) -> ExactRational {
        int(1) - self.inv_p()
    }

    /// `d^{1/p}`; exactly 1 for `p = ∞`.
    pub fn d_root_p(&self, d: usize, precision_bits: u32) -> RealInterval {
        d_power(d, &self.inv_p(), precision_bits)
    }

    /// `d^{1/q}`.
    pub fn d_root_q(&self, d: usize, precision_bits: u32) -> RealInterval {
        d_power(d, &self.inv_q(), precision_bits)
    }
}

fn d_power(d: usize, e: &ExactRational, prec: u32) -> RealInterval {
    if e.is_zero() || d == 1 {
        return RealInterval::exact(int(1), prec);
    }
    if e.is_one() {
        return RealInterval::exact(int(d as i64), prec);
    }
    // Exact when d is a perfect power for the denominator of e.
    let den: u32 = e.denom().try_into().unwrap_or(0);
    if den > 0 && den <= 64 {
        let root = BigInt::from(d).nth_root(den);
        if num_traits::pow(root.clone(), den as usize) == BigInt::from(d) {
            let num: u32 = e.numer().try_into().unwrap_or(0);
            if num > 0 {
                return RealInterval::exact(big(num_traits::pow(root, num as usize)), prec);
            }
        }
    }
    RealInterval::from_int(d as i64, prec)
        .pow(&RealInterval::exact(e.clone(), prec))
        .expect("d >= 1")
}

/// A norm (or a ratio of norms) carried with whatever exact information is
/// available: the value itself for `p ∈ {1, ∞}`, its square for `p = 2`,
/// and always an outward enclosure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Norm {
    pub exact: Option<ExactRational>,
    pub square: Option<ExactRational>,
    pub enclosure: RealInterval,
}

impl Norm {
    pub fn from_exact(x: ExactRational, prec: u32) -> Self {
        Self {
            square: Some(&x * &x),
            enclosure: RealInterval::exact(x.clone(), prec),
            exact: Some(x),
        }
    }

    pub fn from_square(s: ExactRational, prec: u32) -> Self {
        let enclosure = RealInterval::exact(s.clone(), prec).sqrt().expect("square >= 0");
        let exact = exact_sqrt(&s);
        Self {
            exact,
            enclosure,
            square: Some(s),
        }
    }

    pub fn is_positive(&self) -> bool {
        self.enclosure.lo().is_positive()
            || self.exact.as_ref().is_some_and(|x| x.is_positive())
            || self.square.as_ref().is_some_and(|x| x.is_positive())
    }

    /// `self / other`.
    pub fn ratio(&self, other: &Norm) -> Norm {
        let exact = match (&self.exact, &other.exact) {
            (Some(a), Some(b)) if !b.is_zero() => Some(a / b),
            _ => None,
        };
        let square = match (&self.square, &other.square) {
            (Some(a), Some(b)) if !b.is_zero() => Some(a / b),
            _ => None,
        };
        let enclosure = match &exact {
            Some(x) => RealInterval::exact(x.clone(), self.enclosure.precision_bits()),
            None => match &square {
                Some(s) => RealInterval::exact(s.clone(), self.enclosure.precision_bits())
                    .sqrt()
                    .expect("square >= 0"),
                None => self.enclosure.div(&other.enclosure).expect("norms positive"),
            },
        };
        Norm {
            exact,
            square,
            enclosure,
        }
    }

    pub fn scale(&self, r: &ExactRational) -> Norm {
        let r = r.abs();
        Norm {
            exact: self.exact.as_ref().map(|x| x * &r),
            square: self.square.as_ref().map(|x| x * &r * &r),
            enclosure: self.enclosure.scale(&r),
        }
    }

    /// Certainly `self >= k` for every value enclosed by `k`.
    pub fn certainly_ge(&self, k: &RealInterval) -> bool {
        if let Some(x) = &self.exact {
            return *x >= *k.hi();
        }
        if let Some(s) = &self.square {
            if !k.hi().is_positive() {
                return true;
            }
            return *s >= k.hi() * k.hi();
        }
        self.enclosure.lo() >= k.hi()
    }

    /// Certainly `self <= k`.
    pub fn certainly_le(&self, k: &RealInterval) -> bool {
        if let Some(x) = &self.exact {
            return *x <= *k.lo();
        }
        if let Some(s) = &self.square {
            return !k.lo().is_negative() && *s <= k.lo() * k.lo();
        }
        self.enclosure.hi() <= k.lo()
    }

    /// `Some(ordering)` when `self` and `other` can be compared exactly or
    /// by disjoint enclosures.
    pub fn compare(&self, other: &Norm) -> Option<std::cmp::Ordering> {
        if let (Some(a), Some(b)) = (&self.exact, &other.exact) {
            return Some(a.cmp(b));
        }
        if let (Some(a), Some(b)) = (&self.square, &other.square) {
            return Some(a.cmp(b));
        }
        if self.enclosure.certainly_lt(&other.enclosure) {
            Some(std::cmp::Ordering::Less)
        } else if other.enclosure.certainly_lt(&self.enclosure) {
            Some(std::cmp::Ordering::Greater)
        } else {
            None
        }
    }

    pub fn describe(&self) -> String {
        if let Some(x) = &self.exact {
            fmt_rational(x)
        } else if let Some(s) = &self.square {
            format!("sqrt({})", fmt_rational(s))
        } else {
            self.enclosure.to_string()
        }
    }
}

fn exact_sqrt(s: &ExactRational) -> Option<ExactRational> {
    if s.is_negative() {
        return None;
    }
    let n = s.numer().sqrt();
    let d = s.denom().sqrt();
    if &n * &n == *s.numer() && &d * &d == *s.denom() {
        Some(ExactRational::new(n, d))
    } else {
        None
    }
}

/// `|a|_p`: exact for `p ∈ {1, ∞}`, exact square for `p = 2`, enclosure
/// otherwise.
pub fn norm(form: &LinearForm, p: &NormSelector, prec: u32) -> Norm {
    match p {
        NormSelector::One => Norm::from_exact(form.a.iter().map(|x| x.abs()).sum(), prec),
        NormSelector::Inf => Norm::from_exact(
            form.a.iter().map(|x| x.abs()).max().unwrap_or_else(|| int(0)),
            prec,
        ),
        NormSelector::Two => Norm::from_square(form.a.iter().map(|x| x * x).sum(), prec),
        NormSelector::General(pp) => {
            let pi = RealInterval::exact(pp.clone(), prec);
            let inv = RealInterval::exact(pp.recip(), prec);
            let mut acc = RealInterval::exact(int(0), prec);
            for x in form.a.iter().filter(|x| !x.is_zero()) {
                acc = acc.add(&RealInterval::exact(x.abs(), prec).pow(&pi).expect("x > 0"));
            }
            if acc.is_exact() && acc.lo().is_zero() {
                return Norm::from_exact(int(0), prec);
            }
            Norm {
                exact: None,
                square: None,
                enclosure: acc.pow(&inv).expect("sum > 0"),
            }
        }
    }
}

/// Built-in sequence families; each multiplies a fixed direction vector `v`
/// by a scalar `s_n` with a known growth law.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeneratorFamily {
    /// `s_n = base^{⌈n/period⌉}`, so `R_{n+period}/R_n = base`.
    Lacunary { base: ExactRational, period: usize },
    /// `s_r = k^r` with `k > 2`.
    Cassels { k: ExactRational },
    /// `s_n = F_n` (Fibonacci, `F_1 = F_2 = 1`).
    Fibonacci,
    /// `s_n = n`.
    Linear,
    /// `s_1 = 1`, `s_{n+1} = s_n + ⌈s_n/⌈n^β⌉⌉` with `β ∈ (0, 1)`, giving
    /// `(R_{n+1}/R_n − 1) n^β >= 1/2`.
    Sublacunary { beta: ExactRational },
    /// `s_n = 2^{⌈g n^β⌉}`, so `ln R_n = (g ln 2) n^β + O(1)`.
    LogPower { g: ExactRational, beta: ExactRational },
}

impl GeneratorFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Lacunary { .. } => "lacunary",
            Self::Cassels { .. } => "cassels",
            Self::Fibonacci => "fibonacci",
            Self::Linear => "linear",
            Self::Sublacunary { .. } => "sublacunary",
            Self::LogPower { .. } => "logpower",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        match self {
            Self::Lacunary { base, period } => {
                if *base <= int(1) || *period == 0 {
                    return bad("lacunary needs base > 1 and period >= 1");
                }
            }
            Self::Cassels { k } => {
                if *k <= int(2) {
                    return bad("cassels needs k > 2");
                }
            }
            Self::Sublacunary { beta } => {
                if *beta <= int(0) || *beta >= int(1) {
                    return bad("sublacunary needs beta in (0, 1)");
                }
            }
            Self::LogPower { g, beta } => {
                if *g <= int(0) || *beta <= int(0) || *beta > int(1) {
                    return bad("logpower needs g > 0 and beta in (0, 1]");
                }
            }
            Self::Fibonacci | Self::Linear => {}
        }
        Ok(())
    }

    /// Closed-form scalar `s_n` where one exists.
    pub fn scale_at(&self, n: u64) -> Option<ExactRational> {
        match self {
            Self::Lacunary { base, period } => {
                Some(pow_rational(base, n.div_ceil(*period as u64)))
            }
            Self::Cassels { k } => Some(pow_rational(k, n)),
            Self::Linear => Some(big(n)),
            Self::LogPower { g, beta } => {
                let e = ceil_g_pow(g, beta, n);
                let e: usize = e.try_into().ok()?;
                Some(big(BigInt::one() << e))
            }
            Self::Fibonacci | Self::Sublacunary { .. } => None,
        }
    }

    fn scales(&self, count: usize) -> Vec<ExactRational> {
        match self {
            Self::Fibonacci => {
                let mut out = Vec::with_capacity(count);
                let (mut a, mut b) = (BigInt::one(), BigInt::one());
                for _ in 0..count {
                    out.push(big(a.clone()));
                    let c = &a + &b;
                    a = std::mem::replace(&mut b, c);
                }
                out
            }
            Self::Sublacunary { beta } => {
                let mut out = Vec::with_capacity(count);
                let mut s = BigInt::one();
                for n in 1..=count as u64 {
                    out.push(big(s.clone()));
                    let q = ceil_pow(n, beta);
                    s = &s + num_integer::Integer::div_ceil(&s, &q);
                }
                out
            }
            _ => (1..=count as u64)
                .map(|n| self.scale_at(n).expect("closed form"))
                .collect(),
        }
    }
}

/// `⌈n^β⌉` for rational `β >= 0`.
fn ceil_pow(n: u64, beta: &ExactRational) -> BigInt {
    let s: u32 = beta.numer().try_into().expect("small exponent");
    let t: u32 = beta.denom().try_into().expect("small exponent");
    ceil_root(&num_traits::pow(BigInt::from(n), s as usize), t)
}

/// `⌈g n^β⌉` for rational `g > 0`, `β ∈ (0, 1]`.
fn ceil_g_pow(g: &ExactRational, beta: &ExactRational, n: u64) -> BigInt {
    // Smallest m with m >= g n^{s/t}, i.e. (m q)^t >= p^t n^s for g = p/q.
    let s: u32 = beta.numer().try_into().expect("small exponent");
    let t: u32 = beta.denom().try_into().expect("small exponent");
    let rhs = num_traits::pow(g.numer().clone(), t as usize)
        * num_traits::pow(BigInt::from(n), s as usize);
    let q_t = num_traits::pow(g.denom().clone(), t as usize);
    // (m q)^t >= rhs  <=>  m^t >= rhs / q^t.
    let bound = num_integer::Integer::div_ceil(&rhs, &q_t);
    let mut m = ceil_root(&bound, t);
    while m > BigInt::zero() && num_traits::pow(&m - 1, t as usize) * &q_t >= rhs {
        m -= 1;
    }
    m
}

/// Ordered forms sharing a dimension, with cached norms `R_n`.
#[derive(Clone, Debug)]
pub struct FormSequence {
    d: usize,
    p: NormSelector,
    forms: Vec<LinearForm>,
    norms: Vec<Norm>,
    precision_bits: u32,
    /// Family and direction that generated the sequence, for closed-form
    /// norms beyond the materialised window.
    origin: Option<(GeneratorFamily, Vec<ExactRational>)>,
}

impl FormSequence {
    pub fn new(forms: Vec<LinearForm>, p: NormSelector, precision_bits: u32) -> Result<Self> {
        let d = forms.first().map(LinearForm::dim).unwrap_or(1);
        let mut norms = Vec::with_capacity(forms.len());
        for (i, f) in forms.iter().enumerate() {
            if f.dim() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: f.dim(),
                });
            }
            if f.is_constant() {
                return Err(Error::InvalidArgument(format!(
                    "form {} has a zero coefficient vector",
                    i + 1
                )));
            }
            let r = norm(f, &p, precision_bits);
            if let Some(prev) = norms.last() {
                if !norm_le(prev, &r, &forms[i - 1], f) {
                    return Err(Error::InvalidArgument(format!(
                        "norms must be non-decreasing: R_{} > R_{}",
                        i,
                        i + 1
                    )));
                }
            }
            norms.push(r);
        }
        Ok(Self {
            d,
            p,
            forms,
            norms,
            precision_bits,
            origin: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> &NormSelector {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn forms(&self) -> &[LinearForm] {
        &self.forms
    }

    /// Form `L_n`, 1-based.
    pub fn form(&self, n: usize) -> &LinearForm {
        &self.forms[n - 1]
    }

    /// `R_n`, 1-based.
    pub fn norm(&self, n: usize) -> &Norm {
        &self.norms[n - 1]
    }

    /// `R_n` for any `n`, using the generating family's closed form past the
    /// materialised window.
    pub fn norm_at(&self, n: u64) -> Option<Norm> {
        if n >= 1 && (n as usize) <= self.len() {
            return Some(self.norms[n as usize - 1].clone());
        }
        let (family, v) = self.origin.as_ref()?;
        let s = family.scale_at(n)?;
        let base = norm(&LinearForm::new(v.clone(), int(0)).ok()?, &self.p, self.precision_bits);
        Some(base.scale(&s))
    }

    pub fn family(&self) -> Option<&GeneratorFamily> {
        self.origin.as_ref().map(|(f, _)| f)
    }

    /// `L̃_n(ϑ) = L_n(rϑ + v)`: coefficients `r a_n`, offsets `a_n·v + b_n`.
    pub fn rescale(&self, v: &[ExactRational], r: &ExactRational) -> Result<Self> {
        if !r.is_positive() {
            return Err(Error::InvalidArgument("rescale factor must be positive".into()));
        }
        if v.len() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: v.len(),
            });
        }
        let forms: Vec<LinearForm> = self
            .forms
            .iter()
            .map(|f| LinearForm {
                a: f.a.iter().map(|x| x * r).collect(),
                b: f.evaluate(v).expect("dimension checked"),
            })
            .collect();
        let norms = self.norms.iter().map(|n| n.scale(r)).collect();
        Ok(Self {
            d: self.d,
            p: self.p.clone(),
            forms,
            norms,
            precision_bits: self.precision_bits,
            origin: None,
        })
    }

    /// Forms `L_{start}, L_{start+1}, ...` renumbered from 1.
    pub fn tail(&self, start: usize) -> Self {
        Self {
            d: self.d,
            p: self.p.clone(),
            forms: self.forms[start - 1..].to_vec(),
            norms: self.norms[start - 1..].to_vec(),
            precision_bits: self.precision_bits,
            origin: None,
        }
    }

    /// First `count` forms.
    pub fn prefix(&self, count: usize) -> Self {
        let count = count.min(self.len());
        Self {
            d: self.d,
            p: self.p.clone(),
            forms: self.forms[..count].to_vec(),
            norms: self.norms[..count].to_vec(),
            precision_bits: self.precision_bits,
            origin: self.origin.clone(),
        }
    }
}

fn norm_le(a: &Norm, b: &Norm, fa: &LinearForm, fb: &LinearForm) -> bool {
    match a.compare(b) {
        Some(o) => o != std::cmp::Ordering::Greater,
        None => {
            // Equal multisets of |a_i| have equal norms for every p.
            let mut x: Vec<_> = fa.a.iter().map(|v| v.abs()).collect();
            let mut y: Vec<_> = fb.a.iter().map(|v| v.abs()).collect();
            x.sort();
            y.sort();
            x == y
        }
    }
}

/// Growth statistics emitted next to a generated sequence.
#[derive(Clone, Debug)]
pub struct GrowthStats {
    /// `min_n R_{n+1}/R_n` over the window.
    pub min_ratio: Option<Norm>,
    /// Family-specific statistic, e.g. `min_n (R_{n+1}/R_n − 1) n^β`.
    pub statistic: Option<(String, RealInterval)>,
}

/// Generates `count` forms `s_n v·θ` (offset 0) of the given family.
pub fn generate(
    family: &GeneratorFamily,
    d: usize,
    p: NormSelector,
    count: usize,
    direction: Option<Vec<ExactRational>>,
    precision_bits: u32,
) -> Result<(FormSequence, GrowthStats)> {
    family.validate()?;
    if d == 0 {
        return Err(Error::InvalidArgument("d must be >= 1".into()));
    }
    let v = match direction {
        Some(v) if v.len() != d => {
            return Err(Error::Dimension {
                expected: d,
                got: v.len(),
            })
        }
        Some(v) => v,
        None => match family {
            GeneratorFamily::Cassels { .. } => (1..=d as i64).map(int).collect(),
            _ => vec![int(1); d],
        },
    };
    let forms = family
        .scales(count)
        .into_iter()
        .map(|s| LinearForm::new(v.iter().map(|x| x * &s).collect(), int(0)))
        .collect::<Result<Vec<_>>>()?;
    let mut seq = FormSequence::new(forms, p, precision_bits)?;
    seq.origin = Some((family.clone(), v));
    let stats = growth_stats(&seq, family);
    Ok((seq, stats))
}

fn growth_stats(seq: &FormSequence, family: &GeneratorFamily) -> GrowthStats {
    let prec = seq.precision_bits;
    let ratios: Vec<Norm> = (1..seq.len())
        .map(|n| seq.norm(n + 1).ratio(seq.norm(n)))
        .collect();
    let min_ratio = ratios
        .iter()
        .cloned()
        .reduce(|a, b| if b.compare(&a) == Some(std::cmp::Ordering::Less) { b } else { a });
    let beta = match family {
        GeneratorFamily::Linear => Some(int(1)),
        GeneratorFamily::Sublacunary { beta } => Some(beta.clone()),
        _ => None,
    };
    let statistic = beta.map(|beta| {
        let b = RealInterval::exact(beta.clone(), prec);
        let one = RealInterval::from_int(1, prec);
        let stat = ratios
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let n = RealInterval::from_int(i as i64 + 1, prec);
                r.enclosure.sub(&one).mul(&n.pow(&b).expect("n > 0"))
            })
            .reduce(|a, b| a.min(&b))
            .unwrap_or_else(|| RealInterval::from_int(0, prec));
        (format!("min (R_(n+1)/R_n - 1) n^{}", fmt_rational(&beta)), stat)
    });
    GrowthStats {
        min_ratio,
        statistic,
    }
}

/// Window report for the hypothesis `R_{n+N}/R_n >= 2`.
#[derive(Clone, Debug)]
pub struct SequenceReport {
    pub window: usize,
    pub min_ratio: Option<Norm>,
    pub monotone: bool,
    pub first_violation: Option<usize>,
    pub pass: bool,
}

pub fn validate_sequence(seq: &FormSequence, window: usize) -> Result<SequenceReport> {
    if window == 0 {
        return Err(Error::InvalidArgument("window N must be >= 1".into()));
    }
    let two = RealInterval::from_int(2, seq.precision_bits);
    let mut min_ratio: Option<Norm> = None;
    let mut first_violation = None;
    for n in 1..=seq.len().saturating_sub(window) {
        let r = seq.norm(n + window).ratio(seq.norm(n));
        if first_violation.is_none() && !r.certainly_ge(&two) {
            first_violation = Some(n);
        }
        let smaller = match &min_ratio {
            None => true,
            Some(m) => r.compare(m) == Some(std::cmp::Ordering::Less),
        };
        if smaller {
            min_ratio = Some(r);
        }
    }
    let monotone = (1..seq.len()).all(|n| {
        seq.norm(n).compare(seq.norm(n + 1)) != Some(std::cmp::Ordering::Greater)
    });
    Ok(SequenceReport {
        window,
        min_ratio,
        monotone,
        first_violation,
        pass: monotone && first_violation.is_none(),
    })
}

/// JSON description of a sequence: a named family or explicit forms.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default = "default_p")]
    pub p: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forms: Option<Vec<FormSpec>>,
}

fn default_p() -> String {
    "inf".into()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub a: Vec<String>,
    #[serde(default = "zero_str")]
    pub b: String,
}

fn zero_str() -> String {
    "0".into()
}

impl SequenceSpec {
    pub fn family(name: &str, d: usize, p: &str, params: Value, count: usize) -> Self {
        Self {
            family: Some(name.into()),
            d: Some(d),
            p: p.into(),
            params: Some(params),
            count: Some(count),
            forms: None,
        }
    }

    pub fn explicit(forms: &[LinearForm], p: &NormSelector) -> Self {
        Self {
            family: None,
            d: None,
            p: p.label(),
            params: None,
            count: None,
            forms: Some(
                forms
                    .iter()
                    .map(|f| FormSpec {
                        a: f.a.iter().map(fmt_rational).collect(),
                        b: fmt_rational(&f.b),
                    })
                    .collect(),
            ),
        }
    }

    /// SHA-256 of the canonical JSON rendering.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let v = serde_json::to_value(self).expect("serialisable");
        hex::encode(Sha256::digest(canonical_json(&v).as_bytes()))
    }

    pub fn build(&self, precision_bits: u32) -> Result<(FormSequence, Option<GrowthStats>)> {
        let p = NormSelector::parse(&self.p)?;
        match (&self.family, &self.forms) {
            (Some(name), None) => {
                let d = self
                    .d
                    .ok_or_else(|| Error::Parse("family spec needs \"d\"".into()))?;
                let count = self
                    .count
                    .ok_or_else(|| Error::Parse("family spec needs \"count\"".into()))?;
                let params = self.params.clone().unwrap_or(Value::Object(Default::default()));
                let (family, direction) = parse_family(name, &params)?;
                let (seq, stats) = generate(&family, d, p, count, direction, precision_bits)?;
                Ok((seq, Some(stats)))
            }
            (None, Some(forms)) => {
                let forms = forms
                    .iter()
                    .map(|f| {
                        let a = f
                            .a
                            .iter()
                            .map(|s| parse_rational(s))
                            .collect::<Result<Vec<_>>>()?;
                        LinearForm::new(a, parse_rational(&f.b)?)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((FormSequence::new(forms, p, precision_bits)?, None))
            }
            _ => Err(Error::Parse(
                "sequence spec needs exactly one of \"family\" or \"forms\"".into(),
            )),
        }
    }
}

fn param_rational(params: &Value, key: &str) -> Result<Option<ExactRational>> {
    match params.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => parse_rational(s).map(Some),
        Some(Value::Number(n)) => parse_rational(&n.to_string()).map(Some),
        Some(other) => Err(Error::Parse(format!("param {key:?}: unexpected {other}"))),
    }
}

fn parse_family(
    name: &str,
    params: &Value,
) -> Result<(GeneratorFamily, Option<Vec<ExactRational>>)> {
    let obj = params
        .as_object()
        .ok_or_else(|| Error::Parse("\"params\" must be an object".into()))?;
    let allowed: &[&str] = match name {
        "lacunary" => &["base", "period", "direction"],
        "cassels" => &["k", "direction"],
        "fibonacci" | "linear" => &["direction"],
        "sublacunary" => &["beta", "direction"],
        "logpower" => &["g", "beta", "direction"],
        other => return Err(Error::Parse(format!("unknown family {other:?}"))),
    };
    if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::Parse(format!("unknown param {k:?} for family {name}")));
    }
    let need = |key: &str| {
        param_rational(params, key)?
            .ok_or_else(|| Error::Parse(format!("family {name} needs param {key:?}")))
    };
    let family = match name {
        "lacunary" => GeneratorFamily::Lacunary {
            base: param_rational(params, "base")?.unwrap_or_else(|| int(2)),
            period: match params.get("period") {
                None => 1,
                Some(v) => v
                    .as_u64()
                    .ok_or_else(|| Error::Parse("period must be a positive integer".into()))?
                    as usize,
            },
        },
        "cassels" => GeneratorFamily::Cassels { k: need("k")? },
        "fibonacci" => GeneratorFamily::Fibonacci,
        "linear" => GeneratorFamily::Linear,
        "sublacunary" => GeneratorFamily::Sublacunary { beta: need("beta")? },
        "logpower" => GeneratorFamily::LogPower {
            g: need("g")?,
            beta: need("beta")?,
        },
        _ => unreachable!(),
    };
    let direction = match params.get("direction") {
        None => None,
        Some(Value::Array(xs)) => Some(
            xs.iter()
                .map(|x| match x {
                    Value::String(s) => parse_rational(s),
                    Value::Number(n) => parse_rational(&n.to_string()),
                    _ => Err(Error::Parse("direction entries must be rationals".into())),
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        Some(_) => return Err(Error::Parse("direction must be an array".into())),
    };
    Ok((family, direction))
}

/// `2^e` as a rational, re-exported for callers building dyadic boxes.
pub fn dyadic(c: impl Into<BigInt>, level: u32) -> ExactRational {
    big(c) * pow2(-(level as i64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rat;
    use proptest::prelude::*;

    const P: u32 = 128;

    fn form(a: &[i64], b: ExactRational) -> LinearForm {
        LinearForm::new(a.iter().map(|&x| int(x)).collect(), b).unwrap()
    }

    #[test]
    fn norm_examples() {
        let f = form(&[3, 4], int(0));
        let n2 = f.norm(&NormSelector::Two, P);
        assert_eq!(n2.square, Some(int(25)));
        assert_eq!(n2.exact, Some(int(5)));
        let g = form(&[3, -4], int(0));
        assert_eq!(g.norm(&NormSelector::One, P).exact, Some(int(7)));
        assert_eq!(g.norm(&NormSelector::Inf, P).exact, Some(int(4)));
        let n3 = g.norm(&NormSelector::general(int(3)).unwrap(), P);
        assert!(n3.enclosure.contains(&rat(4497941, 1_000_000)) || (n3.enclosure.to_f64() - 91f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(form(&[2], int(0)).evaluate(&[rat(1, 3)]).unwrap(), rat(2, 3));
        assert_eq!(
            form(&[1, 1], rat(1, 2)).evaluate(&[rat(1, 4), rat(1, 4)]).unwrap(),
            int(1)
        );
        assert_eq!(
            form(&[0, 0], rat(7, 5)).evaluate(&[rat(9, 4), int(-3)]).unwrap(),
            rat(7, 5)
        );
        assert!(matches!(
            form(&[1, 1], int(0)).evaluate(&[int(1)]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn affine_range_examples() {
        let c = DyadicCube::new(2, vec![0]).unwrap();
        assert_eq!(affine_range(&form(&[4], int(0)), &c).unwrap(), (int(0), int(1)));
        let c = DyadicCube::new(1, vec![0, 0]).unwrap();
        assert_eq!(
            affine_range(&form(&[1, -1], int(0)), &c).unwrap(),
            (rat(-1, 2), rat(1, 2))
        );
        let c = DyadicCube::new(2, vec![1]).unwrap();
        assert_eq!(
            affine_range(&form(&[3], rat(1, 2)), &c).unwrap(),
            (rat(5, 4), int(2))
        );
    }

    #[test]
    fn rescale_examples() {
        let seq = FormSequence::new(vec![form(&[2], int(0))], NormSelector::Inf, P).unwrap();
        let r = seq.rescale(&[int(1)], &rat(1, 2)).unwrap();
        assert_eq!(r.form(1), &form(&[1], int(2)));
        let id = seq.rescale(&[int(0)], &int(1)).unwrap();
        assert_eq!(id.form(1), seq.form(1));
        let seq = FormSequence::new(vec![form(&[3, -1], int(0))], NormSelector::Two, P).unwrap();
        let r = seq.rescale(&[rat(1, 2), int(0)], &int(2)).unwrap();
        assert_eq!(r.form(1), &form(&[6, -2], rat(3, 2)));
        assert!(seq.rescale(&[int(0), int(0)], &int(0)).is_err());
    }

    #[test]
    fn constructor_rejects_zero_vectors_and_decreasing_norms() {
        let zero = FormSequence::new(vec![form(&[0, 0], int(1))], NormSelector::Inf, P);
        assert!(zero.is_err());
        let dec = FormSequence::new(
            vec![form(&[4], int(0)), form(&[2], int(0))],
            NormSelector::Inf,
            P,
        );
        assert!(dec.is_err());
    }

    #[test]
    fn generator_examples() {
        let (seq, stats) = generate(
            &GeneratorFamily::Lacunary { base: int(2), period: 1 },
            1,
            NormSelector::Inf,
            10,
            None,
            P,
        )
        .unwrap();
        for n in 1..=10 {
            assert_eq!(seq.form(n).a[0], pow2(n as i64));
        }
        assert_eq!(stats.min_ratio.unwrap().exact, Some(int(2)));

        let (seq, stats) = generate(
            &GeneratorFamily::Cassels { k: int(3) },
            2,
            NormSelector::Two,
            5,
            None,
            P,
        )
        .unwrap();
        assert_eq!(seq.form(2).a, vec![int(9), int(18)]);
        assert_eq!(stats.min_ratio.unwrap().square, Some(int(9)));

        let (_, stats) =
            generate(&GeneratorFamily::Linear, 1, NormSelector::Inf, 100, None, P).unwrap();
        let (_, stat) = stats.statistic.unwrap();
        assert!(stat.contains(&int(1)));
        assert!(stat.width() < rat(1, 1_000_000));
    }

    #[test]
    fn invalid_family_parameters() {
        let g = |f: GeneratorFamily| generate(&f, 1, NormSelector::Inf, 3, None, P).is_err();
        assert!(g(GeneratorFamily::Cassels { k: int(2) }));
        assert!(g(GeneratorFamily::Sublacunary { beta: int(1) }));
        assert!(g(GeneratorFamily::LogPower { g: int(1), beta: int(0) }));
    }

    #[test]
    fn validate_sequence_examples() {
        let (seq, _) = generate(
            &GeneratorFamily::Lacunary { base: int(2), period: 1 },
            1,
            NormSelector::Inf,
            12,
            None,
            P,
        )
        .unwrap();
        let r = validate_sequence(&seq, 1).unwrap();
        assert!(r.pass);
        assert_eq!(r.min_ratio.unwrap().exact, Some(int(2)));

        let (seq, _) = generate(&GeneratorFamily::Linear, 1, NormSelector::Inf, 20, None, P).unwrap();
        let r = validate_sequence(&seq, 1).unwrap();
        assert!(!r.pass);
        assert_eq!(r.first_violation, Some(2));

        // Fibonacci with N = 2: F_{n+2}/F_n, checked against a direct
        // computation of the ratios.
        let (seq, _) = generate(&GeneratorFamily::Fibonacci, 1, NormSelector::Inf, 40, None, P).unwrap();
        let r = validate_sequence(&seq, 2).unwrap();
        let mut fib = vec![1u64, 1];
        while fib.len() < 40 {
            fib.push(fib[fib.len() - 1] + fib[fib.len() - 2]);
        }
        let oracle = (0..38).map(|i| rat(fib[i + 2] as i64, fib[i] as i64)).min().unwrap();
        assert_eq!(oracle, int(2));
        assert_eq!(r.min_ratio.unwrap().exact, Some(oracle));
        assert!(r.pass);
        assert!(validate_sequence(&seq, 0).is_err());
    }

    #[test]
    fn spec_round_trip_and_digest() {
        let spec: SequenceSpec = serde_json::from_str(
            r#"{"family":"lacunary","d":1,"p":"inf","params":{"base":"2"},"count":8}"#,
        )
        .unwrap();
        let (seq, _) = spec.build(P).unwrap();
        assert_eq!(seq.len(), 8);
        let other: SequenceSpec = serde_json::from_str(
            r#"{"count":8,"params":{"base":"2"},"p":"inf","d":1,"family":"lacunary"}"#,
        )
        .unwrap();
        assert_eq!(spec.digest(), other.digest());
        let explicit: SequenceSpec =
            serde_json::from_str(r#"{"forms":[{"a":["3/4","1"],"b":"1/2"}],"p":"2"}"#).unwrap();
        let (seq, _) = explicit.build(P).unwrap();
        assert_eq!(seq.form(1).b, rat(1, 2));
        assert_ne!(explicit.digest(), spec.digest());
        assert!(serde_json::from_str::<SequenceSpec>(r#"{"family":"x","bogus":1}"#).is_err());
        let bad: SequenceSpec =
            serde_json::from_str(r#"{"family":"lacunary","d":1,"params":{"nope":1},"count":3}"#)
                .unwrap();
        assert!(bad.build(P).is_err());
    }

    #[test]
    fn closed_form_norms_extend_the_window() {
        let (seq, _) = generate(&GeneratorFamily::Linear, 1, NormSelector::Inf, 5, None, P).unwrap();
        assert_eq!(seq.norm_at(1000).unwrap().exact, Some(int(1000)));
        let (seq, _) = generate(
            &GeneratorFamily::LogPower { g: rat(3, 2), beta: rat(1, 2) },
            1,
            NormSelector::Inf,
            30,
            None,
            P,
        )
        .unwrap();
        // ⌈1.5·sqrt(n)⌉ exponents, checked against f64 away from ties.
        for n in 1..=30u64 {
            let e = (1.5 * (n as f64).sqrt()).ceil() as i64;
            assert_eq!(seq.form(n as usize).a[0], pow2(e), "n = {n}");
        }
    }

    #[test]
    fn sublacunary_growth_statistic_positive() {
        let (_, stats) = generate(
            &GeneratorFamily::Sublacunary { beta: rat(1, 2) },
            1,
            NormSelector::Inf,
            60,
            None,
            P,
        )
        .unwrap();
        let (_, stat) = stats.statistic.unwrap();
        assert!(stat.lo() >= &rat(1, 2));
    }

    fn small_form(d: usize) -> impl Strategy<Value = LinearForm> {
        (
            proptest::collection::vec((-20i64..20, 1i64..6), d),
            (-10i64..10, 1i64..6),
        )
            .prop_filter_map("non-zero", |(a, (bn, bd))| {
                let a: Vec<_> = a.into_iter().map(|(n, d)| rat(n, d)).collect();
                if a.iter().all(Zero::is_zero) {
                    None
                } else {
                    Some(LinearForm::new(a, rat(bn, bd)).unwrap())
                }
            })
    }

    proptest! {
        #[test]
        fn rescale_inverse_and_pointwise(
            f in small_form(2),
            v in proptest::collection::vec((-5i64..5, 1i64..5), 2),
            r in (1i64..9, 1i64..9),
            th in proptest::collection::vec((-7i64..7, 1i64..7), 2),
        ) {
            let seq = FormSequence::new(vec![f], NormSelector::Two, 64).unwrap();
            let v: Vec<_> = v.into_iter().map(|(n, d)| rat(n, d)).collect();
            let r = rat(r.0, r.1);
            let th: Vec<_> = th.into_iter().map(|(n, d)| rat(n, d)).collect();
            let s = seq.rescale(&v, &r).unwrap();
            let back_v: Vec<_> = v.iter().map(|x| -x / &r).collect();
            let back = s.rescale(&back_v, &r.recip()).unwrap();
            prop_assert_eq!(back.form(1), seq.form(1));
            let moved: Vec<_> = th.iter().zip(&v).map(|(t, v)| &r * t + v).collect();
            prop_assert_eq!(
                s.form(1).evaluate(&th).unwrap(),
                seq.form(1).evaluate(&moved).unwrap()
            );
            prop_assert_eq!(s.norm(1).square.clone(), seq.norm(1).square.clone().map(|x| x * &r * &r));
        }

        #[test]
        fn norm_homogeneity(f in small_form(3), r in (1i64..12, 1i64..12)) {
            let r = rat(r.0, r.1);
            let scaled = LinearForm::new(f.a.iter().map(|x| x * &r).collect(), f.b.clone()).unwrap();
            for p in [NormSelector::One, NormSelector::Inf] {
                prop_assert_eq!(
                    scaled.norm(&p, 64).exact,
                    f.norm(&p, 64).exact.map(|x| x * &r)
                );
            }
            prop_assert_eq!(
                scaled.norm(&NormSelector::Two, 64).square,
                f.norm(&NormSelector::Two, 64).square.map(|x| x * &r * &r)
            );
        }

        #[test]
        fn generated_families_pass_their_window(count in 3usize..30, d in 1usize..4) {
            let (seq, _) = generate(
                &GeneratorFamily::Lacunary { base: int(2), period: 2 },
                d, NormSelector::Two, count, None, 64,
            ).unwrap();
            prop_assert!(validate_sequence(&seq, 2).unwrap().pass);
            let (seq, _) = generate(
                &GeneratorFamily::Cassels { k: rat(5, 2) }, d, NormSelector::One, count, None, 64,
            ).unwrap();
            prop_assert!(validate_sequence(&seq, 1).unwrap().pass);
        }
    }
}
