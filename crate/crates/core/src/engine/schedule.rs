use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use super::Violation;
use crate::forms::{FormSequence, Norm, NormSelector};
use crate::numerics::{
    floor_log2, fmt_rational, guarded_ceil_log2, int, pow2, ExactRational, RealInterval,
};
use crate::{Error, Result};

/// A rational sequence indexed from 1: constant or an explicit list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValueSeq {
    Constant(ExactRational),
    List(Vec<ExactRational>),
}

impl ValueSeq {
    /// Value at index `n >= 1`.
    pub fn get(&self, n: usize) -> Option<&ExactRational> {
        match self {
            Self::Constant(v) => Some(v),
            Self::List(v) => v.get(n.checked_sub(1)?),
        }
    }

    /// Value at index `ν >= 0`, for sequences such as `η_ν`.
    pub fn get0(&self, nu: usize) -> Option<&ExactRational> {
        self.get(nu + 1)
    }

    pub fn to_json(&self) -> Value {
        match self {
            Self::Constant(v) => json!({ "constant": fmt_rational(v) }),
            Self::List(v) => json!({ "list": v.iter().map(fmt_rational).collect::<Vec<_>>() }),
        }
    }
}

/// How `m(n)` is chosen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MRule {
    /// Largest `m < n` satisfying the ratio condition, else 0.
    Default,
    /// `m(n) = max(0, n − lag)`.
    Lag(usize),
    List(Vec<usize>),
}

impl MRule {
    pub fn to_json(&self) -> Value {
        match self {
            Self::Default => json!("default"),
            Self::Lag(h) => json!({ "lag": h }),
            Self::List(v) => json!({ "list": v }),
        }
    }
}

/// `(δ_n, λ, x_n, m(n))`.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub delta: ValueSeq,
    pub lambda: RealInterval,
    pub x: ValueSeq,
    pub m: MRule,
    pub label: String,
}

/// `(n_ν, η_ν)` plus optional calculator-supplied upper bounds for `σ_ν`
/// whose defining sums are too long to add up term by term.
#[derive(Clone, Debug)]
pub struct Prop2Schedule {
    /// `n_1 < n_2 < ...`; `n_0 = 0` is implicit.
    pub n: Vec<usize>,
    /// `η_0, η_1, ...`.
    pub eta: ValueSeq,
    pub sigma_bounds: BTreeMap<usize, RealInterval>,
}

impl Prop2Schedule {
    /// `n_ν` with `n_0 = 0`.
    pub fn n_at(&self, nu: usize) -> Option<usize> {
        if nu == 0 {
            Some(0)
        } else {
            self.n.get(nu - 1).copied()
        }
    }

    pub fn eta(&self, nu: usize) -> Result<&ExactRational> {
        self.eta
            .get0(nu)
            .ok_or_else(|| Error::InvalidArgument(format!("eta_{nu} is not defined")))
    }
}

/// Sums of `δ_n` are evaluated term by term up to this many terms.
pub const MAX_SIGMA_TERMS: usize = 1 << 20;

/// Schedule quantities shared by the condition checks.
pub struct Factors {
    pub lambda: RealInterval,
    /// `2^{-λ}`.
    pub inv_two_lambda: RealInterval,
    /// `1 + 2^{-λ}`.
    pub one_plus: RealInterval,
    /// `2^{2λ+1} d`.
    pub ratio_const: RealInterval,
    /// `2^{|λ|} d^{1/p}`.
    pub scale_floor: RealInterval,
    pub d_root_q: RealInterval,
}

impl Factors {
    pub fn new(lambda: &RealInterval, d: usize, p: &NormSelector, prec: u32) -> Self {
        let lambda = lambda.with_precision(prec);
        let inv_two_lambda = lambda.neg().exp2();
        let one_plus = inv_two_lambda.add(&RealInterval::from_int(1, prec));
        let ratio_const = lambda
            .scale(&int(2))
            .add(&RealInterval::from_int(1, prec))
            .exp2()
            .scale(&int(d as i64));
        let scale_floor = lambda.abs().exp2().mul(&p.d_root_p(d, prec));
        Self {
            inv_two_lambda,
            one_plus,
            ratio_const,
            scale_floor,
            d_root_q: p.d_root_q(d, prec),
            lambda,
        }
    }

    /// `2^{2λ+1} d / δ`.
    pub fn ratio_threshold(&self, delta: &ExactRational) -> RealInterval {
        self.ratio_const.scale(&delta.recip())
    }
}

/// `l_n = ⌈log₂(d^{1/q} R_n / δ_n) + λ⌉`, verified afterwards.
pub fn level_for(
    r: &Norm,
    delta: &ExactRational,
    lambda: &RealInterval,
    d: usize,
    p: &NormSelector,
    prec: u32,
) -> Result<u32> {
    let f = Factors::new(lambda, d, p, prec);
    level_with(r, delta, &f)
}

pub(crate) fn level_with(r: &Norm, delta: &ExactRational, f: &Factors) -> Result<u32> {
    if !delta.is_positive() || !r.is_positive() {
        return Err(Error::Domain("level needs R > 0 and delta > 0".into()));
    }
    let v = r
        .enclosure
        .mul(&f.d_root_q)
        .mul(&f.lambda.exp2())
        .scale(&delta.recip());
    let l = guarded_ceil_log2(&v)?.max(0);
    if !level_ok(r, delta, l as u32, f) {
        return Err(Error::ScheduleInfeasible {
            n: 0,
            detail: format!("R d^(1/q) 2^-{l} <= 2^-lambda delta could not be confirmed"),
        });
    }
    Ok(l as u32)
}

/// `R d^{1/q} 2^{-l} <= 2^{-λ} δ`.
pub(crate) fn level_ok(r: &Norm, delta: &ExactRational, l: u32, f: &Factors) -> bool {
    let lhs = r.enclosure.mul(&f.d_root_q).scale(&pow2(-(l as i64)));
    let rhs = f.inv_two_lambda.scale(delta);
    lhs.certainly_le(&rhs)
}

/// One evaluated condition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionCheck {
    pub name: String,
    pub index: usize,
    pub lhs: String,
    pub rhs: String,
    pub pass: bool,
    pub note: Option<String>,
}

impl ConditionCheck {
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "name": self.name,
            "index": self.index,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "pass": self.pass,
        });
        if let Some(n) = &self.note {
            v["note"] = json!(n);
        }
        v
    }

    pub fn violation(&self) -> Violation {
        Violation {
            condition: self.name.clone(),
            index: self.index,
            lhs: self.lhs.clone(),
            rhs: self.rhs.clone(),
            detail: self.note.clone().unwrap_or_default(),
        }
    }
}

/// Exact rationals up to this many bits are printed in full, larger ones as
/// an enclosure.
const SHOW_BITS: u64 = 512;

/// An exact value for a report.
pub(crate) fn show(x: &ExactRational) -> String {
    if x.numer().bits() + x.denom().bits() <= SHOW_BITS {
        fmt_rational(x)
    } else {
        iv(&RealInterval::around(x, 128))
    }
}

pub(crate) fn iv(x: &RealInterval) -> String {
    if x.is_exact() {
        fmt_rational(x.lo())
    } else {
        format!("[{}, {}]", fmt_rational(x.lo()), fmt_rational(x.hi()))
    }
}

/// Schedule values resolved for stages `1..=n_max` of a (possibly rescaled
/// and shifted) working sequence.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub delta: Vec<ExactRational>,
    pub x: Vec<ExactRational>,
    pub m: Vec<usize>,
    pub level: Vec<u32>,
    pub norms: Vec<Norm>,
    /// `prefix[k] = ∏_{j<=k}(1 − x_j)`, `prefix[0] = 1`.
    pub prefix: Vec<ExactRational>,
}

impl Resolved {
    pub fn n_max(&self) -> usize {
        self.delta.len()
    }
    pub fn delta(&self, n: usize) -> &ExactRational {
        &self.delta[n - 1]
    }
    pub fn x(&self, n: usize) -> &ExactRational {
        &self.x[n - 1]
    }
    pub fn m(&self, n: usize) -> usize {
        self.m[n - 1]
    }
    pub fn level(&self, n: usize) -> u32 {
        self.level[n - 1]
    }
    /// `∏_{m<k<n}(1 − x_k)`.
    pub fn product(&self, m: usize, n: usize) -> ExactRational {
        if n <= m + 1 {
            return ExactRational::one();
        }
        if m == 0 {
            return self.prefix[n - 1].clone();
        }
        &self.prefix[n - 1] / &self.prefix[m]
    }
}

/// Reads the schedule for working stages `1..=n_max`, where working stage `n`
/// is original stage `n + shift`.
pub fn resolve(
    work: &FormSequence,
    sched: &Schedule,
    shift: usize,
    n_max: usize,
    f: &Factors,
) -> Result<Resolved> {
    if work.len() < n_max {
        return Err(Error::InvalidArgument(format!(
            "the sequence has {} forms past the start, {n_max} needed",
            work.len()
        )));
    }
    let missing = |what: &str, n: usize| Error::InvalidArgument(format!("{what}_{n} is not defined"));
    let mut delta = Vec::with_capacity(n_max);
    let mut x = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let d = sched.delta.get(n + shift).ok_or_else(|| missing("delta", n + shift))?;
        if !d.is_positive() {
            return Err(Error::Domain(format!("delta_{} must be positive", n + shift)));
        }
        if let Some(prev) = delta.last() {
            if d > prev {
                return Err(Error::Domain(format!(
                    "delta must be non-increasing (delta_{} > delta_{})",
                    n + shift,
                    n + shift - 1
                )));
            }
        }
        delta.push(d.clone());
        let xv = sched.x.get(n + shift).ok_or_else(|| missing("x", n + shift))?;
        if !xv.is_positive() || *xv >= int(1) {
            return Err(Error::Domain(format!("x_{} must lie in (0, 1)", n + shift)));
        }
        x.push(xv.clone());
    }
    let norms: Vec<Norm> = (1..=n_max).map(|n| work.norm(n).clone()).collect();
    let thresholds: Vec<RealInterval> = match sched.m {
        MRule::Default => delta.iter().map(|d| f.ratio_threshold(d)).collect(),
        _ => Vec::new(),
    };
    let mut m = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let orig = n + shift;
        let mv = match &sched.m {
            MRule::Default => default_m(&norms, &thresholds, n),
            MRule::Lag(h) => orig.saturating_sub(*h).saturating_sub(shift),
            MRule::List(v) => {
                let mo = *v.get(orig - 1).ok_or_else(|| missing("m", orig))?;
                if mo >= orig {
                    return Err(Error::Domain(format!("m({orig}) = {mo} must be below {orig}")));
                }
                mo.saturating_sub(shift)
            }
        };
        m.push(mv);
    }
    let mut level = Vec::with_capacity(n_max);
    let mut running = 0u32;
    for n in 1..=n_max {
        let l = level_with(&norms[n - 1], &delta[n - 1], f).map_err(|e| match e {
            Error::ScheduleInfeasible { detail, .. } => Error::ScheduleInfeasible { n: n + shift, detail },
            other => other,
        })?;
        running = running.max(l);
        level.push(running);
    }
    let mut prefix = Vec::with_capacity(n_max + 1);
    prefix.push(ExactRational::one());
    for xv in &x {
        let next = prefix.last().unwrap() * (int(1) - xv);
        prefix.push(next);
    }
    Ok(Resolved {
        delta,
        x,
        m,
        level,
        norms,
        prefix,
    })
}

/// Largest `m < n` passing the ratio test, or 0. `R_n/R_m` falls and the
/// threshold rises with `m`, so the passing `m` form a prefix.
fn default_m(norms: &[Norm], thresholds: &[RealInterval], n: usize) -> usize {
    let pass = |m: usize| norms[n - 1].ratio(&norms[m - 1]).certainly_ge(&thresholds[m - 1]);
    let (mut lo, mut hi) = (0, n - 1);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if pass(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// Single-point conditions for working stage `n`.
pub fn prop1_checks(res: &Resolved, n: usize, shift: usize, f: &Factors) -> Vec<ConditionCheck> {
    let mut out = Vec::new();
    let m = res.m(n);
    if m > 0 {
        let ratio = res.norms[n - 1].ratio(&res.norms[m - 1]);
        let k = f.ratio_threshold(res.delta(m));
        out.push(ConditionCheck {
            name: "prop1.ratio".into(),
            index: n + shift,
            lhs: ratio.describe(),
            rhs: iv(&k),
            pass: ratio.certainly_ge(&k),
            note: Some(format!("m = {}", m + shift)),
        });
    }
    let lhs = f.one_plus.mul(&f.one_plus).scale(&(res.delta(n) * int(2)));
    let rhs = res.x(n) * res.product(m, n);
    out.push(ConditionCheck {
        name: "prop1.product".into(),
        index: n + shift,
        lhs: iv(&lhs),
        rhs: show(&rhs),
        pass: lhs.certainly_le_rat(&rhs),
        note: Some(format!("m = {}", m + shift)),
    });
    out
}

/// `σ_ν` as an enclosure, from the schedule's `δ_n`.
pub fn sigma(
    sched: &Schedule,
    p2: &Prop2Schedule,
    nu: usize,
    f: &Factors,
) -> Result<(RealInterval, &'static str)> {
    let lo = p2.n_at(nu).ok_or_else(|| Error::InvalidArgument(format!("n_{nu} undefined")))?;
    let hi = p2
        .n_at(nu + 1)
        .ok_or_else(|| Error::InvalidArgument(format!("n_{} undefined", nu + 1)))?;
    if hi - lo > MAX_SIGMA_TERMS {
        return p2
            .sigma_bounds
            .get(&nu)
            .map(|b| (b.clone(), "bound"))
            .ok_or_else(|| {
                Error::InvalidArgument(format!("sigma_{nu} needs {} terms and no bound", hi - lo))
            });
    }
    let sum = match &sched.delta {
        ValueSeq::Constant(d) => d * int((hi - lo) as i64),
        ValueSeq::List(v) => {
            if v.len() < hi {
                return Err(Error::InvalidArgument(format!("delta_{hi} is not defined")));
            }
            v[lo..hi].iter().fold(ExactRational::zero(), |acc, d| acc + d)
        }
    };
    let factor = if nu == 0 {
        f.one_plus.clone()
    } else {
        f.one_plus.mul(&f.one_plus)
    };
    Ok((factor.scale(&(sum * int(2))), "sum"))
}

/// `Q_ν = R_{n_{ν+1}} δ_{n_ν} / (R_{n_ν} δ_{n_{ν+1}})` and bounds for
/// `⌊log₂ Q_ν⌋`, `⌈log₂ Q_ν⌉` (the lower one is used for the check).
pub fn q_nu(
    seq: &FormSequence,
    sched: &Schedule,
    p2: &Prop2Schedule,
    nu: usize,
) -> Result<(Norm, i64, i64)> {
    let a = p2.n_at(nu).filter(|&n| n > 0).ok_or_else(|| Error::InvalidArgument("Q needs nu >= 1".into()))?;
    let b = p2.n_at(nu + 1).ok_or_else(|| Error::InvalidArgument(format!("n_{} undefined", nu + 1)))?;
    let ra = seq.norm_at(a as u64).ok_or_else(|| Error::InvalidArgument(format!("R_{a} unavailable")))?;
    let rb = seq.norm_at(b as u64).ok_or_else(|| Error::InvalidArgument(format!("R_{b} unavailable")))?;
    let da = sched.delta.get(a).ok_or_else(|| Error::InvalidArgument(format!("delta_{a} undefined")))?;
    let db = sched.delta.get(b).ok_or_else(|| Error::InvalidArgument(format!("delta_{b} undefined")))?;
    let q = rb.ratio(&ra).scale(&(da / db));
    let (fl, cl) = log2_bounds(&q);
    Ok((q, fl, cl))
}

/// `(⌊log₂ q⌋, ⌈log₂ q⌉)`, conservative (smallest possible floor, largest
/// possible ceiling) when only an enclosure is known.
fn log2_bounds(q: &Norm) -> (i64, i64) {
    if let Some(x) = &q.exact {
        let fl = floor_log2(x);
        let cl = if *x == pow2(fl) { fl } else { fl + 1 };
        return (fl, cl);
    }
    if let Some(s) = &q.square {
        let fs = floor_log2(s);
        let fl = fs.div_euclid(2);
        let exact_pow = *s == pow2(fs) && fs % 2 == 0;
        let cl = if exact_pow { fl } else { fl + 1 };
        return (fl, cl);
    }
    let lo = floor_log2(q.enclosure.lo());
    let hi = floor_log2(q.enclosure.hi()) + 1;
    (lo, hi)
}

/// Tree conditions 1 to 4 for `ν` in `1..=nu_max` (condition 2 once).
pub fn prop2_checks(
    seq: &FormSequence,
    sched: &Schedule,
    p2: &Prop2Schedule,
    nu_max: usize,
    f: &Factors,
) -> Vec<ConditionCheck> {
    let d = seq.dim();
    let mut out = Vec::new();
    let fail = |name: &str, nu: usize, e: Error| ConditionCheck {
        name: name.into(),
        index: nu,
        lhs: String::new(),
        rhs: String::new(),
        pass: false,
        note: Some(e.to_string()),
    };
    match (sigma(sched, p2, 0, f), p2.eta(0)) {
        (Ok((s0, src)), Ok(e0)) => out.push(ConditionCheck {
            name: "prop2.sigma0".into(),
            index: 0,
            lhs: iv(&s0),
            rhs: fmt_rational(e0),
            pass: s0.hi() < e0,
            note: Some(src.into()),
        }),
        (Err(e), _) | (_, Err(e)) => out.push(fail("prop2.sigma0", 0, e)),
    }
    for nu in 1..=nu_max {
        // Condition 1.
        let c1 = (|| -> Result<ConditionCheck> {
            let a = p2.n_at(nu).unwrap_or(0);
            let b = p2.n_at(nu + 1).ok_or_else(|| Error::InvalidArgument(format!("n_{} undefined", nu + 1)))?;
            let ra = seq.norm_at(a as u64).ok_or_else(|| Error::InvalidArgument(format!("R_{a} unavailable")))?;
            let rb = seq
                .norm_at(b as u64 + 1)
                .ok_or_else(|| Error::InvalidArgument(format!("R_{} unavailable", b + 1)))?;
            let da = sched.delta.get(a).ok_or_else(|| Error::InvalidArgument(format!("delta_{a} undefined")))?;
            let ratio = rb.ratio(&ra);
            let k = f.ratio_threshold(da);
            Ok(ConditionCheck {
                name: "prop2.ratio".into(),
                index: nu,
                lhs: ratio.describe(),
                rhs: iv(&k),
                pass: ratio.certainly_ge(&k),
                note: None,
            })
        })();
        out.push(c1.unwrap_or_else(|e| fail("prop2.ratio", nu, e)));
        // Condition 3.
        let c3 = (|| -> Result<ConditionCheck> {
            let (s, src) = sigma(sched, p2, nu, f)?;
            let rhs = p2.eta(nu)? * (int(1) - p2.eta(nu - 1)?);
            Ok(ConditionCheck {
                name: "prop2.sigma".into(),
                index: nu,
                lhs: iv(&s),
                rhs: fmt_rational(&rhs),
                pass: s.certainly_le_rat(&rhs),
                note: Some(src.into()),
            })
        })();
        out.push(c3.unwrap_or_else(|e| fail("prop2.sigma", nu, e)));
        // Condition 4.
        let c4 = (|| -> Result<ConditionCheck> {
            let (_, fl, cl) = q_nu(seq, sched, p2, nu)?;
            let (s1, _) = sigma(sched, p2, nu + 1, f)?;
            let e = p2.eta(nu)?;
            let e1 = p2.eta(nu + 1)?;
            let coef = RealInterval::exact(int(1) - e, s1.precision_bits())
                .sub(&s1.scale(&e1.recip()));
            let term = coef.mul(&RealInterval::exact(pow2(d as i64 * fl), s1.precision_bits()));
            Ok(ConditionCheck {
                name: "prop2.branching".into(),
                index: nu,
                lhs: iv(&term),
                rhs: "1/1".into(),
                pass: term.certainly_ge_rat(&int(1)),
                note: Some(format!("floor log2 Q = {fl}, ceil log2 Q = {cl}")),
            })
        })();
        out.push(c4.unwrap_or_else(|e| fail("prop2.branching", nu, e)));
    }
    out
}

/// Per-stage and per-ν diagnostics; never fails.
#[derive(Clone, Debug)]
pub struct ConditionReport {
    pub prop1: Vec<ConditionCheck>,
    pub prop2: Vec<ConditionCheck>,
    pub errors: Vec<String>,
}

impl ConditionReport {
    pub fn pass(&self) -> bool {
        self.errors.is_empty()
            && self.prop1.iter().all(|c| c.pass)
            && self.prop2.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.prop1.iter().chain(&self.prop2).filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "pass": self.pass(),
            "prop1": self.prop1.iter().map(ConditionCheck::to_json).collect::<Vec<_>>(),
            "prop2": self.prop2.iter().map(ConditionCheck::to_json).collect::<Vec<_>>(),
            "errors": self.errors,
        })
    }
}

/// Evaluates the single-point conditions for `n <= n_max` (on the sequence
/// as given, without rescaling) and, when supplied, the tree conditions
/// for `ν <= nu_max`.
pub fn condition_report(
    seq: &FormSequence,
    sched: &Schedule,
    n_max: usize,
    p2: Option<(&Prop2Schedule, usize)>,
) -> ConditionReport {
    let prec = seq.precision_bits();
    let f = Factors::new(&sched.lambda, seq.dim(), seq.p(), prec);
    let mut report = ConditionReport {
        prop1: Vec::new(),
        prop2: Vec::new(),
        errors: Vec::new(),
    };
    let n_max = n_max.min(seq.len());
    match resolve(seq, sched, 0, n_max, &f) {
        Ok(res) => {
            for n in 1..=n_max {
                report.prop1.extend(prop1_checks(&res, n, 0, &f));
            }
        }
        Err(e) => report.errors.push(e.to_string()),
    }
    if let Some((p2, nu_max)) = p2 {
        report.prop2 = prop2_checks(seq, sched, p2, nu_max, &f);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{generate, GeneratorFamily, LinearForm};
    use crate::numerics::rat;

    const P: u32 = 128;

    fn zero() -> RealInterval {
        RealInterval::from_int(0, P)
    }

    #[test]
    fn level_examples() {
        let r = |x| Norm::from_exact(int(x), P);
        let inf = NormSelector::Inf;
        assert_eq!(level_for(&r(4), &rat(1, 4), &zero(), 1, &inf, P).unwrap(), 4);
        assert_eq!(level_for(&r(3), &rat(1, 4), &zero(), 1, &inf, P).unwrap(), 4);
        let one = RealInterval::from_int(1, P);
        assert_eq!(level_for(&r(4), &rat(1, 4), &one, 1, &inf, P).unwrap(), 5);
        assert!(level_for(&r(4), &int(0), &zero(), 1, &inf, P).is_err());
    }

    #[test]
    fn half_half_schedule_fails_product_condition() {
        let (seq, _) = generate(
            &GeneratorFamily::Lacunary { base: int(2), period: 1 },
            1,
            NormSelector::Inf,
            6,
            None,
            P,
        )
        .unwrap();
        let sched = Schedule {
            delta: ValueSeq::Constant(rat(1, 2)),
            lambda: zero(),
            x: ValueSeq::Constant(rat(1, 2)),
            m: MRule::Default,
            label: "test".into(),
        };
        let report = condition_report(&seq, &sched, 6, None);
        assert!(!report.pass());
        assert!(report.failures().all(|c| c.name == "prop1.product"));
        assert_eq!(report.failures().count(), 6);
    }

    #[test]
    fn q_equal_one_fails_branching() {
        // R constant and δ constant give Q = 1, so the branching term is
        // 1 − η − σ/η < 1.
        let forms = vec![LinearForm::new(vec![int(1)], int(0)).unwrap(); 12];
        let seq = FormSequence::new(forms, NormSelector::Inf, P).unwrap();
        let sched = Schedule {
            delta: ValueSeq::Constant(rat(1, 1000)),
            lambda: zero(),
            x: ValueSeq::Constant(rat(1, 10)),
            m: MRule::Default,
            label: "test".into(),
        };
        let p2 = Prop2Schedule {
            n: vec![2, 4, 6, 8, 10],
            eta: ValueSeq::Constant(rat(1, 2)),
            sigma_bounds: BTreeMap::new(),
        };
        let report = condition_report(&seq, &sched, 0, Some((&p2, 2)));
        let c4: Vec<_> = report.prop2.iter().filter(|c| c.name == "prop2.branching").collect();
        assert_eq!(c4.len(), 2);
        assert!(c4.iter().all(|c| !c.pass));
        assert!(c4[0].note.as_ref().unwrap().contains("floor log2 Q = 0"));
    }

    #[test]
    fn theorem3_regime_condition3_arithmetic() {
        // η ≡ 1/2, σ ≡ 1/5: 1/5 <= 1/2 · 1/2.
        let rhs = rat(1, 2) * (int(1) - rat(1, 2));
        assert!(rat(1, 5) <= rhs);
    }

    #[test]
    fn log2_bounds_cases() {
        assert_eq!(log2_bounds(&Norm::from_exact(int(8), P)), (3, 3));
        assert_eq!(log2_bounds(&Norm::from_exact(int(9), P)), (3, 4));
        assert_eq!(log2_bounds(&Norm::from_square(int(16), P)), (2, 2));
        assert_eq!(log2_bounds(&Norm::from_square(int(45), P)), (2, 3));
    }
}
