use std::cell::RefCell;
use std::collections::HashMap;

use num_traits::Zero;
use serde_json::{json, Value};

use super::{interval_json, require, ChainCheck};
use crate::engine::{condition_report, MRule, Prop2Schedule, Schedule, ValueSeq};
use crate::forms::FormSequence;
use crate::numerics::{big, fmt_rational, int, pow_rational, rat, round_down, round_up, to_f64, ExactRational, RealInterval};
use crate::{Error, Result};

/// Shape of `h`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HForm {
    /// `h(x) = x + c f(x)`.
    Additive(ExactRational),
    /// `h(x) = x^C`.
    Power(ExactRational),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    /// `f = x^β ln(x+1)`, `h = x + (2/γ) f`.
    Cor1 { beta: ExactRational, gamma: ExactRational },
    /// `f = x ln(x+1)`, `h = x^C`, `C = 3/γ + 1`.
    Cor2 { gamma: ExactRational },
    /// `f = x^{1−β+β₁} α(x)`, `h = x + (C+1) f`, `C = (2/(βγ))(3A+2)`.
    Cor3 {
        gamma: ExactRational,
        beta: ExactRational,
        beta1: ExactRational,
        a: ExactRational,
    },
    /// `f = x^power (ln(x+1))^[log]` with a user-chosen `h`.
    Custom { power: ExactRational, log: bool, h: HForm },
}

/// Concrete `f`, `h` for Theorem 3.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorollaryFamily {
    pub kind: FamilyKind,
    /// Exponent of `x` in `f`.
    pub power: ExactRational,
    /// Whether `f` carries the factor `ln(x+1)`.
    pub log: bool,
    pub h: HForm,
}

/// Validates the parameters and builds `f` and `h`.
pub fn corollary_family(kind: FamilyKind) -> Result<CorollaryFamily> {
    let zero = int(0);
    let one = int(1);
    let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
    let unit_gamma = |g: &ExactRational| *g > zero && *g <= one;
    let (power, log, h) = match &kind {
        FamilyKind::Cor1 { beta, gamma } => {
            if !(*beta > zero && *beta < one) {
                return bad("cor1 needs beta in (0, 1)");
            }
            if !unit_gamma(gamma) {
                return bad("cor1 needs gamma in (0, 1]");
            }
            (beta.clone(), true, HForm::Additive(int(2) / gamma))
        }
        FamilyKind::Cor2 { gamma } => {
            if !unit_gamma(gamma) {
                return bad("cor2 needs gamma in (0, 1]");
            }
            (one.clone(), true, HForm::Power(int(3) / gamma + int(1)))
        }
        FamilyKind::Cor3 { gamma, beta, beta1, a } => {
            if !(*gamma > zero) {
                return bad("cor3 needs gamma > 0");
            }
            if !(zero <= *beta1 && beta1 < beta && *beta <= one) {
                return bad("cor3 needs 0 <= beta1 < beta <= 1");
            }
            if *a < zero {
                return bad("cor3 needs A >= 0");
            }
            let c = int(2) / (beta * gamma) * (int(3) * a + int(2));
            (&one - beta + beta1, beta1.is_zero(), HForm::Additive(c + int(1)))
        }
        FamilyKind::Custom { power, log, h } => {
            if *power < zero || (power.is_zero() && !log) {
                return bad("f must be non-decreasing and unbounded");
            }
            match h {
                HForm::Additive(c) if *c <= zero => return bad("h(x) = x + c f(x) needs c > 0"),
                HForm::Power(c) if *c <= one => return bad("h(x) = x^C needs C > 1"),
                HForm::Power(_) if !(*power == one && *log) => {
                    return bad("h(x) = x^C is supported with f(x) = x ln(x+1) only")
                }
                _ => {}
            }
            (power.clone(), *log, h.clone())
        }
    };
    Ok(CorollaryFamily { kind, power, log, h })
}

impl CorollaryFamily {
    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::Cor1 { .. } => "cor1",
            FamilyKind::Cor2 { .. } => "cor2",
            FamilyKind::Cor3 { .. } => "cor3",
            FamilyKind::Custom { .. } => "custom",
        }
    }

    pub fn f(&self, x: &RealInterval) -> Result<RealInterval> {
        let p = x.precision_bits();
        let base = if self.power.is_zero() {
            RealInterval::from_int(1, p)
        } else if self.power == int(1) {
            x.clone()
        } else {
            x.pow(&RealInterval::exact(self.power.clone(), p))?
        };
        if self.log {
            Ok(base.mul(&x.add(&RealInterval::from_int(1, p)).ln()?))
        } else {
            Ok(base)
        }
    }

    /// The block-spacing function `h`.
    pub fn g(&self, x: &RealInterval) -> Result<RealInterval> {
        match &self.h {
            HForm::Additive(c) => Ok(x.add(&self.f(x)?.scale(c))),
            HForm::Power(c) => {
                if c.is_integer() && x.is_exact() {
                    let k: u64 = c.to_integer().try_into().map_err(|_| Error::Domain("exponent too large".into()))?;
                    Ok(RealInterval::exact(pow_rational(x.lo(), k), x.precision_bits()))
                } else {
                    x.pow(&RealInterval::exact(c.clone(), x.precision_bits()))
                }
            }
        }
    }

    /// `⌊h(n)⌋`.
    pub fn g_floor(&self, n: u64, prec: u32) -> Result<u64> {
        let v = self.g(&RealInterval::exact(big(n), prec))?;
        let (lo, hi) = v.floor_bounds();
        if lo != hi {
            return Err(Error::PrecisionExhausted(format!("cannot decide floor(h({n}))")));
        }
        u64::try_from(lo).map_err(|_| Error::Domain(format!("h({n}) overflows")))
    }

    /// Upper bound for `sup_x ∫_x^{h(x)} du/f(u)` valid for all `x >= 1`:
    /// `c` when `h = x + c f` (as `f` is non-decreasing), and `ln C` for
    /// `h = x^C` with `f = x ln(x+1)` (compare with `1/(u ln u)`).
    pub fn c_analytic(&self, prec: u32) -> Result<RealInterval> {
        match &self.h {
            HForm::Additive(c) => Ok(RealInterval::exact(c.clone(), prec)),
            HForm::Power(c) => RealInterval::exact(c.clone(), prec).ln(),
        }
    }

    /// Enclosure of `∫_x^{h(x)} du/f(u)` by lower and upper sums on `k`
    /// cells (geometric when `h(x)/x` is large).
    pub fn integral(&self, x: u64, k: usize, prec: u32) -> Result<RealInterval> {
        let a = RealInterval::exact(big(x), prec);
        let b = self.g(&a)?;
        let b_hi = RealInterval::exact(b.hi().clone(), prec);
        if b.hi() <= a.lo() {
            return Ok(RealInterval::from_int(0, prec));
        }
        let ratio = b_hi.div(&a)?;
        let geometric = ratio.lo() > &int(4);
        let step = if geometric {
            ratio.pow(&RealInterval::exact(rat(1, k as i64), prec))?
        } else {
            b_hi.sub(&a).scale(&rat(1, k as i64))
        };
        let mut points = Vec::with_capacity(k + 1);
        points.push(a.clone());
        for _ in 0..k {
            let prev = points.last().unwrap();
            let p = if geometric { prev.mul(&step) } else { prev.add(&step) };
            // Snap to a rational point; the sums stay valid for any partition.
            points.push(RealInterval::exact(p.lo().clone(), prec));
        }
        points.retain(|p| p.lo() < b_hi.lo());
        points.push(b_hi.clone());
        let mut lower = RealInterval::from_int(0, prec);
        let mut upper = RealInterval::from_int(0, prec);
        let mut f_prev = self.f(&points[0])?;
        for w in points.windows(2) {
            let width = w[1].sub(&w[0]);
            let f_next = self.f(&w[1])?;
            upper = upper.add(&width.div(&f_prev)?);
            lower = lower.add(&width.div(&f_next)?);
            f_prev = f_next;
        }
        // The upper end of h(x) only enlarges the upper sum; the lower sum
        // must stop at h(x) itself.
        let lo = lower.lo().clone() - &(b.hi() - b.lo()) / self.f(&RealInterval::exact(b.lo().clone(), prec))?.lo();
        RealInterval::new(lo.max(int(0)), upper.hi().clone(), prec)
    }

    pub fn to_json(&self) -> Value {
        let h = match &self.h {
            HForm::Additive(c) => json!({"form": "x + c f(x)", "c": fmt_rational(c)}),
            HForm::Power(c) => json!({"form": "x^C", "C": fmt_rational(c)}),
        };
        json!({
            "family": self.name(),
            "f": {"power": fmt_rational(&self.power), "log": self.log},
            "h": h,
        })
    }

    /// Finite-window evidence for the family's growth hypothesis and for
    /// `liminf R_{⌊h(n)⌋}/(n f(n) R_n) > 0`; only window minima are claimed.
    pub fn check_growth(&self, seq: &FormSequence, window: (usize, usize), prec: u32) -> Result<GrowthReport> {
        let (lo, hi) = window;
        if lo < 1 || hi < lo || hi > seq.len() {
            return Err(Error::InvalidArgument("growth window outside the sequence".into()));
        }
        let r = |n: usize| seq.norm(n).enclosure.to_f64();
        let (name, stat) = match &self.kind {
            FamilyKind::Cor1 { beta, .. } => {
                let b = to_f64(beta);
                let v = (lo..hi).map(|n| (r(n + 1) / r(n) - 1.0) * (n as f64).powf(b));
                ("min (R_{n+1}/R_n - 1) n^beta", v.fold(f64::INFINITY, f64::min))
            }
            FamilyKind::Cor2 { .. } => {
                let v = (lo..hi).map(|n| (r(n + 1) / r(n) - 1.0) * n as f64);
                ("min (R_{n+1}/R_n - 1) n", v.fold(f64::INFINITY, f64::min))
            }
            FamilyKind::Cor3 { gamma, beta, beta1, .. } => {
                let (g, b, b1) = (to_f64(gamma), to_f64(beta), to_f64(beta1));
                let v = (lo..=hi).map(|n| ((r(n)).ln() - g * (n as f64).powf(b)).abs() / (n as f64).powf(b1));
                ("max |ln R_n - gamma n^beta| / n^beta1", v.fold(0.0, f64::max))
            }
            FamilyKind::Custom { .. } => ("none", f64::NAN),
        };
        let mut hyp = f64::INFINITY;
        let mut used = 0;
        for n in lo..=hi {
            let m = self.g_floor(n as u64, prec)?;
            let Some(rm) = seq.norm_at(m) else { break };
            let fv = self.f(&RealInterval::exact(big(n as u64), prec))?.to_f64();
            hyp = hyp.min(rm.enclosure.to_f64() / (n as f64 * fv * r(n)));
            used += 1;
        }
        Ok(GrowthReport {
            window,
            statistic: name.into(),
            value: stat,
            hypothesis_min: if used > 0 { Some(hyp) } else { None },
            hypothesis_terms: used,
        })
    }
}

#[derive(Clone, Debug)]
pub struct GrowthReport {
    pub window: (usize, usize),
    pub statistic: String,
    pub value: f64,
    /// `min R_{⌊h(n)⌋}/(n f(n) R_n)` over the terms that could be evaluated.
    pub hypothesis_min: Option<f64>,
    pub hypothesis_terms: usize,
}

impl GrowthReport {
    pub fn to_json(&self) -> Value {
        json!({
            "window": [self.window.0, self.window.1],
            "statistic": self.statistic,
            "value": if self.value.is_finite() { json!(self.value) } else { Value::Null },
            "hypothesis_min": self.hypothesis_min,
            "hypothesis_terms": self.hypothesis_terms,
            "note": "finite-window minima only; the liminf hypotheses are not verifiable",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Thm3Config {
    pub family: CorollaryFamily,
    /// Replaces the computed `C`; must not be below a computed integral.
    pub c_override: Option<ExactRational>,
    /// `None` searches `1..=n1_max` for the smallest feasible value.
    pub n1: Option<usize>,
    pub n1_max: usize,
    /// Block ends `n_ν` to list.
    pub blocks: usize,
    /// Grid of `x` for the quadrature cross-check.
    pub grid: Vec<u64>,
    pub cells: usize,
}

impl Thm3Config {
    pub fn new(family: CorollaryFamily) -> Self {
        Self {
            family,
            c_override: None,
            n1: None,
            n1_max: 512,
            blocks: 8,
            grid: vec![1, 2, 3, 5, 8, 16, 32, 64, 128, 256, 512, 1024],
            cells: 128,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RatioCheck {
    pub nu: usize,
    pub lhs: Option<RealInterval>,
    pub rhs: RealInterval,
    pub pass: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct Thm3Params {
    pub family: CorollaryFamily,
    pub c_analytic: RealInterval,
    /// Hull of the grid integrals.
    pub c_quadrature: RealInterval,
    pub c: ExactRational,
    pub c_overridden: bool,
    pub n1: usize,
    pub f_n1: RealInterval,
    pub a: RealInterval,
    /// Upper endpoint of `a` rounded up to a short dyadic, used in `δ_n`.
    pub a_engine: ExactRational,
    pub a_over_f: RealInterval,
    /// `8 C f(n_1)/(A n_1)`.
    pub sigma_bound: RealInterval,
    /// `f(n_1)/(A n_1)`: `‖L_n θ‖ f(n)` is at least this for `n > n_1`.
    pub tail_floor: ExactRational,
    pub blocks: Vec<usize>,
    pub ratio_checks: Vec<RatioCheck>,
    pub window: usize,
    pub window_pass: bool,
    pub chain: Vec<ChainCheck>,
    pub tested: Vec<usize>,
}

impl Thm3Params {
    pub fn to_json(&self) -> Value {
        json!({
            "theorem": 3,
            "family": self.family.to_json(),
            "lambda": "0/1",
            "eta": "1/2",
            "C_analytic": interval_json(&self.c_analytic),
            "C_quadrature": interval_json(&self.c_quadrature),
            "C": fmt_rational(&self.c),
            "C_overridden": self.c_overridden,
            "n1": self.n1,
            "f_n1": interval_json(&self.f_n1),
            "A": interval_json(&self.a),
            "A_engine": fmt_rational(&self.a_engine),
            "A_over_f_n1": interval_json(&self.a_over_f),
            "sigma_bound": interval_json(&self.sigma_bound),
            "tail_floor": fmt_rational(&self.tail_floor),
            "blocks": self.blocks,
            "ratio_checks": self.ratio_checks.iter().map(|r| json!({
                "nu": r.nu,
                "lhs": r.lhs.as_ref().map(interval_json),
                "rhs": interval_json(&r.rhs),
                "pass": r.pass,
            })).collect::<Vec<_>>(),
            "window": self.window,
            "window_conditions_pass": self.window_pass,
            "chain": self.chain.iter().map(ChainCheck::to_json).collect::<Vec<_>>(),
            "tested_n1": self.tested,
        })
    }

    pub fn feasible(&self) -> bool {
        self.window_pass
            && self.chain.iter().all(|c| c.verified)
            && self.ratio_checks.iter().all(|r| r.pass != Some(false))
    }
}

/// `C` is the analytic bound; the grid quadrature only has to stay below it.
fn c_value(cfg: &Thm3Config, prec: u32) -> Result<(RealInterval, RealInterval, ExactRational, bool)> {
    let fam = &cfg.family;
    let analytic = fam.c_analytic(prec)?;
    let mut quad: Option<RealInterval> = None;
    for &x in &cfg.grid {
        let q = fam.integral(x, cfg.cells, prec.min(64))?;
        quad = Some(match quad {
            None => q,
            Some(p) => RealInterval::new(p.lo().clone().max(q.lo().clone()), p.hi().clone().max(q.hi().clone()), prec)?,
        });
    }
    let quad = quad.unwrap_or_else(|| RealInterval::from_int(0, prec));
    if quad.lo() > analytic.hi() {
        return Err(Error::Domain("quadrature exceeds the analytic bound for C".into()));
    }
    match &cfg.c_override {
        Some(c) => {
            if c < quad.lo() {
                return Err(Error::InvalidArgument(format!(
                    "C = {} is below a computed integral {}",
                    fmt_rational(c),
                    fmt_rational(quad.lo())
                )));
            }
            Ok((analytic, quad, c.clone(), true))
        }
        None => Ok((analytic.clone(), quad, round_up(analytic.hi(), DELTA_BITS), false)),
    }
}

/// `f(n)` at integers, shared by every candidate `n_1`.
struct FCache<'a> {
    fam: &'a CorollaryFamily,
    prec: u32,
    vals: RefCell<HashMap<u64, RealInterval>>,
}

impl FCache<'_> {
    fn get(&self, n: u64) -> Result<RealInterval> {
        if let Some(v) = self.vals.borrow().get(&n) {
            return Ok(v.clone());
        }
        let v = self.fam.f(&RealInterval::exact(big(n), self.prec))?;
        self.vals.borrow_mut().insert(n, v.clone());
        Ok(v)
    }
}

/// Significant bits kept in `A` and `δ_n`; rounding is outward, and short
/// dyadics keep the exact products of the condition checks small.
const DELTA_BITS: u32 = 64;

fn build(
    cfg: &Thm3Config,
    seq: &FormSequence,
    n1: usize,
    c: &(RealInterval, RealInterval, ExactRational, bool),
    fc: &FCache,
    prec: u32,
) -> Result<(Schedule, Prop2Schedule, Thm3Params)> {
    let fam = &cfg.family;
    let (c_analytic, c_quadrature, c_val, overridden) = c.clone();
    let d = seq.dim();
    let f_n1 = fc.get(n1 as u64)?;
    let lead = f_n1.scale(&(&c_val * int(40) / big(n1 as u64)));
    let a = lead.max(&RealInterval::from_int(9, prec));
    let a_engine = round_up(a.hi(), DELTA_BITS);
    let an1 = &a_engine * big(n1 as u64);
    let len = seq.len().max(n1);
    let mut delta = Vec::with_capacity(len);
    let head = round_down(&(int(1) / &an1), DELTA_BITS);
    for n in 1..=len {
        let v = if n <= n1 {
            head.clone()
        } else {
            let q = f_n1.div(&fc.get(n as u64)?)?.scale(&an1.recip());
            round_down(q.lo(), DELTA_BITS)
        };
        let v = match delta.last() {
            Some(prev) if v > *prev => prev.clone(),
            _ => v,
        };
        delta.push(v);
    }
    let x: Vec<ExactRational> = delta.iter().map(|d| d * int(16)).collect();
    let sigma_bound = f_n1.scale(&(&c_val * int(8) / &an1));
    let mut blocks = vec![n1];
    while blocks.len() < cfg.blocks {
        let last = *blocks.last().unwrap() as u64;
        match fam.g_floor(last, prec) {
            Ok(next) if next > last && next < (1u64 << 53) => blocks.push(next as usize),
            _ => break,
        }
    }
    let mut sigma_bounds = std::collections::BTreeMap::new();
    let sb = RealInterval::new(int(0), sigma_bound.hi().clone(), prec)?;
    for nu in 1..=blocks.len() {
        sigma_bounds.insert(nu, sb.clone());
    }
    let mut ratio_checks = Vec::new();
    for nu in 1..blocks.len() {
        let (a_n, b_n) = (blocks[nu - 1], blocks[nu]);
        let delta_a = f_n1.div(&fc.get(a_n as u64)?)?.scale(&an1.recip());
        let delta_a = if a_n <= n1 { RealInterval::exact(head.clone(), prec) } else { delta_a };
        let rhs = RealInterval::from_int(2 * d as i64, prec).div(&delta_a)?;
        let lhs = match (seq.norm_at(b_n as u64 + 1), seq.norm_at(a_n as u64)) {
            (Some(rb), Some(ra)) => Some(rb.ratio(&ra).enclosure),
            _ => None,
        };
        let pass = lhs.as_ref().map(|l| rhs.certainly_le(l));
        ratio_checks.push(RatioCheck { nu, lhs, rhs, pass });
    }
    let one_fifth = RealInterval::exact(rat(1, 5), prec);
    let chain = vec![
        ChainCheck::new("40 C f(n1)/n1 <= A", lead.clone(), RealInterval::exact(a_engine.clone(), prec), false),
        ChainCheck::new("9 <= A", RealInterval::from_int(9, prec), RealInterval::exact(a_engine.clone(), prec), false),
        ChainCheck::new("8 C f(n1)/(A n1) <= 1/5", sigma_bound.clone(), one_fifth, false),
        ChainCheck::new(
            "x_n = 16 delta_n < 1",
            RealInterval::exact(x[0].clone(), prec),
            RealInterval::from_int(1, prec),
            true,
        ),
    ];
    let sched = Schedule {
        delta: ValueSeq::List(delta),
        lambda: RealInterval::from_int(0, prec),
        x: ValueSeq::List(x),
        m: MRule::Default,
        label: format!("theorem3({},n1={n1})", fam.name()),
    };
    let p2 = Prop2Schedule {
        n: blocks.clone(),
        eta: ValueSeq::Constant(rat(1, 2)),
        sigma_bounds,
    };
    let window = seq.len();
    let window_pass = chain[3].verified && condition_report(seq, &sched, window, None).pass();
    let params = Thm3Params {
        family: fam.clone(),
        c_analytic,
        c_quadrature,
        c: c_val,
        c_overridden: overridden,
        n1,
        a_over_f: a.div(&f_n1)?,
        f_n1,
        a,
        a_engine,
        sigma_bound,
        tail_floor: head_floor(&an1, &fc.get(n1 as u64)?),
        blocks,
        ratio_checks,
        window,
        window_pass,
        chain,
        tested: Vec::new(),
    };
    Ok((sched, p2, params))
}

fn head_floor(an1: &ExactRational, f_n1: &RealInterval) -> ExactRational {
    f_n1.lo() / an1
}

/// Theorem 3 with `λ = 0`, `η_ν = 1/2`, `n_{ν+1} = ⌊h(n_ν)⌋`,
/// `δ_n = 1/(A n_1)` up to `n_1` and `f(n_1)/(A n_1 f(n))` after, and the
/// companion `x_n = 16 δ_n` so the same `δ_n` also drive single-point runs.
/// Feasibility is judged on the supplied sequence: the single-point
/// conditions over its whole window and the block ratio conditions wherever
/// the norms are available.
pub fn theorem3_schedule(
    cfg: &Thm3Config,
    seq: &FormSequence,
    prec: u32,
) -> Result<(Schedule, Prop2Schedule, Thm3Params)> {
    let c = c_value(cfg, prec)?;
    let fc = FCache {
        fam: &cfg.family,
        prec,
        vals: RefCell::new(HashMap::new()),
    };
    let mut tested = Vec::new();
    let search = |tested: &mut Vec<usize>| -> Result<Option<(Schedule, Prop2Schedule, Thm3Params)>> {
        for n1 in 1..=cfg.n1_max {
            tested.push(n1);
            let out = build(cfg, seq, n1, &c, &fc, prec)?;
            if out.2.feasible() {
                return Ok(Some(out));
            }
        }
        Ok(None)
    };
    match cfg.n1 {
        Some(n1) => {
            if n1 < 1 {
                return Err(Error::InvalidArgument("n1 must be ≥ 1".into()));
            }
            tested.push(n1);
            let (s, p2, mut params) = build(cfg, seq, n1, &c, &fc, prec)?;
            if params.feasible() {
                require(&params.chain[..3])?;
                params.tested = tested;
                return Ok((s, p2, params));
            }
            let mut more = Vec::new();
            let hint = match search(&mut more)? {
                Some((_, _, p)) => format!("smallest feasible n1 is {}", p.n1),
                None => format!("no n1 up to {} is feasible", cfg.n1_max),
            };
            Err(Error::ScheduleInfeasible {
                n: n1,
                detail: format!("n1 = {n1} is infeasible; {hint}"),
            })
        }
        None => match search(&mut tested)? {
            Some((s, p2, mut params)) => {
                params.tested = tested;
                Ok((s, p2, params))
            }
            None => Err(Error::ScheduleInfeasible {
                n: 0,
                detail: format!("no n1 up to {} is feasible", cfg.n1_max),
            }),
        },
    }
}
