//! Explicit schedules for the lacunary theorems (constant `δ`) and the
//! sublacunary Theorem 3 with its corollary families.
//!
//! Every inequality the proofs rely on is re-checked here with outward
//! interval arithmetic; a chain that cannot be confirmed at the working
//! precision is an error, never a silent pass.

mod thm3;

use serde_json::{json, Value};

use crate::engine::{MRule, Prop2Schedule, Schedule, ValueSeq};
use crate::numerics::{fmt_rational, guarded_ceil_log2, int, ln2, rat, ExactRational, RealInterval};
use crate::{Error, Result};

pub use thm3::{
    corollary_family, theorem3_schedule, CorollaryFamily, FamilyKind, GrowthReport, HForm, Thm3Config,
    Thm3Params,
};

/// Blocks `n_ν = Nhν` listed in a Theorem 2 schedule.
pub const THM2_BLOCKS: usize = 64;

pub(crate) fn interval_json(x: &RealInterval) -> Value {
    json!({
        "lo": fmt_rational(x.lo()),
        "hi": fmt_rational(x.hi()),
        "approx": x.to_f64(),
    })
}

/// One inequality of a proof, evaluated on enclosures.
#[derive(Clone, Debug)]
pub struct ChainCheck {
    pub name: String,
    pub lhs: RealInterval,
    pub rhs: RealInterval,
    pub strict: bool,
    pub verified: bool,
}

impl ChainCheck {
    pub(crate) fn new(name: &str, lhs: RealInterval, rhs: RealInterval, strict: bool) -> Self {
        let verified = if strict {
            lhs.certainly_lt(&rhs)
        } else {
            lhs.certainly_le(&rhs)
        };
        Self {
            name: name.into(),
            lhs,
            rhs,
            strict,
            verified,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "relation": if self.strict { "<" } else { "<=" },
            "lhs": interval_json(&self.lhs),
            "rhs": interval_json(&self.rhs),
            "verified": self.verified,
        })
    }
}

pub(crate) fn require(chain: &[ChainCheck]) -> Result<()> {
    match chain.iter().find(|c| !c.verified) {
        None => Ok(()),
        Some(c) => Err(Error::PrecisionExhausted(format!(
            "could not confirm {} ({} vs {})",
            c.name, c.lhs, c.rhs
        ))),
    }
}

/// Constants shared by Theorems 1 and 2.
#[derive(Clone, Debug)]
pub struct LacunaryCore {
    pub n: u64,
    pub d: u64,
    pub u: RealInterval,
    pub t: RealInterval,
    pub lambda: RealInterval,
    /// The theorem's `δ`.
    pub delta: RealInterval,
    /// Lower endpoint of `delta`, the value handed to the engine.
    pub delta_engine: ExactRational,
    /// `2^{2λ+1} d / δ` at the engine's `δ`.
    pub ratio: RealInterval,
    pub h: u64,
    pub x: ExactRational,
}

impl LacunaryCore {
    fn to_json(&self) -> Value {
        json!({
            "N": self.n,
            "d": self.d,
            "u": interval_json(&self.u),
            "t": interval_json(&self.t),
            "lambda": interval_json(&self.lambda),
            "delta": interval_json(&self.delta),
            "delta_engine": fmt_rational(&self.delta_engine),
            "ratio": interval_json(&self.ratio),
            "h": self.h,
            "x": fmt_rational(&self.x),
        })
    }
}

/// `u = log₂(Nd) + shift`, `t = log₂(Nd) + 4 log₂ u`, `λ = log₂(t ln 2)`,
/// `δ = 1/(k N t)`, `h = ⌈log₂(2^{2λ+1} d / δ)⌉`, `x = 1/(Nh)`.
fn lacunary_core(n: u64, d: u64, shift: i64, k: &RealInterval, prec: u32) -> Result<LacunaryCore> {
    if n < 1 {
        return Err(Error::InvalidArgument("N must be ≥ 1".into()));
    }
    if d < 1 {
        return Err(Error::InvalidArgument("d must be ≥ 1".into()));
    }
    let nd = n.checked_mul(d).filter(|v| *v <= i64::MAX as u64).ok_or_else(|| {
        Error::InvalidArgument("N·d is too large".into())
    })?;
    let w = prec + 32;
    let l = RealInterval::exact(crate::numerics::big(nd), w).log2()?;
    let u = l.add(&RealInterval::from_int(shift, w));
    let t = l.add(&u.log2()?.scale(&int(4)));
    let lambda = t.mul(&ln2(w)).log2()?;
    let delta = RealInterval::from_int(1, w).div(&k.with_precision(w).scale(&int(n as i64)).mul(&t))?;
    let delta = delta.with_precision(prec);
    let delta_engine = delta.lo().clone();
    let ratio = lambda
        .scale(&int(2))
        .add(&RealInterval::from_int(1, w))
        .exp2()
        .scale(&(int(d as i64) / &delta_engine));
    let h = guarded_ceil_log2(&ratio)?;
    if h < 1 {
        return Err(Error::Domain("h must be positive".into()));
    }
    let h = h as u64;
    Ok(LacunaryCore {
        n,
        d,
        u: u.with_precision(prec),
        t: t.with_precision(prec),
        lambda: lambda.with_precision(prec),
        delta,
        delta_engine,
        ratio: ratio.with_precision(prec),
        h,
        x: rat(1, (n * h) as i64),
    })
}

#[derive(Clone, Debug)]
pub struct Thm1Params {
    pub core: LacunaryCore,
    pub chain: Vec<ChainCheck>,
}

impl Thm1Params {
    pub fn to_json(&self) -> Value {
        let mut v = self.core.to_json();
        v["theorem"] = json!(1);
        v["chain"] = Value::Array(self.chain.iter().map(ChainCheck::to_json).collect());
        v
    }
}

fn lacunary_schedule(core: &LacunaryCore, label: String) -> Schedule {
    Schedule {
        delta: ValueSeq::Constant(core.delta_engine.clone()),
        lambda: core.lambda.clone(),
        x: ValueSeq::Constant(core.x.clone()),
        m: MRule::Lag((core.n * core.h) as usize),
        label,
    }
}

/// Theorem 1: `δ = 1/(2eN(log₂(Nd) + 4 log₂(log₂(Nd) + 30)))` with
/// `x_n = 1/(Nh)`, `δ_n = δ`, `m(n) = max(0, n − Nh)`.
pub fn theorem1_schedule(n: u64, d: u64, prec: u32) -> Result<(RealInterval, Thm1Params, Schedule)> {
    let w = prec + 32;
    let two_e = RealInterval::from_int(1, w).exp().scale(&int(2));
    let core = lacunary_core(n, d, 30, &two_e, prec)?;
    let one = RealInterval::from_int(1, w);
    let h = RealInterval::from_int(core.h as i64, w);
    let tln2 = core.t.mul(&ln2(w));
    let lead = one.add(&one.div(&tln2)?).powi(2);
    let chain = vec![
        ChainCheck::new("h <= t - 2.9", h.clone(), core.t.sub(&RealInterval::exact(rat(29, 10), w)), false),
        ChainCheck::new("(1 + 1/(t ln 2))^2 h <= t", lead.mul(&h), core.t.clone(), false),
        ChainCheck::new(
            "2 (1 + 2^-lambda)^2 delta <= x / e",
            one.add(&core.lambda.neg().exp2()).powi(2).scale(&(&core.delta_engine * int(2))),
            RealInterval::exact(core.x.clone(), w).div(&one.exp())?,
            false,
        ),
        ChainCheck::new(
            "(1 - x)^(Nh - 1) > 1/e",
            one.div(&one.exp())?,
            RealInterval::exact(crate::numerics::pow_rational(&(int(1) - &core.x), core.n * core.h - 1), w),
            true,
        ),
    ];
    require(&chain)?;
    let sched = lacunary_schedule(&core, format!("theorem1(N={n},d={d})"));
    Ok((core.delta.clone(), Thm1Params { core, chain }, sched))
}

#[derive(Clone, Debug)]
pub struct Thm2Params {
    pub core: LacunaryCore,
    pub eta: RealInterval,
    /// Upper endpoint of `eta`, used as `η_ν`.
    pub eta_engine: ExactRational,
    /// `η²/(1 + 2^{−λ})` and `η²`.
    pub sigma0: RealInterval,
    pub sigma: RealInterval,
    pub chain: Vec<ChainCheck>,
}

impl Thm2Params {
    pub fn to_json(&self) -> Value {
        let mut v = self.core.to_json();
        v["theorem"] = json!(2);
        v["eta"] = interval_json(&self.eta);
        v["eta_engine"] = json!(fmt_rational(&self.eta_engine));
        v["sigma0"] = interval_json(&self.sigma0);
        v["sigma"] = interval_json(&self.sigma);
        v["block_length"] = json!(self.core.n * self.core.h);
        v["chain"] = Value::Array(self.chain.iter().map(ChainCheck::to_json).collect());
        v
    }
}

/// Theorem 2: `δ = 1/(8N(log₂(Nd) + 4 log₂(log₂(Nd) + 36)))`,
/// `η = (1 + 2^{−λ})/2 · √(h/t)`, `n_ν = Nhν`, `η_ν = η`.
pub fn theorem2_schedule(
    n: u64,
    d: u64,
    prec: u32,
) -> Result<(RealInterval, Thm2Params, Schedule, Prop2Schedule)> {
    let w = prec + 32;
    let core = lacunary_core(n, d, 36, &RealInterval::from_int(8, w), prec)?;
    let one = RealInterval::from_int(1, w);
    let h = RealInterval::from_int(core.h as i64, w);
    let one_plus = one.add(&core.lambda.neg().exp2());
    let eta = one_plus.scale(&rat(1, 2)).mul(&h.div(&core.t)?.sqrt()?).with_precision(prec);
    let eta_engine = eta.hi().clone();
    let eta2 = eta.mul(&eta);
    let sigma0 = eta2.div(&one_plus)?.with_precision(prec);
    let sigma = eta2.with_precision(prec);
    let ln2sq = ln2(w).powi(2);
    let t3 = core.t.powi(3);
    let feasibility = ln2sq.mul(&t3).scale(&int(16 * (n * d) as i64));
    let two_pow_h = RealInterval::exact(crate::numerics::pow2(core.h as i64), w);
    let chain = vec![
        ChainCheck::new("h < t - 2.94", h.clone(), core.t.sub(&RealInterval::exact(rat(294, 100), w)), true),
        ChainCheck::new(
            "2 eta < 1 - 0.02/t",
            RealInterval::exact(&eta_engine * int(2), w),
            one.sub(&RealInterval::exact(rat(1, 50), w).div(&core.t)?),
            true,
        ),
        ChainCheck::new("2^(2 lambda + 1) d / delta <= 2^h", core.ratio.clone(), two_pow_h, false),
        ChainCheck::new("16 ln^2 2 N d t^3 <= 2^h", feasibility.clone(), RealInterval::exact(crate::numerics::pow2(core.h as i64), w), false),
        ChainCheck::new("100 t < 16 ln^2 2 N d t^3", core.t.scale(&int(100)), feasibility, true),
    ];
    require(&chain)?;
    let nh = (n * core.h) as usize;
    let sched = lacunary_schedule(&core, format!("theorem2(N={n},d={d})"));
    let p2 = Prop2Schedule {
        n: (1..=THM2_BLOCKS).map(|nu| nh * nu).collect(),
        eta: ValueSeq::Constant(eta_engine.clone()),
        sigma_bounds: Default::default(),
    };
    Ok((
        core.delta.clone(),
        Thm2Params {
            core,
            eta,
            eta_engine,
            sigma0,
            sigma,
            chain,
        },
        sched,
        p2,
    ))
}

/// `δ(t, 1)` of Theorem 1 and `δ·t·ln(t+1)` for `t = 1..=t_max`.
pub fn khintchine_gamma_comparison(t_max: u64, prec: u32) -> Result<Vec<GammaRow>> {
    if t_max < 1 {
        return Err(Error::InvalidArgument("t must be ≥ 1".into()));
    }
    let w = prec + 32;
    let two_e = RealInterval::from_int(1, w).exp().scale(&int(2));
    (1..=t_max)
        .map(|t| {
            let core = lacunary_core(t, 1, 30, &two_e, prec)?;
            let ln = RealInterval::from_int(t as i64 + 1, w).ln()?;
            let ratio = core.delta.mul(&ln).scale(&int(t as i64)).with_precision(prec);
            Ok(GammaRow {
                t,
                delta: core.delta,
                ratio,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct GammaRow {
    pub t: u64,
    pub delta: RealInterval,
    pub ratio: RealInterval,
}

impl GammaRow {
    pub fn to_json(&self) -> Value {
        json!({
            "t": self.t,
            "delta": interval_json(&self.delta),
            "ratio": interval_json(&self.ratio),
        })
    }
}
