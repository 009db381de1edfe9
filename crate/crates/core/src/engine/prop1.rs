use std::collections::BTreeMap;

use num_traits::Signed;

use super::schedule::{iv, prop1_checks};
use super::{
    ConditionCheck, Domain, DyadicCube, EngineConfig, Factors, Resolved, Schedule, SurvivorSet,
    Violation, MAX_DEPTH,
};
use crate::forms::{FormSequence, LinearForm};
use crate::numerics::{big, fmt_rational, int, min_dist_over, ExactRational};
use crate::{Error, Result};

/// One stage of the construction. Stage indices refer to the original
/// sequence; fractions are relative to the current window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub n: usize,
    pub level: u32,
    pub m: usize,
    /// `max(m(n), base)`: the stage whose survivors bound the removed part.
    pub m_used: usize,
    pub window: DyadicCube,
    pub base_stage: usize,
    pub count: u128,
    pub fraction: ExactRational,
    pub lower_bound: ExactRational,
    pub removed: u128,
    /// Cubes of `B_{m_used}` (refined to `level`) meeting the bad set.
    pub hyp_bad: u128,
    /// All cubes of `B_{m_used}` refined to `level`.
    pub hyp_base: u128,
    /// `x_n ∏_{m_used<k<n}(1 − x_k)`.
    pub hyp_factor: ExactRational,
}

/// Switch to tracking survivors inside one sub-cube only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Restriction {
    /// The stage whose survivors were restricted.
    pub stage: usize,
    pub window: DyadicCube,
    /// Fraction of the new window covered by the restricted survivors.
    pub fraction: ExactRational,
    pub reason: String,
}

/// Extracted point with its per-stage margins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extraction {
    /// Final cube in working coordinates.
    pub cube: DyadicCube,
    /// Image of the cube in original coordinates.
    pub box_lo: Vec<ExactRational>,
    pub box_hi: Vec<ExactRational>,
    pub theta: Vec<ExactRational>,
    /// `(n, min over the box of ‖L_n‖ − δ_n)`.
    pub margins: Vec<(usize, ExactRational)>,
}

impl Extraction {
    pub fn min_margin(&self) -> Option<&ExactRational> {
        self.margins.iter().map(|(_, m)| m).min()
    }
}

/// Lex-smallest cube of `set`, refined `depth_bits` further levels, mapped
/// back through `domain`; margins for every `(n, δ_n)` supplied.
pub fn extract_point(
    set: &SurvivorSet,
    depth_bits: u32,
    domain: &Domain,
    seq: &FormSequence,
    deltas: &[(usize, ExactRational)],
) -> Result<Extraction> {
    let first = set
        .first_cube()
        .ok_or_else(|| Error::InvalidArgument("cannot extract from an empty set".into()))?;
    let cube = first.descendant(depth_bits, &vec![0; first.dim()]);
    let (box_lo, box_hi) = domain.to_original(&cube);
    let theta = domain.point_to_original(&cube.center());
    let margins = deltas
        .iter()
        .map(|(n, d)| {
            let (lo, hi) = seq.form(*n).range_over_box(&box_lo, &box_hi)?;
            Ok((*n, min_dist_over(&lo, &hi) - d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Extraction {
        cube,
        box_lo,
        box_hi,
        theta,
        margins,
    })
}

/// Entries expected after refining `set` to `level` and eliminating `form`.
pub(super) fn stage_estimate(set: &SurvivorSet, level: u32, form: &LinearForm) -> u128 {
    let k = level - set.level();
    let projected = set.projected_entries(k);
    let rows = if set.dim() == 1 {
        1
    } else {
        let fan = 1u128.checked_shl(k * (set.dim() as u32 - 1)).unwrap_or(u128::MAX);
        (set.rows() as u128).saturating_mul(fan)
    };
    let span = form.a.last().expect("forms have d >= 1").abs() * set.window().side();
    let per_row = u128::try_from(crate::numerics::ceil(&span)).unwrap_or(u128::MAX);
    projected.saturating_add(rows.saturating_mul(per_row.saturating_add(2)))
}

/// Result of a completed single-point run.
#[derive(Clone, Debug)]
pub struct Prop1Outcome {
    pub domain: Domain,
    pub schedule_label: String,
    pub lambda: crate::numerics::RealInterval,
    pub resolved: Resolved,
    pub n_max: usize,
    pub trace: Vec<TraceEntry>,
    pub restrictions: Vec<Restriction>,
    pub checks: Vec<ConditionCheck>,
    pub final_set_level: u32,
    pub final_count: u128,
    pub extraction: Extraction,
    pub config: EngineConfig,
    pub d: usize,
    pub p: String,
}

impl Prop1Outcome {
    /// `δ_n` in original indices for the controlled stages.
    pub fn deltas(&self) -> Vec<(usize, ExactRational)> {
        let shift = self.domain.first - 1;
        (1..=self.resolved.n_max())
            .map(|n| (n + shift, self.resolved.delta(n).clone()))
            .collect()
    }
}

/// Incremental driver; [`run_prop1`] runs it to completion.
pub struct Prop1Run<'a> {
    seq: &'a FormSequence,
    work: FormSequence,
    domain: Domain,
    f: Factors,
    res: Resolved,
    cfg: EngineConfig,
    label: String,
    lambda: crate::numerics::RealInterval,
    n: usize,
    current: SurvivorSet,
    base: usize,
    lower: ExactRational,
    history: BTreeMap<usize, SurvivorSet>,
    trace: Vec<TraceEntry>,
    restrictions: Vec<Restriction>,
    checks: Vec<ConditionCheck>,
    violations: Vec<Violation>,
}

impl<'a> Prop1Run<'a> {
    /// Prepares stages up to the original index `n_max`. `within` places the
    /// construction in the target cube `v + r[0, 1]^d`.
    pub fn new(
        seq: &'a FormSequence,
        sched: &Schedule,
        n_max: usize,
        within: Option<(Vec<ExactRational>, ExactRational)>,
        cfg: EngineConfig,
    ) -> Result<Self> {
        let prec = seq.precision_bits();
        let f = Factors::new(&sched.lambda, seq.dim(), seq.p(), prec);
        if n_max > seq.len() {
            return Err(Error::InvalidArgument(format!(
                "n_max = {n_max} exceeds the {} available forms",
                seq.len()
            )));
        }
        let domain = Domain::choose(&seq.prefix(n_max.max(1)), &f, within)?;
        let work = domain.work_sequence(&seq.prefix(n_max.max(domain.first)))?;
        let work_n = n_max.saturating_sub(domain.first - 1).min(work.len());
        let res = super::resolve(&work, sched, domain.first - 1, work_n, &f)?;
        let unit = DyadicCube::unit(seq.dim());
        let full = SurvivorSet::full(unit, 0)?;
        let mut history = BTreeMap::new();
        history.insert(0, full.clone());
        let mut checks = Vec::new();
        if !seq.is_empty() && work_n > 0 {
            let scale_ok = work.norm(1).certainly_ge(&f.scale_floor);
            checks.push(ConditionCheck {
                name: "prop1.scale".into(),
                index: domain.first,
                lhs: work.norm(1).describe(),
                rhs: iv(&f.scale_floor),
                pass: scale_ok,
                note: Some("R_1 >= 2^|lambda| d^(1/p) after substitution".into()),
            });
        }
        Ok(Self {
            seq,
            work,
            domain,
            f,
            res,
            cfg,
            label: sched.label.clone(),
            lambda: sched.lambda.clone(),
            n: 0,
            current: full,
            base: 0,
            lower: int(1),
            history,
            trace: Vec::new(),
            restrictions: Vec::new(),
            checks,
            violations: Vec::new(),
        })
    }

    fn shift(&self) -> usize {
        self.domain.first - 1
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn resolved(&self) -> &Resolved {
        &self.res
    }

    /// Working stages completed.
    pub fn stage(&self) -> usize {
        self.n
    }

    pub fn current(&self) -> &SurvivorSet {
        &self.current
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    fn record(&mut self, v: Violation) -> Result<()> {
        if self.cfg.strict {
            return Err(Error::ConditionViolated(Box::new(v)));
        }
        self.violations.push(v);
        Ok(())
    }

    fn m_used(&self, n: usize) -> usize {
        self.res.m(n).max(self.base)
    }

    fn fits(&self, set: &SurvivorSet, level: u32, form: &LinearForm, budget: u128) -> bool {
        level - set.window().level() <= MAX_DEPTH && stage_estimate(set, level, form) <= budget
    }

    /// Restricts the current survivors to their densest sub-cube small
    /// enough for the next stage; the current stage becomes the new base.
    fn restrict(&mut self, level: u32, form: &LinearForm, reason: &str) -> Result<()> {
        let target = self.cfg.cube_budget / 4;
        let mut k = 1;
        loop {
            if k > self.current.depth() {
                return Err(Error::BudgetExceeded(format!(
                    "stage {}: no sub-cube of the survivors fits the budget of {} entries",
                    self.n + 1 + self.shift(),
                    self.cfg.cube_budget
                )));
            }
            let (q, _) = self
                .current
                .densest_subwindow(k)
                .ok_or_else(|| Error::InvalidArgument("restricting an empty set".into()))?;
            let sub = self.current.restrict(k, &q);
            if self.fits(&sub, level, form, target) {
                let stage = self.n + self.shift();
                self.restrictions.push(Restriction {
                    stage,
                    window: sub.window().clone(),
                    fraction: sub.window_fraction(),
                    reason: reason.into(),
                });
                self.base = self.n;
                self.lower = sub.window_fraction();
                self.history.clear();
                self.history.insert(self.n, sub.clone());
                self.current = sub;
                return Ok(());
            }
            k = if k < 4 { k + 1 } else { k * 2 }.min(self.current.depth().max(k + 1));
        }
    }

    /// Runs the next stage. Returns `false` once all stages are done.
    pub fn step(&mut self) -> Result<bool> {
        if self.n >= self.res.n_max() {
            return Ok(false);
        }
        let n = self.n + 1;
        let shift = self.shift();
        for c in prop1_checks(&self.res, n, shift, &self.f) {
            let pass = c.pass;
            self.checks.push(c.clone());
            if !pass {
                self.record(c.violation())?;
            }
        }
        let level = self.res.level(n);
        let form = self.work.form(n).clone();
        let delta = self.res.delta(n).clone();
        let x = self.res.x(n).clone();
        let budget = self.cfg.cube_budget;
        let mut attempts = 0;
        let (refined, next, removed) = loop {
            attempts += 1;
            if attempts > 64 {
                return Err(Error::BudgetExceeded(format!("stage {}: restriction did not converge", n + shift)));
            }
            if !self.fits(&self.current, level, &form, budget) {
                self.restrict(level, &form, "budget")?;
                continue;
            }
            let m_used = self.m_used(n);
            if m_used + 1 != n {
                let hist = self.history.get(&m_used).expect("history kept for m(n)");
                if !self.fits(hist, level, &form, budget) {
                    self.restrict(level, &form, "budget")?;
                    continue;
                }
            }
            let refined = self.current.refine(level)?;
            let (next, removed) = refined.eliminate(&form, &delta)?;
            if next.entries() > budget {
                self.restrict(level, &form, "budget")?;
                continue;
            }
            break (refined, next, removed);
        };
        let m_used = self.m_used(n);
        let (hyp_bad, hyp_base) = if m_used + 1 == n {
            (removed, refined.count())
        } else {
            let b = self.history[&m_used].refine(level)?;
            (b.count_bad(&form, &delta)?, b.count())
        };
        let prod = self.res.product(m_used, n);
        let hyp_factor = &x * prod;
        let idx = n + shift;
        if big(hyp_bad) > &hyp_factor * big(hyp_base) {
            self.record(Violation {
                condition: "product.hypothesis".into(),
                index: idx,
                lhs: format!("{hyp_bad}"),
                rhs: super::schedule::show(&(&hyp_factor * big(hyp_base))),
                detail: format!("cubes of B_{} meeting the bad set", m_used + shift),
            })?;
        }
        let kept = refined.count() - removed;
        if big(kept) < (int(1) - &x) * big(refined.count()) {
            self.record(Violation {
                condition: "product.conclusion".into(),
                index: idx,
                lhs: kept.to_string(),
                rhs: fmt_rational(&((int(1) - &x) * big(refined.count()))),
                detail: "P(B_n) >= (1 - x_n) P(B_n-1)".into(),
            })?;
        }
        self.lower = &self.lower * (int(1) - &x);
        let fraction = next.window_fraction();
        if fraction < self.lower {
            self.record(Violation {
                condition: "product.bound".into(),
                index: idx,
                lhs: fmt_rational(&fraction),
                rhs: super::schedule::show(&self.lower),
                detail: "P(B_n) >= P(B_base) prod (1 - x_k)".into(),
            })?;
        }
        if next.is_empty() {
            let violation = self.violations.first().cloned().unwrap_or_else(|| Violation {
                condition: "survivors.empty".into(),
                index: idx,
                lhs: "0".into(),
                rhs: "> 0".into(),
                detail: "no condition was flagged".into(),
            });
            return Err(Error::SurvivorsEmpty {
                n: idx,
                violation: Box::new(violation),
            });
        }
        self.trace.push(TraceEntry {
            n: idx,
            level,
            m: self.res.m(n) + shift,
            m_used: m_used + shift,
            window: next.window().clone(),
            base_stage: self.base + shift,
            count: next.count(),
            fraction,
            lower_bound: self.lower.clone(),
            removed,
            hyp_bad,
            hyp_base,
            hyp_factor,
        });
        // Keep B_n only if a later stage beyond n + 1 bounds against it.
        let needed = ((n + 2)..=self.res.n_max()).any(|k| self.m_used(k) == n);
        if needed {
            self.history.insert(n, next.clone());
        }
        let keep_from = ((n + 1)..=self.res.n_max())
            .map(|k| self.m_used(k))
            .min()
            .unwrap_or(n);
        self.history.retain(|&k, _| k >= keep_from);
        self.current = next;
        self.n = n;
        Ok(true)
    }

    pub fn finish(mut self) -> Result<Prop1Outcome> {
        while self.step()? {}
        if let Some(v) = self.violations.first() {
            return Err(Error::ConditionViolated(Box::new(v.clone())));
        }
        let deltas: Vec<(usize, ExactRational)> = (1..=self.res.n_max())
            .map(|n| (n + self.shift(), self.res.delta(n).clone()))
            .collect();
        let extraction = extract_point(&self.current, self.cfg.depth_bits, &self.domain, self.seq, &deltas)?;
        if let Some((n, m)) = extraction.margins.iter().find(|(_, m)| m.is_negative()) {
            return Err(Error::ConditionViolated(Box::new(Violation {
                condition: "margin".into(),
                index: *n,
                lhs: fmt_rational(m),
                rhs: "0".into(),
                detail: "extracted cube violates a stage it survived".into(),
            })));
        }
        let n_max = self.n + self.shift();
        Ok(Prop1Outcome {
            domain: self.domain,
            schedule_label: self.label,
            lambda: self.lambda,
            resolved: self.res,
            n_max,
            trace: self.trace,
            restrictions: self.restrictions,
            checks: self.checks,
            final_set_level: self.current.level(),
            final_count: self.current.count(),
            extraction,
            config: self.cfg,
            d: self.seq.dim(),
            p: self.seq.p().label(),
        })
    }
}

/// Refines and eliminates stage by stage up to the original index `n_max`,
/// asserting the stage conditions and the survivor product bounds, then
/// extracts a point.
pub fn run_prop1(
    seq: &FormSequence,
    sched: &Schedule,
    n_max: usize,
    within: Option<(Vec<ExactRational>, ExactRational)>,
    cfg: EngineConfig,
) -> Result<Prop1Outcome> {
    Prop1Run::new(seq, sched, n_max, within, cfg)?.finish()
}
