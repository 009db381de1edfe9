use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use super::prop1::stage_estimate;
use super::schedule::{iv, prop1_checks};
use super::{
    extract_point, prop2_checks, resolve, sigma, ConditionCheck, Domain, DyadicCube, EngineConfig,
    Extraction, Factors, Prop2Schedule, Resolved, Schedule, SurvivorSet, Violation, MAX_DEPTH,
};
use crate::forms::FormSequence;
use crate::numerics::{big, fmt_rational, int, pow2, ExactRational, RealInterval};
use crate::{Error, Result};

/// How the children of a good cube were classified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branching {
    /// `true` when every child was classified; otherwise only a scan for two
    /// good children and a strided sample were.
    pub exact: bool,
    /// Children `a`: cubes of `B_{n_{ν+1}} ∩ I`.
    pub total: u128,
    /// Good children found (all of them when `exact`).
    pub good: u128,
    /// `(1 − σ_{ν+1} / (η_{ν+1}(1 − η_ν))) a`, asserted below `good` when exact.
    pub bound: Option<ExactRational>,
    pub sigma_hi: Option<ExactRational>,
    pub scanned: u128,
    pub sampled: usize,
    pub sampled_good: usize,
    /// Node ids of the expanded children.
    pub expanded: Vec<usize>,
}

/// A good `ν`-cube `I` with `S = B_{n_{ν+1}} ∩ I` summarised.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoodCube {
    pub id: usize,
    pub parent: Option<usize>,
    pub nu: usize,
    /// Working coordinates.
    pub cube: DyadicCube,
    pub survivor_level: u32,
    pub survivor_count: u128,
    pub eta: ExactRational,
    /// `(1 − η_ν) 2^{d (survivor_level − level(I))}`.
    pub threshold: ExactRational,
    pub branching: Option<Branching>,
    pub leaf: Option<Extraction>,
}

#[derive(Clone, Debug)]
pub struct Prop2Outcome {
    pub domain: Domain,
    pub schedule_label: String,
    pub lambda: RealInterval,
    pub resolved: Resolved,
    /// `n_1, ..., n_{ν_max+1}`.
    pub blocks: Vec<usize>,
    /// `η_0, ..., η_{ν_max}`.
    pub etas: Vec<ExactRational>,
    pub nu_max: usize,
    pub nodes: Vec<GoodCube>,
    pub checks: Vec<ConditionCheck>,
    pub config: EngineConfig,
    pub d: usize,
    pub p: String,
}

impl Prop2Outcome {
    pub fn leaves(&self) -> impl Iterator<Item = &GoodCube> {
        self.nodes.iter().filter(|n| n.leaf.is_some())
    }

    pub fn deltas(&self) -> Vec<(usize, ExactRational)> {
        (1..=self.resolved.n_max())
            .map(|n| (n, self.resolved.delta(n).clone()))
            .collect()
    }
}

/// Eliminates stages `from+1..=to` inside the set's window.
fn advance(
    mut set: SurvivorSet,
    work: &FormSequence,
    res: &Resolved,
    from: usize,
    to: usize,
    budget: u128,
) -> Result<SurvivorSet> {
    for n in (from + 1)..=to {
        let level = res.level(n);
        if level - set.window().level() > MAX_DEPTH {
            return Err(Error::BudgetExceeded(format!(
                "stage {n} needs depth {} below a level-{} cube",
                level - set.window().level(),
                set.window().level()
            )));
        }
        if stage_estimate(&set, level, work.form(n)) > budget {
            return Err(Error::BudgetExceeded(format!(
                "stage {n} would exceed {budget} entries"
            )));
        }
        let (next, _) = set.refine(level)?.eliminate(work.form(n), res.delta(n))?;
        set = next;
    }
    Ok(set)
}

struct Ctx<'a> {
    seq: &'a FormSequence,
    work: FormSequence,
    sched: &'a Schedule,
    p2: &'a Prop2Schedule,
    f: Factors,
    res: Resolved,
    domain: Domain,
    cfg: EngineConfig,
    nu_max: usize,
    d: usize,
}

impl Ctx<'_> {
    fn n(&self, nu: usize) -> usize {
        self.p2.n_at(nu).expect("validated block index")
    }

    fn threshold(&self, nu: usize, depth: u32) -> Result<ExactRational> {
        Ok((int(1) - self.p2.eta(nu)?) * pow2(depth as i64 * self.d as i64))
    }

    fn node(
        &self,
        id: usize,
        parent: Option<usize>,
        nu: usize,
        set: &SurvivorSet,
    ) -> Result<GoodCube> {
        Ok(GoodCube {
            id,
            parent,
            nu,
            cube: set.window().clone(),
            survivor_level: set.level(),
            survivor_count: set.count(),
            eta: self.p2.eta(nu)?.clone(),
            threshold: self.threshold(nu, set.depth())?,
            branching: None,
            leaf: None,
        })
    }

    fn is_good(&self, nu: usize, set: &SurvivorSet) -> Result<bool> {
        Ok(big(set.count()) > self.threshold(nu, set.depth())?)
    }

    /// Children of the good `ν`-cube holding `set`: the good ones to expand
    /// (with their survivor sets) and the classification summary.
    fn classify(&self, nu: usize, set: &SurvivorSet) -> Result<(Vec<SurvivorSet>, Branching)> {
        let (from, to) = (self.n(nu + 1), self.n(nu + 2));
        let k = set.depth();
        let a = set.count();
        let exact = if self.res.level(to) - set.window().level() <= MAX_DEPTH {
            match advance(set.clone(), &self.work, &self.res, from, to, self.cfg.classify_budget) {
                Ok(t) => Some(t),
                Err(Error::BudgetExceeded(_)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        if let Some(t) = exact {
            let thr = self.threshold(nu + 1, self.res.level(to) - self.res.level(from))?;
            let good: Vec<Vec<u64>> = t
                .counts_by_ancestor(k)
                .into_iter()
                .filter(|(_, c)| big(*c) > thr)
                .map(|(q, _)| q)
                .collect();
            let (s, _) = sigma(self.sched, self.p2, nu + 1, &self.f)?;
            let eta_next = self.p2.eta(nu + 1)?;
            let eta = self.p2.eta(nu)?;
            let sigma_hi = s.hi().clone();
            let bound = (int(1) - &sigma_hi / (eta_next * (int(1) - eta))) * big(a);
            let g = good.len() as u128;
            if big(g) <= bound {
                return Err(Error::ConditionViolated(Box::new(Violation {
                    condition: "prop2.counting".into(),
                    index: nu + 1,
                    lhs: g.to_string(),
                    rhs: fmt_rational(&bound),
                    detail: format!("good children among {a}"),
                })));
            }
            let chosen: Vec<SurvivorSet> = good.iter().take(2).map(|q| t.restrict(k, q)).collect();
            return Ok((
                chosen,
                Branching {
                    exact: true,
                    total: a,
                    good: g,
                    bound: Some(bound),
                    sigma_hi: Some(sigma_hi),
                    scanned: a,
                    sampled: 0,
                    sampled_good: 0,
                    expanded: Vec::new(),
                },
            ));
        }
        let child = |q: &[u64]| -> Result<SurvivorSet> {
            let window = set.window().descendant(k, q);
            advance(SurvivorSet::full(window, 0)?, &self.work, &self.res, from, to, self.cfg.cube_budget)
        };
        let limit = (4 * self.cfg.sample_children as u128).max(64);
        let mut chosen = Vec::new();
        let mut scanned = 0u128;
        for q in set.iter_cubes() {
            if chosen.len() == 2 || scanned == limit {
                break;
            }
            scanned += 1;
            let s = child(&q)?;
            if self.is_good(nu + 1, &s)? {
                chosen.push(s);
            }
        }
        if chosen.len() < 2 {
            if scanned == a {
                return Err(Error::BranchingAbsent {
                    nu: nu + 1,
                    detail: format!("{} good children among {a}", chosen.len()),
                });
            }
            return Err(Error::BudgetExceeded(format!(
                "fewer than two good children among the first {scanned} of {a}"
            )));
        }
        let mut rng = SplitMix64::seed_from_u64(self.cfg.seed ^ (nu as u64).wrapping_mul(0x9e37_79b9));
        let offset = (rng.next_u64() as u128) % a;
        let count = (self.cfg.sample_children as u128).min(a) as usize;
        let mut sampled_good = 0;
        for i in 0..count {
            let idx = (offset + i as u128 * a / count as u128) % a;
            let q = set.cube_at(idx).expect("index below count");
            if self.is_good(nu + 1, &child(&q)?)? {
                sampled_good += 1;
            }
        }
        Ok((
            chosen,
            Branching {
                exact: false,
                total: a,
                good: 2,
                bound: None,
                sigma_hi: None,
                scanned,
                sampled: count,
                sampled_good,
                expanded: Vec::new(),
            },
        ))
    }

    fn leaf(&self, set: &SurvivorSet) -> Result<Extraction> {
        let top = self.n(self.nu_max + 1);
        let deltas: Vec<(usize, ExactRational)> =
            (1..=top).map(|n| (n, self.res.delta(n).clone())).collect();
        let e = extract_point(set, self.cfg.depth_bits, &self.domain, self.seq, &deltas)?;
        if let Some((n, m)) = e.margins.iter().find(|(_, m)| *m < int(0)) {
            return Err(Error::ConditionViolated(Box::new(Violation {
                condition: "margin".into(),
                index: *n,
                lhs: fmt_rational(m),
                rhs: "0/1".into(),
                detail: "extracted cube violates a stage it survived".into(),
            })));
        }
        Ok(e)
    }
}

/// Builds a binary tree of good cubes down to level `ν_max`: the root is
/// `[0, 1]^d`, each expanded node keeps two good children, and every leaf
/// yields an extracted point. Children are classified exactly when the
/// classification fits `classify_budget`, and by scanning plus sampling
/// otherwise.
pub fn run_prop2(
    seq: &FormSequence,
    sched: &Schedule,
    p2: &Prop2Schedule,
    nu_max: usize,
    cfg: EngineConfig,
) -> Result<Prop2Outcome> {
    let prec = seq.precision_bits();
    let d = seq.dim();
    let f = Factors::new(&sched.lambda, d, seq.p(), prec);
    let top = p2
        .n_at(nu_max + 1)
        .ok_or_else(|| Error::InvalidArgument(format!("n_{} is not defined", nu_max + 1)))?;
    if p2.n.windows(2).any(|w| w[0] >= w[1]) || p2.n.first() == Some(&0) {
        return Err(Error::InvalidArgument("block ends n_nu must increase from n_1 >= 1".into()));
    }
    if top > seq.len() {
        return Err(Error::InvalidArgument(format!(
            "n_{} = {top} exceeds the {} available forms",
            nu_max + 1,
            seq.len()
        )));
    }
    let etas = (0..=nu_max + 1).map(|nu| p2.eta(nu).cloned()).collect::<Result<Vec<_>>>()?;
    if etas.iter().any(|e| *e <= int(0) || *e >= int(1)) {
        return Err(Error::Domain("eta must lie in (0, 1)".into()));
    }
    let mut strict_fail: Option<Violation> = None;
    let mut checks = prop2_checks(seq, sched, p2, nu_max, &f);
    let prefix = seq.prefix(top);
    let domain = Domain::choose(&prefix, &f, None)?;
    let work = domain.work_sequence(&prefix)?;
    let res = resolve(&work, sched, 0, top, &f)?;
    for n in 1..=top {
        checks.extend(prop1_checks(&res, n, 0, &f));
    }
    checks.push(ConditionCheck {
        name: "prop1.scale".into(),
        index: 1,
        lhs: work.norm(1).describe(),
        rhs: iv(&f.scale_floor),
        pass: work.norm(1).certainly_ge(&f.scale_floor),
        note: Some("R_1 >= 2^|lambda| d^(1/p) after substitution".into()),
    });
    for c in checks.iter().filter(|c| !c.pass) {
        strict_fail.get_or_insert_with(|| c.violation());
    }
    if cfg.strict {
        if let Some(v) = strict_fail.take() {
            return Err(Error::ConditionViolated(Box::new(v)));
        }
    }
    let ctx = Ctx {
        seq,
        work,
        sched,
        p2,
        f,
        res,
        domain,
        cfg: cfg.clone(),
        nu_max,
        d,
    };
    let root_set = advance(
        SurvivorSet::full(DyadicCube::unit(d), 0)?,
        &ctx.work,
        &ctx.res,
        0,
        ctx.n(1),
        cfg.cube_budget,
    )?;
    if !ctx.is_good(0, &root_set)? {
        return Err(Error::ConditionViolated(Box::new(Violation {
            condition: "prop2.root".into(),
            index: 0,
            lhs: fmt_rational(&root_set.window_fraction()),
            rhs: fmt_rational(&(int(1) - &etas[0])),
            detail: "[0,1]^d is not a good 0-cube".into(),
        })));
    }
    let mut nodes = vec![ctx.node(0, None, 0, &root_set)?];
    let mut stack = vec![(0usize, root_set)];
    while let Some((id, set)) = stack.pop() {
        let nu = nodes[id].nu;
        if nu == nu_max {
            nodes[id].leaf = Some(ctx.leaf(&set)?);
            continue;
        }
        let (children, mut branching) = ctx.classify(nu, &set)?;
        if branching.good < 2 {
            return Err(Error::BranchingAbsent {
                nu: nu + 1,
                detail: format!("{} good children among {}", branching.good, branching.total),
            });
        }
        let mut pending = Vec::new();
        for s in children {
            let cid = nodes.len();
            nodes.push(ctx.node(cid, Some(id), nu + 1, &s)?);
            branching.expanded.push(cid);
            pending.push((cid, s));
        }
        nodes[id].branching = Some(branching);
        stack.extend(pending.into_iter().rev());
    }
    if let Some(v) = strict_fail {
        return Err(Error::ConditionViolated(Box::new(v)));
    }
    Ok(Prop2Outcome {
        domain: ctx.domain,
        schedule_label: sched.label.clone(),
        lambda: sched.lambda.clone(),
        resolved: ctx.res,
        blocks: (1..=nu_max + 1).map(|nu| p2.n_at(nu).unwrap()).collect(),
        etas: etas[..=nu_max].to_vec(),
        nu_max,
        nodes,
        checks,
        config: cfg,
        d,
        p: seq.p().label(),
    })
}
