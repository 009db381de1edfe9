//! Canonical JSON certificates and their independent re-verification.
//!
//! `certificate_digest` is the SHA-256 of the canonical serialisation with
//! the digest itself removed.

use num_traits::Signed;
use serde_json::{json, Value};

use super::schedule::level_ok;
use super::{
    canonical_json, sha256_hex, Domain, DomainMode, DyadicCube, Extraction, Factors, Prop1Outcome,
    Prop2Outcome,
};
use crate::forms::{FormSequence, SequenceSpec};
use crate::measure::PRNG_NAME;
use crate::numerics::{
    big, fmt_dyadic, fmt_rational, int, min_dist_over, parse_dyadic, parse_rational, pow2, round_down,
    ExactRational, RealInterval,
};

pub const FORMAT: &str = "dyelim-certificate/1";

/// Significant bits kept for the product bound recorded in the trace; the
/// exact product is rebuilt by the verifier.
const LOWER_BITS: u32 = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    value: Value,
}

fn strip(v: &Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(
            m.iter()
                .filter(|(k, _)| k.as_str() != "certificate_digest")
                .map(|(k, v)| (k.clone(), strip(v)))
                .collect(),
        ),
        Value::Array(a) => Value::Array(a.iter().map(strip).collect()),
        other => other.clone(),
    }
}

/// Digest over everything except `certificate_digest` keys.
pub fn certificate_digest(v: &Value) -> String {
    sha256_hex(&canonical_json(&strip(v)))
}

fn rats(v: &[ExactRational]) -> Vec<String> {
    v.iter().map(fmt_rational).collect()
}

fn cube_json(c: &DyadicCube) -> Value {
    json!({"level": c.level(), "coords": c.coord_strings()})
}

fn leaf_json(e: &Extraction, deltas: &[(usize, ExactRational)]) -> Value {
    let margins: Vec<Value> = e
        .margins
        .iter()
        .zip(deltas)
        .map(|((n, m), (_, d))| json!({"n": n, "delta": fmt_rational(d), "margin": fmt_rational(m)}))
        .collect();
    json!({
        "final_cube": cube_json(&e.cube),
        "final_box": {"lo": rats(&e.box_lo), "hi": rats(&e.box_hi)},
        "theta": e.theta.iter().map(fmt_dyadic).collect::<Vec<_>>(),
        "margins": margins,
        "min_margin": e.min_margin().map(fmt_rational),
    })
}

fn interval_json(x: &RealInterval) -> Value {
    json!({"lo": fmt_rational(x.lo()), "hi": fmt_rational(x.hi())})
}

fn stages_json(res: &super::Resolved, shift: usize) -> Vec<Value> {
    (1..=res.n_max())
        .map(|n| {
            json!({
                "n": n + shift,
                "delta": fmt_rational(res.delta(n)),
                "x": fmt_rational(res.x(n)),
                "m": res.m(n) + shift,
                "level": res.level(n),
            })
        })
        .collect()
}

fn tool() -> Value {
    json!({"name": "dyelim", "version": env!("CARGO_PKG_VERSION")})
}

impl Certificate {
    pub fn from_prop1(o: &Prop1Outcome, input_digest: &str, config: Value) -> Self {
        let shift = o.domain.first - 1;
        let trace: Vec<Value> = o
            .trace
            .iter()
            .map(|t| {
                json!({
                    "n": t.n,
                    "level": t.level,
                    "m": t.m,
                    "m_used": t.m_used,
                    "window": cube_json(&t.window),
                    "base_stage": t.base_stage,
                    "count": t.count.to_string(),
                    "fraction": fmt_rational(&t.fraction),
                    "lower_bound": fmt_rational(&round_down(&t.lower_bound, LOWER_BITS)),
                    "removed": t.removed.to_string(),
                    "hyp_bad": t.hyp_bad.to_string(),
                    "hyp_base": t.hyp_base.to_string(),
                })
            })
            .collect();
        let restrictions: Vec<Value> = o
            .restrictions
            .iter()
            .map(|r| {
                json!({
                    "stage": r.stage,
                    "window": cube_json(&r.window),
                    "fraction": fmt_rational(&r.fraction),
                    "reason": r.reason,
                })
            })
            .collect();
        let mut v = json!({
            "format": FORMAT,
            "kind": "prop1",
            "tool": tool(),
            "input_digest": input_digest,
            "d": o.d,
            "p": o.p,
            "lambda": interval_json(&o.lambda),
            "schedule": {"label": o.schedule_label, "stages": stages_json(&o.resolved, shift)},
            "domain": o.domain.to_json(),
            "trace": trace,
            "restrictions": restrictions,
            "leaf": leaf_json(&o.extraction, &o.deltas()),
            "checked": {"n_min": o.domain.first, "n_max": o.resolved.n_max() + shift},
            "conditions": o.checks.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            "prng": PRNG_NAME,
            "config": config,
            "engine": o.config.to_json(),
        });
        let digest = certificate_digest(&v);
        v["certificate_digest"] = json!(digest);
        Self { value: v }
    }

    pub fn from_prop2(o: &Prop2Outcome, input_digest: &str, config: Value) -> Self {
        let deltas = o.deltas();
        let nodes: Vec<Value> = o
            .nodes
            .iter()
            .map(|n| {
                let branching = n.branching.as_ref().map(|b| {
                    json!({
                        "exact": b.exact,
                        "total": b.total.to_string(),
                        "good": b.good.to_string(),
                        "bound": b.bound.as_ref().map(fmt_rational),
                        "sigma_hi": b.sigma_hi.as_ref().map(fmt_rational),
                        "scanned": b.scanned.to_string(),
                        "sampled": b.sampled,
                        "sampled_good": b.sampled_good,
                        "expanded": b.expanded,
                    })
                });
                json!({
                    "id": n.id,
                    "parent": n.parent,
                    "nu": n.nu,
                    "cube": cube_json(&n.cube),
                    "survivor_level": n.survivor_level,
                    "survivor_count": n.survivor_count.to_string(),
                    "eta": fmt_rational(&n.eta),
                    "threshold": fmt_rational(&n.threshold),
                    "branching": branching,
                    "leaf": n.leaf.as_ref().map(|e| leaf_json(e, &deltas)),
                })
            })
            .collect();
        let mut v = json!({
            "format": FORMAT,
            "kind": "prop2",
            "tool": tool(),
            "input_digest": input_digest,
            "d": o.d,
            "p": o.p,
            "lambda": interval_json(&o.lambda),
            "schedule": {"label": o.schedule_label, "stages": stages_json(&o.resolved, 0)},
            "blocks": {"n": o.blocks, "eta": rats(&o.etas)},
            "domain": o.domain.to_json(),
            "nodes": nodes,
            "checked": {"n_min": 1, "n_max": o.resolved.n_max()},
            "conditions": o.checks.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            "prng": PRNG_NAME,
            "config": config,
            "engine": o.config.to_json(),
        });
        let digest = certificate_digest(&v);
        v["certificate_digest"] = json!(digest);
        Self { value: v }
    }

    pub fn from_value(value: Value) -> Self {
        Self { value }
    }

    pub fn value(&self) -> &Value {
        &self.value
    }

    pub fn into_value(self) -> Value {
        self.value
    }

    pub fn digest(&self) -> Option<&str> {
        self.value.get("certificate_digest").and_then(Value::as_str)
    }

    pub fn to_canonical(&self) -> String {
        canonical_json(&self.value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub checks: Vec<VerifyCheck>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &VerifyCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "pass": self.pass(),
            "checks": self
                .checks
                .iter()
                .map(|c| json!({"name": c.name, "pass": c.pass, "detail": c.detail}))
                .collect::<Vec<_>>(),
        })
    }

    fn record(&mut self, name: &str, r: Result<String, String>) {
        let (pass, detail) = match r {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        self.checks.push(VerifyCheck {
            name: name.into(),
            pass,
            detail,
        });
    }
}

type Check<T> = Result<T, String>;

fn field<'a>(v: &'a Value, key: &str) -> Check<&'a Value> {
    v.get(key).ok_or_else(|| format!("missing field {key:?}"))
}

fn str_field<'a>(v: &'a Value, key: &str) -> Check<&'a str> {
    field(v, key)?.as_str().ok_or_else(|| format!("{key:?} is not a string"))
}

fn u64_field(v: &Value, key: &str) -> Check<u64> {
    field(v, key)?.as_u64().ok_or_else(|| format!("{key:?} is not an unsigned integer"))
}

fn usize_field(v: &Value, key: &str) -> Check<usize> {
    u64_field(v, key).map(|x| x as usize)
}

fn u128_field(v: &Value, key: &str) -> Check<u128> {
    str_field(v, key)?
        .parse()
        .map_err(|_| format!("{key:?} is not a decimal count"))
}

fn rat_field(v: &Value, key: &str) -> Check<ExactRational> {
    parse_rational(str_field(v, key)?).map_err(|e| format!("{key:?}: {e}"))
}

fn array<'a>(v: &'a Value, key: &str) -> Check<&'a Vec<Value>> {
    field(v, key)?.as_array().ok_or_else(|| format!("{key:?} is not an array"))
}

fn rat_list(v: &Value, key: &str) -> Check<Vec<ExactRational>> {
    array(v, key)?
        .iter()
        .map(|x| {
            x.as_str()
                .ok_or_else(|| format!("{key:?} holds a non-string"))
                .and_then(|s| parse_rational(s).map_err(|e| e.to_string()))
        })
        .collect()
}

fn cube_field(v: &Value, key: &str) -> Check<DyadicCube> {
    let c = field(v, key)?;
    let level = u64_field(c, "level")? as u32;
    let coords: Vec<String> = array(c, "coords")?
        .iter()
        .map(|x| x.as_str().map(String::from).ok_or_else(|| "coordinate is not a string".to_string()))
        .collect::<Check<_>>()?;
    DyadicCube::from_strings(level, &coords).map_err(|e| e.to_string())
}

fn domain_field(v: &Value) -> Check<Domain> {
    let d = field(v, "domain")?;
    let mode = match str_field(d, "mode")? {
        "unit" => DomainMode::Unit,
        "rescaled" => DomainMode::Rescaled,
        "within" => DomainMode::Within,
        other => return Err(format!("unknown domain mode {other:?}")),
    };
    let scale = rat_field(d, "scale")?;
    if !scale.is_positive() {
        return Err("domain scale must be positive".into());
    }
    let first = usize_field(d, "first")?;
    if first == 0 {
        return Err("domain first stage must be at least 1".into());
    }
    Ok(Domain {
        mode,
        offset: rat_list(d, "offset")?,
        scale,
        first,
    })
}

fn expect_eq<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Check<()> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: recorded {got:?}, recomputed {want:?}"))
    }
}

fn expect_rats(what: &str, got: &[ExactRational], want: &[ExactRational]) -> Check<()> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: recorded {:?}, recomputed {:?}", rats(got), rats(want)))
    }
}

fn expect_rat(what: &str, got: &ExactRational, want: &ExactRational) -> Check<()> {
    expect_rats(what, std::slice::from_ref(got), std::slice::from_ref(want))
}

struct Stage {
    n: usize,
    delta: ExactRational,
    x: ExactRational,
    m: usize,
    level: u32,
}

fn stages(v: &Value) -> Check<Vec<Stage>> {
    array(field(v, "schedule")?, "stages")?
        .iter()
        .map(|s| {
            Ok(Stage {
                n: usize_field(s, "n")?,
                delta: rat_field(s, "delta")?,
                x: rat_field(s, "x")?,
                m: usize_field(s, "m")?,
                level: u64_field(s, "level")? as u32,
            })
        })
        .collect()
}

fn lambda_field(v: &Value, prec: u32) -> Check<RealInterval> {
    let l = field(v, "lambda")?;
    let (lo, hi) = (rat_field(l, "lo")?, rat_field(l, "hi")?);
    if lo > hi {
        return Err("lambda lo exceeds hi".into());
    }
    RealInterval::new(lo, hi, prec).map_err(|e| e.to_string())
}

/// Box, point and margins of one extracted leaf against stages `first..=last`.
fn check_leaf(
    leaf: &Value,
    seq: &FormSequence,
    domain: &Domain,
    stages: &[Stage],
    min_level: u32,
) -> Check<String> {
    let cube = cube_field(leaf, "final_cube")?;
    if cube.dim() != seq.dim() {
        return Err("final cube has the wrong dimension".into());
    }
    if cube.level() < min_level {
        return Err(format!("final cube level {} is below l_n = {min_level}", cube.level()));
    }
    let (lo, hi) = domain.to_original(&cube);
    let b = field(leaf, "final_box")?;
    expect_rats("final_box.lo", &rat_list(b, "lo")?, &lo)?;
    expect_rats("final_box.hi", &rat_list(b, "hi")?, &hi)?;
    let theta: Vec<ExactRational> = array(leaf, "theta")?
        .iter()
        .map(|x| {
            x.as_str()
                .ok_or_else(|| "theta holds a non-string".to_string())
                .and_then(|s| parse_dyadic(s).map_err(|e| e.to_string()))
        })
        .collect::<Check<_>>()?;
    if theta.len() != seq.dim() || theta.iter().zip(lo.iter().zip(&hi)).any(|(t, (a, b))| t < a || t > b) {
        return Err("theta lies outside the final box".into());
    }
    let margins = array(leaf, "margins")?;
    if margins.len() != stages.len() {
        return Err(format!("{} margins recorded for {} stages", margins.len(), stages.len()));
    }
    let mut min: Option<ExactRational> = None;
    for (m, s) in margins.iter().zip(stages) {
        expect_eq("margin stage", usize_field(m, "n")?, s.n)?;
        let delta = rat_field(m, "delta")?;
        expect_rat("margin delta", &delta, &s.delta)?;
        let (a, b) = seq.form(s.n).range_over_box(&lo, &hi).map_err(|e| e.to_string())?;
        let margin = min_dist_over(&a, &b) - &delta;
        expect_rat(&format!("margin at n = {}", s.n), &rat_field(m, "margin")?, &margin)?;
        if margin.is_negative() {
            return Err(format!("negative margin at n = {}", s.n));
        }
        if min.as_ref().is_none_or(|x| margin < *x) {
            min = Some(margin);
        }
    }
    let recorded = match field(leaf, "min_margin")? {
        Value::Null => None,
        other => Some(
            other
                .as_str()
                .ok_or("min_margin is not a string")
                .and_then(|s| parse_rational(s).map_err(|_| "min_margin is not rational"))?,
        ),
    };
    if recorded != min {
        let show = |x: &Option<ExactRational>| x.as_ref().map_or("null".into(), fmt_rational);
        return Err(format!("min_margin: recorded {}, recomputed {}", show(&recorded), show(&min)));
    }
    Ok(format!(
        "{} stages, min margin {}",
        stages.len(),
        min.map(|m| fmt_rational(&m)).unwrap_or_else(|| "none".into())
    ))
}

fn check_levels(
    stages: &[Stage],
    work: &FormSequence,
    shift: usize,
    f: &Factors,
) -> Check<String> {
    let mut prev = 0u32;
    for s in stages {
        if s.n <= shift || s.n - shift > work.len() {
            return Err(format!("stage {} outside the working sequence", s.n));
        }
        let r = work.norm(s.n - shift);
        if !level_ok(r, &s.delta, s.level, f) {
            return Err(format!("level l_{} = {} fails the level inequality", s.n, s.level));
        }
        if s.level < prev {
            return Err(format!("levels decrease at n = {}", s.n));
        }
        if !s.delta.is_positive() || !s.x.is_positive() || s.x >= int(1) {
            return Err(format!("delta or x out of range at n = {}", s.n));
        }
        if s.m >= s.n {
            return Err(format!("m({}) = {} is not below n", s.n, s.m));
        }
        prev = s.level;
    }
    Ok(format!("{} levels certified for lambda in {}", stages.len(), f.lambda))
}

fn check_trace(v: &Value, stages: &[Stage], d: usize, first: usize) -> Check<String> {
    let trace = array(v, "trace")?;
    if trace.len() != stages.len() {
        return Err(format!("{} trace entries for {} stages", trace.len(), stages.len()));
    }
    let mut restrictions = std::collections::BTreeMap::new();
    for r in array(v, "restrictions")? {
        let window = cube_field(r, "window")?;
        restrictions.insert(usize_field(r, "stage")?, (window, rat_field(r, "fraction")?));
    }
    // prefix[i] = ∏ (1 − x) over the first i stages.
    let mut prefix = vec![int(1)];
    for (i, s) in stages.iter().enumerate() {
        if s.n != first + i {
            return Err(format!("stage {} out of sequence", s.n));
        }
        let next = prefix.last().unwrap() * (int(1) - &s.x);
        prefix.push(next);
    }
    let mut base = first - 1;
    let mut lower = int(1);
    let mut prev_window = DyadicCube::unit(d);
    for (t, s) in trace.iter().zip(stages) {
        let n = usize_field(t, "n")?;
        expect_eq("trace stage", n, s.n)?;
        expect_eq("trace level", u64_field(t, "level")? as u32, s.level)?;
        expect_eq("trace m", usize_field(t, "m")?, s.m)?;
        if let Some((w, frac)) = restrictions.get(&(n - 1)) {
            if !prev_window.contains(w) {
                return Err(format!("restriction before n = {n} leaves the previous window"));
            }
            base = n - 1;
            lower = frac.clone();
            prev_window = w.clone();
        }
        let window = cube_field(t, "window")?;
        expect_eq("trace window", &window, &prev_window)?;
        expect_eq("trace base", usize_field(t, "base_stage")?, base)?;
        let m_used = usize_field(t, "m_used")?;
        expect_eq("trace m_used", m_used, s.m.max(base))?;
        let count = u128_field(t, "count")?;
        if count == 0 {
            return Err(format!("no survivors at n = {n}"));
        }
        let depth = s.level.checked_sub(window.level()).ok_or("window below the stage level")?;
        let fraction = big(count) * pow2(-(depth as i64) * d as i64);
        expect_rat("trace fraction", &rat_field(t, "fraction")?, &fraction)?;
        lower *= int(1) - &s.x;
        if fraction < lower {
            return Err(format!("survivor fraction below the product bound at n = {n}"));
        }
        expect_rat("trace lower bound", &rat_field(t, "lower_bound")?, &round_down(&lower, LOWER_BITS))?;
        if m_used + 1 < first {
            return Err(format!("m_used = {m_used} precedes the first stage at n = {n}"));
        }
        // x_n ∏_{m_used<k<n}(1 − x_k)
        let factor = &s.x * &prefix[n - first] / &prefix[m_used + 1 - first];
        let bad = u128_field(t, "hyp_bad")?;
        let hyp_base = u128_field(t, "hyp_base")?;
        if big(bad) > &factor * big(hyp_base) {
            return Err(format!("removed part exceeds x_n times the base at n = {n}"));
        }
        let removed = u128_field(t, "removed")?;
        if big(count) < (int(1) - &s.x) * big(count + removed) {
            return Err(format!("stage {n} removed more than x_n of the survivors"));
        }
    }
    Ok(format!("{} stages, {} restrictions", trace.len(), restrictions.len()))
}

fn check_tree(v: &Value, d: usize, etas: &[ExactRational]) -> Check<String> {
    let nodes = array(v, "nodes")?;
    if nodes.is_empty() {
        return Err("no nodes".into());
    }
    let mut cubes: Vec<(DyadicCube, u32, usize)> = Vec::new();
    let mut leaves = 0;
    for (i, node) in nodes.iter().enumerate() {
        expect_eq("node id", usize_field(node, "id")?, i)?;
        let nu = usize_field(node, "nu")?;
        let cube = cube_field(node, "cube")?;
        let level = u64_field(node, "survivor_level")? as u32;
        let depth = level.checked_sub(cube.level()).ok_or("survivor level above the cube")?;
        let eta = rat_field(node, "eta")?;
        expect_rat("node eta", &eta, etas.get(nu).ok_or_else(|| format!("no eta for block {nu}"))?)?;
        let thr = (int(1) - &eta) * pow2(depth as i64 * d as i64);
        expect_rat("node threshold", &rat_field(node, "threshold")?, &thr)?;
        if big(u128_field(node, "survivor_count")?) <= thr {
            return Err(format!("node {i} is not good"));
        }
        match field(node, "parent")? {
            Value::Null if i == 0 => {
                if nu != 0 || cube.level() != 0 {
                    return Err("root is not the unit cube".into());
                }
            }
            p => {
                let p = p.as_u64().ok_or("bad parent")? as usize;
                let (pc, pl, pnu) = cubes.get(p).ok_or("parent listed after child")?;
                if !pc.contains(&cube) || cube.level() != *pl || nu != pnu + 1 {
                    return Err(format!("node {i} is not a child cube of node {p}"));
                }
            }
        }
        if let Some(b) = field(node, "branching")?.as_object() {
            let b = Value::Object(b.clone());
            let good = u128_field(&b, "good")?;
            if good < 2 {
                return Err(format!("node {i} has fewer than two good children"));
            }
            if field(&b, "exact")?.as_bool() == Some(true) {
                let total = u128_field(&b, "total")?;
                let sigma = rat_field(&b, "sigma_hi")?;
                let eta_next = etas.get(nu + 1).ok_or("eta missing")?;
                let bound = (int(1) - &sigma / (eta_next * (int(1) - &eta))) * big(total);
                expect_rat("counting bound", &rat_field(&b, "bound")?, &bound)?;
                if big(good) <= bound {
                    return Err(format!("node {i} fails the counting bound"));
                }
            }
        }
        if !field(node, "leaf")?.is_null() {
            leaves += 1;
        }
        cubes.push((cube, level, nu));
    }
    Ok(format!("{} nodes, {leaves} leaves", nodes.len()))
}

/// Re-derives everything a certificate claims from the sequence spec it
/// names. Malformed input yields failing checks, never an error.
pub fn verify_certificate(cert: &Value, spec: &SequenceSpec, prec: u32) -> VerifyReport {
    let mut report = VerifyReport::default();
    let digest_ok = match cert.get("certificate_digest").and_then(Value::as_str) {
        Some(d) if d == certificate_digest(cert) => Ok("matches".to_string()),
        Some(_) => Err("certificate_digest does not match the content".to_string()),
        None => Err("certificate_digest missing".to_string()),
    };
    // Content checks still run on a digest mismatch so the report can name
    // the field that changed.
    report.record("digest", digest_ok);
    let kind = match (str_field(cert, "format"), str_field(cert, "kind")) {
        (Ok(FORMAT), Ok(k)) if k == "prop1" || k == "prop2" => k.to_string(),
        _ => {
            report.record("format", Err(format!("expected format {FORMAT} with kind prop1 or prop2")));
            return report;
        }
    };
    report.record("format", Ok(kind.clone()));
    report.record(
        "input_digest",
        str_field(cert, "input_digest").and_then(|d| {
            expect_eq("input_digest", d.to_string(), spec.digest()).map(|_| d.to_string())
        }),
    );
    let setup = (|| -> Check<(FormSequence, Domain, Vec<Stage>, RealInterval)> {
        let (seq, _) = spec.build(prec).map_err(|e| e.to_string())?;
        expect_eq("d", usize_field(cert, "d")?, seq.dim())?;
        expect_eq("p", str_field(cert, "p")?.to_string(), seq.p().label())?;
        let domain = domain_field(cert)?;
        if domain.offset.len() != seq.dim() {
            return Err("domain offset has the wrong dimension".into());
        }
        let stages = stages(cert)?;
        let checked = field(cert, "checked")?;
        let (lo, hi) = (usize_field(checked, "n_min")?, usize_field(checked, "n_max")?);
        expect_eq("checked.n_min", lo, domain.first)?;
        let ns: Vec<usize> = stages.iter().map(|s| s.n).collect();
        expect_eq("schedule stages", ns, (lo..=hi).collect())?;
        if hi > seq.len() {
            return Err(format!("the sequence has {} forms, {hi} checked", seq.len()));
        }
        Ok((seq, domain, stages, lambda_field(cert, prec)?))
    })();
    let (seq, domain, stages, lambda) = match setup {
        Ok(x) => {
            report.record("sequence", Ok(format!("{} forms", x.0.len())));
            x
        }
        Err(e) => {
            report.record("sequence", Err(e));
            return report;
        }
    };
    let f = Factors::new(&lambda, seq.dim(), seq.p(), prec);
    let shift = domain.first - 1;
    let last_level = stages.last().map_or(0, |s| s.level);
    report.record(
        "levels",
        domain
            .work_sequence(&seq.prefix(stages.last().map_or(domain.first, |s| s.n).max(domain.first)))
            .map_err(|e| e.to_string())
            .and_then(|w| check_levels(&stages, &w, shift, &f)),
    );
    report.record(
        "scale",
        domain
            .work_sequence(&seq.prefix(domain.first))
            .map_err(|e| e.to_string())
            .and_then(|w| {
                if stages.is_empty() || w.norm(1).certainly_ge(&f.scale_floor) {
                    Ok("R_1 >= 2^|lambda| d^(1/p)".into())
                } else {
                    Err("first working norm is below 2^|lambda| d^(1/p)".into())
                }
            }),
    );
    if kind == "prop1" {
        report.record("trace", check_trace(cert, &stages, seq.dim(), domain.first));
        report.record(
            "leaf",
            field(cert, "leaf").and_then(|l| check_leaf(l, &seq, &domain, &stages, last_level)),
        );
    } else {
        let etas = field(cert, "blocks").and_then(|b| rat_list(b, "eta"));
        match etas {
            Ok(etas) => report.record("tree", check_tree(cert, seq.dim(), &etas)),
            Err(e) => report.record("tree", Err(e)),
        }
        let leaves = array(cert, "nodes").and_then(|nodes| {
            let mut n = 0;
            for node in nodes.iter().filter(|x| x.get("leaf").is_some_and(|l| !l.is_null())) {
                check_leaf(&node["leaf"], &seq, &domain, &stages, last_level)?;
                n += 1;
            }
            if n == 0 {
                return Err("no leaves".into());
            }
            Ok(format!("{n} leaves"))
        });
        report.record("leaves", leaves);
    }
    report
}
