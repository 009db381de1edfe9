use dyelim::forms::SequenceSpec;
use dyelim::numerics::{int, rat, to_f64};
use dyelim::theorems::{
    corollary_family, khintchine_gamma_comparison, theorem1_schedule, theorem2_schedule, theorem3_schedule,
    FamilyKind, Thm3Config,
};
use serde_json::json;

const P: u32 = 256;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

fn thm1_delta(n: f64, d: f64) -> f64 {
    let l = (n * d).log2();
    let t = l + 4.0 * (l + 30.0).log2();
    1.0 / (2.0 * std::f64::consts::E * n * t)
}

fn thm2_delta(n: f64, d: f64) -> f64 {
    let l = (n * d).log2();
    1.0 / (8.0 * n * (l + 4.0 * (l + 36.0).log2()))
}

#[test]
fn theorem1_matches_closed_form() {
    for (n, d) in [(1, 1), (1, 2), (2, 1), (3, 4), (10, 3)] {
        let (delta, params, sched) = theorem1_schedule(n, d, P).unwrap();
        let expect = thm1_delta(n as f64, d as f64);
        assert!(close(delta.to_f64(), expect, 1e-13), "N={n} d={d}: {} vs {expect}", delta.to_f64());
        assert!(delta.contains(&params.core.delta_engine));
        assert_eq!(params.core.x, rat(1, (n * params.core.h) as i64));
        assert_eq!(sched.label, format!("theorem1(N={n},d={d})"));
    }
}

#[test]
fn theorem1_delta_decreases_with_n() {
    let ds: Vec<f64> = (1..=6).map(|n| theorem1_schedule(n, 1, P).unwrap().0.to_f64()).collect();
    assert!(ds.windows(2).all(|w| w[1] < w[0]), "{ds:?}");
}

#[test]
fn theorem1_rejects_zero() {
    assert!(theorem1_schedule(0, 1, P).is_err());
    assert!(theorem1_schedule(1, 0, P).is_err());
}

#[test]
fn theorem2_matches_closed_form() {
    for (n, d) in [(1, 1), (2, 2), (5, 1)] {
        let (delta, _, _, _) = theorem2_schedule(n, d, P).unwrap();
        let expect = thm2_delta(n as f64, d as f64);
        assert!(close(delta.to_f64(), expect, 1e-13), "N={n} d={d}");
    }
}

#[test]
fn theorem2_sigma_values() {
    let (_, params, _, _) = theorem2_schedule(1, 1, P).unwrap();
    let eta = params.eta.to_f64();
    let lambda = params.core.lambda.to_f64();
    let h = params.core.h as f64;
    let t = params.core.t.to_f64();
    assert!(close(eta, (1.0 + (-lambda).exp2()) / 2.0 * (h / t).sqrt(), 1e-13));
    assert!(close(params.sigma.to_f64(), eta * eta, 1e-13));
    assert!(close(params.sigma0.to_f64(), eta * eta / (1.0 + (-lambda).exp2()), 1e-13));
    assert!(close(params.sigma0.to_f64(), 0.219853105659, 1e-11));
    assert!(close(params.sigma.to_f64(), 0.235190899977, 1e-11));
    assert!(params.sigma.to_f64() < 0.25);
}

#[test]
fn gamma_comparison_rows() {
    let rows = khintchine_gamma_comparison(12, P).unwrap();
    assert_eq!(rows.len(), 12);
    for r in &rows {
        let t = r.t as f64;
        assert!(close(r.delta.to_f64(), thm1_delta(t, 1.0), 1e-13));
        assert!(close(r.ratio.to_f64(), r.delta.to_f64() * t * (t + 1.0).ln(), 1e-13));
    }
    assert!(khintchine_gamma_comparison(0, P).is_err());
}

#[test]
fn corollary_families_validate_parameters() {
    assert!(corollary_family(FamilyKind::Cor2 { gamma: int(1) }).is_ok());
    assert!(corollary_family(FamilyKind::Cor2 { gamma: int(0) }).is_err());
    assert!(corollary_family(FamilyKind::Cor2 { gamma: int(2) }).is_err());
    assert!(corollary_family(FamilyKind::Cor1 { beta: rat(1, 2), gamma: rat(1, 2) }).is_ok());
    let f = corollary_family(FamilyKind::Cor2 { gamma: int(1) }).unwrap();
    assert_eq!(f.power, int(1));
    assert!(f.log);
}

#[test]
fn theorem3_cor2_on_integers() {
    let spec = SequenceSpec::family("linear", 1, "inf", json!({}), 200);
    let (seq, _) = spec.build(P).unwrap();
    let family = corollary_family(FamilyKind::Cor2 { gamma: int(1) }).unwrap();
    let (sched, _, params) = theorem3_schedule(&Thm3Config::new(family), &seq, P).unwrap();
    assert!(params.feasible());
    assert_eq!(params.n1, 19);
    assert!(close(to_f64(&params.a_engine), 166.1187, 1e-6));
    assert!(params.a.certainly_le_rat(&params.a_engine));
    // f(n1)/(A n1) with f(x) = x ln(x+1)
    let floor = 19.0 * 20f64.ln() / (to_f64(&params.a_engine) * 19.0);
    assert!(close(to_f64(&params.tail_floor), floor, 1e-9), "{}", to_f64(&params.tail_floor));
    assert!(params.c_quadrature.lo() <= params.c_analytic.hi());
    assert!(!params.c_overridden && params.c_analytic.certainly_le_rat(&params.c));
    assert!(!sched.label.is_empty());
}
