use dyelim::engine::{
    canonical_json, certificate_digest, run_prop1, run_prop2, verify_certificate, Certificate, EngineConfig,
};
use dyelim::forms::SequenceSpec;
use dyelim::numerics::{int, nearest_int_dist, parse_dyadic, pow2};
use dyelim::theorems::{theorem1_schedule, theorem2_schedule};
use proptest::prelude::*;
use serde_json::{json, Map, Value};

const P: u32 = 256;

fn lacunary(count: usize) -> SequenceSpec {
    SequenceSpec::family("lacunary", 1, "inf", json!({"base": "2"}), count)
}

#[test]
fn lacunary_prop1_run() {
    let spec = lacunary(12);
    let (seq, _) = spec.build(P).unwrap();
    let (_, params, sched) = theorem1_schedule(1, 1, P).unwrap();
    let out = run_prop1(&seq, &sched, 12, None, EngineConfig::default()).unwrap();
    assert_eq!(out.trace.len(), 12);
    for e in &out.trace {
        assert!(e.fraction >= e.lower_bound, "stage {}", e.n);
        assert!(e.lower_bound > int(0));
    }
    assert!(out.trace.windows(2).all(|w| w[0].level <= w[1].level));

    // ‖2^n θ‖ ≥ δ in original coordinates
    let cert = Certificate::from_prop1(&out, &spec.digest(), json!({}));
    let v = cert.value();
    let theta = parse_dyadic(v["leaf"]["theta"][0].as_str().unwrap()).unwrap();
    for n in 1..=12 {
        let dist = nearest_int_dist(&(pow2(n) * &theta));
        assert!(dist >= params.core.delta_engine, "n = {n}");
    }

    let rep = verify_certificate(v, &spec, P);
    assert!(rep.pass(), "{:?}", rep.failures().collect::<Vec<_>>());
    assert_eq!(cert.digest(), Some(certificate_digest(v).as_str()));
}

#[test]
fn certificate_is_reproducible() {
    let spec = lacunary(8);
    let (seq, _) = spec.build(P).unwrap();
    let (_, _, sched) = theorem1_schedule(1, 1, P).unwrap();
    let a = run_prop1(&seq, &sched, 8, None, EngineConfig::default()).unwrap();
    let b = run_prop1(&seq, &sched, 8, None, EngineConfig::default()).unwrap();
    let ca = Certificate::from_prop1(&a, &spec.digest(), json!({}));
    let cb = Certificate::from_prop1(&b, &spec.digest(), json!({}));
    assert_eq!(ca.to_canonical(), cb.to_canonical());
}

#[test]
fn lacunary_prop2_tree() {
    let spec = lacunary(51);
    let (seq, _) = spec.build(P).unwrap();
    let (_, _, sched, p2) = theorem2_schedule(1, 1, P).unwrap();
    let out = run_prop2(&seq, &sched, &p2, 2, EngineConfig::default()).unwrap();
    let branching: Vec<_> = out.nodes.iter().filter_map(|n| n.branching.as_ref()).collect();
    assert!(!branching.is_empty());
    assert!(branching.iter().all(|b| b.good >= 2));
    for b in branching.iter().filter(|b| b.exact) {
        if let Some(bound) = &b.bound {
            assert!(&int(b.good as i64) >= bound);
        }
    }
    let leaves = out.nodes.iter().filter(|n| n.leaf.is_some()).count();
    assert!(leaves >= 2);
    let cert = Certificate::from_prop2(&out, &spec.digest(), json!({}));
    let rep = verify_certificate(cert.value(), &spec, P);
    assert!(rep.pass(), "{:?}", rep.failures().collect::<Vec<_>>());
}

fn scalar() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<i64>().prop_map(Value::from),
        any::<bool>().prop_map(Value::from),
        "[a-z0-9/^]{0,12}".prop_map(Value::from),
    ]
}

fn json_value() -> impl Strategy<Value = Value> {
    scalar().prop_recursive(3, 32, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..5).prop_map(Value::from),
            prop::collection::vec(("[a-z_]{1,6}", inner), 0..5).prop_map(|kv| {
                Value::Object(kv.into_iter().collect::<Map<_, _>>())
            }),
        ]
    })
}

fn reversed_keys(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut out = Map::new();
            for (k, x) in m.iter().rev() {
                out.insert(k.clone(), reversed_keys(x));
            }
            Value::Object(out)
        }
        Value::Array(a) => Value::Array(a.iter().map(reversed_keys).collect()),
        x => x.clone(),
    }
}

proptest! {
    #[test]
    fn canonical_json_round_trips(v in json_value()) {
        let text = canonical_json(&v);
        let back: Value = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &v);
        prop_assert_eq!(canonical_json(&back), text);
    }

    #[test]
    fn digest_ignores_key_order_and_own_field(v in json_value(), tag in "[0-9a-f]{8}") {
        let mut obj = json!({"payload": v});
        let d = certificate_digest(&obj);
        prop_assert_eq!(certificate_digest(&reversed_keys(&obj)), d.clone());
        obj["certificate_digest"] = Value::from(tag);
        prop_assert_eq!(certificate_digest(&obj), d);
    }

    #[test]
    fn digest_sees_every_change(v in json_value(), extra in scalar()) {
        let a = json!({"payload": v.clone()});
        let b = json!({"payload": v, "extra": extra});
        prop_assert_ne!(certificate_digest(&a), certificate_digest(&b));
    }
}
