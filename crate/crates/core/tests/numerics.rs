use dyelim::numerics::{fmt_dyadic, fmt_rational, parse_dyadic, parse_rational, rat, ExactRational, RealInterval};
use num_traits::Signed;
use proptest::prelude::*;

fn rational() -> impl Strategy<Value = ExactRational> {
    (-10_000i64..10_000, 1i64..500).prop_map(|(n, d)| rat(n, d))
}

fn interval() -> impl Strategy<Value = (RealInterval, ExactRational)> {
    (rational(), 0i64..100, 0i64..=100).prop_map(|(lo, w, t)| {
        let hi = &lo + rat(w, 100);
        let x = &lo + rat(w * t, 10_000);
        (RealInterval::new(lo, hi, 128).unwrap(), x)
    })
}

proptest! {
    #[test]
    fn rational_text_round_trips(x in rational()) {
        prop_assert_eq!(parse_rational(&fmt_rational(&x)).unwrap(), x);
    }

    #[test]
    fn dyadic_text_round_trips(n in -1_000_000i64..1_000_000, e in 0u32..80) {
        let x = ExactRational::new(n.into(), num_bigint::BigInt::from(1) << e);
        prop_assert_eq!(parse_dyadic(&fmt_dyadic(&x)).unwrap(), x);
    }

    #[test]
    fn arithmetic_encloses_points((a, x) in interval(), (b, y) in interval()) {
        prop_assert!(a.add(&b).contains(&(&x + &y)));
        prop_assert!(a.sub(&b).contains(&(&x - &y)));
        prop_assert!(a.mul(&b).contains(&(&x * &y)));
        prop_assert!(a.abs().contains(&x.abs()));
    }

    #[test]
    fn division_encloses_points((a, x) in interval(), (b, y) in interval()) {
        prop_assume!(b.lo() > &rat(0, 1));
        prop_assert!(a.div(&b).unwrap().contains(&(&x / &y)));
    }

    #[test]
    fn transcendental_enclosures(n in 1i64..1000) {
        let x = RealInterval::from_int(n, 128);
        let ln = x.ln().unwrap();
        prop_assert!((ln.to_f64() - (n as f64).ln()).abs() < 1e-12);
        prop_assert!(ln.exp().contains(&rat(n, 1)));
        let s = x.sqrt().unwrap();
        prop_assert!(s.mul(&s).contains(&rat(n, 1)));
    }
}
