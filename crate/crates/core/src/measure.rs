//! Measures of the bad sets `E = {θ : ‖a·θ + b‖ ≤ ε}`: the strip-bound style
//! bounds, the exact one-dimensional measure, a seeded Monte-Carlo
//! estimator, and the closed-cube predicate used by the elimination engine.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;

use crate::engine::DyadicCube;
use crate::forms::{affine_range, LinearForm, Norm, NormSelector};
use crate::numerics::{big, ceil, floor, int, rat, to_f64, ExactRational, RealInterval};
use crate::{Error, Result};

/// Name of the Monte-Carlo generator, recorded next to every estimate.
pub const PRNG_NAME: &str = "splitmix64";

/// Samples drawn from one generator stream; streams are seeded from
/// `(seed, block index)` so the estimate does not depend on thread count.
const MC_BLOCK: u64 = 1 << 16;

/// `2ε(1 + d^{1/p}/R)`.
pub fn strip_bound(
    r: &Norm,
    epsilon: &ExactRational,
    d: usize,
    p: &NormSelector,
    precision_bits: u32,
) -> Result<RealInterval> {
    cube_strip_bound(r, epsilon, d, p, &int(1), precision_bits)
}

/// `2ε(1 + d^{1/p}/(R·r))`, the bound for a cube of side `r`.
pub fn cube_strip_bound(
    r_norm: &Norm,
    epsilon: &ExactRational,
    d: usize,
    p: &NormSelector,
    side: &ExactRational,
    precision_bits: u32,
) -> Result<RealInterval> {
    if !r_norm.is_positive() {
        return Err(Error::Domain("R must be positive".into()));
    }
    if !side.is_positive() {
        return Err(Error::Domain("cube side must be positive".into()));
    }
    let root = p.d_root_p(d, precision_bits);
    let two_eps = epsilon * int(2);
    // Exact whenever d^{1/p} and R are rational.
    if let (true, Some(rv)) = (root.is_exact(), &r_norm.exact) {
        let v = &two_eps * (int(1) + root.lo() / (rv * side));
        return Ok(RealInterval::exact(v, precision_bits));
    }
    let denom = r_norm.enclosure.scale(side);
    let q = root.div(&denom)?;
    Ok(q.add(&RealInterval::from_int(1, precision_bits)).scale(&two_eps))
}

/// Convenience wrapper for a rational `R`.
pub fn strip_bound_rational(
    r: &ExactRational,
    epsilon: &ExactRational,
    d: usize,
    p: &NormSelector,
    precision_bits: u32,
) -> Result<RealInterval> {
    strip_bound(&Norm::from_exact(r.clone(), precision_bits), epsilon, d, p, precision_bits)
}

/// Exact measure of `{θ ∈ [u, v] : ‖aθ + b‖ ≤ ε}`.
pub fn exact_bad_measure_1d(
    a: &ExactRational,
    b: &ExactRational,
    epsilon: &ExactRational,
    u: &ExactRational,
    v: &ExactRational,
) -> Result<ExactRational> {
    if a.is_zero() {
        return Err(Error::Domain("a = 0: constant forms are handled by the caller".into()));
    }
    if u >= v {
        return Err(Error::InvalidArgument("interval needs u < v".into()));
    }
    if epsilon.is_negative() {
        return Err(Error::InvalidArgument("epsilon must be non-negative".into()));
    }
    if *epsilon >= rat(1, 2) {
        return Ok(v - u);
    }
    let (a, b) = if a.is_negative() {
        (-a, -b)
    } else {
        (a.clone(), b.clone())
    };
    let ylo = &a * u + &b;
    let yhi = &a * v + &b;
    let overlap = |k: &BigInt| {
        let k = big(k.clone());
        let lo = (&k - epsilon).max(ylo.clone());
        let hi = (&k + epsilon).min(yhi.clone());
        if hi > lo {
            hi - lo
        } else {
            int(0)
        }
    };
    let k_min = ceil(&(&ylo - epsilon));
    let k_max = floor(&(&yhi + epsilon));
    let in_lo = ceil(&(&ylo + epsilon));
    let in_hi = floor(&(&yhi - epsilon));
    let mut total = int(0);
    if in_lo <= in_hi {
        total += big(&in_hi - &in_lo + 1) * epsilon * int(2);
        let mut k = k_min.clone();
        while k < in_lo {
            total += overlap(&k);
            k += 1;
        }
        let mut k = in_hi + 1;
        while k <= k_max {
            total += overlap(&k);
            k += 1;
        }
    } else {
        let mut k = k_min;
        while k <= k_max {
            total += overlap(&k);
            k += 1;
        }
    }
    Ok(total / a)
}

/// Axis-aligned rational box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalBox {
    pub lo: Vec<ExactRational>,
    pub hi: Vec<ExactRational>,
}

impl RationalBox {
    pub fn unit(d: usize) -> Self {
        Self {
            lo: vec![int(0); d],
            hi: vec![int(1); d],
        }
    }

    pub fn from_cube(c: &DyadicCube) -> Self {
        let (lo, hi) = c.bounds();
        Self { lo, hi }
    }

    pub fn volume(&self) -> ExactRational {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .fold(int(1), |acc, w| acc * w)
    }
}

#[derive(Clone, Debug)]
pub struct BadSetSpec {
    pub form: LinearForm,
    pub epsilon: ExactRational,
    pub region: RationalBox,
}

impl BadSetSpec {
    pub fn new(form: LinearForm, epsilon: ExactRational, region: RationalBox) -> Result<Self> {
        if !epsilon.is_positive() {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if region.lo.len() != form.dim() || region.hi.len() != form.dim() {
            return Err(Error::Dimension {
                expected: form.dim(),
                got: region.lo.len(),
            });
        }
        if region.lo.iter().zip(&region.hi).any(|(l, h)| l >= h) {
            return Err(Error::InvalidArgument("region must have positive volume".into()));
        }
        Ok(Self {
            form,
            epsilon,
            region,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub hits: u64,
    pub samples: u64,
    pub seed: u64,
}

/// Hit-fraction estimate of `μ(E ∩ region)` with its binomial standard error.
/// Deterministic in `seed`, independent of the thread count.
pub fn mc_bad_measure(spec: &BadSetSpec, samples: u64, seed: u64) -> Result<McEstimate> {
    if samples < 100 {
        return Err(Error::InvalidArgument("at least 100 samples are required".into()));
    }
    let a: Vec<f64> = spec.form.a.iter().map(to_f64).collect();
    let b = to_f64(&spec.form.b);
    let eps = to_f64(&spec.epsilon);
    let lo: Vec<f64> = spec.region.lo.iter().map(to_f64).collect();
    let width: Vec<f64> = spec
        .region
        .lo
        .iter()
        .zip(&spec.region.hi)
        .map(|(l, h)| to_f64(&(h - l)))
        .collect();
    let blocks = samples.div_ceil(MC_BLOCK);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let n = MC_BLOCK.min(samples - blk * MC_BLOCK);
            let mut rng = SplitMix64::seed_from_u64(block_seed(seed, blk));
            let mut h = 0u64;
            for _ in 0..n {
                let mut y = b;
                for i in 0..a.len() {
                    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                    y += a[i] * (lo[i] + width[i] * u);
                }
                if (y - y.round()).abs() <= eps {
                    h += 1;
                }
            }
            h
        })
        .sum();
    let vol = to_f64(&spec.region.volume());
    let frac = hits as f64 / samples as f64;
    Ok(McEstimate {
        estimate: frac * vol,
        stderr: (frac * (1.0 - frac) / samples as f64).sqrt() * vol,
        hits,
        samples,
        seed,
    })
}

fn block_seed(seed: u64, block: u64) -> u64 {
    let mut s = SplitMix64::seed_from_u64(seed ^ block.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    s.next_u64()
}

/// True iff the minimum of `‖L‖` over the closed cube is below `δ`.
pub fn cube_meets_bad(form: &LinearForm, cube: &DyadicCube, delta: &ExactRational) -> Result<bool> {
    if !delta.is_positive() {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    let (m, big_m) = affine_range(form, cube)?;
    // Smallest integer k with k > m − δ; bad iff it is also below M + δ.
    let k = floor(&(m - delta)) + 1;
    Ok(big(k) < big_m + delta)
}

/// Exact `min ‖L‖` over a closed rational box.
pub fn min_dist_over_box(form: &LinearForm, region: &RationalBox) -> Result<ExactRational> {
    let (lo, hi) = form.range_over_box(&region.lo, &region.hi)?;
    Ok(crate::numerics::min_dist_over(&lo, &hi))
}

/// Used by reports: nearest `f64` of an exact bound.
pub fn bound_f64(b: &RealInterval) -> f64 {
    b.hi().to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::nearest_int_dist;
    use proptest::prelude::*;

    const P: u32 = 128;

    fn exact_bound(r: ExactRational, eps: ExactRational, d: usize, p: NormSelector) -> ExactRational {
        let b = strip_bound_rational(&r, &eps, d, &p, P).unwrap();
        assert!(b.is_exact());
        b.lo().clone()
    }

    #[test]
    fn strip_bound_examples() {
        assert_eq!(exact_bound(int(2), rat(1, 8), 1, NormSelector::Inf), rat(3, 8));
        assert_eq!(exact_bound(int(10), rat(1, 10), 4, NormSelector::Two), rat(6, 25));
        assert!(exact_bound(int(1), rat(3, 5), 1, NormSelector::Inf) >= int(1));
        assert!(strip_bound_rational(&int(0), &rat(1, 8), 1, &NormSelector::Inf, P).is_err());
    }

    #[test]
    fn cube_strip_bound_examples() {
        let c = |r: i64, eps, d, p: NormSelector, side| {
            cube_strip_bound(&Norm::from_exact(int(r), P), &eps, d, &p, &side, P)
                .unwrap()
                .lo()
                .clone()
        };
        assert_eq!(c(4, rat(1, 8), 1, NormSelector::Inf, rat(1, 2)), rat(3, 8));
        assert_eq!(c(16, rat(1, 16), 2, NormSelector::Inf, rat(1, 4)), rat(5, 32));
        for (r, e, d) in [(3, rat(1, 7), 2), (5, rat(2, 9), 3)] {
            assert_eq!(
                c(r, e.clone(), d, NormSelector::One, int(1)),
                exact_bound(int(r), e, d, NormSelector::One)
            );
        }
        let irrational =
            cube_strip_bound(&Norm::from_exact(int(3), P), &rat(1, 4), 2, &NormSelector::Two, &int(1), P)
                .unwrap();
        assert!(!irrational.is_exact());
        assert!(irrational.contains(&rat(5, 10)) || irrational.to_f64() > 0.0);
        assert!((irrational.to_f64() - 0.5 * (1.0 + 2f64.sqrt() / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn exact_measure_examples() {
        let m = |a: ExactRational, b, e, u, v| exact_bad_measure_1d(&a, &b, &e, &u, &v).unwrap();
        assert_eq!(m(int(1), int(0), rat(1, 4), int(0), int(1)), rat(1, 2));
        assert_eq!(m(int(3), int(0), rat(1, 8), int(0), int(1)), rat(1, 4));
        // a = R over any interval of length 1/R gives 2ε/R.
        assert_eq!(m(int(7), rat(1, 3), rat(1, 5), rat(2, 9), rat(2, 9) + rat(1, 7)), rat(2, 35));
        assert!(exact_bad_measure_1d(&int(0), &int(0), &rat(1, 4), &int(0), &int(1)).is_err());
    }

    #[test]
    fn cube_predicate_examples() {
        let f = |a: i64, b: ExactRational| LinearForm::new(vec![int(a)], b).unwrap();
        let c = |l, x: i64| DyadicCube::new(l, vec![x]).unwrap();
        assert!(cube_meets_bad(&f(4, int(0)), &c(2, 0), &rat(1, 4)).unwrap());
        assert!(!cube_meets_bad(&f(1, int(0)), &c(2, 1), &rat(1, 8)).unwrap());
        assert!(cube_meets_bad(&f(3, rat(1, 2)), &c(2, 0), &rat(1, 100)).unwrap());
    }

    #[test]
    fn monte_carlo_examples() {
        let one = |e| {
            BadSetSpec::new(LinearForm::new(vec![int(1)], int(0)).unwrap(), e, RationalBox::unit(1))
                .unwrap()
        };
        let est = mc_bad_measure(&one(rat(1, 4)), 1_000_000, 0).unwrap();
        assert!((est.estimate - 0.5).abs() <= 4.0 * est.stderr);
        let full = mc_bad_measure(&one(rat(1, 2)), 10_000, 3).unwrap();
        assert_eq!(full.estimate, 1.0);
        let spec = BadSetSpec::new(
            LinearForm::new(vec![int(5), int(7)], rat(1, 3)).unwrap(),
            rat(1, 20),
            RationalBox::unit(2),
        )
        .unwrap();
        let est = mc_bad_measure(&spec, 1_000_000, 0).unwrap();
        let r = LinearForm::new(vec![int(5), int(7)], int(0)).unwrap().norm(&NormSelector::Two, P);
        let bound = strip_bound(&r, &rat(1, 20), 2, &NormSelector::Two, P).unwrap();
        assert!(est.estimate <= bound.to_f64() + 4.0 * est.stderr);
        assert_eq!(est, mc_bad_measure(&spec, 1_000_000, 0).unwrap());
        assert!(mc_bad_measure(&spec, 99, 0).is_err());
    }

    proptest! {
        #[test]
        fn exact_measure_below_strip_bound(
            a in (1i64..200, 1i64..5), neg in any::<bool>(),
            b in (-20i64..20, 1i64..9),
            e in (1i64..50, 2i64..100),
            u in (-10i64..10, 1i64..9),
        ) {
            let a = if neg { -rat(a.0, a.1) } else { rat(a.0, a.1) };
            let eps = rat(e.0, e.1).min(rat(1, 2));
            let b = rat(b.0, b.1);
            let u = rat(u.0, u.1);
            let v = &u + int(1);
            let m = exact_bad_measure_1d(&a, &b, &eps, &u, &v).unwrap();
            let bound = strip_bound_rational(&a.abs(), &eps, 1, &NormSelector::Inf, 64).unwrap();
            prop_assert!(m <= *bound.lo());
            prop_assert_eq!(&m, &exact_bad_measure_1d(&a, &(&b + int(1)), &eps, &u, &v).unwrap());
            prop_assert_eq!(&m, &exact_bad_measure_1d(&-&a, &-&b, &eps, &u, &v).unwrap());
        }

        #[test]
        fn predicate_monotone_and_sound(
            a in proptest::collection::vec(-30i64..30, 1..=3),
            b in (-5i64..5, 1i64..7),
            d1 in (1i64..30, 1i64..60),
            extra in (0i64..10, 1i64..20),
            level in 0u32..5,
            seed in 0u64..1000,
            samples in proptest::collection::vec(proptest::collection::vec(0i64..=16, 3), 6),
        ) {
            let d = a.len();
            let form = LinearForm::new(a.iter().map(|&x| int(x)).collect(), rat(b.0, b.1)).unwrap();
            let coords: Vec<u64> = (0..d).map(|i| (seed >> (3 * i)) % (1 << level)).collect();
            let cube = DyadicCube::new(level, coords).unwrap();
            let delta = rat(d1.0, d1.1);
            let bigger = &delta + rat(extra.0, extra.1);
            let bad = cube_meets_bad(&form, &cube, &delta).unwrap();
            if bad {
                prop_assert!(cube_meets_bad(&form, &cube, &bigger).unwrap());
            } else {
                let (lo, hi) = cube.bounds();
                // Vertices and rational interior points all clear δ.
                for s in &samples {
                    let th: Vec<ExactRational> = (0..d)
                        .map(|i| &lo[i] + (&hi[i] - &lo[i]) * rat(s[i], 16))
                        .collect();
                    prop_assert!(nearest_int_dist(&form.evaluate(&th).unwrap()) >= delta);
                }
            }
        }
    }

    #[test]
    fn block_seeds_are_distinct() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|b| block_seed(0, b)).collect();
        assert_eq!(s.len(), 1000);
    }

    #[test]
    fn exact_measure_large_slope() {
        let a = big(BigInt::from(1u64) << 40);
        let m = exact_bad_measure_1d(&a, &int(0), &rat(1, 10), &int(0), &int(1)).unwrap();
        assert_eq!(m, rat(1, 5));
        assert!(m.to_f64().is_some());
    }
}
