use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use wdioph::approx::{ordinary_exponent_estimate, singular_certificate, uniform_exponent_estimate};
use wdioph::dynamics::{covolume_decomposition_check, delta, gram_cross_check, submodule_covolume};
use wdioph::structure::{exponent_relation_check, solve_linear_diophantine};
use wdioph::{
    best_sequence, quasi_norm, quasi_norm_leq, Coord, EstimatorConfig, FlowPoint, SubmoduleBasis, TargetVector,
    Weight, WeightSet,
};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Weight with entries `n_i / m`, every `n_i >= 0`.
fn weight_strategy(d: usize) -> impl Strategy<Value = Weight> {
    (1u32..=12).prop_flat_map(move |m| {
        proptest::collection::vec(0u32..=m, d - 1).prop_map(move |mut cuts| {
            cuts.sort_unstable();
            let mut prev = 0;
            let mut pairs = Vec::with_capacity(d);
            for c in cuts {
                pairs.push(((c - prev) as i64, m as i64));
                prev = c;
            }
            pairs.push(((m - prev) as i64, m as i64));
            Weight::from_ratios(&pairs).unwrap()
        })
    })
}

fn proper_weight_strategy(d: usize) -> impl Strategy<Value = Weight> {
    weight_strategy(d).prop_filter("proper", |w| w.is_proper())
}

fn rational_vector(d: usize) -> impl Strategy<Value = Vec<(i64, i64)>> {
    proptest::collection::vec((-60i64..=60, 1i64..=40), d)
}

fn f64_quasi(x: &[f64], w: &[f64]) -> f64 {
    x.iter()
        .zip(w)
        .map(|(&v, &wi)| {
            let a = v.abs();
            if wi == 0.0 {
                if a < 1.0 {
                    0.0
                } else if a == 1.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                a.powf(1.0 / wi)
            }
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quasi_norm_matches_float_oracle(
        (w, xs) in (1usize..=3).prop_flat_map(|d| (weight_strategy(d), rational_vector(d)))
    ) {
        let x = TargetVector::from_ratios(&xs).unwrap();
        let v = quasi_norm(&x, &w).unwrap();
        let oracle = f64_quasi(&x.as_f64(), &w.as_f64());
        if oracle.is_infinite() {
            prop_assert!(v.is_infinite());
        } else if oracle == 0.0 {
            prop_assert!(v.ln_approx() == f64::NEG_INFINITY);
        } else {
            prop_assert!((v.ln_approx() - oracle.ln()).abs() < 1e-9 * (1.0 + oracle.ln().abs()));
        }
    }

    #[test]
    fn quasi_norm_homogeneity(
        w in weight_strategy(3),
        xs in rational_vector(3),
        mu in (1i64..=5, 1i64..=5),
        r in (1i64..=400, 1i64..=100),
    ) {
        // scaling x_i by mu^{n_i} scales the norm by mu^m, where w_i = n_i / m
        let m = w.denominator();
        let mu = rat(mu.0, mu.1);
        let pow = |e: u32| (0..e).fold(rat(1, 1), |acc, _| acc * &mu);
        let x = TargetVector::from_ratios(&xs).unwrap();
        let y: Vec<Coord> = xs
            .iter()
            .zip(w.numerators())
            .map(|(&(a, b), &n)| Coord::Rational(rat(a, b) * pow(n)))
            .collect();
        let y = TargetVector::new(y).unwrap();
        let r = rat(r.0, r.1);
        let zero_weight = w.numerators().contains(&0);
        if !zero_weight {
            prop_assert_eq!(
                quasi_norm_leq(&x, &w, &r).unwrap(),
                quasi_norm_leq(&y, &w, &(r * pow(m))).unwrap()
            );
        }
    }

    #[test]
    fn quasi_norm_monotone(w in weight_strategy(3), xs in rational_vector(3), grow in proptest::collection::vec(1i64..=4, 3)) {
        let x = TargetVector::from_ratios(&xs).unwrap();
        let ys: Vec<(i64, i64)> = xs.iter().zip(&grow).map(|(&(a, b), &g)| (a * g, b)).collect();
        let y = TargetVector::from_ratios(&ys).unwrap();
        let vx = quasi_norm(&x, &w).unwrap();
        let vy = quasi_norm(&y, &w).unwrap();
        prop_assert_ne!(vx.cmp(&vy).unwrap(), std::cmp::Ordering::Greater);
    }

    #[test]
    fn best_sequence_errors_strictly_decrease(w in weight_strategy(2), a in 1u64..=30, b in 2u64..=12) {
        let x = TargetVector::new(vec![Coord::sqrt_minus(a * a + b, a as i64), Coord::ratio(1, 7)]).unwrap();
        let seq = best_sequence(&x, &w, 2000).unwrap();
        prop_assert_eq!(seq.entries[0].q, 1);
        for pair in seq.entries.windows(2) {
            prop_assert!(pair[0].q < pair[1].q);
            prop_assert_eq!(pair[1].err.cmp(&pair[0].err).unwrap(), std::cmp::Ordering::Less);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ordinary_dominates_uniform(w in proper_weight_strategy(2), n in 2u64..=40) {
        // sqrt(n) - floor(sqrt(n)) with n not a square, next to a quadratic irrational
        let s = (n as f64).sqrt().floor() as i64;
        prop_assume!((s * s) as u64 != n);
        let x = TargetVector::new(vec![Coord::sqrt_minus(n, s), Coord::golden()]).unwrap();
        let cfg = EstimatorConfig::default();
        let u = uniform_exponent_estimate(&x, &w, 200_000, &cfg);
        let o = ordinary_exponent_estimate(&x, &w, 200_000, &cfg);
        if let (Ok(u), Ok(o)) = (u, o) {
            // per gap, ln q_n < ln q_{n+1} makes the ordinary ratio the larger one
            for g in &u.per_gap_exponents {
                if let Some(ord) = g.ordinary {
                    prop_assert!(ord >= g.uniform - 1e-12);
                }
            }
            prop_assert!(o.value >= u.value - 1e-12);
        }
    }

    #[test]
    fn certificates_are_monotone_in_delta(xs in rational_vector(2), k in 2i64..=20) {
        let x = TargetVector::from_ratios(&xs).unwrap();
        let ws = WeightSet::grid(2, &rat(1, 4)).unwrap();
        let small = singular_certificate(&x, &ws, &rat(1, k), 500).unwrap();
        let large = singular_certificate(&x, &ws, &rat(2, k), 500).unwrap();
        if small.succeeded() {
            prop_assert!(large.succeeded());
        }
        // a looser threshold never adds failing scales
        let fails = |c: &wdioph::CertificateReport| -> u64 {
            c.failures.iter().map(|f| f.q_to - f.q_from + 1).sum()
        };
        prop_assert!(fails(&large) <= fails(&small));
        prop_assert!(small.recheck(&x).unwrap());
        prop_assert!(large.recheck(&x).unwrap());
    }

    #[test]
    fn diophantine_matches_brute_force(a in -30i128..=30, b in -30i128..=30, c in -60i128..=60) {
        prop_assume!(a != 0 || b != 0);
        let sol = solve_linear_diophantine(a, b, c).unwrap();
        let mut brute = Vec::new();
        for x in -80i128..=80 {
            for y in -80i128..=80 {
                if a * x - b * y == c {
                    brute.push((x, y));
                }
            }
        }
        match sol {
            None => prop_assert!(brute.is_empty()),
            Some(f) => {
                prop_assert!(!brute.is_empty());
                for &(x, y) in &brute {
                    prop_assert!(f.contains(x, y));
                }
                for n in -3..=3 {
                    let (x, y) = f.member(n);
                    prop_assert_eq!(a * x - b * y, c);
                }
            }
        }
    }

    #[test]
    fn covolume_matches_float_gram(
        rows in proptest::collection::vec(proptest::collection::vec(-6i64..=6, 3), 1..=2),
        xs in rational_vector(2),
        t in 0.0f64..8.0,
    ) {
        let Ok(basis) = SubmoduleBasis::from_i64(&rows) else { return Ok(()) };
        let w = Weight::from_ratios(&[(1, 3), (2, 3)]).unwrap();
        let x = TargetVector::from_ratios(&xs).unwrap();
        let xf = x.as_f64();
        let wf = w.as_f64();
        // g = diag(e^{w_1 t}, e^{w_2 t}, e^{-t}) u_x applied to the saturated basis
        let image: Vec<[f64; 3]> = basis
            .vectors()
            .iter()
            .map(|v| {
                let v: Vec<f64> = v.iter().map(|c| c.to_string().parse().unwrap()).collect();
                [
                    (wf[0] * t).exp() * (v[0] + v[2] * xf[0]),
                    (wf[1] * t).exp() * (v[1] + v[2] * xf[1]),
                    (-t).exp() * v[2],
                ]
            })
            .collect();
        let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let gram = match image.len() {
            1 => dot(&image[0], &image[0]),
            _ => dot(&image[0], &image[0]) * dot(&image[1], &image[1]) - dot(&image[0], &image[1]).powi(2),
        };
        let cov = submodule_covolume(&basis, &x, &w, t).unwrap();
        let oracle = gram.sqrt();
        prop_assert!((cov - oracle).abs() <= 1e-6 * oracle.max(1e-6), "{} vs {}", cov, oracle);
        prop_assert!(gram_cross_check(&basis, &x).unwrap().equal);
    }

    #[test]
    fn decomposition_ratio_bounds(
        rows in proptest::collection::vec(proptest::collection::vec(-6i64..=6, 3), 1..=2),
        t in 0.0f64..10.0,
    ) {
        let Ok(basis) = SubmoduleBasis::from_i64(&rows) else { return Ok(()) };
        let w = Weight::from_ratios(&[(1, 4), (3, 4)]).unwrap();
        let x = TargetVector::new(vec![Coord::sqrt_minus(2, 1), Coord::ratio(2, 7)]).unwrap();
        let v = covolume_decomposition_check(&basis, &x, &w, t, 2f64.sqrt()).unwrap();
        // the two pieces are orthogonal, so the norm sits between their max and sqrt 2 times it
        prop_assert!(v.ratio >= 1.0 - 1e-9 && v.ratio <= 2f64.sqrt() + 1e-9, "{:?}", v);
        prop_assert!(v.passed);
    }

    #[test]
    fn shortest_vector_is_at_most_one(w in weight_strategy(2), xs in rational_vector(2), t in 0.0f64..6.0) {
        let x = TargetVector::from_ratios(&xs).unwrap();
        let d = delta(&FlowPoint::new(x, w, t).unwrap()).unwrap();
        prop_assert!(d > 0.0 && d <= 1.0 + 1e-12);
    }

    #[test]
    fn rational_points_collapse(a in 0i64..=30, q in 1i64..=30, t in 0.0f64..10.0) {
        prop_assume!(a <= q);
        let x = TargetVector::from_ratios(&[(a, q)]).unwrap();
        let d = delta(&FlowPoint::new(x, Weight::standard(1), t).unwrap()).unwrap();
        prop_assert!(d <= q as f64 * (-t).exp() + 1e-12);
    }

    #[test]
    fn exponent_relation_monotone(a in 1i64..1000, b in 1i64..1000) {
        prop_assume!(a != b);
        // map to (3/4, 1)
        let s = |k: i64| rat(3, 4) + rat(k, 4000);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let f_lo = exponent_relation_check(&s(lo)).unwrap();
        let f_hi = exponent_relation_check(&s(hi)).unwrap();
        prop_assert!(f_lo < f_hi);
        prop_assert!(f_lo > s(lo));
    }
}
