//! Integer-structure analytics: linear Diophantine families, the gcd
//! decomposition of consecutive best approximations, constructive point
//! families and the inheritance probe.

mod pairs;
mod probe;

pub use pairs::{consecutive_pair_analysis, Classification, JumpCheck, PairAnalysis, PairDecomposition, RowLabel};
pub use probe::{inheritance_probe, AffineMap, InheritanceProbeReport, PolyCurve, SampleStats};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::approx::{epsilon_singular_certificate, CertificateReport};
use crate::error::{Error, Result};
use crate::real::{CfRule, RealExpr};
use crate::target::{Coord, TargetVector};
use crate::weight::{Weight, WeightSet};

/// All solutions `(x0 + n b/g, y0 + n a/g)` of `a X - b Y = c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SolutionFamily {
    pub a: i128,
    pub b: i128,
    pub c: i128,
    pub base: (i128, i128),
    pub steps: (i128, i128),
    pub g: i128,
}

impl SolutionFamily {
    /// The `n`-th member.
    pub fn member(&self, n: i128) -> (i128, i128) {
        (self.base.0 + n * self.steps.0, self.base.1 + n * self.steps.1)
    }

    pub fn contains(&self, x: i128, y: i128) -> bool {
        self.a * x - self.b * y == self.c
            && match (self.steps.0, self.steps.1) {
                (0, s) => x == self.base.0 && (y - self.base.1) % s == 0,
                (s, _) => (x - self.base.0) % s == 0,
            }
    }
}

/// `(g, s, t)` with `a s + b t = g = gcd(a, b) >= 0`.
fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// Canonical solution family of `a X - b Y = c`, or `None` when `gcd(a, b)`
/// does not divide `c`. The base point has `0 <= x0 < |b / g|` when `b != 0`.
pub fn solve_linear_diophantine(a: i128, b: i128, c: i128) -> Result<Option<SolutionFamily>> {
    if a == 0 && b == 0 {
        return Err(Error::Domain("a and b are both zero".into()));
    }
    let (g, s, t) = ext_gcd(a, -b);
    if c % g != 0 {
        return Ok(None);
    }
    let k = c / g;
    // a (s k) - b (t k) = c
    let (mut x0, mut y0) = (s * k, t * k);
    let steps = (b / g, a / g);
    if steps.0 != 0 {
        let r = x0.rem_euclid(steps.0.abs());
        let n = (x0 - r) / steps.0;
        x0 = r;
        y0 -= n * steps.1;
    } else {
        // X is pinned to c / a; Y is free
        y0 = 0;
    }
    Ok(Some(SolutionFamily {
        a,
        b,
        c,
        base: (x0, y0),
        steps,
        g,
    }))
}

/// `sigma_1 = (sigma_2^2 - sigma_2 / 2) / (1 - sigma_2)` for any `sigma_2 != 1`.
pub fn exponent_relation_formula(sigma2: &BigRational) -> Result<BigRational> {
    let one = BigRational::one();
    if sigma2 == &one {
        return Err(Error::Domain("the relation is singular at 1".into()));
    }
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    Ok((sigma2 * sigma2 - sigma2 * half) / (one - sigma2))
}

/// The improved exponent on the open range `3/4 < sigma_2 < 1`.
pub fn exponent_relation_check(sigma2: &BigRational) -> Result<BigRational> {
    let lo = BigRational::new(BigInt::from(3), BigInt::from(4));
    if !(sigma2 > &lo && sigma2 < &BigRational::one()) {
        return Err(Error::Domain(format!("sigma_2 = {sigma2} must lie in (3/4, 1)")));
    }
    let s1 = exponent_relation_formula(sigma2)?;
    if s1 <= *sigma2 {
        return Err(Error::Domain(format!("relation gives {s1} <= {sigma2}")));
    }
    Ok(s1)
}

/// A point with a rational head and an irrational tail, with its guaranteed exponent.
#[derive(Clone, Debug)]
pub struct HyperplanePoint {
    pub x: TargetVector,
    pub w: Weight,
    pub head_len: usize,
    /// `(1 - sum_{j <= i} w_j)^{-1}`
    pub predicted_epsilon: BigRational,
}

/// The first `n` primes.
pub fn primes(n: usize) -> Vec<u64> {
    let mut out = Vec::new();
    let mut k = 2u64;
    while out.len() < n {
        if out.iter().all(|p| !k.is_multiple_of(*p)) {
            out.push(k);
        }
        k += 1;
    }
    out
}

/// `sqrt(p) - floor(sqrt(p))` for the first `n` primes.
pub fn default_tail(n: usize) -> Vec<Coord> {
    primes(n)
        .into_iter()
        .map(|p| Coord::sqrt_minus(p, num_integer::Roots::sqrt(&p) as i64))
        .collect()
}

/// Builds `(head, tail)` in `Q^i x R^{d-i}`. Without an explicit tail the
/// irrational part is `sqrt(p) - floor(sqrt(p))` over the first primes.
pub fn hyperplane_point(w: &Weight, head: &[BigRational], tail: Option<Vec<Coord>>) -> Result<HyperplanePoint> {
    let d = w.dim();
    let i = head.len();
    if i < 1 || i >= d {
        return Err(Error::Domain(format!("head length {i} must lie in 1..={}", d - 1)));
    }
    let sum: BigRational = w.entries()[..i].iter().cloned().fold(BigRational::zero(), |s, v| s + v);
    let rest = BigRational::one() - sum;
    if !rest.is_positive() {
        return Err(Error::InvalidWeight("the weight head sums to 1".into()));
    }
    let tail = tail.unwrap_or_else(|| default_tail(d - i));
    if tail.len() != d - i {
        return Err(Error::DimensionMismatch {
            expected: d - i,
            actual: tail.len(),
        });
    }
    let mut coords: Vec<Coord> = head.iter().cloned().map(Coord::Rational).collect();
    coords.extend(tail);
    Ok(HyperplanePoint {
        x: TargetVector::new(coords)?,
        w: w.clone(),
        head_len: i,
        predicted_epsilon: rest.recip(),
    })
}

impl HyperplanePoint {
    /// `epsilon_singular_certificate` at `predicted - tolerance`.
    pub fn verify(&self, tolerance: &BigRational, q_max: u64) -> Result<CertificateReport> {
        let eps = &self.predicted_epsilon - tolerance;
        let eps = if eps < BigRational::one() { BigRational::one() } else { eps };
        epsilon_singular_certificate(&self.x, &WeightSet::singleton(self.w.clone()), &eps, q_max)
    }
}

/// A one-dimensional target with a prescribed continued fraction and its
/// classical exponents.
#[derive(Clone, Debug)]
pub struct CfVector {
    pub x: TargetVector,
    pub rule: CfRule,
    /// limiting `limsup ln q_{n+1} / ln q_n`
    pub sigma: f64,
    /// the same ratio evaluated on convergents with `q_n < 10^60`
    pub sigma_finite: f64,
    /// uniform exponent: 1 for every irrational in dimension one
    pub sigma_hat: f64,
}

pub fn continued_fraction_vector(rule: CfRule) -> Result<CfVector> {
    let sigma = match &rule {
        CfRule::DenominatorFeedback => 2.0,
        CfRule::Periodic { period, .. } if period.is_empty() || period.contains(&0) => {
            return Err(Error::Domain("the expansion must be infinite with positive quotients".into()));
        }
        _ => 1.0,
    };
    if let CfRule::Seeded { max: 0, .. } = rule {
        return Err(Error::Domain("seeded quotients need max >= 1".into()));
    }
    let limit = BigInt::from(10).pow(60);
    let qs: Vec<BigInt> = rule
        .convergents()
        .map(|(_, _, q)| q)
        .take_while(|q| q < &limit)
        .collect();
    let ln = |q: &BigInt| crate::norm::ln_big(q);
    let ratios: Vec<f64> = qs
        .windows(2)
        .filter(|p| p[0] > BigInt::one())
        .map(|p| ln(&p[1]) / ln(&p[0]))
        .collect();
    let tail = &ratios[ratios.len() / 2..];
    let sigma_finite = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CfVector {
        x: TargetVector::new(vec![Coord::real(RealExpr::ContinuedFraction(rule.clone()))])?,
        rule,
        sigma,
        sigma_finite,
        sigma_hat: 1.0,
    })
}

fn to_i128(n: &BigInt) -> Result<i128> {
    use num_traits::ToPrimitive;
    n.to_i128()
        .ok_or_else(|| Error::Domain(format!("integer {n} exceeds the 128-bit range")))
}

fn gcd_i128(a: i128, b: i128) -> i128 {
    a.gcd(&b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn diophantine_examples() {
        let f = solve_linear_diophantine(3, 5, 1).unwrap().unwrap();
        assert_eq!((f.base, f.steps), ((2, 1), (5, 3)));
        assert_eq!(solve_linear_diophantine(4, 6, 3).unwrap(), None);
        let f = solve_linear_diophantine(4, 6, 2).unwrap().unwrap();
        assert_eq!((f.base, f.steps), ((2, 1), (3, 2)));
        assert!(solve_linear_diophantine(0, 0, 1).is_err());
        let f = solve_linear_diophantine(0, 4, -8).unwrap().unwrap();
        assert_eq!(f.base, (0, 2));
        let f = solve_linear_diophantine(-3, 0, 6).unwrap().unwrap();
        assert_eq!(f.base, (-2, 0));
        assert!(f.contains(-2, 17));
    }

    #[test]
    fn exponent_relation_examples() {
        assert_eq!(exponent_relation_check(&rat(4, 5)).unwrap(), rat(6, 5));
        assert_eq!(exponent_relation_check(&rat(9, 10)).unwrap(), rat(18, 5));
        assert_eq!(exponent_relation_formula(&rat(3, 4)).unwrap(), rat(3, 4));
        assert!(exponent_relation_check(&rat(3, 4)).is_err());
        assert!(exponent_relation_check(&rat(1, 1)).is_err());
    }

    #[test]
    fn hyperplane_examples() {
        let w = Weight::from_ratios(&[(1, 2), (1, 2)]).unwrap();
        let h = hyperplane_point(&w, &[rat(1, 3)], None).unwrap();
        assert_eq!(h.predicted_epsilon, rat(2, 1));
        let w3 = Weight::from_ratios(&[(1, 3), (1, 3), (1, 3)]).unwrap();
        let h3 = hyperplane_point(&w3, &[rat(0, 1), rat(1, 2)], None).unwrap();
        assert_eq!(h3.predicted_epsilon, rat(3, 1));
        let h0 = hyperplane_point(&w, &[rat(0, 1)], None).unwrap();
        assert_eq!(h0.predicted_epsilon, rat(2, 1));
        let r = h.verify(&rat(1, 4), 100_000).unwrap();
        assert!(r.succeeded());
        let bad = Weight::from_ratios(&[(1, 1), (0, 1)]).unwrap();
        assert!(hyperplane_point(&bad, &[rat(1, 3)], None).is_err());
    }

    #[test]
    fn continued_fraction_oracles() {
        let g = continued_fraction_vector(CfRule::ones()).unwrap();
        assert_eq!((g.sigma, g.sigma_hat), (1.0, 1.0));
        assert!((g.x.as_f64()[0] - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        assert!((g.sigma_finite - 1.0).abs() < 0.02);
        let l = continued_fraction_vector(CfRule::Linear).unwrap();
        assert!(l.sigma_finite < 1.1, "{}", l.sigma_finite);
        let f = continued_fraction_vector(CfRule::DenominatorFeedback).unwrap();
        assert!((f.sigma_finite - 2.0).abs() < 0.05, "{}", f.sigma_finite);
    }

    #[test]
    fn feedback_rule_ordinary_exponent() {
        // few best denominators (1, 2, 5, 27, 734, 538783) up to 10^6; the
        // last per-gap ordinary ratio already sits at 2
        let f = continued_fraction_vector(CfRule::DenominatorFeedback).unwrap();
        let s = crate::approx::best_sequence(&f.x, &Weight::standard(1), 1_000_000).unwrap();
        assert_eq!(s.qs(), vec![1, 2, 5, 27, 734, 538783]);
        let last = s.entries.last().unwrap();
        let o = -last.err.ln_approx() / (last.q as f64).ln();
        assert!((o - 2.0).abs() < 0.05, "{o}");
    }
}
