//! Computable reals.
//!
//! A [`ComputableReal`] is a closed expression over rationals, square roots of
//! rationals, Liouville-type series and continued fractions. Every expression
//! can produce a dyadic approximation `m / 2^k` with `|x - m/2^k| <= 2^-k` for
//! any `k`; the wrapper turns those into nested rational intervals.

use std::fmt;
use std::sync::Mutex;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Closed interval `[lo, hi]` with exact rational endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatInterval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl RatInterval {
    pub fn point(r: BigRational) -> Self {
        RatInterval { lo: r.clone(), hi: r }
    }

    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        debug_assert!(lo <= hi);
        RatInterval { lo, hi }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, r: &BigRational) -> bool {
        &self.lo <= r && r <= &self.hi
    }

    pub fn contains_interval(&self, other: &RatInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Image under `|.|`.
    pub fn abs(&self) -> RatInterval {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            RatInterval::new(-self.hi.clone(), -self.lo.clone())
        } else {
            let m = if -self.lo.clone() > self.hi {
                -self.lo.clone()
            } else {
                self.hi.clone()
            };
            RatInterval::new(BigRational::zero(), m)
        }
    }

    /// Power of a non-negative interval.
    pub fn pow_nonneg(&self, e: u32) -> RatInterval {
        debug_assert!(!self.lo.is_negative());
        RatInterval::new(pow_rat(&self.lo, e), pow_rat(&self.hi, e))
    }

    pub fn max(&self, other: &RatInterval) -> RatInterval {
        RatInterval::new(
            self.lo.clone().max(other.lo.clone()),
            self.hi.clone().max(other.hi.clone()),
        )
    }

    pub fn midpoint_f64(&self) -> f64 {
        rat_to_f64(&((&self.lo + &self.hi) / BigInt::from(2)))
    }
}

pub(crate) fn pow_rat(r: &BigRational, e: u32) -> BigRational {
    BigRational::new_raw(
        num_traits::pow(r.numer().clone(), e as usize),
        num_traits::pow(r.denom().clone(), e as usize),
    )
}

/// Nearest f64 to a rational (exact enough for reporting).
pub fn rat_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // scale down huge numerators/denominators before dividing
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift = (nb - db) - 60;
    let scaled = if shift > 0 {
        r / BigRational::from_integer(BigInt::one() << shift as usize)
    } else {
        r * BigRational::from_integer(BigInt::one() << (-shift) as usize)
    };
    scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
}

/// `round(n / 2^s)` with ties away from zero.
fn round_shift(n: &BigInt, s: u32) -> BigInt {
    if s == 0 {
        return n.clone();
    }
    let half = BigInt::one() << (s - 1) as usize;
    if n.sign() == Sign::Minus {
        -((-n + half) >> s as usize)
    } else {
        (n + half) >> s as usize
    }
}

/// `round(n / d)` for `d > 0`.
fn round_div(n: &BigInt, d: &BigInt) -> BigInt {
    let two = BigInt::from(2);
    let (q, r) = n.div_mod_floor(d);
    if &r * &two >= *d {
        q + 1
    } else {
        q
    }
}

fn round_rational_scaled(r: &BigRational, bits: u32) -> BigInt {
    let n = r.numer() << bits as usize;
    round_div(&n, r.denom())
}

/// Rule generating the partial quotients `[a0; a1, a2, ...]` of a continued fraction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CfRule {
    /// Preperiod followed by a repeating block. `head[0]` is `a0`.
    Periodic { head: Vec<u64>, period: Vec<u64> },
    /// `a0 = 0`, `a_n = n` for `n >= 1`.
    Linear,
    /// `a0 = 0`, `a1 = 1`, `a_{n+1} = q_n` (denominator feedback, doubly exponential growth).
    DenominatorFeedback,
    /// `a0 = 0`, partial quotients drawn deterministically from `1..=max` with the given seed.
    Seeded { seed: u64, max: u64 },
}

impl CfRule {
    pub fn ones() -> Self {
        CfRule::Periodic {
            head: vec![0],
            period: vec![1],
        }
    }

    fn describe(&self) -> String {
        match self {
            CfRule::Periodic { head, period } => {
                let h: Vec<String> = head.iter().map(|a| a.to_string()).collect();
                let p: Vec<String> = period.iter().map(|a| a.to_string()).collect();
                format!("cf([{}; ({})*])", h.join(","), p.join(","))
            }
            CfRule::Linear => "cf(n)".to_string(),
            CfRule::DenominatorFeedback => "cf(q)".to_string(),
            CfRule::Seeded { seed, max } => format!("cf(random:{seed}:{max})"),
        }
    }

    fn splitmix(seed: u64, n: u64) -> u64 {
        let mut z = seed
            .wrapping_add(n.wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Convergent iterator: yields `(a_n, p_n, q_n)` for `n = 0, 1, ...`.
    pub fn convergents(&self) -> Convergents<'_> {
        Convergents {
            rule: self,
            n: 0,
            p: (BigInt::one(), BigInt::zero()),
            q: (BigInt::zero(), BigInt::one()),
        }
    }

    fn partial_quotient(&self, n: usize, q_prev: &BigInt) -> BigInt {
        match self {
            CfRule::Periodic { head, period } => {
                if n < head.len() {
                    BigInt::from(head[n])
                } else if period.is_empty() {
                    BigInt::zero()
                } else {
                    BigInt::from(period[(n - head.len()) % period.len()])
                }
            }
            CfRule::Linear => BigInt::from(n as u64),
            CfRule::DenominatorFeedback => {
                if n == 0 {
                    BigInt::zero()
                } else {
                    q_prev.clone()
                }
            }
            CfRule::Seeded { seed, max } => {
                if n == 0 {
                    BigInt::zero()
                } else {
                    BigInt::from(1 + Self::splitmix(*seed, n as u64) % (*max).max(1))
                }
            }
        }
    }
}

pub struct Convergents<'a> {
    rule: &'a CfRule,
    n: usize,
    // (p_{n-1}, p_{n-2}), (q_{n-1}, q_{n-2})
    p: (BigInt, BigInt),
    q: (BigInt, BigInt),
}

impl Iterator for Convergents<'_> {
    type Item = (BigInt, BigInt, BigInt);

    fn next(&mut self) -> Option<Self::Item> {
        let a = self.rule.partial_quotient(self.n, &self.q.0);
        if self.n > 0 && a.is_zero() {
            // finite expansion exhausted
            return None;
        }
        let p = &a * &self.p.0 + &self.p.1;
        let q = &a * &self.q.0 + &self.q.1;
        self.p = (p.clone(), std::mem::take(&mut self.p.0));
        self.q = (q.clone(), std::mem::take(&mut self.q.0));
        self.n += 1;
        Some((a, p, q))
    }
}

/// Expression tree of a computable real.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RealExpr {
    Rational(BigRational),
    /// Non-negative square root of a non-negative rational.
    Sqrt(BigRational),
    Sum(Vec<RealExpr>),
    Product(Box<RealExpr>, Box<RealExpr>),
    Scale(BigRational, Box<RealExpr>),
    /// `sum_{n>=1} base^{-n!}`
    Liouville { base: u32 },
    ContinuedFraction(CfRule),
}

impl RealExpr {
    pub fn rational(r: BigRational) -> Self {
        RealExpr::Rational(r)
    }

    pub fn int(n: i64) -> Self {
        RealExpr::Rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// `sqrt(n) - m`
    pub fn sqrt_minus(n: u64, m: i64) -> Self {
        RealExpr::Sum(vec![
            RealExpr::Sqrt(BigRational::from_integer(BigInt::from(n))),
            RealExpr::int(-m),
        ])
    }

    /// `(sqrt(5) - 1) / 2`
    pub fn golden() -> Self {
        RealExpr::Scale(
            BigRational::new(BigInt::one(), BigInt::from(2)),
            Box::new(RealExpr::sqrt_minus(5, 1)),
        )
    }

    pub fn add(self, other: RealExpr) -> Self {
        RealExpr::Sum(vec![self, other])
    }

    pub fn mul(self, other: RealExpr) -> Self {
        RealExpr::Product(Box::new(self), Box::new(other))
    }

    pub fn scale(self, r: BigRational) -> Self {
        RealExpr::Scale(r, Box::new(self))
    }

    /// Exact value when the expression is a rational number in disguise.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self {
            RealExpr::Rational(r) => Some(r.clone()),
            RealExpr::Sqrt(r) => {
                let n = r.numer().sqrt();
                let d = r.denom().sqrt();
                if &n * &n == *r.numer() && &d * &d == *r.denom() {
                    Some(BigRational::new(n, d))
                } else {
                    None
                }
            }
            RealExpr::Sum(terms) => {
                let mut acc = BigRational::zero();
                for t in terms {
                    acc += t.as_rational()?;
                }
                Some(acc)
            }
            RealExpr::Product(a, b) => {
                let a = a.as_rational();
                let b = b.as_rational();
                match (a, b) {
                    (Some(a), Some(b)) => Some(a * b),
                    (Some(a), None) | (None, Some(a)) if a.is_zero() => Some(a),
                    _ => None,
                }
            }
            RealExpr::Scale(r, e) => {
                if r.is_zero() {
                    Some(BigRational::zero())
                } else {
                    e.as_rational().map(|v| v * r)
                }
            }
            RealExpr::Liouville { .. } => None,
            RealExpr::ContinuedFraction(rule) => match rule {
                CfRule::Periodic { head, period } if period.is_empty() || period == &[0] => {
                    let (_, p, q) = rule.convergents().take(head.len()).last()?;
                    Some(BigRational::new(p, q))
                }
                _ => None,
            },
        }
    }

    /// Conservative irrationality test: `true` only when the value is provably irrational.
    pub fn known_irrational(&self) -> bool {
        match self {
            RealExpr::Rational(_) => false,
            RealExpr::Sqrt(r) => !r.is_negative() && self.as_rational().is_none(),
            RealExpr::Sum(terms) => {
                let mut irr = 0;
                for t in terms {
                    if t.as_rational().is_some() {
                        continue;
                    }
                    if !t.known_irrational() {
                        return false;
                    }
                    irr += 1;
                }
                irr == 1
            }
            RealExpr::Product(a, b) => match (a.as_rational(), b.as_rational()) {
                (Some(r), None) => !r.is_zero() && b.known_irrational(),
                (None, Some(r)) => !r.is_zero() && a.known_irrational(),
                _ => false,
            },
            RealExpr::Scale(r, e) => !r.is_zero() && e.known_irrational(),
            RealExpr::Liouville { base } => *base >= 2,
            RealExpr::ContinuedFraction(rule) => match rule {
                CfRule::Periodic { period, .. } => !(period.is_empty() || period.iter().all(|&a| a == 0)),
                _ => true,
            },
        }
    }

    /// Integer `m` with `|x - m / 2^bits| <= 2^-bits`.
    pub fn approx(&self, bits: u32) -> BigInt {
        match self {
            RealExpr::Rational(r) => round_rational_scaled(r, bits),
            RealExpr::Sqrt(r) => {
                assert!(!r.is_negative(), "square root of a negative rational");
                let g = 2;
                let n = (r.numer() << (2 * (bits + g)) as usize) / r.denom();
                let s = n.sqrt();
                round_shift(&s, g)
            }
            RealExpr::Sum(terms) => {
                if terms.is_empty() {
                    return BigInt::zero();
                }
                let g = (usize::BITS - terms.len().leading_zeros()) + 2;
                let total: BigInt = terms.iter().map(|t| t.approx(bits + g)).sum();
                round_shift(&total, g)
            }
            RealExpr::Product(a, b) => {
                let ma0: BigInt = a.approx(0).abs() + 1;
                let mb0: BigInt = b.approx(0).abs() + 1;
                let g = (ma0 + mb0 + BigInt::one()).bits() as u32 + 2;
                let k = bits + g;
                let prod = a.approx(k) * b.approx(k);
                round_shift(&prod, 2 * k - bits)
            }
            RealExpr::Scale(r, e) => {
                let g = r.numer().bits() as u32 + 2;
                let m = e.approx(bits + g);
                let n = r.numer() * m;
                let d = r.denom() << g as usize;
                round_div(&n, &d)
            }
            RealExpr::Liouville { base } => {
                assert!(*base >= 2, "Liouville base must be at least 2");
                let mut sum = BigRational::zero();
                let mut fact: u64 = 1;
                let mut n: u64 = 1;
                loop {
                    fact = fact.saturating_mul(n.max(1));
                    if n > 1 && fact > (bits as u64) + 4 {
                        // remaining tail < 2 * base^{-fact} <= 2^{-bits-3}
                        break;
                    }
                    let den = num_traits::pow(BigInt::from(*base), fact as usize);
                    sum += BigRational::new(BigInt::one(), den);
                    n += 1;
                }
                round_rational_scaled(&sum, bits)
            }
            RealExpr::ContinuedFraction(rule) => {
                let target = BigInt::one() << (bits + 2) as usize;
                let mut last: Option<(BigInt, BigInt)> = None;
                let mut it = rule.convergents().peekable();
                while let Some((_, p, q)) = it.next() {
                    let done = match it.peek() {
                        Some((_, _, q_next)) => &q * q_next >= target,
                        None => true,
                    };
                    last = Some((p, q));
                    if done {
                        break;
                    }
                }
                let (p, q) = last.expect("continued fraction has at least a0");
                round_div(&(p << bits as usize), &q)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            RealExpr::Rational(r) => r.to_string(),
            RealExpr::Sqrt(r) => format!("sqrt({r})"),
            RealExpr::Sum(ts) => {
                let parts: Vec<String> = ts.iter().map(|t| t.describe()).collect();
                format!("({})", parts.join(" + "))
            }
            RealExpr::Product(a, b) => format!("{}*{}", a.describe(), b.describe()),
            RealExpr::Scale(r, e) => format!("({r})*{}", e.describe()),
            RealExpr::Liouville { base } => format!("liouville({base})"),
            RealExpr::ContinuedFraction(rule) => rule.describe(),
        }
    }
}

/// Dyadic interval `[lo, hi] / 2^exp`.
#[derive(Clone, Debug)]
struct Dyadic {
    lo: BigInt,
    hi: BigInt,
    exp: u32,
}

/// A computable real with a cache of its finest interval so far.
///
/// Intervals returned by [`ComputableReal::interval`] are nested: each one is
/// contained in every interval returned before it.
pub struct ComputableReal {
    expr: RealExpr,
    cache: Mutex<Option<Dyadic>>,
}

impl ComputableReal {
    pub fn new(expr: RealExpr) -> Self {
        ComputableReal {
            expr,
            cache: Mutex::new(None),
        }
    }

    pub fn expr(&self) -> &RealExpr {
        &self.expr
    }

    /// Interval of width at most `2^-k` containing the value.
    pub fn interval(&self, k: u32) -> RatInterval {
        let mut cache = self.cache.lock().expect("interval cache poisoned");
        if let Some(d) = cache.as_ref() {
            let width = &d.hi - &d.lo;
            // width / 2^exp <= 2^-k  <=>  width << k <= 2^exp
            if (width << k as usize) <= (BigInt::one() << d.exp as usize) {
                return to_interval(d);
            }
        }
        let exp = k + 1;
        let m = self.expr.approx(exp);
        let mut fresh = Dyadic {
            lo: &m - 1,
            hi: &m + 1,
            exp,
        };
        if let Some(old) = cache.as_ref() {
            if old.exp <= exp {
                let s = (exp - old.exp) as usize;
                let olo = &old.lo << s;
                let ohi = &old.hi << s;
                if olo > fresh.lo {
                    fresh.lo = olo;
                }
                if ohi < fresh.hi {
                    fresh.hi = ohi;
                }
            }
        }
        let out = to_interval(&fresh);
        *cache = Some(fresh);
        out
    }

    pub fn to_f64(&self) -> f64 {
        self.interval(64).midpoint_f64()
    }
}

fn to_interval(d: &Dyadic) -> RatInterval {
    let den = BigInt::one() << d.exp as usize;
    RatInterval::new(
        BigRational::new(d.lo.clone(), den.clone()),
        BigRational::new(d.hi.clone(), den),
    )
}

impl Clone for ComputableReal {
    fn clone(&self) -> Self {
        let cached = self.cache.lock().expect("interval cache poisoned").clone();
        ComputableReal {
            expr: self.expr.clone(),
            cache: Mutex::new(cached),
        }
    }
}

impl fmt::Debug for ComputableReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComputableReal({})", self.expr.describe())
    }
}

impl PartialEq for ComputableReal {
    fn eq(&self, other: &Self) -> bool {
        self.expr == other.expr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn sqrt_two_interval_contains_known_digits() {
        let x = ComputableReal::new(RealExpr::sqrt_minus(2, 1));
        let iv = x.interval(100);
        // sqrt(2) - 1 = 0.41421356237309504880168872420969807856967187537694...
        let lo = r(414213562373095, 1_000_000_000_000_000);
        let hi = r(414213562373096, 1_000_000_000_000_000);
        assert!(iv.lo > lo && iv.hi < hi);
        assert!(iv.width() <= BigRational::new(BigInt::one(), BigInt::one() << 100usize));
    }

    #[test]
    fn intervals_are_nested() {
        let x = ComputableReal::new(RealExpr::golden());
        let mut prev = x.interval(4);
        for k in [8, 7, 20, 64, 63, 200] {
            let next = x.interval(k);
            assert!(prev.contains_interval(&next), "k = {k}");
            prev = next;
        }
    }

    #[test]
    fn golden_ratio_matches_continued_fraction() {
        let a = ComputableReal::new(RealExpr::golden());
        let b = ComputableReal::new(RealExpr::ContinuedFraction(CfRule::ones()));
        let ia = a.interval(200);
        let ib = b.interval(200);
        assert!(ia.lo <= ib.hi && ib.lo <= ia.hi);
    }

    #[test]
    fn liouville_partial_sum() {
        let x = ComputableReal::new(RealExpr::Liouville { base: 10 });
        let iv = x.interval(120);
        let approx = r(110001, 1_000_000);
        let diff = &iv.lo - &approx;
        // x - 0.110001 = 10^-24 + 10^-120 + ...
        let lower = BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(10), 24));
        assert!(&diff * BigInt::from(2) >= lower);
        assert!(diff < lower * BigInt::from(2));
    }

    #[test]
    fn products_and_scales() {
        // (sqrt(2))^2 = 2
        let s = RealExpr::Sqrt(r(2, 1));
        let x = ComputableReal::new(s.clone().mul(s));
        assert!(x.interval(150).contains(&r(2, 1)));
        let y = ComputableReal::new(RealExpr::sqrt_minus(3, 1).scale(r(-3, 7)));
        let v = y.to_f64();
        assert!((v - (-3.0 / 7.0) * (3f64.sqrt() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn feedback_continued_fraction_denominators() {
        let qs: Vec<BigInt> = CfRule::DenominatorFeedback
            .convergents()
            .take(7)
            .map(|(_, _, q)| q)
            .collect();
        let expect: Vec<BigInt> = [1u64, 1, 2, 5, 27, 734, 538_783]
            .iter()
            .map(|&v| BigInt::from(v))
            .collect();
        assert_eq!(qs, expect);
    }

    #[test]
    fn rational_detection() {
        assert_eq!(RealExpr::Sqrt(r(9, 4)).as_rational(), Some(r(3, 2)));
        assert_eq!(RealExpr::Sqrt(r(2, 1)).as_rational(), None);
        assert_eq!(
            RealExpr::sqrt_minus(4, 1).scale(r(1, 2)).as_rational(),
            Some(r(1, 2))
        );
    }
}
