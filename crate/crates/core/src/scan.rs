//! Fast residuals `|q x_i - p_i|` for consecutive denominators.
//!
//! Rational coordinates use exact `i128` arithmetic. Irrational coordinates
//! are frozen to a 256-bit fixed-point fraction once; `q * F mod 2^256` then
//! gives the fractional part of `q x_i` with absolute error at most
//! `q * 2^-(bits)`. Anything outside these ranges takes the slow interval path.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::norm::Mag;
use crate::real::RatInterval;
use crate::target::{Coord, TargetVector};

const LIMIT: i128 = 1 << 62;
/// Largest denominator handled on the fast path.
pub(crate) const MAX_FAST_Q: u64 = 1 << 40;

#[derive(Clone, Debug)]
enum Fast {
    /// `int + num / den`, `0 <= num < den`
    Rat { int: i128, num: i128, den: i128 },
    /// `int + F / 2^256` with `F` as little-endian limbs
    Fixed { int: i128, limbs: [u64; 4], err: f64 },
    Slow,
}

/// Residual of one coordinate at one denominator.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Res {
    /// `|q x_i - p_i|` (rounded)
    pub val: f64,
    /// bound on `|val - true residual|` excluding f64 rounding of `val`
    pub abs_err: f64,
    /// `(k, den)` with residual exactly `k / den`
    pub exact: Option<(i128, i128)>,
    /// nearest integer could not be certified on the fast path
    pub ambiguous: bool,
}

impl Res {
    /// Bounds on the residual, padded for f64 rounding.
    #[inline]
    pub fn bounds(&self) -> (f64, f64) {
        let pad = self.abs_err + self.val * 4e-16;
        ((self.val - pad).max(0.0), self.val + pad)
    }
}

pub(crate) struct Scanner<'a> {
    x: &'a TargetVector,
    fast: Vec<Fast>,
}

fn fixed_split(iv: &RatInterval) -> Option<(i128, [u64; 4])> {
    let mid = (&iv.lo + &iv.hi) / BigInt::from(2);
    let scaled = mid * BigRational::from_integer(BigInt::one() << 256usize);
    let n = scaled.floor().to_integer();
    let (int, frac) = n.div_mod_floor(&(BigInt::one() << 256usize));
    let int = int.to_i128()?;
    let mut limbs = [0u64; 4];
    let (_, digits) = frac.to_u64_digits();
    for (i, d) in digits.into_iter().enumerate().take(4) {
        limbs[i] = d;
    }
    Some((int, limbs))
}

fn limbs_f64(l: &[u64; 4]) -> f64 {
    let mut v = 0.0;
    for (i, &d) in l.iter().enumerate() {
        v += d as f64 * 2f64.powi(64 * i as i32 - 256);
    }
    v
}

impl<'a> Scanner<'a> {
    pub fn new(x: &'a TargetVector) -> Self {
        let bits = x.precision().min(250);
        let fast = x
            .coords()
            .iter()
            .map(|c| match c {
                Coord::Rational(r) => {
                    let (int, rem) = r.numer().div_mod_floor(r.denom());
                    match (int.to_i128(), rem.to_i128(), r.denom().to_i128()) {
                        (Some(int), Some(num), Some(den)) if int.abs() < LIMIT && den < LIMIT => {
                            Fast::Rat { int, num, den }
                        }
                        _ => Fast::Slow,
                    }
                }
                Coord::Real(_) => match fixed_split(&c.interval(bits)) {
                    Some((int, limbs)) if int.abs() < LIMIT => Fast::Fixed {
                        int,
                        limbs,
                        err: 2f64.powi(-(bits as i32)),
                    },
                    _ => Fast::Slow,
                },
            })
            .collect();
        Scanner { x, fast }
    }

    pub fn dim(&self) -> usize {
        self.fast.len()
    }

    /// Residual of coordinate `i` at denominator `q`, with the nearest integer.
    #[inline]
    pub fn residual_with_p(&self, i: usize, q: u64) -> (Res, i128) {
        if q > MAX_FAST_Q {
            return (self.slow_residual(i, q), 0);
        }
        match &self.fast[i] {
            Fast::Rat { int, num, den } => {
                let qn = q as i128 * num;
                let (fl, t) = (qn / den, qn % den);
                let base = q as i128 * int + fl;
                let (k, p) = if 2 * t > *den { (den - t, base + 1) } else { (t, base) };
                (
                    Res {
                        val: k as f64 / *den as f64,
                        abs_err: 0.0,
                        exact: Some((k, *den)),
                        ambiguous: false,
                    },
                    p,
                )
            }
            Fast::Fixed { int, limbs, err } => {
                let mut out = [0u64; 4];
                let mut carry: u128 = 0;
                for k in 0..4 {
                    let t = limbs[k] as u128 * q as u128 + carry;
                    out[k] = t as u64;
                    carry = t >> 64;
                }
                let base = q as i128 * int + carry as i128;
                let abs_err = q as f64 * err;
                let frac = limbs_f64(&out);
                let up = out[3] >> 63 == 1 && out != [0, 0, 0, 1 << 63];
                let (val, p) = if up {
                    // 2^256 - frac
                    let mut neg = [0u64; 4];
                    let mut borrow = true;
                    for k in 0..4 {
                        let (v, b) = (!out[k]).overflowing_add(borrow as u64);
                        neg[k] = v;
                        borrow = b;
                    }
                    (limbs_f64(&neg), base + 1)
                } else {
                    (frac, base)
                };
                let ambiguous = (0.5 - val).abs() <= abs_err * 2.0 + 1e-300 || val <= abs_err * 2.0;
                (
                    Res {
                        val,
                        abs_err,
                        exact: None,
                        ambiguous,
                    },
                    p,
                )
            }
            Fast::Slow => (self.slow_residual(i, q), 0),
        }
    }

    #[inline]
    pub fn residual(&self, i: usize, q: u64) -> Res {
        self.residual_with_p(i, q).0
    }

    fn slow_residual(&self, i: usize, q: u64) -> Res {
        let mut r = Res {
            val: 0.0,
            abs_err: f64::INFINITY,
            exact: None,
            ambiguous: true,
        };
        if let Ok(p) = self.nearest(i, q) {
            let mag = Mag::residual(self.x.coord(i), &BigInt::from(q), &p);
            let ln = mag.ln_approx();
            r.val = ln.exp();
            r.abs_err = r.val * 1e-15;
            r.ambiguous = false;
            if let Some(e) = mag.exact() {
                if let (Some(n), Some(d)) = (e.numer().to_i128(), e.denom().to_i128()) {
                    r.exact = Some((n, d));
                    r.abs_err = 0.0;
                }
            }
        }
        r
    }

    /// Nearest integer to `q x_i`, ties rounded down, decided exactly.
    pub fn nearest(&self, i: usize, q: u64) -> Result<BigInt> {
        if q <= MAX_FAST_Q {
            let (res, p) = self.residual_with_p(i, q);
            if !matches!(self.fast[i], Fast::Slow) && !res.ambiguous {
                return Ok(BigInt::from(p));
            }
            if matches!(self.fast[i], Fast::Fixed { .. }) && (0.5 - res.val).abs() > 0.25 {
                // residual tiny but the rounding direction is certain
                return Ok(BigInt::from(p));
            }
        }
        nearest_exact(self.x.coord(i), q, self.x.precision())
    }

    pub fn nearest_vec(&self, q: u64) -> Result<Vec<BigInt>> {
        (0..self.dim()).map(|i| self.nearest(i, q)).collect()
    }

    /// Exact magnitude of the residual of coordinate `i` at `q`.
    pub fn mag(&self, i: usize, q: u64, p: &BigInt) -> Mag {
        Mag::residual(self.x.coord(i), &BigInt::from(q), p)
    }

    pub fn mags(&self, q: u64, p: &[BigInt]) -> Vec<Mag> {
        (0..self.dim()).map(|i| self.mag(i, q, &p[i])).collect()
    }
}

/// Nearest integer to `q c` via interval refinement; exact halves round down.
pub(crate) fn nearest_exact(c: &Coord, q: u64, precision: u32) -> Result<BigInt> {
    let qb = BigInt::from(q);
    if let Coord::Rational(r) = c {
        let v = r * BigRational::from_integer(qb);
        let fl = v.floor();
        let frac = &v - &fl;
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let p = if frac > half { fl.to_integer() + 1 } else { fl.to_integer() };
        return Ok(p);
    }
    let extra = 64 - q.leading_zeros() + 2;
    let mut bits = 64;
    loop {
        let iv = c.interval(bits + extra);
        let lo = &iv.lo * BigRational::from_integer(qb.clone());
        let hi = &iv.hi * BigRational::from_integer(qb.clone());
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        // nearest integer, ties down, is ceil(v - 1/2)
        let a = (&lo - &half).ceil().to_integer();
        let b = (&hi - &half).ceil().to_integer();
        if a == b {
            return Ok(a);
        }
        if bits >= 8 * precision {
            return Err(Error::precision(
                precision,
                format!("nearest integer to {q} * {}", c.describe()),
            ));
        }
        bits *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::RealExpr;

    #[test]
    fn rational_residuals_exact() {
        let x = TargetVector::from_ratios(&[(1, 3), (-7, 5)]).unwrap();
        let s = Scanner::new(&x);
        let (r, p) = s.residual_with_p(0, 2);
        assert_eq!(r.exact, Some((1, 3)));
        assert_eq!(p, 1);
        let (r, p) = s.residual_with_p(1, 3);
        // 3 * -7/5 = -4.2
        assert_eq!(r.exact, Some((1, 5)));
        assert_eq!(p, -4);
        // tie: 1/2 * ... use x = 1/2, q = 1 -> p = 0
        let h = TargetVector::from_ratios(&[(1, 2)]).unwrap();
        let (r, p) = Scanner::new(&h).residual_with_p(0, 1);
        assert_eq!((r.exact, p), (Some((1, 2)), 0));
        assert_eq!(nearest_exact(h.coord(0), 1, 256).unwrap(), BigInt::from(0));
        assert_eq!(nearest_exact(h.coord(0), 3, 256).unwrap(), BigInt::one());
    }

    #[test]
    fn fixed_residuals_match_intervals() {
        let x = TargetVector::new(vec![
            Coord::sqrt_minus(2, 1),
            Coord::real(RealExpr::Liouville { base: 10 }),
            Coord::sqrt_minus(7, 5),
        ])
        .unwrap();
        let s = Scanner::new(&x);
        for q in [1u64, 2, 5, 12, 29, 999_999, 1_000_000, 123_456_789] {
            for i in 0..3 {
                let (r, p) = s.residual_with_p(i, q);
                let pe = nearest_exact(x.coord(i), q, 256).unwrap();
                assert_eq!(BigInt::from(p), pe, "q = {q}, i = {i}");
                let m = Mag::residual(x.coord(i), &BigInt::from(q), &pe);
                let truth = m.ln_approx().exp();
                assert!((r.val - truth).abs() <= r.abs_err + truth * 1e-13, "q = {q}, i = {i}");
            }
        }
        // Liouville at q = 10^6: 10^6 * 10^-24 = 10^-18
        let r = s.residual(1, 1_000_000);
        assert!((r.val / 1e-18 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_and_large_integer_parts() {
        let x = TargetVector::new(vec![Coord::sqrt_minus(2, 40)]).unwrap();
        let s = Scanner::new(&x);
        let (r, p) = s.residual_with_p(0, 7);
        let exact = nearest_exact(x.coord(0), 7, 256).unwrap();
        assert_eq!(BigInt::from(p), exact);
        let v = 7.0 * (2f64.sqrt() - 40.0);
        assert!((r.val - (v - v.round()).abs()).abs() < 1e-12);
    }
}
