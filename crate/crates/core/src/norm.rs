//! Weighted quasi-norms and exact comparisons against rational thresholds.
//!
//! `||v||_w = max_{w_i != 0} |v_i|^{1/w_i}`. With `w_i = n_i / m` every
//! comparison `|v_i|^{1/w_i} <= base^{a/b}` is equivalent to the integer-power
//! comparison `|v_i|^{m b} <= base^{a n_i}`, which is decided on exact rationals
//! or on nested intervals refined up to the target precision.

use std::cmp::Ordering;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::real::{pow_rat, ComputableReal, RatInterval};
use crate::target::{affine_interval, Coord, TargetVector};
use crate::weight::Weight;

/// Natural log of a positive big integer.
pub fn ln_big(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        use num_traits::ToPrimitive;
        if let Some(v) = n.to_f64() {
            if v.is_finite() {
                return v.abs().ln();
            }
        }
    }
    let shift = bits.saturating_sub(64);
    let top: BigInt = n.abs() >> shift as usize;
    use num_traits::ToPrimitive;
    top.to_f64().unwrap_or(f64::NAN).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a non-negative rational (`-inf` at zero).
pub fn ln_rat(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    let n = r.numer().abs();
    let d = r.denom();
    // r = t * 2^(e - 64) with t a 64-bit integer quotient
    let e = n.bits() as i64 - d.bits() as i64;
    let shift = 64 - e;
    let t = if shift >= 0 {
        (n << shift as usize) / d
    } else {
        n / (d << (-shift) as usize)
    };
    t.to_f64().unwrap_or(f64::NAN).ln() - shift as f64 * std::f64::consts::LN_2
}

/// A non-negative real: an exact rational or `|a X + b|` for a computable `X`.
#[derive(Clone, Debug)]
pub(crate) enum Mag {
    Rat(BigRational),
    Lin {
        a: BigRational,
        base: Arc<ComputableReal>,
        b: BigRational,
    },
}

impl Mag {
    /// `|c|`
    pub fn of_coord(c: &Coord) -> Mag {
        match c {
            Coord::Rational(r) => Mag::Rat(r.abs()),
            Coord::Real(rc) => Mag::Lin {
                a: rc.scale.clone(),
                base: rc.base.clone(),
                b: rc.shift.clone(),
            },
        }
    }

    /// `|q c - p|`
    pub fn residual(c: &Coord, q: &BigInt, p: &BigInt) -> Mag {
        let qr = BigRational::from_integer(q.clone());
        let pr = BigRational::from_integer(p.clone());
        match c {
            Coord::Rational(r) => Mag::Rat((r * &qr - pr).abs()),
            Coord::Real(rc) => {
                let a = &rc.scale * &qr;
                if a.is_zero() {
                    return Mag::Rat((&rc.shift * &qr - pr).abs());
                }
                Mag::Lin {
                    a,
                    base: rc.base.clone(),
                    b: &rc.shift * &qr - pr,
                }
            }
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            Mag::Rat(r) => Some(r),
            Mag::Lin { .. } => None,
        }
    }

    /// Interval of width at most `2^-bits` for the magnitude.
    pub fn interval(&self, bits: u32) -> RatInterval {
        match self {
            Mag::Rat(r) => RatInterval::point(r.clone()),
            Mag::Lin { a, base, b } => affine_interval(a, base, b, bits).abs(),
        }
    }

    pub fn ln_approx(&self) -> f64 {
        match self {
            Mag::Rat(r) => ln_rat(r),
            Mag::Lin { .. } => {
                let mut bits = 64;
                loop {
                    let iv = self.interval(bits);
                    if iv.lo.is_positive() {
                        let w = iv.width();
                        if w * BigInt::from(1u64 << 60) <= iv.lo || bits >= 4096 {
                            return ln_rat(&((&iv.lo + &iv.hi) / BigInt::from(2)));
                        }
                    } else if bits >= 4096 {
                        return ln_rat(&iv.hi);
                    }
                    bits *= 2;
                }
            }
        }
    }

    /// Symbolic equality of two magnitudes over the same irrational base.
    fn same_form(&self, other: &Mag) -> bool {
        match (self, other) {
            (
                Mag::Lin { a, base, b },
                Mag::Lin {
                    a: a2,
                    base: base2,
                    b: b2,
                },
            ) => {
                let same_base = Arc::ptr_eq(base, base2) || base.expr() == base2.expr();
                same_base
                    && base.expr().known_irrational()
                    && ((a == a2 && b == b2) || (a == &-a2.clone() && b == &-b2.clone()))
            }
            _ => false,
        }
    }

    fn is_irrational(&self) -> bool {
        match self {
            Mag::Rat(_) => false,
            Mag::Lin { a, base, .. } => !a.is_zero() && base.expr().known_irrational(),
        }
    }
}

fn is_tight(iv: &RatInterval, precision: u32) -> bool {
    // width * 2^P <= max(lo, 2^-P)
    let w = iv.width() * BigRational::from_integer(BigInt::one() << precision as usize);
    let floor = BigRational::new(BigInt::one(), BigInt::one() << precision as usize);
    let lo = if iv.lo > floor { iv.lo.clone() } else { floor };
    w <= lo
}

/// Decides `x^ex` against `y^ey` for non-negative reals.
///
/// Exact when both sides are rational. Otherwise intervals are refined from 64
/// bits upwards; once both are relatively tight to `2^-precision` without
/// separating, the comparison is reported as precision limited, except for a
/// symbolic equality of two forms over the same irrational base.
pub(crate) fn cmp_pow(x: &Mag, ex: u32, y: &Mag, ey: u32, precision: u32, ctx: &str) -> Result<Ordering> {
    let g = ex.gcd(&ey).max(1);
    let (ex, ey) = (ex / g, ey / g);
    if let (Some(a), Some(b)) = (x.exact(), y.exact()) {
        return Ok(pow_rat(a, ex).cmp(&pow_rat(b, ey)));
    }
    if ex == ey && x.same_form(y) {
        return Ok(Ordering::Equal);
    }
    let guard = 32 - ex.max(ey).leading_zeros() + 2;
    let cap = 8 * precision + guard;
    let mut bits = 64 + guard;
    loop {
        let ix = x.interval(bits);
        let iy = y.interval(bits);
        let px = ix.pow_nonneg(ex);
        let py = iy.pow_nonneg(ey);
        if px.hi < py.lo {
            return Ok(Ordering::Less);
        }
        if px.lo > py.hi {
            return Ok(Ordering::Greater);
        }
        if px.is_point() && py.is_point() {
            return Ok(px.lo.cmp(&py.lo));
        }
        let tight = is_tight(&ix, precision) && is_tight(&iy, precision);
        if tight || bits >= cap {
            // an irrational magnitude is never zero
            if x.is_irrational() && py.is_point() && py.lo.is_zero() {
                return Ok(Ordering::Greater);
            }
            if y.is_irrational() && px.is_point() && px.lo.is_zero() {
                return Ok(Ordering::Less);
            }
            return Err(Error::precision(precision, ctx.to_string()));
        }
        bits = (bits * 2).min(cap);
    }
}

/// Contribution of one coordinate to a quasi-norm.
#[derive(Clone, Debug)]
pub(crate) enum Term {
    Zero,
    One,
    Infinite,
    /// `mag^{m / n}` where `m` is the weight's common denominator.
    Pow { mag: Mag, n: u32 },
}

/// The weighted quasi-norm of a vector, kept in a form that supports exact
/// comparisons.
///
/// `approx` and `ln_approx` are double-precision readings for reporting; every
/// decision goes through the exact comparison methods.
#[derive(Clone, Debug)]
pub struct QuasiNormValue {
    terms: Vec<Term>,
    m: u32,
    precision: u32,
    ln_approx: f64,
}

impl QuasiNormValue {
    pub(crate) fn from_mags(mags: Vec<Mag>, w: &Weight, precision: u32) -> Result<Self> {
        let m = w.denominator();
        let one = Mag::Rat(BigRational::one());
        let mut terms = Vec::with_capacity(mags.len());
        let mut ln = f64::NEG_INFINITY;
        for (mag, &n) in mags.into_iter().zip(w.numerators()) {
            let term = if n == 0 {
                match cmp_pow(&mag, 1, &one, 1, precision, "zero-weight coordinate against 1")? {
                    Ordering::Less => Term::Zero,
                    Ordering::Equal => Term::One,
                    Ordering::Greater => Term::Infinite,
                }
            } else {
                Term::Pow { mag, n }
            };
            let t_ln = match &term {
                Term::Zero => f64::NEG_INFINITY,
                Term::One => 0.0,
                Term::Infinite => f64::INFINITY,
                Term::Pow { mag, n } => {
                    let l = mag.ln_approx();
                    if l == f64::NEG_INFINITY {
                        l
                    } else {
                        l * m as f64 / *n as f64
                    }
                }
            };
            ln = ln.max(t_ln);
            terms.push(term);
        }
        Ok(QuasiNormValue {
            terms,
            m,
            precision,
            ln_approx: ln,
        })
    }

    /// Double-precision value (may underflow to zero for tiny errors; see `ln_approx`).
    pub fn approx(&self) -> f64 {
        self.ln_approx.exp()
    }

    /// Natural log of the value.
    pub fn ln_approx(&self) -> f64 {
        self.ln_approx
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| match t {
            Term::Zero => true,
            Term::Pow { mag, .. } => mag.exact().is_some_and(|r| r.is_zero()),
            _ => false,
        })
    }

    pub fn is_infinite(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, Term::Infinite))
    }

    /// Exact value when every contributing term is rational and integral-powered.
    pub fn exact(&self) -> Option<BigRational> {
        let mut best = BigRational::zero();
        for t in &self.terms {
            let v = match t {
                Term::Zero => BigRational::zero(),
                Term::One => BigRational::one(),
                Term::Infinite => return None,
                Term::Pow { mag, n } => {
                    let r = mag.exact()?;
                    if r.is_zero() {
                        BigRational::zero()
                    } else if self.m.is_multiple_of(*n) {
                        pow_rat(r, self.m / n)
                    } else {
                        return None;
                    }
                }
            };
            if v > best {
                best = v;
            }
        }
        Some(best)
    }

    /// `value <= base^exp` (or `<` when `strict`), for rational `base >= 0` and exponent.
    pub fn cmp_power(&self, base: &BigRational, exp: &BigRational, strict: bool) -> Result<bool> {
        if base.is_negative() {
            return Err(Error::Domain(format!("threshold base {base} is negative")));
        }
        // base^(a/b) with a possibly negative: rewrite as (1/base)^(|a|/b)
        let (base, exp) = if exp.is_negative() {
            if base.is_zero() {
                return Ok(!self.is_infinite());
            }
            (base.recip(), -exp.clone())
        } else {
            (base.clone(), exp.clone())
        };
        let a = exp.numer().clone();
        let b = exp.denom().clone();
        let a: u32 = u32::try_from(&a).map_err(|_| Error::Domain("threshold exponent too large".into()))?;
        let b: u32 = u32::try_from(&b).map_err(|_| Error::Domain("threshold exponent too large".into()))?;
        let rhs = Mag::Rat(base.clone());
        for t in &self.terms {
            let ord = match t {
                Term::Zero => {
                    if base.is_zero() && a > 0 {
                        Ordering::Equal
                    } else {
                        Ordering::Less
                    }
                }
                Term::One => pow_rat(&BigRational::one(), 1).cmp(&pow_rat(&base, a)),
                Term::Infinite => Ordering::Greater,
                Term::Pow { mag, n } => cmp_pow(
                    mag,
                    self.m * b,
                    &rhs,
                    a * n,
                    self.precision,
                    &format!("quasi-norm term against {base}^({exp})"),
                )?,
            };
            let ok = if strict { ord == Ordering::Less } else { ord != Ordering::Greater };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn leq(&self, r: &BigRational) -> Result<bool> {
        self.cmp_power(r, &BigRational::one(), false)
    }

    pub fn lt(&self, r: &BigRational) -> Result<bool> {
        self.cmp_power(r, &BigRational::one(), true)
    }

    fn term_cmp(&self, i: usize, other: &QuasiNormValue, j: usize) -> Result<Ordering> {
        let rank = |t: &Term| match t {
            Term::Zero => 0,
            Term::Pow { .. } => 1,
            Term::One => 2,
            Term::Infinite => 3,
        };
        match (&self.terms[i], &other.terms[j]) {
            (Term::Pow { mag: x, n: nx }, Term::Pow { mag: y, n: ny }) => cmp_pow(
                x,
                self.m * ny,
                y,
                other.m * nx,
                self.precision.max(other.precision),
                "comparison of quasi-norm terms",
            ),
            (Term::Pow { mag, n }, Term::One) => cmp_pow(
                mag,
                self.m,
                &Mag::Rat(BigRational::one()),
                *n,
                self.precision,
                "quasi-norm term against 1",
            ),
            (Term::One, Term::Pow { .. }) => other.term_cmp(j, self, i).map(Ordering::reverse),
            (Term::Pow { mag, .. }, Term::Zero) => Ok(if mag.exact().is_some_and(|r| r.is_zero()) {
                Ordering::Equal
            } else {
                Ordering::Greater
            }),
            (Term::Zero, Term::Pow { .. }) => other.term_cmp(j, self, i).map(Ordering::reverse),
            (a, b) => Ok(rank(a).cmp(&rank(b))),
        }
    }

    fn argmax(&self) -> Result<usize> {
        let mut best = 0;
        for i in 1..self.terms.len() {
            // cheap screen before the exact comparison
            if self.term_cmp(i, self, best)? == Ordering::Greater {
                best = i;
            }
        }
        Ok(best)
    }

    /// Exact comparison of two quasi-norm values (weights may differ).
    pub fn cmp(&self, other: &QuasiNormValue) -> Result<Ordering> {
        let i = self.argmax()?;
        let j = other.argmax()?;
        self.term_cmp(i, other, j)
    }
}

/// `||x||_w` with the limit convention for zero weights.
pub fn quasi_norm(x: &TargetVector, w: &Weight) -> Result<QuasiNormValue> {
    x.check_dim(w.dim())?;
    let mags = x.coords().iter().map(Mag::of_coord).collect();
    QuasiNormValue::from_mags(mags, w, x.precision())
}

/// `||x||_w <= r`, decided exactly.
pub fn quasi_norm_leq(x: &TargetVector, w: &Weight, r: &BigRational) -> Result<bool> {
    if r.is_negative() {
        return Err(Error::Domain(format!("threshold {r} is negative")));
    }
    quasi_norm(x, w)?.leq(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::RealExpr;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn w(pairs: &[(i64, i64)]) -> Weight {
        Weight::from_ratios(pairs).unwrap()
    }

    #[test]
    fn norm_examples() {
        let x = TargetVector::from_ratios(&[(1, 2), (1, 2)]).unwrap();
        let v = quasi_norm(&x, &w(&[(1, 2), (1, 2)])).unwrap();
        assert_eq!(v.exact(), Some(rat(1, 4)));
        let x = TargetVector::from_ratios(&[(1, 2), (1, 8)]).unwrap();
        let v = quasi_norm(&x, &w(&[(1, 3), (2, 3)])).unwrap();
        assert!(v.leq(&rat(1, 8)).unwrap());
        assert!(!v.lt(&rat(1, 8)).unwrap());
        assert!((v.approx() - 0.125).abs() < 1e-15);
        let x = TargetVector::from_ratios(&[(9, 10), (3, 10)]).unwrap();
        let v = quasi_norm(&x, &w(&[(0, 1), (1, 1)])).unwrap();
        assert_eq!(v.exact(), Some(rat(3, 10)));
    }

    #[test]
    fn zero_weight_limit_convention() {
        let wt = w(&[(0, 1), (1, 1)]);
        let at_one = TargetVector::from_ratios(&[(1, 1), (1, 2)]).unwrap();
        assert_eq!(quasi_norm(&at_one, &wt).unwrap().exact(), Some(rat(1, 1)));
        let above = TargetVector::from_ratios(&[(3, 2), (1, 2)]).unwrap();
        assert!(quasi_norm(&above, &wt).unwrap().is_infinite());
        assert!(!quasi_norm_leq(&above, &wt, &rat(1000, 1)).unwrap());
    }

    #[test]
    fn leq_examples() {
        let half = w(&[(1, 2), (1, 2)]);
        let x = TargetVector::from_ratios(&[(1, 2), (1, 2)]).unwrap();
        assert!(quasi_norm_leq(&x, &half, &rat(1, 4)).unwrap());
        assert!(!quasi_norm_leq(&x, &half, &rat(1, 5)).unwrap());
        let x = TargetVector::from_ratios(&[(1, 3), (0, 1)]).unwrap();
        assert!(quasi_norm_leq(&x, &half, &rat(1, 9)).unwrap());
    }

    #[test]
    fn irrational_thresholds() {
        // (sqrt(2) - 1)^2 = 3 - 2 sqrt(2) ~ 0.1716
        let x = TargetVector::new(vec![Coord::sqrt_minus(2, 1)]).unwrap();
        let v = quasi_norm(&x, &Weight::standard(1)).unwrap();
        assert!(v.leq(&rat(42, 100)).unwrap());
        assert!(!v.leq(&rat(41, 100)).unwrap());
        let x2 = TargetVector::new(vec![Coord::sqrt_minus(2, 1), Coord::ratio(0, 1)]).unwrap();
        let v2 = quasi_norm(&x2, &w(&[(1, 2), (1, 2)])).unwrap();
        assert!(v2.leq(&rat(1715, 10000)).is_ok_and(|b| !b));
        assert!(v2.leq(&rat(1716, 10000)).unwrap());
    }

    #[test]
    fn exact_equality_of_irrational_square_is_precision_limited() {
        // |sqrt(2)/2|^2 = 1/2 cannot be certified by intervals
        let c = Coord::real(RealExpr::Sqrt(rat(2, 1))).affine(&rat(1, 2), &rat(0, 1));
        let x = TargetVector::new(vec![c, Coord::ratio(0, 1)]).unwrap();
        let r = quasi_norm_leq(&x, &w(&[(1, 2), (1, 2)]), &rat(1, 2));
        assert!(matches!(r, Err(Error::PrecisionLimited { .. })));
    }

    #[test]
    fn symbolic_equality_over_shared_base() {
        let a = Coord::sqrt_minus(3, 1);
        let b = a.affine(&rat(-1, 1), &rat(1, 1));
        // |a| vs |1 - a| differ, |a - 0| vs |-(a)| agree
        let m1 = Mag::residual(&a, &BigInt::from(2), &BigInt::from(1));
        let m2 = Mag::residual(&a.affine(&rat(-1, 1), &rat(0, 1)), &BigInt::from(2), &BigInt::from(-1));
        assert_eq!(cmp_pow(&m1, 2, &m2, 2, 256, "t").unwrap(), Ordering::Equal);
        let m3 = Mag::of_coord(&b);
        assert_ne!(cmp_pow(&m1, 1, &m3, 1, 256, "t").unwrap(), Ordering::Equal);
    }

    #[test]
    fn cmp_between_values() {
        let x = TargetVector::from_ratios(&[(1, 2), (1, 3)]).unwrap();
        let a = quasi_norm(&x, &w(&[(1, 2), (1, 2)])).unwrap();
        let b = quasi_norm(&x, &w(&[(1, 3), (2, 3)])).unwrap();
        // a = 1/4, b = max(1/8, (1/3)^{3/2} ~ 0.19245)
        assert_eq!(a.cmp(&b).unwrap(), Ordering::Greater);
        assert_eq!(b.cmp(&a).unwrap(), Ordering::Less);
        assert_eq!(a.cmp(&a).unwrap(), Ordering::Equal);
    }

    #[test]
    fn power_thresholds() {
        // (1/4) <= (1/2)^2, (1/4) < (1/2)^(3/2)? 0.25 < 0.3535 yes
        let x = TargetVector::from_ratios(&[(1, 2), (1, 2)]).unwrap();
        let v = quasi_norm(&x, &w(&[(1, 2), (1, 2)])).unwrap();
        assert!(v.cmp_power(&rat(1, 2), &rat(2, 1), false).unwrap());
        assert!(!v.cmp_power(&rat(1, 2), &rat(2, 1), true).unwrap());
        assert!(v.cmp_power(&rat(1, 2), &rat(3, 2), true).unwrap());
        assert!(v.cmp_power(&rat(2, 1), &rat(-2, 1), false).unwrap());
    }
}
