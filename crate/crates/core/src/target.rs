use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::real::{rat_to_f64, ComputableReal, RatInterval, RealExpr};

/// Default working precision in bits.
pub const DEFAULT_PRECISION: u32 = 256;

/// One coordinate of a target vector.
#[derive(Clone)]
pub enum Coord {
    Rational(BigRational),
    /// `scale * base + shift` with an irrational (or at least non-rational) `base`.
    Real(RealCoord),
}

#[derive(Clone)]
pub struct RealCoord {
    pub(crate) scale: BigRational,
    pub(crate) base: Arc<ComputableReal>,
    pub(crate) shift: BigRational,
}

impl Coord {
    pub fn rational(r: BigRational) -> Self {
        Coord::Rational(r)
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Coord::Rational(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    /// Wraps an expression, collapsing it to an exact rational when possible.
    pub fn real(expr: RealExpr) -> Self {
        match expr.as_rational() {
            Some(r) => Coord::Rational(r),
            None => Coord::Real(RealCoord {
                scale: BigRational::one(),
                base: Arc::new(ComputableReal::new(expr)),
                shift: BigRational::zero(),
            }),
        }
    }

    pub fn sqrt_minus(n: u64, m: i64) -> Self {
        Coord::real(RealExpr::sqrt_minus(n, m))
    }

    pub fn golden() -> Self {
        Coord::real(RealExpr::golden())
    }

    /// `scale * self + shift`, sharing the underlying real (and its cache).
    pub fn affine(&self, scale: &BigRational, shift: &BigRational) -> Coord {
        match self {
            Coord::Rational(r) => Coord::Rational(r * scale + shift),
            Coord::Real(rc) => {
                if scale.is_zero() {
                    return Coord::Rational(shift.clone());
                }
                Coord::Real(RealCoord {
                    scale: &rc.scale * scale,
                    base: rc.base.clone(),
                    shift: &rc.shift * scale + shift,
                })
            }
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Coord::Rational(r) => Some(r),
            Coord::Real(_) => None,
        }
    }

    pub fn known_irrational(&self) -> bool {
        match self {
            Coord::Rational(_) => false,
            Coord::Real(rc) => rc.base.expr().known_irrational(),
        }
    }

    /// Interval of width at most `2^-bits` containing the value.
    pub fn interval(&self, bits: u32) -> RatInterval {
        match self {
            Coord::Rational(r) => RatInterval::point(r.clone()),
            Coord::Real(rc) => affine_interval(&rc.scale, &rc.base, &rc.shift, bits),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Coord::Rational(r) => rat_to_f64(r),
            Coord::Real(_) => self.interval(80).midpoint_f64(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Coord::Rational(r) => r.to_string(),
            Coord::Real(rc) => {
                let base = rc.base.expr().describe();
                let mut s = if rc.scale.is_one() {
                    base
                } else {
                    format!("({})*{}", rc.scale, base)
                };
                if !rc.shift.is_zero() {
                    s = format!("{s}+({})", rc.shift);
                }
                s
            }
        }
    }
}

/// Interval for `a * X + b` of width at most `2^-bits`.
pub(crate) fn affine_interval(
    a: &BigRational,
    x: &ComputableReal,
    b: &BigRational,
    bits: u32,
) -> RatInterval {
    let extra = a.abs().ceil().to_integer().bits() as u32 + 1;
    let iv = x.interval(bits + extra);
    let (lo, hi) = if a.is_negative() {
        (&iv.hi * a + b, &iv.lo * a + b)
    } else {
        (&iv.lo * a + b, &iv.hi * a + b)
    };
    RatInterval::new(lo, hi)
}

impl PartialEq for Coord {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Coord::Rational(a), Coord::Rational(b)) => a == b,
            (Coord::Real(a), Coord::Real(b)) => {
                a.scale == b.scale
                    && a.shift == b.shift
                    && (Arc::ptr_eq(&a.base, &b.base) || a.base.expr() == b.base.expr())
            }
            _ => false,
        }
    }
}

impl fmt::Debug for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

/// A point of `R^d` together with the precision budget used for its comparisons.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetVector {
    coords: Vec<Coord>,
    precision: u32,
}

impl TargetVector {
    pub fn new(coords: Vec<Coord>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Domain("a target vector needs at least one coordinate".into()));
        }
        Ok(TargetVector {
            coords,
            precision: DEFAULT_PRECISION,
        })
    }

    pub fn from_ratios(pairs: &[(i64, i64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(n, d)| Coord::ratio(n, d)).collect())
    }

    pub fn with_precision(mut self, bits: u32) -> Result<Self> {
        if bits < 64 {
            return Err(Error::Domain(format!("precision must be at least 64 bits, got {bits}")));
        }
        self.precision = bits;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &Coord {
        &self.coords[i]
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn is_rational(&self) -> bool {
        self.coords.iter().all(|c| c.as_rational().is_some())
    }

    /// Least common denominator when every coordinate is rational.
    pub fn common_denominator(&self) -> Option<BigInt> {
        use num_integer::Integer;
        let mut l = BigInt::one();
        for c in &self.coords {
            l = l.lcm(c.as_rational()?.denom());
        }
        Some(l)
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.coords.iter().map(Coord::to_f64).collect()
    }

    pub fn describe(&self) -> Vec<String> {
        self.coords.iter().map(Coord::describe).collect()
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: self.dim(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_collapses_to_rational() {
        let c = Coord::real(RealExpr::Sqrt(BigRational::from_integer(BigInt::from(16))));
        assert_eq!(c, Coord::ratio(4, 1));
    }

    #[test]
    fn affine_coordinate_interval() {
        let a = Coord::sqrt_minus(2, 1);
        let b = a.affine(
            &BigRational::new(BigInt::from(1), BigInt::from(2)),
            &BigRational::new(BigInt::from(1), BigInt::from(2)),
        );
        let v = b.to_f64();
        assert!((v - 2f64.sqrt() / 2.0).abs() < 1e-15);
        let iv = b.interval(100);
        assert!(iv.width() <= BigRational::new(BigInt::one(), BigInt::one() << 100usize));
        assert!(b.known_irrational());
    }

    #[test]
    fn dimension_and_precision_checks() {
        let x = TargetVector::from_ratios(&[(1, 2), (1, 3)]).unwrap();
        assert!(x.check_dim(3).is_err());
        assert!(x.clone().with_precision(32).is_err());
        assert_eq!(x.common_denominator(), Some(BigInt::from(6)));
        assert!(TargetVector::new(vec![]).is_err());
    }
}
