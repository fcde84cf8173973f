//! Gcd decomposition of consecutive best approximations in the plane.
//!
//! For consecutive denominators `q_n < q_{n+1}` with `r = gcd(q_n, q_{n+1})`
//! and `x q_{n+1} - y q_n = r`, every coordinate pair satisfies
//! `p_n = l x + k q_n / r`, `p_{n+1} = l y + k q_{n+1} / r` with
//! `l = c / r`, `c = p_n q_{n+1} - p_{n+1} q_n`. Between the two coordinates
//! this gives `p_{n,2} = A p_{n,1} + B q_n` with `A = l_2 / l_1` and
//! `B = (k_2 - A k_1) / r`.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::{gcd_i128, solve_linear_diophantine, to_i128};
use crate::approx::best_sequence;
use crate::error::{Error, Result};
use crate::norm::{cmp_pow, Mag};
use crate::target::TargetVector;
use crate::weight::Weight;

/// Run length of equal `(A, B)` pairs that counts as stable.
const STABLE_RUN: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowLabel {
    /// `(A, B)` equals the previous two rows
    Stable,
    /// `A` differs from the previous row
    Jump,
    Undecided,
}

/// One consecutive pair `(q_n, q_{n+1})`.
#[derive(Clone, Debug, Serialize)]
pub struct PairDecomposition {
    pub n: usize,
    pub q: u64,
    pub q_next: u64,
    pub r: i128,
    pub x: i128,
    pub y: i128,
    pub c: [i128; 2],
    pub l: [i128; 2],
    pub k: [i128; 2],
    /// `max_i |q_n x_i - p_{n,i}| < q_{n+1}^{-delta}`
    pub selected: bool,
    /// `|c_i| < 2 q_{n+1}^{1 - delta}` for both coordinates
    pub bound_ok: bool,
    /// `(A, B)` as exact rationals when `l_1 != 0`
    #[serde(serialize_with = "ser_ratio")]
    pub ratio: Option<(BigRational, BigRational)>,
    pub label: RowLabel,
}

fn ser_ratio<S: serde::Serializer>(
    v: &Option<(BigRational, BigRational)>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    v.as_ref().map(|(a, b)| (a.to_string(), b.to_string())).serialize(s)
}

/// Checks attached to a row where `A` changes.
#[derive(Clone, Debug, Serialize)]
pub struct JumpCheck {
    pub n: usize,
    /// `p_{n,1} / q_n = (B_{n-1} - B_n) / (A_n - A_{n-1})` exactly
    pub identity_holds: bool,
    /// `gcd(p_{n,1}, q_n) < q_n^{1/2}`
    pub gcd_side_condition: bool,
    /// `q_{n+1} > q_n^{(delta - 1/2) / (1 - delta)}`
    pub growth_ok: bool,
    /// `max_i |q_n x_i - p_{n,i}| < q_n^{-(delta^2 - delta/2) / (1 - delta)}`
    pub error_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum Classification {
    /// eventually `p_{n,2} = a p_{n,1} + b q_n`
    Stable { a: String, b: String },
    Jump,
    Undecided,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairAnalysis {
    pub delta: String,
    pub q_max: u64,
    pub rows: Vec<PairDecomposition>,
    pub jumps: Vec<JumpCheck>,
    pub classification: Classification,
    /// every selected row satisfies the consecutive-approximation bound
    pub all_bounds_hold: bool,
}

/// `|c| < 2 q^{1 - a/b}`, exactly: `|c|^b < 2^b q^{b - a}`.
fn c_bound(c: i128, q: u64, a: u32, b: u32) -> bool {
    let lhs = BigInt::from(c).abs().pow(b);
    let rhs = BigInt::from(2).pow(b) * BigInt::from(q).pow(b - a);
    lhs < rhs
}

/// `mag < q^{-a/b}`: screened in f64, decided exactly near the threshold.
fn below_power(mag: &Mag, q: u64, a: u32, b: u32, precision: u32) -> Result<bool> {
    if let Some(r) = mag.exact() {
        if r.is_zero() {
            return Ok(true);
        }
    }
    let l = mag.ln_approx();
    let t = -(a as f64 / b as f64) * (q as f64).ln();
    let margin = 1e-9 * (1.0 + t.abs());
    if l < t - margin {
        return Ok(true);
    }
    if l > t + margin {
        return Ok(false);
    }
    let inv = Mag::Rat(BigRational::new(BigInt::one(), BigInt::from(q)));
    Ok(cmp_pow(mag, b, &inv, a, precision, "selection threshold")? == Ordering::Less)
}

/// Decomposes every consecutive pair of the sup-norm best sequence of a
/// planar target and classifies the tail.
pub fn consecutive_pair_analysis(x: &TargetVector, delta: &BigRational, q_max: u64) -> Result<PairAnalysis> {
    x.check_dim(2)?;
    let lo = BigRational::new(BigInt::from(3), BigInt::from(4));
    if !(delta > &lo && delta < &BigRational::one()) {
        return Err(Error::Domain(format!("delta = {delta} must lie in (3/4, 1)")));
    }
    let (a, b) = match (delta.numer().to_u32(), delta.denom().to_u32()) {
        (Some(a), Some(b)) if b <= 64 => (a, b),
        _ => return Err(Error::Domain(format!("delta = {delta} needs a denominator <= 64"))),
    };
    let df = a as f64 / b as f64;
    // the (1/2, 1/2) quasi-norm is the squared sup-norm: same best sequence
    let seq = best_sequence(x, &Weight::standard(2), q_max)?;
    if seq.entries.len() < 2 {
        return Err(Error::InsufficientGapData(format!(
            "{} best-approximation entries up to Q = {q_max}",
            seq.entries.len()
        )));
    }
    let precision = x.precision();
    let mut rows: Vec<PairDecomposition> = Vec::new();
    let mut jumps = Vec::new();
    for (n, pair) in seq.entries.windows(2).enumerate() {
        let (e0, e1) = (&pair[0], &pair[1]);
        let (q0, q1) = (e0.q as i128, e1.q as i128);
        let r = gcd_i128(q0, q1);
        let fam = solve_linear_diophantine(q1, q0, r)?
            .ok_or_else(|| Error::IntegralityViolation(format!("gcd {r} does not divide itself")))?;
        let (xn, yn) = fam.base;
        let mut c = [0i128; 2];
        let mut l = [0i128; 2];
        let mut k = [0i128; 2];
        for i in 0..2 {
            let p0 = to_i128(&e0.p[i])?;
            let p1 = to_i128(&e1.p[i])?;
            c[i] = p0 * q1 - p1 * q0;
            if c[i] % r != 0 {
                return Err(Error::IntegralityViolation(format!("r = {r} does not divide c = {}", c[i])));
            }
            l[i] = c[i] / r;
            let num = (p0 - l[i] * xn) * r;
            if num % q0 != 0 {
                return Err(Error::IntegralityViolation(format!("k is not integral at n = {n}")));
            }
            k[i] = num / q0;
            if p0 != l[i] * xn + k[i] * q0 / r || p1 != l[i] * yn + k[i] * q1 / r {
                return Err(Error::IntegralityViolation(format!("reconstruction fails at n = {n}")));
            }
        }
        let mut selected = true;
        for i in 0..2 {
            let m = Mag::residual(x.coord(i), &BigInt::from(e0.q), &e0.p[i]);
            if !below_power(&m, e1.q, a, b, precision)? {
                selected = false;
                break;
            }
        }
        let bound_ok = c.iter().all(|&ci| c_bound(ci, e1.q, a, b));
        let ratio = (l[0] != 0).then(|| {
            let big = |v: i128| BigRational::from_integer(BigInt::from(v));
            let am = big(l[1]) / big(l[0]);
            let bm = (big(k[1]) - &am * big(k[0])) / big(r);
            (am, bm)
        });
        let label = match (&ratio, rows.last().and_then(|p| p.ratio.as_ref())) {
            (Some(cur), Some(prev)) if cur.0 != prev.0 => RowLabel::Jump,
            (Some(cur), Some(prev)) if cur == prev => {
                let before = rows.len().checked_sub(2).and_then(|j| rows[j].ratio.as_ref());
                if before == Some(cur) {
                    RowLabel::Stable
                } else {
                    RowLabel::Undecided
                }
            }
            _ => RowLabel::Undecided,
        };
        if label == RowLabel::Jump {
            let (cur, prev) = (ratio.as_ref().unwrap(), rows.last().unwrap().ratio.as_ref().unwrap());
            let p1n = BigRational::new(e0.p[0].clone(), BigInt::from(e0.q));
            let identity_holds = p1n == (&prev.1 - &cur.1) / (&cur.0 - &prev.0);
            let g = gcd_i128(to_i128(&e0.p[0])?, q0);
            let gcd_side_condition = g * g < q0;
            let ln_q0 = (e0.q as f64).ln();
            let growth_ok = (e1.q as f64).ln() > (df - 0.5) / (1.0 - df) * ln_q0;
            let ln_err = 0.5 * e0.err.ln_approx();
            let error_ok = ln_err < -(df * df - df / 2.0) / (1.0 - df) * ln_q0;
            jumps.push(JumpCheck {
                n,
                identity_holds,
                gcd_side_condition,
                growth_ok,
                error_ok,
            });
        }
        rows.push(PairDecomposition {
            n,
            q: e0.q,
            q_next: e1.q,
            r,
            x: xn,
            y: yn,
            c,
            l,
            k,
            selected,
            bound_ok,
            ratio,
            label,
        });
    }
    let classification = classify(&rows);
    let all_bounds_hold = rows.iter().filter(|r| r.selected).all(|r| r.bound_ok);
    Ok(PairAnalysis {
        delta: delta.to_string(),
        q_max,
        rows,
        jumps,
        classification,
        all_bounds_hold,
    })
}

fn classify(rows: &[PairDecomposition]) -> Classification {
    let Some(last) = rows.last().and_then(|r| r.ratio.clone()) else {
        return Classification::Undecided;
    };
    let run = rows.iter().rev().take_while(|r| r.ratio.as_ref() == Some(&last)).count();
    if run >= STABLE_RUN {
        return Classification::Stable {
            a: last.0.to_string(),
            b: last.1.to_string(),
        };
    }
    if rows.iter().any(|r| r.label == RowLabel::Jump) {
        Classification::Jump
    } else {
        Classification::Undecided
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::Coord;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn dependent_pair_is_stable() {
        let alpha = Coord::sqrt_minus(2, 1);
        let second = alpha.affine(&rat(1, 2), &rat(1, 2));
        let x = TargetVector::new(vec![alpha, second]).unwrap();
        let an = consecutive_pair_analysis(&x, &rat(4, 5), 100_000).unwrap();
        assert_eq!(
            an.classification,
            Classification::Stable {
                a: "1/2".into(),
                b: "1/2".into()
            }
        );
    }

    #[test]
    fn independent_pair_bounds() {
        let x = TargetVector::new(vec![Coord::sqrt_minus(2, 1), Coord::sqrt_minus(3, 1)]).unwrap();
        let an = consecutive_pair_analysis(&x, &rat(4, 5), 100_000).unwrap();
        assert!(an.all_bounds_hold);
        assert!(an.rows.len() > 5);
        for j in &an.jumps {
            assert!(j.identity_holds);
        }
        for r in &an.rows {
            assert_eq!(r.x * r.q_next as i128 - r.y * r.q as i128, r.r);
        }
    }

    #[test]
    fn delta_domain() {
        let x = TargetVector::new(vec![Coord::sqrt_minus(2, 1), Coord::sqrt_minus(3, 1)]).unwrap();
        assert!(consecutive_pair_analysis(&x, &rat(3, 4), 100).is_err());
        assert!(consecutive_pair_analysis(&x, &rat(1, 1), 100).is_err());
    }
}
