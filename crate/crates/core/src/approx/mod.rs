//! Dirichlet searches, best-approximation sequences, exponent estimators and
//! singularity certificates.

mod certificate;
mod estimate;

pub use certificate::{
    dirichlet_certificate, epsilon_singular_certificate, singular_certificate, CertificateKind,
    CertificateReport, Failure, Witness,
};
pub use estimate::{
    estimate_from_sequence, ordinary_exponent_estimate, sigma_hat_w_estimate, sigma_hat_w_grid,
    uniform_exponent_estimate, EstimatorConfig, ExponentEstimate, ExponentKind, GapExponent,
    GridPoint, SigmaHatEstimate,
};

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::norm::{cmp_pow, Mag, QuasiNormValue};
use crate::scan::{Res, Scanner};
use crate::target::TargetVector;
use crate::weight::Weight;

/// A pair `(q, p)` with its weighted error `||q x - p||_w`.
#[derive(Clone, Debug)]
pub struct Approximant {
    pub q: u64,
    pub p: Vec<BigInt>,
    pub err: QuasiNormValue,
    pub weight: Weight,
}

impl Approximant {
    /// The residual vector `q x - p` as a target vector (for re-checking).
    pub fn residual_vector(&self, x: &TargetVector) -> Result<TargetVector> {
        let q = BigRational::from_integer(BigInt::from(self.q));
        let coords = x
            .coords()
            .iter()
            .zip(&self.p)
            .map(|(c, p)| c.affine(&q, &-BigRational::from_integer(p.clone())))
            .collect();
        TargetVector::new(coords)?.with_precision(x.precision())
    }
}

impl Serialize for Approximant {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Approximant", 4)?;
        st.serialize_field("q", &self.q)?;
        let p: Vec<String> = self.p.iter().map(|v| v.to_string()).collect();
        st.serialize_field("p", &p)?;
        st.serialize_field("err", &finite_or_none(self.err.approx()))?;
        st.serialize_field("ln_err", &finite_or_none(self.err.ln_approx()))?;
        st.end()
    }
}

pub(crate) fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Best-approximation records `q_1 = 1 < q_2 < ...` with strictly decreasing error.
#[derive(Clone, Debug, Serialize)]
pub struct BestSequence {
    pub entries: Vec<Approximant>,
    /// the error reached exactly zero
    pub terminated: bool,
    pub q_max: u64,
    #[serde(skip)]
    pub weight: Weight,
}

impl BestSequence {
    pub fn qs(&self) -> Vec<u64> {
        self.entries.iter().map(|a| a.q).collect()
    }

    /// Index of the last entry with `q_n <= big_q`.
    pub fn index_at(&self, big_q: u64) -> Option<usize> {
        match self.entries.binary_search_by(|a| a.q.cmp(&big_q)) {
            Ok(i) => Some(i),
            Err(0) => None,
            Err(i) => Some(i - 1),
        }
    }
}

/// Current record of a best-approximation scan.
struct Record {
    arg: usize,
    arg_mag: Mag,
    zero: bool,
    /// per-coordinate residual bounds `(lo, hi)` around `err^{w_i}`
    thr: Vec<(f64, f64)>,
}

/// Per-weight scanning engine over a fixed target.
pub(crate) struct WeightedScan<'a> {
    pub(crate) sc: Scanner<'a>,
    x: &'a TargetVector,
    w: &'a Weight,
    wf: Vec<f64>,
    active: Vec<usize>,
}

impl<'a> WeightedScan<'a> {
    pub fn new(x: &'a TargetVector, w: &'a Weight) -> Result<Self> {
        x.check_dim(w.dim())?;
        let wf = w.as_f64();
        let active = (0..w.dim()).filter(|&i| w.numerators()[i] > 0).collect();
        Ok(WeightedScan {
            sc: Scanner::new(x),
            x,
            w,
            wf,
            active,
        })
    }

    fn precision(&self) -> u32 {
        self.x.precision()
    }

    pub fn approximant(&self, q: u64) -> Result<Approximant> {
        let p = self.sc.nearest_vec(q)?;
        let mags = self.sc.mags(q, &p);
        let err = QuasiNormValue::from_mags(mags, self.w, self.precision())?;
        Ok(Approximant {
            q,
            p,
            err,
            weight: self.w.clone(),
        })
    }

    fn exact_mag(&self, i: usize, q: u64) -> Result<Mag> {
        let p = self.sc.nearest(i, q)?;
        Ok(self.sc.mag(i, q, &p))
    }

    /// `|v_i|^{1/w_i}` at `q` against `|v_j|^{1/w_j}` at `q2`, exactly.
    fn cmp_terms(&self, i: usize, mi: &Mag, j: usize, mj: &Mag) -> Result<Ordering> {
        let n = self.w.numerators();
        cmp_pow(mi, n[j], mj, n[i], self.precision(), "comparison of weighted errors")
    }

    fn record(&self, q: u64) -> Result<Record> {
        let mut res: Vec<(usize, Res)> = self.active.iter().map(|&i| (i, self.sc.residual(i, q))).collect();
        let any_ambiguous = res.iter().any(|(_, r)| r.ambiguous);
        let all_zero = res.iter().all(|(_, r)| matches!(r.exact, Some((0, _))));
        if all_zero {
            return Ok(Record {
                arg: self.active[0],
                arg_mag: Mag::Rat(BigRational::zero()),
                zero: true,
                thr: vec![(0.0, 0.0); self.w.dim()],
            });
        }
        let ln_term = |i: usize, r: &Res| r.val.ln() / self.wf[i];
        res.sort_by(|a, b| ln_term(b.0, &b.1).total_cmp(&ln_term(a.0, &a.1)));
        let (mut arg, top) = res[0];
        let top_ln = ln_term(arg, &top);
        let mut arg_mag = None;
        for &(j, r) in &res[1..] {
            let close = any_ambiguous || ln_term(j, &r) > top_ln - 1e-9 * (1.0 + top_ln.abs());
            if !close {
                continue;
            }
            let ma = match arg_mag.take() {
                Some(m) => m,
                None => self.exact_mag(arg, q)?,
            };
            let mj = self.exact_mag(j, q)?;
            if self.cmp_terms(j, &mj, arg, &ma)? == Ordering::Greater {
                arg = j;
                arg_mag = Some(mj);
            } else {
                arg_mag = Some(ma);
            }
        }
        let arg_mag = match arg_mag {
            Some(m) => m,
            None => self.exact_mag(arg, q)?,
        };
        let arg_res = self.sc.residual(arg, q);
        let ln_err = if arg_res.ambiguous {
            arg_mag.ln_approx() / self.wf[arg]
        } else {
            arg_res.val.ln() / self.wf[arg]
        };
        let rel_arg = if arg_res.ambiguous || arg_res.val <= 0.0 {
            f64::INFINITY
        } else {
            arg_res.abs_err / arg_res.val
        };
        let thr = (0..self.w.dim())
            .map(|i| {
                if self.w.numerators()[i] == 0 {
                    return (f64::INFINITY, f64::INFINITY);
                }
                let ratio = self.wf[i] / self.wf[arg];
                let rel = 1e-9 + 2.0 * ratio * rel_arg + 1e-15 * ln_err.abs();
                if !rel.is_finite() || rel > 0.5 {
                    return (0.0, f64::INFINITY);
                }
                let t = (self.wf[i] * ln_err).exp();
                (t * (1.0 - rel), t * (1.0 + rel))
            })
            .collect();
        Ok(Record {
            arg,
            arg_mag,
            zero: false,
            thr,
        })
    }

    /// Does `q` strictly improve on the record?
    fn improves(&self, q: u64, rec: &Record) -> Result<bool> {
        if rec.zero {
            return Ok(false);
        }
        for &i in &self.active {
            let r = self.sc.residual(i, q);
            let (lo, hi) = r.bounds();
            let (tlo, thi) = rec.thr[i];
            if !r.ambiguous {
                if hi < tlo {
                    continue;
                }
                if lo > thi {
                    return Ok(false);
                }
            }
            let mi = self.exact_mag(i, q)?;
            if self.cmp_terms(i, &mi, rec.arg, &rec.arg_mag)? != Ordering::Less {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `||q x - p||_w < 1 / big_q` for the nearest `p`.
    fn dirichlet_ok(&self, q: u64, big_q: u64, ln_q: f64) -> Result<bool> {
        let inv = Mag::Rat(BigRational::new(BigInt::one(), BigInt::from(big_q)));
        let m = self.w.denominator();
        for &i in &self.active {
            let r = self.sc.residual(i, q);
            let t = (-self.wf[i] * ln_q).exp();
            let rel = 1e-9;
            let (lo, hi) = r.bounds();
            if !r.ambiguous {
                if hi < t * (1.0 - rel) {
                    continue;
                }
                if lo > t * (1.0 + rel) {
                    return Ok(false);
                }
            }
            let mi = self.exact_mag(i, q)?;
            let ord = cmp_pow(
                &mi,
                m,
                &inv,
                self.w.numerators()[i],
                self.precision(),
                "Dirichlet threshold",
            )?;
            if ord != Ordering::Less {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn best_sequence(&self, q_max: u64) -> Result<BestSequence> {
        if q_max == 0 {
            return Err(Error::Domain("Q_max must be positive".into()));
        }
        let mut entries = vec![self.approximant(1)?];
        let mut rec = self.record(1)?;
        let mut terminated = rec.zero;
        let mut q = 2;
        while !terminated && q <= q_max {
            if self.improves(q, &rec)? {
                entries.push(self.approximant(q)?);
                rec = self.record(q)?;
                terminated = rec.zero;
            }
            q += 1;
        }
        Ok(BestSequence {
            entries,
            terminated,
            q_max,
            weight: self.w.clone(),
        })
    }
}

/// Nearest-integer approximant at denominator `q`.
pub fn min_error(x: &TargetVector, w: &Weight, q: u64) -> Result<Approximant> {
    if q == 0 {
        return Err(Error::Domain("q must be positive".into()));
    }
    WeightedScan::new(x, w)?.approximant(q)
}

/// First `q <= big_q` with `||q x - p||_w < 1/big_q`.
pub fn dirichlet_solve(x: &TargetVector, w: &Weight, big_q: u64) -> Result<Approximant> {
    if big_q == 0 {
        return Err(Error::Domain("Q must be positive".into()));
    }
    let ws = WeightedScan::new(x, w)?;
    let ln_q = (big_q as f64).ln();
    let mut limited = false;
    for q in 1..=big_q {
        match ws.dirichlet_ok(q, big_q, ln_q) {
            Ok(true) => return ws.approximant(q),
            Ok(false) => {}
            Err(Error::PrecisionLimited { .. }) => limited = true,
            Err(e) => return Err(e),
        }
    }
    // without precision trouble this is unreachable by Dirichlet's theorem
    debug_assert!(limited, "Dirichlet search exhausted without precision trouble");
    Err(Error::NoSolutionFound { q_max: big_q })
}

/// Best-approximation sequence up to `q_max` (stops early at error zero).
pub fn best_sequence(x: &TargetVector, w: &Weight, q_max: u64) -> Result<BestSequence> {
    WeightedScan::new(x, w)?.best_sequence(q_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::Coord;

    fn w(pairs: &[(i64, i64)]) -> Weight {
        Weight::from_ratios(pairs).unwrap()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn min_error_examples() {
        let x = TargetVector::from_ratios(&[(1, 3)]).unwrap();
        let a = min_error(&x, &Weight::standard(1), 3).unwrap();
        assert_eq!(a.p, vec![BigInt::from(1)]);
        assert!(a.err.is_zero());
        let x = TargetVector::from_ratios(&[(1, 3), (1, 5)]).unwrap();
        let a = min_error(&x, &w(&[(1, 2), (1, 2)]), 2).unwrap();
        assert_eq!(a.p, vec![BigInt::from(1), BigInt::from(0)]);
        assert_eq!(a.err.exact(), Some(rat(4, 25)));
        // sqrt(2) - 1 at q = 5: 5x = 2.0710678..., oracle 29/70 < ... convergent 2/5
        let x = TargetVector::new(vec![Coord::sqrt_minus(2, 1)]).unwrap();
        let a = min_error(&x, &Weight::standard(1), 5).unwrap();
        assert_eq!(a.p, vec![BigInt::from(2)]);
        assert!((a.err.approx() - (5.0 * (2f64.sqrt() - 1.0) - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_examples() {
        let x = TargetVector::from_ratios(&[(1, 3)]).unwrap();
        let a = dirichlet_solve(&x, &Weight::standard(1), 3).unwrap();
        assert_eq!((a.q, a.p.clone()), (3, vec![BigInt::from(1)]));
        let x = TargetVector::new(vec![Coord::sqrt_minus(2, 1)]).unwrap();
        let a = dirichlet_solve(&x, &Weight::standard(1), 5).unwrap();
        assert_eq!((a.q, a.p.clone()), (2, vec![BigInt::from(1)]));
        let x = TargetVector::from_ratios(&[(1, 3), (1, 5)]).unwrap();
        let a = dirichlet_solve(&x, &w(&[(1, 2), (1, 2)]), 15).unwrap();
        // q = 6 already gives (0, 1/5) with error 1/25 < 1/15
        assert_eq!(a.q, 6);
        assert_eq!(a.p, vec![BigInt::from(2), BigInt::from(1)]);
        assert_eq!(a.err.exact(), Some(rat(1, 25)));
    }

    #[test]
    fn best_sequence_examples() {
        let x = TargetVector::new(vec![Coord::sqrt_minus(2, 1)]).unwrap();
        let s = best_sequence(&x, &Weight::standard(1), 30).unwrap();
        assert_eq!(s.qs(), vec![1, 2, 5, 12, 29]);
        let x = TargetVector::from_ratios(&[(1, 3)]).unwrap();
        let s = best_sequence(&x, &Weight::standard(1), 10).unwrap();
        assert!(s.terminated);
        assert_eq!(s.qs().last(), Some(&3));
    }

    #[test]
    fn hyperplane_best_denominators_divisible_by_three() {
        let x = TargetVector::new(vec![Coord::ratio(1, 3), Coord::sqrt_minus(2, 1)]).unwrap();
        let s = best_sequence(&x, &w(&[(1, 2), (1, 2)]), 100).unwrap();
        let qs = s.qs();
        assert!(qs.len() >= 3);
        // q = 2 still improves on q = 1; once 3 appears only multiples of 3 can beat 1/9
        assert!(qs[2..].iter().all(|q| q % 3 == 0), "{qs:?}");
        // brute force oracle over floats
        let mut best = f64::INFINITY;
        let mut oracle = vec![];
        for q in 1..=100u64 {
            let a = (q as f64 / 3.0 - (q as f64 / 3.0).round()).abs();
            let v = q as f64 * (2f64.sqrt() - 1.0);
            let b = (v - v.round()).abs();
            let e = a.max(b).powi(2);
            if e < best * (1.0 - 1e-12) {
                best = e;
                oracle.push(q);
            }
        }
        assert_eq!(qs, oracle);
    }
}
