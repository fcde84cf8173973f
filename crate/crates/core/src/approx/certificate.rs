use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::{Approximant, BestSequence, WeightedScan};
use crate::error::{Error, Result};
use crate::norm::{ln_rat, quasi_norm, QuasiNormValue};
use crate::real::rat_to_f64;
use crate::target::TargetVector;
use crate::weight::WeightSet;

/// The inequality a certificate establishes at scale `Q`.
#[derive(Clone, Debug, PartialEq)]
pub enum CertificateKind {
    /// `||q x - p||_w < 1 / Q`
    Dirichlet,
    /// `||q x - p||_w <= delta / Q`
    DeltaSingular { delta: BigRational },
    /// `||q x - p||_w <= Q^-epsilon`
    EpsilonSingular { epsilon: BigRational },
}

impl CertificateKind {
    pub fn name(&self) -> &'static str {
        match self {
            CertificateKind::Dirichlet => "dirichlet",
            CertificateKind::DeltaSingular { .. } => "delta_singular",
            CertificateKind::EpsilonSingular { .. } => "epsilon_singular",
        }
    }

    /// Natural log of the threshold at scale `Q`.
    fn ln_threshold(&self, big_q: u64) -> f64 {
        let lq = (big_q as f64).ln();
        match self {
            CertificateKind::Dirichlet => -lq,
            CertificateKind::DeltaSingular { delta } => ln_rat(delta) - lq,
            CertificateKind::EpsilonSingular { epsilon } => -rat_to_f64(epsilon) * lq,
        }
    }

    /// Exact test of `err` against the threshold at scale `Q`.
    pub fn holds(&self, err: &QuasiNormValue, big_q: u64) -> Result<bool> {
        let inv_q = BigRational::new(BigInt::one(), BigInt::from(big_q));
        match self {
            CertificateKind::Dirichlet => err.lt(&inv_q),
            CertificateKind::DeltaSingular { delta } => err.leq(&(delta * inv_q)),
            CertificateKind::EpsilonSingular { epsilon } => err.cmp_power(&inv_q, epsilon, false),
        }
    }

    /// Screened test: the double-precision reading decides unless it is within
    /// a relative margin of the threshold.
    fn passes(&self, err: &QuasiNormValue, big_q: u64) -> Result<bool> {
        if err.is_zero() {
            return Ok(true);
        }
        let l = err.ln_approx();
        let t = self.ln_threshold(big_q);
        let margin = 1e-9 * (1.0 + t.abs());
        if l < t - margin {
            return Ok(true);
        }
        if l > t + margin {
            return Ok(false);
        }
        self.holds(err, big_q)
    }

    fn validate(&self) -> Result<()> {
        match self {
            CertificateKind::Dirichlet => Ok(()),
            CertificateKind::DeltaSingular { delta } => {
                if delta.is_positive() {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("delta = {delta} must be positive")))
                }
            }
            CertificateKind::EpsilonSingular { epsilon } => {
                if epsilon >= &BigRational::one() {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("epsilon = {epsilon} must be at least 1")))
                }
            }
        }
    }
}

impl Serialize for CertificateKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("CertificateKind", 2)?;
        st.serialize_field("name", self.name())?;
        match self {
            CertificateKind::Dirichlet => st.serialize_field("parameter", &Option::<String>::None)?,
            CertificateKind::DeltaSingular { delta } => st.serialize_field("parameter", &delta.to_string())?,
            CertificateKind::EpsilonSingular { epsilon } => {
                st.serialize_field("parameter", &epsilon.to_string())?
            }
        }
        st.end()
    }
}

/// Every `Q` in `[q_from, q_to]` is served by `approximant` for weight `weight_index`.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub weight_index: usize,
    pub q_from: u64,
    pub q_to: u64,
    pub approximant: Approximant,
}

/// No `q <= Q` satisfies the inequality for any `Q` in `[q_from, q_to]`.
#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub weight_index: usize,
    pub q_from: u64,
    pub q_to: u64,
}

/// Outcome of a finite-scale certificate search over `Q in [1, Q_max]`.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub kind: CertificateKind,
    pub q_range: (u64, u64),
    /// smallest `Q0` with success on `(Q0, Q_max]` for every weight; absent if `Q_max` fails
    pub q0: Option<u64>,
    pub witnesses: Vec<Witness>,
    pub failures: Vec<Failure>,
    pub weights: WeightSet,
    pub precision: u32,
}

impl CertificateReport {
    pub fn succeeded(&self) -> bool {
        self.q0.is_some()
    }

    pub fn failures_for(&self, weight_index: usize) -> impl Iterator<Item = &Failure> {
        self.failures.iter().filter(move |f| f.weight_index == weight_index)
    }

    pub fn witness_for(&self, weight_index: usize, big_q: u64) -> Option<&Witness> {
        self.witnesses
            .iter()
            .find(|wt| wt.weight_index == weight_index && wt.q_from <= big_q && big_q <= wt.q_to)
    }

    /// Re-verifies every witness from the residual vector with a fresh
    /// quasi-norm, at the most demanding scale of its range.
    pub fn recheck(&self, x: &TargetVector) -> Result<bool> {
        for wt in &self.witnesses {
            let w = &self.weights.weights()[wt.weight_index];
            let a = &wt.approximant;
            if a.q > wt.q_from {
                return Ok(false);
            }
            let v = a.residual_vector(x)?;
            let err = quasi_norm(&v, w)?;
            if !self.kind.holds(&err, wt.q_to)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Splits each best-sequence interval `[q_n, q_{n+1} - 1]` into its passing
/// prefix and failing suffix (the threshold decreases in `Q`).
fn classify(
    kind: &CertificateKind,
    seq: &BestSequence,
    weight_index: usize,
) -> Result<(Vec<Witness>, Vec<Failure>)> {
    let mut wit = Vec::new();
    let mut fail = Vec::new();
    let n = seq.entries.len();
    for (k, a) in seq.entries.iter().enumerate() {
        let lo = a.q;
        let hi = if k + 1 < n { seq.entries[k + 1].q - 1 } else { seq.q_max };
        if lo > hi {
            continue;
        }
        let last_pass = if kind.passes(&a.err, hi)? {
            Some(hi)
        } else if !kind.passes(&a.err, lo)? {
            None
        } else {
            // passes at lo, fails at hi
            let (mut good, mut bad) = (lo, hi);
            while bad - good > 1 {
                let mid = good + (bad - good) / 2;
                if kind.passes(&a.err, mid)? {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            Some(good)
        };
        match last_pass {
            Some(b) => {
                wit.push(Witness {
                    weight_index,
                    q_from: lo,
                    q_to: b,
                    approximant: a.clone(),
                });
                if b < hi {
                    fail.push(Failure {
                        weight_index,
                        q_from: b + 1,
                        q_to: hi,
                    });
                }
            }
            None => fail.push(Failure {
                weight_index,
                q_from: lo,
                q_to: hi,
            }),
        }
    }
    Ok((wit, fail))
}

fn certificate(
    x: &TargetVector,
    ws: &WeightSet,
    kind: CertificateKind,
    q_max: u64,
) -> Result<CertificateReport> {
    kind.validate()?;
    x.check_dim(ws.dim())?;
    if q_max == 0 {
        return Err(Error::Domain("Q_max must be positive".into()));
    }
    let parts: Vec<(Vec<Witness>, Vec<Failure>)> = ws
        .weights()
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let seq = WeightedScan::new(x, w)?.best_sequence(q_max)?;
            classify(&kind, &seq, i)
        })
        .collect::<Result<_>>()?;
    let mut witnesses = Vec::new();
    let mut failures = Vec::new();
    for (w, f) in parts {
        witnesses.extend(w);
        failures.extend(f);
    }
    let worst = failures.iter().map(|f| f.q_to).max();
    let q0 = match worst {
        Some(q) if q >= q_max => None,
        Some(q) => Some(q.max(1)),
        None => Some(1),
    };
    Ok(CertificateReport {
        kind,
        q_range: (1, q_max),
        q0,
        witnesses,
        failures,
        weights: ws.clone(),
        precision: x.precision(),
    })
}

/// Finite-scale `W`-singularity certificate at level `delta`.
pub fn singular_certificate(
    x: &TargetVector,
    ws: &WeightSet,
    delta: &BigRational,
    q_max: u64,
) -> Result<CertificateReport> {
    certificate(x, ws, CertificateKind::DeltaSingular { delta: delta.clone() }, q_max)
}

/// Finite-scale `(epsilon, W)`-singularity certificate.
pub fn epsilon_singular_certificate(
    x: &TargetVector,
    ws: &WeightSet,
    epsilon: &BigRational,
    q_max: u64,
) -> Result<CertificateReport> {
    certificate(
        x,
        ws,
        CertificateKind::EpsilonSingular {
            epsilon: epsilon.clone(),
        },
        q_max,
    )
}

/// Dirichlet's inequality at every scale (strict `< 1/Q`).
pub fn dirichlet_certificate(x: &TargetVector, ws: &WeightSet, q_max: u64) -> Result<CertificateReport> {
    certificate(x, ws, CertificateKind::Dirichlet, q_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::Coord;
    use crate::weight::Weight;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn rational_point_is_certified() {
        let x = TargetVector::from_ratios(&[(1, 2), (1, 3)]).unwrap();
        let ws = WeightSet::new(vec![
            Weight::from_ratios(&[(1, 2), (1, 2)]).unwrap(),
            Weight::from_ratios(&[(1, 5), (4, 5)]).unwrap(),
        ])
        .unwrap();
        let r = singular_certificate(&x, &ws, &rat(1, 10), 1000).unwrap();
        assert!(r.succeeded());
        assert!(r.q0.unwrap() < 6 * 10);
        assert!(r.recheck(&x).unwrap());
    }

    #[test]
    fn golden_ratio_fails_at_small_delta() {
        let x = TargetVector::new(vec![Coord::golden()]).unwrap();
        let ws = WeightSet::singleton(Weight::standard(1));
        let r = singular_certificate(&x, &ws, &rat(1, 10), 1_000_000).unwrap();
        assert!(!r.succeeded());
        assert!(!r.failures.is_empty());
        assert!(r.failures.iter().any(|f| f.q_to >= 900_000));
        let e = epsilon_singular_certificate(&x, &ws, &rat(6, 5), 1_000_000).unwrap();
        assert!(!e.succeeded());
    }

    #[test]
    fn epsilon_one_always_succeeds() {
        let x = TargetVector::new(vec![Coord::sqrt_minus(2, 1), Coord::sqrt_minus(5, 2)]).unwrap();
        let ws = WeightSet::grid(2, &rat(1, 4)).unwrap();
        let e = epsilon_singular_certificate(&x, &ws, &rat(1, 1), 5000).unwrap();
        assert_eq!(e.q0, Some(1));
        assert!(e.recheck(&x).unwrap());
        let d = dirichlet_certificate(&x, &ws, 5000).unwrap();
        assert_eq!(d.q0, Some(1));
    }

    #[test]
    fn monotone_in_delta() {
        let x = TargetVector::new(vec![Coord::ratio(1, 3), Coord::sqrt_minus(2, 1)]).unwrap();
        let ws = WeightSet::singleton(Weight::standard(2));
        let a = singular_certificate(&x, &ws, &rat(1, 10), 20000).unwrap();
        let b = singular_certificate(&x, &ws, &rat(1, 2), 20000).unwrap();
        assert!(a.succeeded());
        assert!(b.q0.unwrap() <= a.q0.unwrap());
    }
}
