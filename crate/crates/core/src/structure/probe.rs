//! Empirical comparison of uniform exponents on a rational-coefficient
//! affine subspace and on a polynomial curve inside it.

use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::approx::{finite_or_none, sigma_hat_w_estimate, EstimatorConfig};
use crate::error::{Error, Result};
use crate::real::{CfRule, RealExpr};
use crate::target::{Coord, TargetVector};
use crate::weight::WeightSet;

/// `s -> A s + b` with `A` a `d x k` rational matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub a: Vec<Vec<BigRational>>,
    pub b: Vec<BigRational>,
}

/// `u -> (sum_k c_{i,k} u^k)_i`, coefficients in ascending powers.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyCurve {
    pub coeffs: Vec<Vec<BigRational>>,
}

impl AffineMap {
    pub fn new(a: Vec<Vec<BigRational>>, b: Vec<BigRational>) -> Result<Self> {
        let d = b.len();
        if d == 0 || a.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: a.len(),
            });
        }
        let k = a[0].len();
        if k == 0 || a.iter().any(|r| r.len() != k) {
            return Err(Error::Domain("the parametrizing matrix needs equal, non-empty rows".into()));
        }
        Ok(AffineMap { a, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn params(&self) -> usize {
        self.a[0].len()
    }

    pub fn point(&self, s: &[RealExpr]) -> Result<TargetVector> {
        let coords = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| {
                let mut terms = vec![RealExpr::Rational(bi.clone())];
                for (aij, sj) in row.iter().zip(s) {
                    if !aij.is_zero() {
                        terms.push(sj.clone().scale(aij.clone()));
                    }
                }
                Coord::real(RealExpr::Sum(terms))
            })
            .collect();
        TargetVector::new(coords)
    }

    pub fn describe(&self) -> String {
        let rows: Vec<String> = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(r, b)| {
                let r: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                format!("[{}] + {b}", r.join(", "))
            })
            .collect();
        format!("A s + b: {}", rows.join("; "))
    }
}

impl PolyCurve {
    pub fn new(coeffs: Vec<Vec<BigRational>>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(Vec::is_empty) {
            return Err(Error::Domain("every curve coordinate needs a coefficient list".into()));
        }
        Ok(PolyCurve { coeffs })
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().map(Vec::len).max().unwrap_or(1) - 1
    }

    pub fn point(&self, u: &RealExpr) -> Result<TargetVector> {
        let coords = self
            .coeffs
            .iter()
            .map(|cs| {
                let mut terms = Vec::new();
                let mut power = RealExpr::int(1);
                for (k, c) in cs.iter().enumerate() {
                    if k > 0 {
                        power = power.mul(u.clone());
                    }
                    if !c.is_zero() {
                        terms.push(power.clone().scale(c.clone()));
                    }
                }
                Coord::real(RealExpr::Sum(terms))
            })
            .collect();
        TargetVector::new(coords)
    }

    pub fn describe(&self) -> String {
        let cs: Vec<String> = self
            .coeffs
            .iter()
            .map(|c| {
                let v: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                format!("[{}]", v.join(", "))
            })
            .collect();
        format!("polynomial coefficients {}", cs.join("; "))
    }
}

fn rank(mut m: Vec<Vec<BigRational>>) -> usize {
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        for i in r + 1..m.len() {
            let f = &m[i][c] / &m[r][c];
            if f.is_zero() {
                continue;
            }
            for k in c..cols {
                let s = &f * &m[r][k];
                m[i][k] -= s;
            }
        }
        r += 1;
    }
    r
}

/// Exact test that the curve lies in the subspace: every coefficient vector
/// (the constant one shifted by `-b`) lies in the column space of `A`.
pub fn curve_in_subspace(sub: &AffineMap, curve: &PolyCurve) -> Result<()> {
    if sub.dim() != curve.dim() {
        return Err(Error::DimensionMismatch {
            expected: sub.dim(),
            actual: curve.dim(),
        });
    }
    let base = rank(sub.a.clone());
    for k in 0..=curve.degree() {
        let v: Vec<BigRational> = (0..sub.dim())
            .map(|i| {
                let c = curve.coeffs[i].get(k).cloned().unwrap_or_else(BigRational::zero);
                if k == 0 {
                    c - &sub.b[i]
                } else {
                    c
                }
            })
            .collect();
        let aug: Vec<Vec<BigRational>> = sub
            .a
            .iter()
            .zip(&v)
            .map(|(r, vi)| {
                let mut r = r.clone();
                r.push(vi.clone());
                r
            })
            .collect();
        if rank(aug) != base {
            let v: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            return Err(Error::ContainmentViolation(format!(
                "coefficient of u^{k} ({}) is not in the direction space",
                v.join(", ")
            )));
        }
    }
    Ok(())
}

/// Summary of one sample set (`None` marks an infinite estimate).
#[derive(Clone, Debug, Serialize)]
pub struct SampleStats {
    #[serde(serialize_with = "ser_values")]
    pub values: Vec<f64>,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

fn ser_values<S: serde::Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter().map(|x| finite_or_none(*x)).collect::<Vec<_>>().serialize(s)
}

impl SampleStats {
    fn new(values: Vec<f64>) -> Self {
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        SampleStats {
            median,
            min: sorted[0],
            max: sorted[n - 1],
            values,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InheritanceProbeReport {
    pub subspace: String,
    pub curve: String,
    pub weights: WeightSet,
    pub q_max: u64,
    pub sample_count: usize,
    pub seed: u64,
    pub config: EstimatorConfig,
    pub subspace_stats: SampleStats,
    pub curve_stats: SampleStats,
    pub median_difference: f64,
}

/// Partial quotients of the sampled parameters are drawn from `1..=MAX_QUOTIENT`.
const MAX_QUOTIENT: u64 = 50;

fn random_real(rng: &mut ChaCha8Rng) -> RealExpr {
    RealExpr::ContinuedFraction(CfRule::Seeded {
        seed: rng.random(),
        max: MAX_QUOTIENT,
    })
}

fn estimate(x: &TargetVector, ws: &WeightSet, q_max: u64, cfg: &EstimatorConfig) -> Result<f64> {
    match sigma_hat_w_estimate(x, ws, q_max, cfg) {
        Ok(e) => Ok(e.value),
        Err(Error::TerminatedRational { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Samples points of the subspace (parameters in `(0, 1)^k`) and of the curve
/// (parameter in `(0, 1)`) from seeded random continued fractions and
/// estimates the uniform exponent of each with identical settings.
pub fn inheritance_probe(
    sub: &AffineMap,
    curve: &PolyCurve,
    ws: &WeightSet,
    q_max: u64,
    sample_count: usize,
    seed: u64,
    cfg: &EstimatorConfig,
) -> Result<InheritanceProbeReport> {
    curve_in_subspace(sub, curve)?;
    if ws.dim() != sub.dim() {
        return Err(Error::DimensionMismatch {
            expected: sub.dim(),
            actual: ws.dim(),
        });
    }
    if sample_count == 0 {
        return Err(Error::InsufficientData("sample count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(2 * sample_count);
    for _ in 0..sample_count {
        let s: Vec<RealExpr> = (0..sub.params()).map(|_| random_real(&mut rng)).collect();
        points.push(sub.point(&s)?);
    }
    for _ in 0..sample_count {
        points.push(curve.point(&random_real(&mut rng))?);
    }
    let values: Vec<f64> = points
        .par_iter()
        .map(|x| estimate(x, ws, q_max, cfg))
        .collect::<Result<_>>()?;
    let (a, b) = values.split_at(sample_count);
    let subspace_stats = SampleStats::new(a.to_vec());
    let curve_stats = SampleStats::new(b.to_vec());
    Ok(InheritanceProbeReport {
        subspace: sub.describe(),
        curve: curve.describe(),
        weights: ws.clone(),
        q_max,
        sample_count,
        seed,
        config: cfg.clone(),
        median_difference: curve_stats.median - subspace_stats.median,
        subspace_stats,
        curve_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::Weight;
    use num_bigint::BigInt;

    fn r(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn containment() {
        let sub = AffineMap::new(vec![vec![r(1), r(0)], vec![r(0), r(1)], vec![r(1), r(1)]], vec![r(0); 3]).unwrap();
        let curve = PolyCurve::new(vec![vec![r(0), r(1)], vec![r(0), r(0), r(1)], vec![r(0), r(1), r(1)]]).unwrap();
        assert!(curve_in_subspace(&sub, &curve).is_ok());
        let off = PolyCurve::new(vec![vec![r(0), r(1)], vec![r(0), r(0), r(1)], vec![r(0), r(1), r(2)]]).unwrap();
        assert!(matches!(curve_in_subspace(&sub, &off), Err(Error::ContainmentViolation(_))));
    }

    #[test]
    fn plane_and_parabola_have_exponent_near_one() {
        let sub = AffineMap::new(vec![vec![r(1), r(0)], vec![r(0), r(1)]], vec![r(0); 2]).unwrap();
        let curve = PolyCurve::new(vec![vec![r(0), r(1)], vec![r(0), r(0), r(1)]]).unwrap();
        let ws = WeightSet::singleton(Weight::standard(2));
        let rep = inheritance_probe(&sub, &curve, &ws, 20_000, 4, 7, &EstimatorConfig::default()).unwrap();
        assert!((0.7..1.3).contains(&rep.subspace_stats.median), "{:?}", rep.subspace_stats);
        assert!((0.7..1.3).contains(&rep.curve_stats.median), "{:?}", rep.curve_stats);
        // the same seed reproduces the same values
        let again = inheritance_probe(&sub, &curve, &ws, 20_000, 4, 7, &EstimatorConfig::default()).unwrap();
        assert_eq!(rep.subspace_stats.values, again.subspace_stats.values);
    }

    #[test]
    fn rational_line_lifts_the_exponent() {
        // x_1 = 1/3, curve (1/3, u^2)
        let sub = AffineMap::new(vec![vec![r(0)], vec![r(1)]], vec![q(1, 3), r(0)]).unwrap();
        let curve = PolyCurve::new(vec![vec![q(1, 3)], vec![r(0), r(0), r(1)]]).unwrap();
        let ws = WeightSet::singleton(Weight::standard(2));
        let rep = inheritance_probe(&sub, &curve, &ws, 1_000_000, 8, 11, &EstimatorConfig::default()).unwrap();
        assert!(rep.subspace_stats.median >= 1.8, "{:?}", rep.subspace_stats);
        assert!(rep.curve_stats.median >= 1.8, "{:?}", rep.curve_stats);
    }
}
