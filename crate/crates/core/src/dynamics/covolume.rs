//! Covolumes of `g_t^w u_x Gamma` for primitive submodules `Gamma` of `Z^{n+1}`.
//!
//! Plücker coordinates are kept as maps from index bitmasks to values;
//! `g_t^w` scales the coordinate of `e_I` by `e^{s_I t}` with
//! `s_I = sum_{i in I} lambda_i` and `lambda = (w_1, ..., w_n, -1)`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::norm::ln_rat;
use crate::target::TargetVector;
use crate::weight::Weight;

/// A primitive rank-`j` submodule of `Z^{n+1}` in Hermite normal form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubmoduleBasis {
    vectors: Vec<Vec<BigInt>>,
    ambient: usize,
}

type Rows = Vec<Vec<BigInt>>;

/// Unimodular row reduction on the first `cols` columns. Returns the rank;
/// rows past the rank vanish on those columns.
fn echelon(rows: &mut Rows, cols: usize) -> usize {
    let mut r = 0;
    for c in 0..cols {
        if r == rows.len() {
            break;
        }
        let Some(piv) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, piv);
        for i in r + 1..rows.len() {
            if rows[i][c].is_zero() {
                continue;
            }
            let a = rows[r][c].clone();
            let b = rows[i][c].clone();
            let e = a.extended_gcd(&b);
            let (g, s, t) = (e.gcd, e.x, e.y);
            let (ag, bg) = (&a / &g, &b / &g);
            let new_r: Vec<BigInt> = rows[r].iter().zip(&rows[i]).map(|(u, v)| &s * u + &t * v).collect();
            let new_i: Vec<BigInt> = rows[r].iter().zip(&rows[i]).map(|(u, v)| &ag * v - &bg * u).collect();
            rows[r] = new_r;
            rows[i] = new_i;
        }
        if rows[r][c].is_negative() {
            for v in rows[r].iter_mut() {
                *v = -v.clone();
            }
        }
        let p = rows[r][c].clone();
        for k in 0..r {
            let f = rows[k][c].div_floor(&p);
            if !f.is_zero() {
                let sub: Vec<BigInt> = rows[r].iter().map(|v| &f * v).collect();
                for (x, y) in rows[k].iter_mut().zip(sub) {
                    *x -= y;
                }
            }
        }
        r += 1;
    }
    r
}

/// Basis of the integer kernel `{v : rows . v = 0}`; always saturated.
fn integer_kernel(rows: &[Vec<BigInt>], m: usize) -> Rows {
    let k = rows.len();
    let mut aug: Rows = (0..m)
        .map(|i| {
            let mut r: Vec<BigInt> = rows.iter().map(|row| row[i].clone()).collect();
            r.extend((0..m).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }));
            r
        })
        .collect();
    let rank = echelon(&mut aug, k);
    aug[rank..].iter().map(|r| r[k..].to_vec()).collect()
}

fn rank_of(rows: &[Vec<BigInt>]) -> usize {
    let mut r = rows.to_vec();
    let m = rows.first().map_or(0, Vec::len);
    echelon(&mut r, m)
}

impl SubmoduleBasis {
    /// Spans the given integer vectors, saturates the span (its real span
    /// intersected with the integer lattice) and reduces to Hermite normal form.
    pub fn new(vectors: Vec<Vec<BigInt>>) -> Result<Self> {
        let Some(m) = vectors.first().map(Vec::len) else {
            return Err(Error::RankDeficiency("no vectors given".into()));
        };
        if m < 2 {
            return Err(Error::Domain("ambient dimension must be at least 2".into()));
        }
        if vectors.iter().any(|v| v.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: vectors.iter().map(Vec::len).find(|&l| l != m).unwrap(),
            });
        }
        let j = vectors.len();
        let r = rank_of(&vectors);
        if r < j {
            return Err(Error::RankDeficiency(format!("{j} vectors span a rank-{r} module")));
        }
        let perp = integer_kernel(&vectors, m);
        let mut sat = if perp.is_empty() {
            (0..m)
                .map(|i| (0..m).map(|k| if i == k { BigInt::one() } else { BigInt::zero() }).collect())
                .collect()
        } else {
            integer_kernel(&perp, m)
        };
        let rk = echelon(&mut sat, m);
        sat.truncate(rk);
        debug_assert_eq!(rk, j);
        Ok(SubmoduleBasis {
            vectors: sat,
            ambient: m,
        })
    }

    pub fn from_i64(vectors: &[Vec<i64>]) -> Result<Self> {
        Self::new(vectors.iter().map(|v| v.iter().map(|&a| BigInt::from(a)).collect()).collect())
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    /// `n + 1`
    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn vectors(&self) -> &[Vec<BigInt>] {
        &self.vectors
    }

    /// Integer Plücker coordinates of the basis wedge, keyed by index set.
    pub fn plucker(&self) -> Vec<(Vec<usize>, BigInt)> {
        let p = wedge_rows(&self.vectors);
        p.into_iter().filter(|(_, v)| !v.is_zero()).map(|(m, v)| (mask_indices(m), v)).collect()
    }
}

fn mask_indices(m: u32) -> Vec<usize> {
    (0..32).filter(|i| m >> i & 1 == 1).collect()
}

/// `e_J ^ e_i = sign * e_{J + i}`
#[inline]
fn wedge_sign(mask: u32, i: usize) -> bool {
    (mask >> (i + 1)).count_ones() % 2 == 1
}

fn wedge_vec<T>(v: &BTreeMap<u32, T>, u: &[T]) -> BTreeMap<u32, T>
where
    T: Clone + Zero + Add<Output = T> + Mul<Output = T> + Neg<Output = T>,
{
    let mut out: BTreeMap<u32, T> = BTreeMap::new();
    for (&mask, c) in v {
        for (i, ui) in u.iter().enumerate() {
            if mask >> i & 1 == 1 || ui.is_zero() {
                continue;
            }
            let term = c.clone() * ui.clone();
            let term = if wedge_sign(mask, i) { -term } else { term };
            let e = out.entry(mask | 1 << i).or_insert_with(T::zero);
            *e = e.clone() + term;
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn wedge_rows<T>(rows: &[Vec<T>]) -> BTreeMap<u32, T>
where
    T: Clone + Zero + One + Add<Output = T> + Mul<Output = T> + Neg<Output = T>,
{
    let mut acc = BTreeMap::from([(0u32, T::one())]);
    for r in rows {
        acc = wedge_vec(&acc, r);
    }
    acc
}

/// Coordinates of `x` used for covolume arithmetic: exact for rational
/// coordinates, interval midpoints at the working precision otherwise.
fn coords_rat(x: &TargetVector) -> Vec<BigRational> {
    x.coords()
        .iter()
        .map(|c| match c.as_rational() {
            Some(r) => r.clone(),
            None => {
                let iv = c.interval(x.precision());
                (&iv.lo + &iv.hi) / BigRational::from_integer(BigInt::from(2))
            }
        })
        .collect()
}

fn ux_rows(basis: &SubmoduleBasis, xr: &[BigRational]) -> Vec<Vec<BigRational>> {
    let n = basis.ambient - 1;
    basis
        .vectors
        .iter()
        .map(|b| {
            let last = BigRational::from_integer(b[n].clone());
            let mut r: Vec<BigRational> = (0..n)
                .map(|i| BigRational::from_integer(b[i].clone()) + &xr[i] * &last)
                .collect();
            r.push(last);
            r
        })
        .collect()
}

fn lambda(w: &Weight) -> Vec<f64> {
    let mut l = w.as_f64();
    l.push(-1.0);
    l
}

fn check(basis: &SubmoduleBasis, x: &TargetVector, w: &Weight, t: f64) -> Result<()> {
    x.check_dim(w.dim())?;
    if basis.ambient != x.dim() + 1 {
        return Err(Error::DimensionMismatch {
            expected: x.dim() + 1,
            actual: basis.ambient,
        });
    }
    if !t.is_finite() {
        return Err(Error::Domain(format!("time t = {t} must be finite")));
    }
    Ok(())
}

/// `ln ||sum_I e^{s_I t} c_I e_I||_2` from coordinates given as `(mask, ln|c_I|)`.
fn ln_norm(coords: impl Iterator<Item = (u32, f64)>, lam: &[f64], t: f64) -> f64 {
    let terms: Vec<f64> = coords
        .map(|(m, lc)| {
            let s: f64 = (0..lam.len()).filter(|i| m >> i & 1 == 1).map(|i| lam[i]).sum();
            2.0 * (s * t + lc)
        })
        .collect();
    let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    0.5 * (mx + terms.iter().map(|v| (v - mx).exp()).sum::<f64>().ln())
}

fn ln_abs_rat(r: &BigRational) -> f64 {
    ln_rat(&r.abs())
}

/// Plücker coordinates of `u_x Gamma` with their index sets.
pub fn plucker_coordinates(basis: &SubmoduleBasis, x: &TargetVector) -> Result<Vec<(Vec<usize>, f64)>> {
    if basis.ambient != x.dim() + 1 {
        return Err(Error::DimensionMismatch {
            expected: x.dim() + 1,
            actual: basis.ambient,
        });
    }
    let p = wedge_rows(&ux_rows(basis, &coords_rat(x)));
    Ok(p.into_iter()
        .map(|(m, v)| (mask_indices(m), crate::real::rat_to_f64(&v)))
        .collect())
}

/// Covolume `||sum_I e^{s_I t} c_I e_I||_2` of already computed coordinates.
pub fn covolume_from_plucker(coords: &[(Vec<usize>, f64)], w: &Weight, t: f64) -> f64 {
    let lam = lambda(w);
    ln_norm(
        coords.iter().filter(|(_, c)| *c != 0.0).map(|(ix, c)| {
            let m = ix.iter().fold(0u32, |m, &i| m | 1 << i);
            (m, c.abs().ln())
        }),
        &lam,
        t,
    )
    .exp()
}

/// Natural log of the covolume of `g_t^w u_x Gamma`.
pub fn ln_submodule_covolume(basis: &SubmoduleBasis, x: &TargetVector, w: &Weight, t: f64) -> Result<f64> {
    check(basis, x, w, t)?;
    let p = wedge_rows(&ux_rows(basis, &coords_rat(x)));
    let v = ln_norm(p.iter().map(|(&m, c)| (m, ln_abs_rat(c))), &lambda(w), t);
    if v == f64::NEG_INFINITY {
        return Err(Error::RankDeficiency("the transformed wedge vanishes".into()));
    }
    Ok(v)
}

/// Covolume of `g_t^w u_x Gamma`: the Euclidean norm of the wedge of the
/// transformed basis.
pub fn submodule_covolume(basis: &SubmoduleBasis, x: &TargetVector, w: &Weight, t: f64) -> Result<f64> {
    Ok(ln_submodule_covolume(basis, x, w, t)?.exp())
}

/// Exact comparison at `t = 0` of `det(B B^T)` with the sum of squared
/// Plücker coordinates, `B` the rows of `u_x Gamma`.
#[derive(Clone, Debug, Serialize)]
pub struct GramCheck {
    pub gram_determinant: String,
    pub plucker_square_sum: String,
    pub equal: bool,
}

fn det_rat(mut a: Vec<Vec<BigRational>>) -> BigRational {
    let n = a.len();
    let mut det = BigRational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return BigRational::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        let piv = a[c][c].clone();
        det *= &piv;
        for i in c + 1..n {
            let f = &a[i][c] / &piv;
            if f.is_zero() {
                continue;
            }
            for k in c..n {
                let s = &f * &a[c][k];
                a[i][k] -= s;
            }
        }
    }
    det
}

pub fn gram_cross_check(basis: &SubmoduleBasis, x: &TargetVector) -> Result<GramCheck> {
    if basis.ambient != x.dim() + 1 {
        return Err(Error::DimensionMismatch {
            expected: x.dim() + 1,
            actual: basis.ambient,
        });
    }
    if !x.is_rational() {
        return Err(Error::Domain("the exact Gram check needs a rational target".into()));
    }
    let rows = ux_rows(basis, &coords_rat(x));
    let gram: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|a| {
            rows.iter()
                .map(|b| a.iter().zip(b).fold(BigRational::zero(), |s, (u, v)| s + u * v))
                .collect()
        })
        .collect();
    let det = det_rat(gram);
    let sq = wedge_rows(&rows).values().fold(BigRational::zero(), |s, v| s + v * v);
    Ok(GramCheck {
        gram_determinant: det.to_string(),
        plucker_square_sum: sq.to_string(),
        equal: det == sq,
    })
}

/// Covolume against `M = max(||g(v0 ^ (q x - p, 0))||, |q| ||g(v0 ^ e_n)||)`.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionVerdict {
    pub covolume: f64,
    pub max_expression: f64,
    /// `covolume / M`
    pub ratio: f64,
    pub c: f64,
    pub q: String,
    pub p: Vec<String>,
    /// `v0` as `(indices, coefficient)`
    pub v0: Vec<(Vec<usize>, String)>,
    pub q_zero_branch: bool,
    pub passed: bool,
}

/// Writes `Gamma`'s wedge as `v0 ^ (q e_n - (p, 0))` with `v0` in the
/// last-coordinate-zero subspace and checks `covolume in [M / C, C M]`.
pub fn covolume_decomposition_check(
    basis: &SubmoduleBasis,
    x: &TargetVector,
    w: &Weight,
    t: f64,
    c: f64,
) -> Result<DecompositionVerdict> {
    check(basis, x, w, t)?;
    if !(c >= 1.0) {
        return Err(Error::Domain(format!("comparison constant C = {c} must be at least 1")));
    }
    let n = basis.ambient - 1;
    let j = basis.rank();
    let mut b = basis.vectors.clone();
    // move the gcd of the last coordinates into the last vector
    for k in 0..j - 1 {
        let (cl, ck) = (b[j - 1][n].clone(), b[k][n].clone());
        if ck.is_zero() {
            continue;
        }
        let e = cl.extended_gcd(&ck);
        let (g, s, tt) = (e.gcd, e.x, e.y);
        let (lg, kg) = (&cl / &g, &ck / &g);
        let new_last: Vec<BigInt> = b[j - 1].iter().zip(&b[k]).map(|(u, v)| &s * u + &tt * v).collect();
        let new_k: Vec<BigInt> = b[j - 1].iter().zip(&b[k]).map(|(u, v)| &lg * v - &kg * u).collect();
        b[j - 1] = new_last;
        b[k] = new_k;
    }
    if b[j - 1][n].is_negative() {
        for v in b[j - 1].iter_mut() {
            *v = -v.clone();
        }
    }
    let full = wedge_rows(&basis.vectors);
    let q = b[j - 1][n].clone();
    let q_zero = q.is_zero();
    let lam = lambda(w);
    let ln_cov = ln_submodule_covolume(basis, x, w, t)?;
    let (v0, p, ln_m) = if q_zero {
        // Gamma lies in the last-coordinate-zero subspace, which u_x fixes
        let v0 = full.clone();
        let ln_m = ln_norm(v0.iter().map(|(&m, c)| (m, ln_abs_rat(&BigRational::from_integer(c.clone())))), &lam, t);
        (v0, vec![BigInt::zero(); n], ln_m)
    } else {
        let v0 = wedge_rows(&b[..j - 1]);
        if v0.keys().any(|m| m >> n & 1 == 1) {
            return Err(Error::DecompositionFailure(format!("v0 has an e_n component: {v0:?}")));
        }
        let rebuilt = wedge_vec(&v0, &b[j - 1]);
        let neg: BTreeMap<u32, BigInt> = rebuilt.iter().map(|(&m, v)| (m, -v.clone())).collect();
        if rebuilt != full && neg != full {
            return Err(Error::DecompositionFailure(format!(
                "v0 ^ (q e_n - (p, 0)) = {rebuilt:?} differs from the Plücker vector {full:?}"
            )));
        }
        let p: Vec<BigInt> = b[j - 1][..n].iter().map(|v| -v.clone()).collect();
        // u = (q x - p, 0) at the working precision
        let xr = coords_rat(x);
        let qr = BigRational::from_integer(q.clone());
        let mut u: Vec<BigRational> = (0..n)
            .map(|i| &qr * &xr[i] - BigRational::from_integer(p[i].clone()))
            .collect();
        u.push(BigRational::zero());
        let v0r: BTreeMap<u32, BigRational> =
            v0.iter().map(|(&m, c)| (m, BigRational::from_integer(c.clone()))).collect();
        let a = wedge_vec(&v0r, &u);
        let ln_a = ln_norm(a.iter().map(|(&m, c)| (m, ln_abs_rat(c))), &lam, t);
        let ln_b = ln_rat(&qr)
            + ln_norm(
                v0r.iter().map(|(&m, c)| (m | 1 << n, ln_abs_rat(c))),
                &lam,
                t,
            );
        (v0, p, ln_a.max(ln_b))
    };
    let ratio = (ln_cov - ln_m).exp();
    let tol = 1e-12;
    Ok(DecompositionVerdict {
        covolume: ln_cov.exp(),
        max_expression: ln_m.exp(),
        ratio,
        c,
        q: q.to_string(),
        p: p.iter().map(BigInt::to_string).collect(),
        v0: v0.iter().map(|(&m, v)| (mask_indices(m), v.to_string())).collect(),
        q_zero_branch: q_zero,
        passed: ratio >= 1.0 / c - tol && ratio <= c + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::Coord;

    fn w2() -> Weight {
        Weight::from_ratios(&[(1, 3), (2, 3)]).unwrap()
    }

    fn x2() -> TargetVector {
        TargetVector::new(vec![Coord::sqrt_minus(2, 1), Coord::ratio(2, 7)]).unwrap()
    }

    #[test]
    fn saturation_and_hnf() {
        let b = SubmoduleBasis::from_i64(&[vec![2, 0, 0], vec![0, 3, 0]]).unwrap();
        assert_eq!(b, SubmoduleBasis::from_i64(&[vec![1, 0, 0], vec![0, 1, 0]]).unwrap());
        let b = SubmoduleBasis::from_i64(&[vec![2, 4, 6]]).unwrap();
        assert_eq!(b.vectors()[0], vec![BigInt::from(1), BigInt::from(2), BigInt::from(3)]);
        let b = SubmoduleBasis::from_i64(&[vec![1, 1, 0], vec![1, -1, 0]]).unwrap();
        assert_eq!(b.plucker(), vec![(vec![0, 1], BigInt::from(1))]);
        assert!(matches!(
            SubmoduleBasis::from_i64(&[vec![1, 2, 3], vec![2, 4, 6]]),
            Err(Error::RankDeficiency(_))
        ));
    }

    #[test]
    fn covolume_examples() {
        let t = 1.7;
        let e0 = SubmoduleBasis::from_i64(&[vec![1, 0, 0]]).unwrap();
        let v = submodule_covolume(&e0, &x2(), &w2(), t).unwrap();
        assert!((v - (t / 3.0).exp()).abs() < 1e-12 * v);
        let en = SubmoduleBasis::from_i64(&[vec![0, 0, 1]]).unwrap();
        let x = x2().as_f64();
        let expect = (((t / 3.0).exp() * x[0]).powi(2) + ((2.0 * t / 3.0).exp() * x[1]).powi(2) + (-2.0 * t).exp()).sqrt();
        let v = submodule_covolume(&en, &x2(), &w2(), t).unwrap();
        assert!((v - expect).abs() < 1e-12 * expect);
        // the whole lattice is unimodular
        let all = SubmoduleBasis::from_i64(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]).unwrap();
        assert!((submodule_covolume(&all, &x2(), &w2(), 5.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gram_determinant_matches() {
        let x = TargetVector::from_ratios(&[(1, 3), (-2, 5)]).unwrap();
        let b = SubmoduleBasis::from_i64(&[vec![1, 2, 3], vec![0, 5, -1]]).unwrap();
        let g = gram_cross_check(&b, &x).unwrap();
        assert!(g.equal, "{g:?}");
        let f = submodule_covolume(&b, &x, &w2(), 0.0).unwrap();
        let det: f64 = {
            let r: BigRational = g.gram_determinant.parse().unwrap();
            crate::real::rat_to_f64(&r)
        };
        assert!((f * f - det).abs() < 1e-12 * det);
    }

    #[test]
    fn decomposition_examples() {
        let b = SubmoduleBasis::from_i64(&[vec![3, -1, 2], vec![1, 4, 5]]).unwrap();
        for t in [0.0, 2.5, 9.0] {
            let v = covolume_decomposition_check(&b, &x2(), &w2(), t, 6.0).unwrap();
            assert!(v.passed, "{v:?}");
            assert!(v.ratio >= 1.0 - 1e-12 && v.ratio <= 2f64.sqrt() + 1e-12);
        }
        let flat = SubmoduleBasis::from_i64(&[vec![1, 2, 0]]).unwrap();
        let v = covolume_decomposition_check(&flat, &x2(), &w2(), 4.0, 1.0).unwrap();
        assert!(v.q_zero_branch);
        assert!((v.ratio - 1.0).abs() < 1e-12);
        // single vector q e_n - (p, 0)
        let one = SubmoduleBasis::from_i64(&[vec![-1, 0, 2]]).unwrap();
        let v = covolume_decomposition_check(&one, &x2(), &w2(), 3.0, 3f64.sqrt()).unwrap();
        assert!(v.passed);
        assert_eq!(v.q, "2");
        assert_eq!(v.p, vec!["1".to_string(), "0".to_string()]);
    }
}
