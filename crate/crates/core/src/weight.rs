use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::real::rat_to_f64;

/// A weight: exact rationals in `[0, 1]` summing to one.
///
/// Alongside the entries we keep the common-denominator form `w_i = n_i / m`,
/// which is what the exact quasi-norm comparisons raise to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Weight {
    entries: Vec<BigRational>,
    numerators: Vec<u32>,
    denominator: u32,
}

impl Weight {
    pub fn new(entries: Vec<BigRational>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidWeight("a weight needs at least one entry".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.is_negative() || e > &BigRational::one() {
                return Err(Error::InvalidWeight(format!("entry {} = {e} lies outside [0, 1]", i + 1)));
            }
        }
        let sum: BigRational = entries.iter().cloned().sum();
        if !sum.is_one() {
            return Err(Error::InvalidWeight(format!("entries sum to {sum}, not 1")));
        }
        let m = entries
            .iter()
            .fold(BigInt::one(), |acc, e| acc.lcm(e.denom()));
        let denominator = m
            .to_u32()
            .ok_or_else(|| Error::InvalidWeight(format!("common denominator {m} is too large")))?;
        let numerators = entries
            .iter()
            .map(|e| (e * BigRational::from_integer(m.clone())).to_integer().to_u32().unwrap())
            .collect();
        Ok(Weight {
            entries,
            numerators,
            denominator,
        })
    }

    pub fn from_ratios(pairs: &[(i64, i64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d)))
                .collect(),
        )
    }

    /// `(1/d, ..., 1/d)`
    pub fn standard(d: usize) -> Self {
        let e = BigRational::new(BigInt::one(), BigInt::from(d));
        Self::new(vec![e; d]).expect("standard weight is valid")
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[BigRational] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &BigRational {
        &self.entries[i]
    }

    /// Common denominator `m` with `w_i = n_i / m`.
    pub fn denominator(&self) -> u32 {
        self.denominator
    }

    pub fn numerators(&self) -> &[u32] {
        &self.numerators
    }

    pub fn is_proper(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.is_positive() && e < &BigRational::one())
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.entries.iter().map(rat_to_f64).collect()
    }

    pub fn min_entry(&self) -> &BigRational {
        self.entries.iter().min().expect("nonempty")
    }

    pub fn max_entry(&self) -> &BigRational {
        self.entries.iter().max().expect("nonempty")
    }

    pub fn is_standard(&self) -> bool {
        let d = BigRational::new(BigInt::one(), BigInt::from(self.dim()));
        self.entries.iter().all(|e| e == &d)
    }

    /// Drops the leading `i` entries, which must all vanish.
    pub fn restrict(&self, i: usize) -> Result<Weight> {
        if i == 0 || i >= self.dim() {
            return Err(Error::Domain(format!(
                "restriction index {i} must lie in 1..={}",
                self.dim() - 1
            )));
        }
        if let Some(j) = self.entries[..i].iter().position(|e| !e.is_zero()) {
            return Err(Error::InvalidWeight(format!(
                "cannot drop entry {} = {} (only zero entries may be dropped)",
                j + 1,
                self.entries[j]
            )));
        }
        Weight::new(self.entries[i..].to_vec())
    }
}

/// Drop the first `i` (zero) entries of `w`.
pub fn weight_restriction(w: &Weight, i: usize) -> Result<Weight> {
    w.restrict(i)
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let parts: Vec<String> = self.entries.iter().map(|e| e.to_string()).collect();
        parts.serialize(s)
    }
}

/// Finite, nonempty set of weights of a common dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightSet {
    weights: Vec<Weight>,
}

impl WeightSet {
    pub fn new(weights: Vec<Weight>) -> Result<Self> {
        let first = weights
            .first()
            .ok_or_else(|| Error::InvalidWeight("weight set is empty".into()))?;
        let d = first.dim();
        if let Some(w) = weights.iter().find(|w| w.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: w.dim(),
            });
        }
        Ok(WeightSet { weights })
    }

    pub fn singleton(w: Weight) -> Self {
        WeightSet { weights: vec![w] }
    }

    /// All proper weights whose entries are positive multiples of `mesh`.
    /// `1/mesh` must be an integer `N >= d`.
    pub fn grid(d: usize, mesh: &BigRational) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidWeight("dimension must be positive".into()));
        }
        let inv = mesh.recip();
        if !mesh.is_positive() || !inv.is_integer() {
            return Err(Error::InvalidWeight(format!("mesh {mesh} is not of the form 1/N")));
        }
        let n = inv
            .to_integer()
            .to_usize()
            .ok_or_else(|| Error::InvalidWeight("mesh too fine".into()))?;
        if n < d {
            return Err(Error::InvalidWeight(format!(
                "mesh {mesh} admits no proper weight in dimension {d}"
            )));
        }
        let mut out = Vec::new();
        let mut parts = vec![0usize; d];
        compositions(n, d, 0, &mut parts, &mut out);
        let weights = out
            .into_iter()
            .map(|ks| {
                Weight::new(
                    ks.iter()
                        .map(|&k| BigRational::new(BigInt::from(k), BigInt::from(n)))
                        .collect(),
                )
                .expect("grid weights are valid")
            })
            .collect();
        WeightSet::new(weights)
    }

    pub fn filter(&self, keep: impl Fn(&Weight) -> bool) -> Result<Self> {
        WeightSet::new(self.weights.iter().filter(|w| keep(w)).cloned().collect())
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].dim()
    }

    /// Smallest entry over all members.
    pub fn w_min(&self) -> BigRational {
        self.weights
            .iter()
            .map(|w| w.min_entry().clone())
            .min()
            .expect("nonempty")
    }

    /// Largest entry over all members.
    pub fn w_max(&self) -> BigRational {
        self.weights
            .iter()
            .map(|w| w.max_entry().clone())
            .max()
            .expect("nonempty")
    }

    pub fn all_proper(&self) -> bool {
        self.weights.iter().all(Weight::is_proper)
    }
}

impl Serialize for WeightSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.weights.serialize(s)
    }
}

fn compositions(n: usize, d: usize, idx: usize, parts: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let used: usize = parts[..idx].iter().sum();
    if idx == d - 1 {
        let last = n - used;
        if last >= 1 {
            parts[idx] = last;
            out.push(parts.clone());
        }
        return;
    }
    let remaining_slots = d - idx - 1;
    for k in 1..=(n - used).saturating_sub(remaining_slots) {
        parts[idx] = k;
        compositions(n, d, idx + 1, parts, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn validates_sum_and_range() {
        assert!(Weight::from_ratios(&[(1, 2), (1, 2)]).is_ok());
        assert!(Weight::from_ratios(&[(1, 2), (1, 3)]).is_err());
        assert!(Weight::from_ratios(&[(3, 2), (-1, 2)]).is_err());
        let w = Weight::from_ratios(&[(1, 3), (2, 3)]).unwrap();
        assert_eq!(w.denominator(), 3);
        assert_eq!(w.numerators(), &[1, 2]);
        assert!(w.is_proper());
        assert!(!Weight::from_ratios(&[(0, 1), (1, 1)]).unwrap().is_proper());
    }

    #[test]
    fn restriction_examples() {
        let w = Weight::from_ratios(&[(0, 1), (1, 2), (1, 2)]).unwrap();
        assert_eq!(
            weight_restriction(&w, 1).unwrap(),
            Weight::from_ratios(&[(1, 2), (1, 2)]).unwrap()
        );
        let w = Weight::from_ratios(&[(0, 1), (0, 1), (1, 1)]).unwrap();
        assert_eq!(weight_restriction(&w, 2).unwrap(), Weight::from_ratios(&[(1, 1)]).unwrap());
        let w = Weight::from_ratios(&[(1, 3), (1, 3), (1, 3)]).unwrap();
        assert!(matches!(weight_restriction(&w, 1), Err(Error::InvalidWeight(_))));
    }

    #[test]
    fn grid_counts_and_extremes() {
        let g = WeightSet::grid(2, &rat(1, 8)).unwrap();
        assert_eq!(g.len(), 7);
        assert_eq!(g.w_min(), rat(1, 8));
        assert_eq!(g.w_max(), rat(7, 8));
        assert!(g.all_proper());
        let g3 = WeightSet::grid(3, &rat(1, 32)).unwrap();
        assert_eq!(g3.len(), 465);
    }

    #[test]
    fn set_rejects_mixed_dimensions() {
        let a = Weight::standard(2);
        let b = Weight::standard(3);
        assert!(matches!(
            WeightSet::new(vec![a, b]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
