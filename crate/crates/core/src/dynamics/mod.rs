//! Diagonal flows on the lattices `u_x Z^{d+1}`: shortest-vector functions,
//! divergence rates and exterior-power covolumes.
//!
//! Lattice vectors of `a_{w,t} u_x Z^{d+1}` are
//! `(e^{w_i t}(q x_i - p_i))_i, e^{-t} q)`. Enumeration runs stratum by
//! stratum in `q`; the `q = 0` stratum is handled in closed form.

mod correspondence;
mod covolume;

pub use correspondence::{
    dani_cross_check, single_weight_equality_check, single_weight_equality_check_with, verify_sandwich,
    verify_sandwich_with, DaniReport, DaniSample, EqualityVerdict, SandwichVerdict,
};
pub use covolume::{
    covolume_decomposition_check, covolume_from_plucker, gram_cross_check, ln_submodule_covolume,
    plucker_coordinates, submodule_covolume, DecompositionVerdict, GramCheck, SubmoduleBasis,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::approx::WeightedScan;
use crate::error::{Error, Result};
use crate::scan::Scanner;
use crate::target::TargetVector;
use crate::weight::{Weight, WeightSet};

/// Largest denominator enumerated by default.
pub const DEFAULT_BUDGET: u64 = 1 << 24;

/// The lattice `a_{w,t} u_x Z^{d+1}`.
#[derive(Clone, Debug)]
pub struct FlowPoint {
    pub x: TargetVector,
    pub w: Weight,
    pub t: f64,
}

impl FlowPoint {
    pub fn new(x: TargetVector, w: Weight, t: f64) -> Result<Self> {
        x.check_dim(w.dim())?;
        check_time(t)?;
        Ok(FlowPoint { x, w, t })
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!("time t = {t} must be finite and non-negative")));
    }
    Ok(())
}

/// Largest `q` a shortest-vector search at time `t` may need.
fn q_limit(t: f64, budget: u64) -> Result<u64> {
    let needed = t.exp().ceil();
    if needed > budget as f64 {
        return Err(Error::ScaleOverflow { needed, budget });
    }
    Ok((needed as u64).max(1))
}

/// Residuals `|q x_i - p_i|` for `q = 1..=q_max`, row-major.
struct ResidualTable {
    d: usize,
    q_max: u64,
    r: Vec<f64>,
}

impl ResidualTable {
    fn new(x: &TargetVector, q_max: u64) -> Self {
        let sc = Scanner::new(x);
        let d = sc.dim();
        let mut r = vec![0.0; q_max as usize * d];
        r.par_chunks_mut(d * 4096).enumerate().for_each(|(chunk, out)| {
            let q0 = chunk as u64 * 4096 + 1;
            for (k, row) in out.chunks_mut(d).enumerate() {
                for (i, v) in row.iter_mut().enumerate() {
                    *v = sc.residual(i, q0 + k as u64).val;
                }
            }
        });
        ResidualTable { d, q_max, r }
    }

    #[inline]
    fn row(&self, q: u64) -> &[f64] {
        let s = (q as usize - 1) * self.d;
        &self.r[s..s + self.d]
    }
}

/// Sup-norm shortest vector of `a_{w,t} u_x Z^{d+1}` and the `q` attaining it
/// (`0` for the integer stratum).
fn sup_delta(tab: &ResidualTable, wf: &[f64], t: f64) -> (f64, u64) {
    let scale: Vec<f64> = wf.iter().map(|w| (w * t).exp()).collect();
    let mut best = scale.iter().copied().fold(f64::INFINITY, f64::min);
    let mut arg = 0;
    let et = (-t).exp();
    for q in 1..=tab.q_max {
        let lower = et * q as f64;
        if lower >= best {
            break;
        }
        let v = tab
            .row(q)
            .iter()
            .zip(&scale)
            .fold(lower, |m, (r, s)| m.max(r * s));
        if v < best {
            best = v;
            arg = q;
        }
    }
    (best, arg)
}

/// `a^{1/w}` with the zero-weight limit convention.
#[inline]
fn quasi_component(a: f64, w: f64) -> f64 {
    if w > 0.0 {
        if a == 0.0 {
            0.0
        } else {
            (a.ln() / w).exp()
        }
    } else if a < 1.0 {
        0.0
    } else if a == 1.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Weighted quasi-norm shortest vector on `a_{(1/d,...,1/d),t} u_x Z^{d+1}`;
/// the last coordinate enters with exponent one.
fn quasi_delta_standard_flow(tab: &ResidualTable, wf: &[f64], t: f64) -> (f64, u64) {
    let s = (t / tab.d as f64).exp();
    let mut best = wf.iter().map(|&w| quasi_component(s, w)).fold(f64::INFINITY, f64::min);
    let mut arg = 0;
    let et = (-t).exp();
    for q in 1..=tab.q_max {
        let lower = et * q as f64;
        if lower >= best {
            break;
        }
        let v = tab
            .row(q)
            .iter()
            .zip(wf)
            .fold(lower, |m, (r, &w)| m.max(quasi_component(r * s, w)));
        if v < best {
            best = v;
            arg = q;
        }
    }
    (best, arg)
}

/// Length (sup-norm) of a shortest nonzero vector of the lattice at `fp`.
pub fn delta(fp: &FlowPoint) -> Result<f64> {
    delta_with_budget(fp, DEFAULT_BUDGET)
}

pub fn delta_with_budget(fp: &FlowPoint, budget: u64) -> Result<f64> {
    let q_max = q_limit(fp.t, budget)?;
    let tab = ResidualTable::new(&fp.x, q_max);
    Ok(sup_delta(&tab, &fp.w.as_f64(), fp.t).0)
}

/// `inf_{w in W}` of the quasi-norm shortest vector on the standard-weight flow.
pub fn delta_w(x: &TargetVector, ws: &WeightSet, t: f64) -> Result<f64> {
    delta_w_with_budget(x, ws, t, DEFAULT_BUDGET)
}

pub fn delta_w_with_budget(x: &TargetVector, ws: &WeightSet, t: f64, budget: u64) -> Result<f64> {
    x.check_dim(ws.dim())?;
    check_time(t)?;
    let tab = ResidualTable::new(x, q_limit(t, budget)?);
    Ok(ws
        .weights()
        .iter()
        .map(|w| quasi_delta_standard_flow(&tab, &w.as_f64(), t).0)
        .fold(f64::INFINITY, f64::min))
}

/// One time sample of a divergence-rate trace.
#[derive(Clone, Debug, Serialize)]
pub struct RateSample {
    pub t: f64,
    /// index in the weight set of the weight attaining the infimum of the rate
    pub w_index: usize,
    pub delta: f64,
    /// `-ln(delta) / t`
    pub rate: f64,
    /// denominator of the shortest vector (`0` for the integer stratum)
    pub q: u64,
}

/// Samples of `(-1/t) ln delta` with the infimum over the weight set taken per time.
#[derive(Clone, Debug, Serialize)]
pub struct RateTrace {
    pub samples: Vec<RateSample>,
    pub tail_start: usize,
    pub tail_estimate: f64,
}

/// Settings for rate traces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowConfig {
    pub t_step: f64,
    pub tail_fraction: f64,
    pub min_tail: usize,
    pub budget: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            t_step: 0.25,
            tail_fraction: 0.25,
            min_tail: 4,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl FlowConfig {
    /// Arithmetic grid `t_step, 2 t_step, ...` up to `t_max`.
    pub fn grid(&self, t_max: f64) -> Result<Vec<f64>> {
        if !(self.t_step > 0.0) || !(t_max > 0.0) {
            return Err(Error::Domain("t_step and t_max must be positive".into()));
        }
        let n = (t_max / self.t_step + 1e-9).floor() as usize;
        Ok((1..=n).map(|k| k as f64 * self.t_step).collect())
    }

    fn tail_start(&self, len: usize) -> usize {
        let k = (self.tail_fraction * len as f64).ceil() as usize;
        len - k.max(self.min_tail).min(len)
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InsufficientData("empty time grid".into()));
    }
    for t in t_grid {
        check_time(*t)?;
        if *t == 0.0 {
            return Err(Error::Domain("rate samples need t > 0".into()));
        }
    }
    if t_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Domain("time grid must be strictly increasing".into()));
    }
    Ok(())
}

fn assemble(t_grid: &[f64], per_t: Vec<(usize, f64, u64)>, cfg: &FlowConfig) -> RateTrace {
    let samples: Vec<RateSample> = t_grid
        .iter()
        .zip(per_t)
        .map(|(&t, (w_index, delta, q))| RateSample {
            t,
            w_index,
            delta,
            rate: -delta.ln() / t,
            q,
        })
        .collect();
    let tail_start = cfg.tail_start(samples.len());
    let tail_estimate = samples[tail_start..]
        .iter()
        .map(|s| s.rate)
        .fold(f64::INFINITY, f64::min);
    RateTrace {
        samples,
        tail_start,
        tail_estimate,
    }
}

/// Divergence-rate trace for the sup-norm and the flows `a_{w,t}`, `w in W`.
pub fn tau_hat_estimate(x: &TargetVector, ws: &WeightSet, t_grid: &[f64], cfg: &FlowConfig) -> Result<RateTrace> {
    x.check_dim(ws.dim())?;
    check_grid(t_grid)?;
    let q_max = q_limit(*t_grid.last().unwrap(), cfg.budget)?;
    let tab = ResidualTable::new(x, q_max);
    let wfs: Vec<Vec<f64>> = ws.weights().iter().map(Weight::as_f64).collect();
    let per_t: Vec<(usize, f64, u64)> = t_grid
        .par_iter()
        .map(|&t| {
            // the infimum of the rate is attained by the largest delta
            wfs.iter()
                .enumerate()
                .map(|(i, wf)| {
                    let (d, q) = sup_delta(&tab, wf, t);
                    (i, d, q)
                })
                .fold((0, f64::NEG_INFINITY, 0), |a, b| if b.1 > a.1 { b } else { a })
        })
        .collect();
    Ok(assemble(t_grid, per_t, cfg))
}

/// Rate trace for one weight with the `w`-quasi-norm on `a_{w,t} u_x Z^{d+1}`.
///
/// A vector at denominator `q` has quasi-norm `max(e^t ||q x - p||_w, e^{-t} q)`,
/// so only best-approximation denominators can be shortest.
pub fn tau_hat_quasi_estimate(x: &TargetVector, w: &Weight, t_grid: &[f64], cfg: &FlowConfig) -> Result<RateTrace> {
    x.check_dim(w.dim())?;
    check_grid(t_grid)?;
    let q_max = q_limit(*t_grid.last().unwrap(), cfg.budget)?;
    let seq = WeightedScan::new(x, w)?.best_sequence(q_max)?;
    let entries: Vec<(u64, f64)> = seq.entries.iter().map(|a| (a.q, a.err.ln_approx())).collect();
    let unit = if w.entries().iter().any(num_traits::Zero::is_zero) { 0.0 } else { 1.0 };
    let per_t = t_grid
        .iter()
        .map(|&t| {
            // integer stratum: a unit vector gives e^t (or 1 on a zero-weight axis)
            let mut best = (unit * t).exp();
            let mut arg = 0;
            for &(q, ln_err) in &entries {
                let lower = (q as f64).ln() - t;
                if lower >= best.ln() {
                    break;
                }
                let v = (t + ln_err).max(lower).exp();
                if v < best {
                    best = v;
                    arg = q;
                }
            }
            (0, best, arg)
        })
        .collect();
    Ok(assemble(t_grid, per_t, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::Coord;

    fn brute_delta(x: &[f64], w: &[f64], t: f64) -> f64 {
        // every q up to ceil(e^t), every p within distance 2 of q x
        let mut best = w.iter().map(|w| (w * t).exp()).fold(f64::INFINITY, f64::min);
        let q_max = t.exp().ceil() as i64;
        for q in 1..=q_max {
            let mut m = (-t).exp() * q as f64;
            for (xi, wi) in x.iter().zip(w) {
                let c = (q as f64 * xi).round() as i64;
                let r = (c - 2..=c + 2)
                    .map(|p| (q as f64 * xi - p as f64).abs())
                    .fold(f64::INFINITY, f64::min);
                m = m.max((wi * t).exp() * r);
            }
            best = best.min(m);
        }
        best
    }

    #[test]
    fn delta_examples() {
        let x = TargetVector::from_ratios(&[(1, 2)]).unwrap();
        let fp = FlowPoint::new(x, Weight::standard(1), 2.0).unwrap();
        assert!((delta(&fp).unwrap() - 2.0 * (-2f64).exp()).abs() < 1e-15);
        let x = TargetVector::new(vec![Coord::sqrt_minus(2, 1)]).unwrap();
        let fp = FlowPoint::new(x, Weight::standard(1), 3.0).unwrap();
        let d = delta(&fp).unwrap();
        assert!((0.25..=0.75).contains(&d), "{d}");
        assert!((d - brute_delta(&[2f64.sqrt() - 1.0], &[1.0], 3.0)).abs() < 1e-12);
    }

    #[test]
    fn delta_at_zero_is_at_most_one() {
        let x = TargetVector::new(vec![Coord::golden(), Coord::ratio(2, 7)]).unwrap();
        let w = Weight::from_ratios(&[(1, 3), (2, 3)]).unwrap();
        assert!(delta(&FlowPoint::new(x, w, 0.0).unwrap()).unwrap() <= 1.0);
    }

    #[test]
    fn delta_matches_brute_force() {
        let x = TargetVector::new(vec![Coord::sqrt_minus(3, 1), Coord::golden()]).unwrap();
        let w = Weight::from_ratios(&[(1, 4), (3, 4)]).unwrap();
        for k in 0..=32 {
            let t = k as f64 * 0.25;
            let d = delta(&FlowPoint::new(x.clone(), w.clone(), t).unwrap()).unwrap();
            let b = brute_delta(&x.as_f64(), &w.as_f64(), t);
            assert!((d - b).abs() <= 1e-9 * b, "t={t}: {d} vs {b}");
        }
    }

    #[test]
    fn delta_budget_overflow() {
        let x = TargetVector::from_ratios(&[(1, 2)]).unwrap();
        let fp = FlowPoint::new(x, Weight::standard(1), 30.0).unwrap();
        assert!(matches!(delta(&fp), Err(Error::ScaleOverflow { .. })));
    }

    #[test]
    fn delta_w_examples() {
        // d = 1 standard weight coincides with the sup-norm delta
        let x = TargetVector::new(vec![Coord::golden()]).unwrap();
        let ws = WeightSet::singleton(Weight::standard(1));
        for t in [0.5, 2.0, 5.0] {
            let a = delta_w(&x, &ws, t).unwrap();
            let b = delta(&FlowPoint::new(x.clone(), Weight::standard(1), t).unwrap()).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        let x = TargetVector::from_ratios(&[(1, 2), (1, 3)]).unwrap();
        let ws = WeightSet::grid(2, &num_rational::BigRational::new(1.into(), 4.into())).unwrap();
        assert!(delta_w(&x, &ws, 0.0).unwrap() <= 1.0);
        // exhaustive oracle at t = ln 6 for w = (1/2, 1/2)
        let t = 6f64.ln();
        let ws = WeightSet::singleton(Weight::standard(2));
        let s = (t / 2.0).exp();
        let mut oracle = s * s;
        for q in 1..=6i64 {
            for p1 in -1..=4i64 {
                for p2 in -1..=3i64 {
                    let a = (s * (q as f64 / 2.0 - p1 as f64).abs()).powi(2);
                    let b = (s * (q as f64 / 3.0 - p2 as f64).abs()).powi(2);
                    oracle = oracle.min(a.max(b).max(q as f64 / 6.0));
                }
            }
        }
        let v = delta_w(&x, &ws, t).unwrap();
        assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");
        // q = 2 gives max(0, 6 (1/3)^2, 2/6) = 2/3
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rational_rate_approaches_one() {
        let x = TargetVector::from_ratios(&[(1, 2)]).unwrap();
        let cfg = FlowConfig::default();
        let tr = tau_hat_estimate(&x, &WeightSet::singleton(Weight::standard(1)), &cfg.grid(15.0).unwrap(), &cfg)
            .unwrap();
        assert!((0.9..=1.0).contains(&tr.tail_estimate), "{}", tr.tail_estimate);
        assert!(tr.samples.iter().all(|s| s.delta <= 2.0 * (-s.t).exp() + 1e-15));
    }

    #[test]
    fn quasi_trace_matches_sup_trace_in_dimension_one() {
        let x = TargetVector::new(vec![Coord::golden()]).unwrap();
        let cfg = FlowConfig::default();
        let g = cfg.grid(10.0).unwrap();
        let w = Weight::standard(1);
        let a = tau_hat_estimate(&x, &WeightSet::singleton(w.clone()), &g, &cfg).unwrap();
        let b = tau_hat_quasi_estimate(&x, &w, &g, &cfg).unwrap();
        for (s, u) in a.samples.iter().zip(&b.samples) {
            assert!((s.delta - u.delta).abs() <= 1e-12 * s.delta, "{} vs {}", s.delta, u.delta);
        }
    }
}
