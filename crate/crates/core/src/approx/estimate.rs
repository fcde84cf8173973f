use rayon::prelude::*;
use serde::Serialize;

use super::{finite_or_none, BestSequence, WeightedScan};
use crate::error::{Error, Result};
use crate::target::TargetVector;
use crate::weight::{Weight, WeightSet};

/// Settings shared by the finite-scale exponent estimators.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorConfig {
    /// fraction of gaps (or grid points) forming the tail window
    pub window_fraction: f64,
    /// minimum tail window length
    pub min_window: usize,
    /// first grid scale for the uniform-exponent grid
    pub grid_start: f64,
    /// ratio between consecutive grid scales
    pub grid_ratio: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            window_fraction: 0.5,
            min_window: 4,
            grid_start: 10.0,
            grid_ratio: 1.25,
        }
    }
}

impl EstimatorConfig {
    fn window(&self, len: usize) -> usize {
        let k = (self.window_fraction * len as f64).ceil() as usize;
        k.max(self.min_window).min(len)
    }

    fn validate(&self) -> Result<()> {
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::Domain(format!(
                "window fraction {} must lie in (0, 1]",
                self.window_fraction
            )));
        }
        if self.min_window == 0 || self.grid_start < 2.0 || self.grid_ratio <= 1.0 {
            return Err(Error::Domain("estimator window and grid must be non-degenerate".into()));
        }
        Ok(())
    }
}

/// Exponent of one gap `[q_n, q_{n+1})` of a best-approximation sequence.
#[derive(Clone, Debug, Serialize)]
pub struct GapExponent {
    pub n: usize,
    pub q: u64,
    /// `q_{n+1}`, or `Q_max + 1` for the final (censored) gap
    pub q_next: u64,
    pub ln_err: f64,
    /// `-ln err_n / ln q_{n+1}`
    pub uniform: f64,
    /// `-ln err_n / ln q_n` (absent at `q = 1`)
    pub ordinary: Option<f64>,
    pub censored: bool,
}

/// A finite-scale exponent estimate with its per-gap data.
#[derive(Clone, Debug, Serialize)]
pub struct ExponentEstimate {
    pub value: f64,
    pub per_gap_exponents: Vec<GapExponent>,
    /// index of the first gap in the tail window
    pub window_start: usize,
    /// least-squares slope of `-ln err_n` against the log-scale over the tail (diagnostic)
    pub tail_slope: Option<f64>,
    pub config: EstimatorConfig,
}

const MIN_ENTRIES: usize = 8;

fn gaps(seq: &BestSequence) -> Result<Vec<GapExponent>> {
    if seq.terminated {
        let q = seq.entries.last().map(|a| a.q).unwrap_or(1);
        return Err(Error::TerminatedRational { q });
    }
    if seq.entries.len() < MIN_ENTRIES {
        return Err(Error::InsufficientData(format!(
            "{} best-approximation entries up to Q = {} (need at least {MIN_ENTRIES})",
            seq.entries.len(),
            seq.q_max
        )));
    }
    let n = seq.entries.len();
    Ok((0..n)
        .map(|k| {
            let a = &seq.entries[k];
            let censored = k + 1 == n;
            let q_next = if censored { seq.q_max + 1 } else { seq.entries[k + 1].q };
            let ln_err = a.err.ln_approx();
            GapExponent {
                n: k,
                q: a.q,
                q_next,
                ln_err,
                uniform: -ln_err / (q_next as f64).ln(),
                ordinary: (a.q > 1).then(|| -ln_err / (a.q as f64).ln()),
                censored,
            }
        })
        .collect())
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Which exponent an estimate targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentKind {
    Uniform,
    Ordinary,
}

/// Uniform or ordinary estimate from an already computed sequence.
pub fn estimate_from_sequence(
    seq: &BestSequence,
    kind: ExponentKind,
    cfg: &EstimatorConfig,
) -> Result<ExponentEstimate> {
    cfg.validate()?;
    let per_gap = gaps(seq)?;
    let start = per_gap.len() - cfg.window(per_gap.len());
    let tail = &per_gap[start..];
    let (value, pts): (f64, Vec<(f64, f64)>) = match kind {
        ExponentKind::Uniform => (
            tail.iter().map(|g| g.uniform).fold(f64::INFINITY, f64::min),
            tail.iter()
                .filter(|g| !g.censored)
                .map(|g| ((g.q_next as f64).ln(), -g.ln_err))
                .collect(),
        ),
        ExponentKind::Ordinary => (
            tail.iter().filter_map(|g| g.ordinary).fold(f64::NEG_INFINITY, f64::max),
            tail.iter()
                .filter(|g| g.q > 1)
                .map(|g| ((g.q as f64).ln(), -g.ln_err))
                .collect(),
        ),
    };
    Ok(ExponentEstimate {
        value,
        per_gap_exponents: per_gap,
        window_start: start,
        tail_slope: slope(&pts),
        config: cfg.clone(),
    })
}

/// Finite-scale estimate of the uniform exponent: the minimum of
/// `-ln err_n / ln q_{n+1}` over the tail window of gaps.
pub fn uniform_exponent_estimate(
    x: &TargetVector,
    w: &Weight,
    q_max: u64,
    cfg: &EstimatorConfig,
) -> Result<ExponentEstimate> {
    let seq = WeightedScan::new(x, w)?.best_sequence(q_max)?;
    estimate_from_sequence(&seq, ExponentKind::Uniform, cfg)
}

/// Finite-scale lower estimate of the ordinary exponent: the maximum of
/// `-ln err_n / ln q_n` over the tail window.
pub fn ordinary_exponent_estimate(
    x: &TargetVector,
    w: &Weight,
    q_max: u64,
    cfg: &EstimatorConfig,
) -> Result<ExponentEstimate> {
    let seq = WeightedScan::new(x, w)?.best_sequence(q_max)?;
    estimate_from_sequence(&seq, ExponentKind::Ordinary, cfg)
}

/// One scale of the uniform-exponent grid.
#[derive(Clone, Debug, Serialize)]
pub struct GridPoint {
    pub q: u64,
    /// `min_w -ln(min_{q <= Q} err_w(q)) / ln Q` (`None` when infinite)
    #[serde(serialize_with = "ser_eps")]
    pub eps: f64,
    /// index of the weight attaining the minimum
    pub weight_index: usize,
    /// value per weight, in weight-set order
    #[serde(skip)]
    pub per_weight: Vec<f64>,
}

fn ser_eps<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    finite_or_none(*v).serialize(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaHatEstimate {
    pub value: f64,
    pub grid: Vec<GridPoint>,
    pub window_start: usize,
    /// tail minimum of each weight alone, on the same grid
    pub per_weight: Vec<f64>,
    pub config: EstimatorConfig,
}

fn geometric_grid(q_max: u64, cfg: &EstimatorConfig) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let mut k = 0i32;
    loop {
        let q = (cfg.grid_start * cfg.grid_ratio.powi(k)).floor() as u64;
        if q > q_max {
            break;
        }
        if out.last() != Some(&q) {
            out.push(q);
        }
        k += 1;
    }
    out
}

fn sequences(x: &TargetVector, ws: &WeightSet, q_max: u64) -> Result<Vec<BestSequence>> {
    x.check_dim(ws.dim())?;
    ws.weights()
        .par_iter()
        .map(|w| WeightedScan::new(x, w)?.best_sequence(q_max))
        .collect()
}

/// Grid values `eps(Q)` without the tail reduction (rational points included).
pub fn sigma_hat_w_grid(
    x: &TargetVector,
    ws: &WeightSet,
    q_max: u64,
    cfg: &EstimatorConfig,
) -> Result<Vec<GridPoint>> {
    cfg.validate()?;
    let seqs = sequences(x, ws, q_max)?;
    Ok(grid_from_sequences(&seqs, q_max, cfg))
}

pub(crate) fn grid_from_sequences(seqs: &[BestSequence], q_max: u64, cfg: &EstimatorConfig) -> Vec<GridPoint> {
    geometric_grid(q_max, cfg)
        .into_iter()
        .map(|q| {
            let lq = (q as f64).ln();
            let per_weight: Vec<f64> = seqs
                .iter()
                .map(|s| {
                    let i = s.index_at(q).expect("q_1 = 1 is always present");
                    -s.entries[i].err.ln_approx() / lq
                })
                .collect();
            let (weight_index, eps) = per_weight
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
            GridPoint {
                q,
                eps,
                weight_index,
                per_weight,
            }
        })
        .collect()
}

/// Finite-scale estimate of the uniform exponent over a weight set: the
/// minimum over the tail of the geometric grid of `min_w eps_w(Q)`.
pub fn sigma_hat_w_estimate(
    x: &TargetVector,
    ws: &WeightSet,
    q_max: u64,
    cfg: &EstimatorConfig,
) -> Result<SigmaHatEstimate> {
    cfg.validate()?;
    let seqs = sequences(x, ws, q_max)?;
    sigma_hat_from_sequences(&seqs, q_max, cfg)
}

pub(crate) fn sigma_hat_from_sequences(
    seqs: &[BestSequence],
    q_max: u64,
    cfg: &EstimatorConfig,
) -> Result<SigmaHatEstimate> {
    let grid = grid_from_sequences(seqs, q_max, cfg);
    if grid.len() < MIN_ENTRIES {
        return Err(Error::InsufficientData(format!(
            "{} grid scales up to Q = {q_max} (need at least {MIN_ENTRIES})",
            grid.len()
        )));
    }
    let start = grid.len() - cfg.window(grid.len());
    let tail = &grid[start..];
    let value = tail.iter().map(|g| g.eps).fold(f64::INFINITY, f64::min);
    if value.is_infinite() {
        let q = seqs
            .iter()
            .filter_map(|s| s.entries.last().map(|a| a.q))
            .max()
            .unwrap_or(1);
        return Err(Error::TerminatedRational { q });
    }
    let per_weight = (0..seqs.len())
        .map(|i| tail.iter().map(|g| g.per_weight[i]).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(SigmaHatEstimate {
        value,
        grid,
        window_start: start,
        per_weight,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::RealExpr;
    use crate::target::Coord;

    fn golden() -> TargetVector {
        TargetVector::new(vec![Coord::golden()]).unwrap()
    }

    #[test]
    fn golden_ratio_exponents() {
        let cfg = EstimatorConfig::default();
        let w = Weight::standard(1);
        let u = uniform_exponent_estimate(&golden(), &w, 1_000_000, &cfg).unwrap();
        assert!((0.95..=1.05).contains(&u.value), "{}", u.value);
        let o = ordinary_exponent_estimate(&golden(), &w, 1_000_000, &cfg).unwrap();
        // Fibonacci oracle: err_n ~ 1/(sqrt5 q_n) gives o_n = 1 + ln(sqrt5)/ln q_n
        let q_tail = o.per_gap_exponents[o.window_start].q as f64;
        let bound = 1.0 + 5f64.sqrt().ln() / q_tail.ln() + 1e-6;
        assert!(o.value >= 0.95 && o.value <= bound, "{} vs {bound}", o.value);
        assert!(o.value >= u.value);
    }

    #[test]
    fn liouville_exponents() {
        let cfg = EstimatorConfig::default();
        let x = TargetVector::new(vec![Coord::real(RealExpr::Liouville { base: 10 })]).unwrap();
        let w = Weight::standard(1);
        // brute-force scan: best denominators 1, 9, 100, 9909, 10009, 109999, 1000000
        let s = best_seq(&x, &w, 10_000_000);
        assert_eq!(s.qs(), vec![1, 9, 100, 9909, 10009, 109999, 1000000]);
        assert!(matches!(
            ordinary_exponent_estimate(&x, &w, 10_000_000, &cfg),
            Err(Error::InsufficientData(_))
        ));
        // the huge partial quotient after 10^6 shows in the last per-gap ratio
        let last = s.entries.last().unwrap();
        let o = -last.err.ln_approx() / (last.q as f64).ln();
        assert!(o >= 3.0 - 1e-9, "{o}");
    }

    fn best_seq(x: &TargetVector, w: &Weight, q: u64) -> BestSequence {
        WeightedScan::new(x, w).unwrap().best_sequence(q).unwrap()
    }

    #[test]
    fn rational_points_terminate() {
        let x = TargetVector::from_ratios(&[(1, 3)]).unwrap();
        let r = uniform_exponent_estimate(&x, &Weight::standard(1), 1000, &EstimatorConfig::default());
        assert!(matches!(r, Err(Error::TerminatedRational { q: 3 })));
        let x = TargetVector::from_ratios(&[(1, 2), (1, 3)]).unwrap();
        let ws = WeightSet::singleton(Weight::standard(2));
        let grid = sigma_hat_w_grid(&x, &ws, 1000, &EstimatorConfig::default()).unwrap();
        // before q = 6 covers the denominators the values grow, after that they are infinite
        let finite: Vec<f64> = grid.iter().filter(|g| g.q < 6).map(|g| g.eps).collect();
        assert!(finite.iter().all(|e| e.is_finite()));
        assert!(grid.iter().filter(|g| g.q >= 6).all(|g| g.eps.is_infinite()));
    }

    #[test]
    fn short_sequences_are_insufficient() {
        let r = uniform_exponent_estimate(&golden(), &Weight::standard(1), 10, &EstimatorConfig::default());
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn singleton_grid_agrees_with_gap_estimate() {
        let cfg = EstimatorConfig::default();
        let x = golden();
        let ws = WeightSet::singleton(Weight::standard(1));
        let s = sigma_hat_w_estimate(&x, &ws, 1_000_000, &cfg).unwrap();
        let u = uniform_exponent_estimate(&x, &Weight::standard(1), 1_000_000, &cfg).unwrap();
        assert!((s.value - u.value).abs() <= 0.05, "{} vs {}", s.value, u.value);
    }

    #[test]
    fn weight_set_estimate_is_below_members() {
        let cfg = EstimatorConfig::default();
        let x = TargetVector::new(vec![Coord::sqrt_minus(2, 1), Coord::sqrt_minus(3, 1)]).unwrap();
        let ws = WeightSet::new(vec![
            Weight::from_ratios(&[(1, 2), (1, 2)]).unwrap(),
            Weight::from_ratios(&[(1, 3), (2, 3)]).unwrap(),
        ])
        .unwrap();
        let s = sigma_hat_w_estimate(&x, &ws, 100_000, &cfg).unwrap();
        for (i, w) in ws.weights().iter().enumerate() {
            let single = sigma_hat_w_estimate(&x, &WeightSet::singleton(w.clone()), 100_000, &cfg).unwrap();
            assert!(s.value <= single.value + 1e-12);
            assert!((s.per_weight[i] - single.value).abs() < 1e-12);
        }
    }
}
