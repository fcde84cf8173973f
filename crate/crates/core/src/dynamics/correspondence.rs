//! Cross-checks between approximation exponents and flow divergence rates.

use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::Serialize;

use super::{q_limit, sup_delta, tau_hat_estimate, tau_hat_quasi_estimate, FlowConfig, ResidualTable};
use crate::approx::{sigma_hat_w_estimate, singular_certificate, EstimatorConfig};
use crate::error::{Error, Result};
use crate::real::rat_to_f64;
use crate::target::TargetVector;
use crate::weight::{Weight, WeightSet};

/// Both sides of the exponent/rate sandwich at finite scale.
#[derive(Clone, Debug, Serialize)]
pub struct SandwichVerdict {
    pub sigma_hat: f64,
    pub tau_hat: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// `(tau + w_max) / ((1 - tau) w_max)`
    pub lower: f64,
    /// `(tau + w_min) / ((1 - tau) w_min)`
    pub upper: f64,
    pub slack: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub passed: bool,
    pub q_max: u64,
    pub t_max: f64,
}

fn check_slack(slack: f64) -> Result<()> {
    if !(0.0..1.0).contains(&slack) {
        return Err(Error::Domain(format!("slack {slack} must lie in [0, 1)")));
    }
    Ok(())
}

fn check_tau(tau: f64, slack: f64) -> Result<()> {
    if !(tau < 1.0 - slack) {
        return Err(Error::Domain(format!(
            "rate estimate {tau} is not below 1 - slack = {}; the bounds are singular",
            1.0 - slack
        )));
    }
    Ok(())
}

pub fn verify_sandwich(x: &TargetVector, ws: &WeightSet, q_max: u64, t_max: f64, slack: f64) -> Result<SandwichVerdict> {
    verify_sandwich_with(
        x,
        ws,
        q_max,
        t_max,
        slack,
        &EstimatorConfig::default(),
        &FlowConfig::default(),
    )
}

/// Estimates the uniform exponent and the sup-norm divergence rate
/// independently and checks the two-sided bound between them.
pub fn verify_sandwich_with(
    x: &TargetVector,
    ws: &WeightSet,
    q_max: u64,
    t_max: f64,
    slack: f64,
    est: &EstimatorConfig,
    flow: &FlowConfig,
) -> Result<SandwichVerdict> {
    check_slack(slack)?;
    if !ws.w_min().is_positive() {
        return Err(Error::InvalidWeight("the sandwich bounds need every weight entry positive".into()));
    }
    let tau = tau_hat_estimate(x, ws, &flow.grid(t_max)?, flow)?.tail_estimate;
    check_tau(tau, slack)?;
    let sigma = sigma_hat_w_estimate(x, ws, q_max, est)?.value;
    let w_min = rat_to_f64(&ws.w_min());
    let w_max = rat_to_f64(&ws.w_max());
    let lower = (tau + w_max) / ((1.0 - tau) * w_max);
    let upper = (tau + w_min) / ((1.0 - tau) * w_min);
    let lower_ok = lower <= sigma + slack;
    let upper_ok = sigma <= upper + slack;
    Ok(SandwichVerdict {
        sigma_hat: sigma,
        tau_hat: tau,
        w_min,
        w_max,
        lower,
        upper,
        slack,
        lower_ok,
        upper_ok,
        passed: lower_ok && upper_ok,
        q_max,
        t_max,
    })
}

/// Single-weight identity `sigma = (1 + tau) / (1 - tau)` with the quasi-norm rate.
#[derive(Clone, Debug, Serialize)]
pub struct EqualityVerdict {
    pub sigma_hat: f64,
    pub tau_hat: f64,
    pub predicted_sigma: f64,
    pub difference: f64,
    pub slack: f64,
    pub passed: bool,
}

pub fn single_weight_equality_check(
    x: &TargetVector,
    w: &Weight,
    q_max: u64,
    t_max: f64,
    slack: f64,
) -> Result<EqualityVerdict> {
    single_weight_equality_check_with(
        x,
        w,
        q_max,
        t_max,
        slack,
        &EstimatorConfig::default(),
        &FlowConfig::default(),
    )
}

pub fn single_weight_equality_check_with(
    x: &TargetVector,
    w: &Weight,
    q_max: u64,
    t_max: f64,
    slack: f64,
    est: &EstimatorConfig,
    flow: &FlowConfig,
) -> Result<EqualityVerdict> {
    check_slack(slack)?;
    let tau = tau_hat_quasi_estimate(x, w, &flow.grid(t_max)?, flow)?.tail_estimate;
    check_tau(tau, slack)?;
    let sigma = sigma_hat_w_estimate(x, &WeightSet::singleton(w.clone()), q_max, est)?.value;
    let predicted = (1.0 + tau) / (1.0 - tau);
    let difference = (sigma - predicted).abs();
    Ok(EqualityVerdict {
        sigma_hat: sigma,
        tau_hat: tau,
        predicted_sigma: predicted,
        difference,
        slack,
        passed: difference <= slack,
    })
}

/// One scale of the certificate-to-flow comparison.
#[derive(Clone, Debug, Serialize)]
pub struct DaniSample {
    pub q: u64,
    /// `ln(Q / delta)`
    pub t: f64,
    pub w_index: usize,
    pub lattice_delta: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DaniReport {
    pub delta: f64,
    /// `delta^{w_min}`, the threshold the shortest vector must fall below
    pub threshold: f64,
    /// `Q0` of the certificate run at `delta^2`; `None` if it failed
    pub q0: Option<u64>,
    pub samples: Vec<DaniSample>,
    pub passed: bool,
}

/// Certifies at `delta^2` and checks that at every sampled `Q in (Q0, Q_max]`
/// and every weight the lattice at `t = ln(Q / delta)` has a vector of
/// sup-norm at most `delta^{w_min}`.
///
/// A witness `q <= Q` with `||q x - p||_w <= delta^2 / Q` gives coordinates
/// `e^{w_i t}|q x_i - p_i| <= delta^{w_i}` and `e^{-t} q <= delta`.
pub fn dani_cross_check(
    x: &TargetVector,
    ws: &WeightSet,
    delta: &BigRational,
    q_max: u64,
    budget: u64,
) -> Result<DaniReport> {
    if !delta.is_positive() || delta >= &BigRational::one() {
        return Err(Error::Domain(format!("delta = {delta} must lie in (0, 1)")));
    }
    let cert = singular_certificate(x, ws, &(delta * delta), q_max)?;
    let d = rat_to_f64(delta);
    let w_min = rat_to_f64(&ws.w_min());
    let threshold = d.powf(w_min);
    let Some(q0) = cert.q0 else {
        return Ok(DaniReport {
            delta: d,
            threshold,
            q0: None,
            samples: vec![],
            passed: true,
        });
    };
    let mut scales = Vec::new();
    let mut s = 10.0f64;
    while (s as u64) <= q_max {
        let q = s as u64;
        if q > q0 && scales.last() != Some(&q) {
            scales.push(q);
        }
        s *= 1.25;
    }
    if q_max > q0 && scales.last() != Some(&q_max) {
        scales.push(q_max);
    }
    let t_last = (q_max as f64 / d).ln();
    let tab = ResidualTable::new(x, q_limit(t_last, budget)?);
    let wfs: Vec<Vec<f64>> = ws.weights().iter().map(Weight::as_f64).collect();
    let mut samples = Vec::new();
    for q in scales {
        let t = (q as f64 / d).ln();
        for (w_index, wf) in wfs.iter().enumerate() {
            let (lattice_delta, _) = sup_delta(&tab, wf, t);
            samples.push(DaniSample {
                q,
                t,
                w_index,
                lattice_delta,
                ok: lattice_delta <= threshold * (1.0 + 1e-9),
            });
        }
    }
    let passed = samples.iter().all(|s| s.ok);
    Ok(DaniReport {
        delta: d,
        threshold,
        q0: Some(q0),
        samples,
        passed,
    })
}
