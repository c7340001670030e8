//! Estimator variances, worst-case parameters and finite-size key rates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::PhysicalParams;
use crate::error::{Error, Result};
use crate::estimation::{noise_coupling, Calibration, EstimationReport};
use crate::security::{asymptotic_key_rate, KeyRateReport, KeyRateVariant};

const MAX_ANGLE: f64 = 80.0 * std::f64::consts::PI / 180.0;
const MIN_SAMPLES: f64 = 1000.0;
const QUAD_NODES: usize = 64;
const QUAD_TOL: f64 = 1e-6;
const ETA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiniteSizeConfig {
    /// Total number of exchanged signals `N`.
    pub n_total: f64,
    /// Key fraction `n/N`.
    pub frac_key: f64,
    /// Parameter-estimation failure probability matching `z`.
    pub eps_pe: f64,
    /// Confidence multiplier for worst-case bounds.
    pub z: f64,
    /// Smoothing parameter of the finite-size penalty.
    pub eps_smooth: f64,
}

impl Default for FiniteSizeConfig {
    fn default() -> Self {
        Self { n_total: 1e8, frac_key: 0.5, eps_pe: 1e-10, z: 6.5, eps_smooth: 1e-10 }
    }
}

impl FiniteSizeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frac_key > 0.0 && self.frac_key < 1.0) {
            return Err(Error::InvalidParams(format!("frac_key = {} outside (0,1)", self.frac_key)));
        }
        if !(self.z > 0.0) {
            return Err(Error::InvalidParams(format!("z = {} is not positive", self.z)));
        }
        if !(self.n_total >= 1.0) {
            return Err(Error::InvalidParams(format!("n_total = {} is below 1", self.n_total)));
        }
        if !(self.eps_smooth > 0.0 && self.eps_smooth < 1.0) {
            return Err(Error::InvalidParams(format!("eps_smooth = {} outside (0,1)", self.eps_smooth)));
        }
        if !(self.eps_pe > 0.0 && self.eps_pe < 1.0) {
            return Err(Error::InvalidParams(format!("eps_pe = {} outside (0,1)", self.eps_pe)));
        }
        Ok(())
    }
}

fn check_samples(m: f64) -> Result<()> {
    if !(m >= MIN_SAMPLES) {
        return Err(Error::InvalidParams(format!("m = {m} is below {MIN_SAMPLES}")));
    }
    Ok(())
}

fn angle_variance(p: &PhysicalParams, m: f64, tau: f64, angle: f64) -> Result<f64> {
    check_samples(m)?;
    if !(angle.abs() <= MAX_ANGLE) {
        return Err(Error::Domain(format!("angle {angle} rad is beyond 80 degrees")));
    }
    let (va, a2, et) = (p.v_a, p.alpha * p.alpha, p.eta * tau);
    let s2 = angle.sin().powi(2);
    let num = 4.0 * va * (1.0 + et * p.eps + et * va + et * a2 * va * s2);
    Ok(num / (m * et * va * va * a2 * angle.cos().powi(2)))
}

/// Variance of the x-arm angle estimate from `m` samples.
pub fn var_theta_hat(p: &PhysicalParams, m: f64) -> Result<f64> {
    angle_variance(p, m, p.tau_x(), p.theta)
}

/// Variance of the p-arm angle estimate from `m` samples.
pub fn var_phi_hat(p: &PhysicalParams, m: f64) -> Result<f64> {
    angle_variance(p, m, p.tau_p(), p.phi)
}

/// Confidence windows for the two angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleWindow {
    pub theta: (f64, f64),
    pub phi: (f64, f64),
}

impl AngleWindow {
    /// `angle ± z·σ` around the parameters in `p`.
    pub fn around(p: &PhysicalParams, m: f64, z: f64) -> Result<Self> {
        let st = var_theta_hat(p, m)?.sqrt();
        let sp = var_phi_hat(p, m)?.sqrt();
        Ok(Self {
            theta: (p.theta - z * st, p.theta + z * st),
            phi: (p.phi - z * sp, p.phi + z * sp),
        })
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Nodes and normalized weights of a Gaussian truncated to `[lo, hi]`, itself
/// clipped to the supported angle range.
fn truncated_gaussian(mean: f64, var: f64, (lo, hi): (f64, f64), n: usize) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = (lo.max(-MAX_ANGLE), hi.min(MAX_ANGLE));
    if !(var > 0.0) || !(hi > lo) {
        return (vec![mean.clamp(-MAX_ANGLE, MAX_ANGLE)], vec![1.0]);
    }
    let (x, w) = gauss_legendre(n);
    let (half, mid) = (0.5 * (hi - lo), 0.5 * (hi + lo));
    let nodes: Vec<f64> = x.iter().map(|t| mid + half * t).collect();
    let mut wts: Vec<f64> = nodes
        .iter()
        .zip(&w)
        .map(|(v, wi)| wi * half * (-(v - mean).powi(2) / (2.0 * var)).exp())
        .collect();
    let total: f64 = wts.iter().sum();
    wts.iter_mut().for_each(|v| *v /= total);
    (nodes, wts)
}

fn arm_sum(p: &PhysicalParams, theta: f64, phi: f64) -> f64 {
    p.tau_x().sqrt() * theta.cos() + p.tau_p().sqrt() * phi.cos()
}

/// Variance of `1/S²` with both angles drawn from truncated Gaussians.
fn inverse_square_variance(p: &PhysicalParams, m: f64, window: &AngleWindow, n: usize) -> Result<f64> {
    let (tn, tw) = truncated_gaussian(p.theta, var_theta_hat(p, m)?, window.theta, n);
    let (pn, pw) = truncated_gaussian(p.phi, var_phi_hat(p, m)?, window.phi, n);
    let f = |t: f64, q: f64| arm_sum(p, t, q).powi(-2);
    let mut mean = 0.0;
    for (t, wt) in tn.iter().zip(&tw) {
        for (q, wq) in pn.iter().zip(&pw) {
            mean += wt * wq * f(*t, *q);
        }
    }
    let mut var = 0.0;
    for (t, wt) in tn.iter().zip(&tw) {
        for (q, wq) in pn.iter().zip(&pw) {
            var += wt * wq * (f(*t, *q) - mean).powi(2);
        }
    }
    Ok(var)
}

/// Variance of the sample statistic `(1/m)·Σ(x_a·x_B − p_a·p_B)`.
fn var_correlation_statistic(p: &PhysicalParams, m: f64) -> f64 {
    let (va, a2) = (p.v_a, p.alpha * p.alpha);
    let arm = |tau: f64, angle: f64| {
        let et = p.eta * tau;
        va * (et * a2 * va * angle.cos().powi(2) + et * a2 * va + 1.0 + et * p.eps)
    };
    (arm(p.tau_x(), p.theta) + arm(p.tau_p(), p.phi)) / m
}

/// Variance of the transmission estimate: a propagated sampling term plus
/// the spread caused by the uncertain angles inside `window`.
pub fn var_transmission_hat(p: &PhysicalParams, m: f64, window: &AngleWindow) -> Result<f64> {
    check_samples(m)?;
    let s = arm_sum(p, p.theta, p.phi);
    let sampling = 4.0 * p.eta * var_correlation_statistic(p, m)
        / (p.alpha * p.alpha * p.v_a * p.v_a * s * s);
    let coarse = inverse_square_variance(p, m, window, QUAD_NODES)?;
    let fine = inverse_square_variance(p, m, window, 2 * QUAD_NODES)?;
    let scale = fine.abs().max(coarse.abs());
    if scale > 0.0 {
        let rel_change = (fine - coarse).abs() / scale;
        if rel_change > QUAD_TOL {
            return Err(Error::Quadrature { rel_change });
        }
    }
    Ok(sampling + p.eta * p.eta * s.powi(4) * coarse)
}

/// Same quadrature at an explicit node count, for convergence studies.
pub fn angle_spread_term(p: &PhysicalParams, m: f64, window: &AngleWindow, nodes: usize) -> Result<f64> {
    check_samples(m)?;
    let s = arm_sum(p, p.theta, p.phi);
    Ok(p.eta * p.eta * s.powi(4) * inverse_square_variance(p, m, window, nodes)?)
}

/// Variance of the residual-noise statistic whose mean is `t_eps`.
pub fn var_noise_hat(t_eps: f64, m: f64) -> Result<f64> {
    if !(m >= 1.0) {
        return Err(Error::InvalidParams(format!("m = {m} is below 1")));
    }
    Ok(2.0 * (t_eps + 1.0).powi(2) / m)
}

/// Variance of the channel-referred excess-noise estimate.
pub fn var_eps_hat(p: &PhysicalParams, m: f64) -> Result<f64> {
    let t = noise_coupling(p.eta, &Calibration::from_params(p));
    Ok(var_noise_hat(t * p.eps, m)? / (t * t))
}

/// Predicted variances of the estimates for parameters `p` and `m` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedVariances {
    pub theta: f64,
    pub phi: f64,
    pub eta: f64,
    pub eps: f64,
}

pub fn predicted_variances(p: &PhysicalParams, m: f64, z: f64) -> Result<PredictedVariances> {
    let window = AngleWindow::around(p, m, z)?;
    Ok(PredictedVariances {
        theta: var_theta_hat(p, m)?,
        phi: var_phi_hat(p, m)?,
        eta: var_transmission_hat(p, m, &window)?,
        eps: var_eps_hat(p, m)?,
    })
}

/// Pessimistic parameters at the configured confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseParams {
    pub eta_low: f64,
    pub eps_up: f64,
    /// Upper bound on `|θ + φ|`.
    pub delta_up: f64,
}

pub fn worst_case(report: &EstimationReport, cfg: &FiniteSizeConfig) -> WorstCaseParams {
    let z = cfg.z;
    WorstCaseParams {
        eta_low: (report.eta_hat - z * report.var_eta.sqrt()).max(ETA_FLOOR),
        eps_up: (report.eps_hat + z * report.var_eps.sqrt()).max(0.0),
        delta_up: report.delta_hat.abs() + z * (report.var_theta + report.var_phi).sqrt(),
    }
}

/// Finite-size penalty `7·√(log₂(2/ε̄)/n)`.
pub fn delta_n(n: f64, eps_smooth: f64) -> f64 {
    7.0 * ((2.0 / eps_smooth).log2() / n).sqrt()
}

/// How the block is shared between key and parameter estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FiniteScheme {
    /// A fraction `n/N` carries key; the rest estimates parameters; true MI.
    Split,
    /// All `N` signals serve both purposes; ignorant MI.
    Shared,
}

impl FiniteScheme {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Split => "K_n",
            Self::Shared => "K_N",
        }
    }

    fn variant(&self) -> KeyRateVariant {
        match self {
            Self::Split => KeyRateVariant::TT,
            Self::Shared => KeyRateVariant::IT,
        }
    }
}

impl fmt::Display for FiniteScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Parameters at the worst-case bounds, with the whole imbalance on the x arm.
pub fn worst_case_params(p: &PhysicalParams, wc: &WorstCaseParams) -> PhysicalParams {
    PhysicalParams {
        eta: wc.eta_low.min(1.0),
        eps: wc.eps_up,
        theta: wc.delta_up.min(MAX_ANGLE),
        phi: 0.0,
        ..*p
    }
}

/// Finite-size rate from an estimation report obtained on the appropriate
/// number of samples.
pub fn finite_key_rate(
    p: &PhysicalParams,
    report: &EstimationReport,
    cfg: &FiniteSizeConfig,
    scheme: FiniteScheme,
) -> Result<KeyRateReport> {
    cfg.validate()?;
    let wc = worst_case(report, cfg);
    let q = worst_case_params(p, &wc);
    let asym = asymptotic_key_rate(&q, scheme.variant())?;
    let (frac, n_key) = match scheme {
        FiniteScheme::Split => (cfg.frac_key, cfg.frac_key * cfg.n_total),
        FiniteScheme::Shared => (1.0, cfg.n_total),
    };
    let rate = (frac * (asym.rate - delta_n(n_key, cfg.eps_smooth))).max(0.0);
    Ok(KeyRateReport { rate, frac_key: Some(frac), ..asym })
}

/// Samples available for parameter estimation under `scheme`.
pub fn estimation_samples(cfg: &FiniteSizeConfig, scheme: FiniteScheme) -> f64 {
    match scheme {
        FiniteScheme::Split => (1.0 - cfg.frac_key) * cfg.n_total,
        FiniteScheme::Shared => cfg.n_total,
    }
}

/// Finite-size rate with estimates predicted at the true parameters `p`.
pub fn finite_key_rate_predicted(
    p: &PhysicalParams,
    cfg: &FiniteSizeConfig,
    scheme: FiniteScheme,
) -> Result<KeyRateReport> {
    cfg.validate()?;
    let report = EstimationReport::predicted(p, estimation_samples(cfg, scheme), cfg.z)?;
    finite_key_rate(p, &report, cfg, scheme)
}

/// Key fraction on the grid 0.05, 0.10, ..., 0.95 maximizing `K_n`; ties go
/// to the larger fraction.
pub fn optimize_fraction(p: &PhysicalParams, cfg: &FiniteSizeConfig) -> Result<KeyRateReport> {
    optimize_fraction_with(p, cfg, |m| EstimationReport::predicted(p, m, cfg.z))
}

/// [`optimize_fraction`] with estimates supplied by `report_for`, which
/// receives the number of samples left for parameter estimation.
pub fn optimize_fraction_with(
    p: &PhysicalParams,
    cfg: &FiniteSizeConfig,
    report_for: impl Fn(f64) -> Result<EstimationReport>,
) -> Result<KeyRateReport> {
    let mut best: Option<KeyRateReport> = None;
    for k in 1..=19 {
        let cfg = FiniteSizeConfig { frac_key: k as f64 / 20.0, ..*cfg };
        cfg.validate()?;
        let report = report_for(estimation_samples(&cfg, FiniteScheme::Split))?;
        let r = finite_key_rate(p, &report, &cfg, FiniteScheme::Split)?;
        if best.is_none_or(|b| r.rate >= b.rate) {
            best = Some(r);
        }
    }
    Ok(best.expect("grid is non-empty"))
}
