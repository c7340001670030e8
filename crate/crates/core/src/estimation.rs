//! Parameter recovery from covariance matrices and frames.

use serde::{Deserialize, Serialize};

use crate::channel::PhysicalParams;
use crate::compensation::alice_transform_angles;
use crate::error::{Error, Result};
use crate::finite_size::predicted_variances;
use crate::gaussian::CovMat4;
use crate::simulator::{empirical_covariance, QuadratureFrame};

const MIN_SIN_DELTA: f64 = 1e-3;

/// Receiver quantities the estimators condition on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub eta_d: f64,
    pub eta_bs: f64,
    pub theta: f64,
    pub phi: f64,
}

impl Calibration {
    pub fn from_params(p: &PhysicalParams) -> Self {
        Self { eta_d: p.eta_d, eta_bs: p.eta_bs, theta: p.theta, phi: p.phi }
    }

    pub fn tau_x(&self) -> f64 {
        self.eta_d * self.eta_bs
    }

    pub fn tau_p(&self) -> f64 {
        self.eta_d * (1.0 - self.eta_bs)
    }

    fn sin_delta(&self) -> f64 {
        (self.theta + self.phi).sin()
    }
}

/// Angle estimates from the Alice-Bob block plus the Bob-Bob cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceEstimate {
    pub theta: f64,
    pub phi: f64,
    /// Estimate of `θ + φ` from Bob's two outputs alone.
    pub crosscheck_delta: f64,
}

pub fn estimate_imbalance(gamma: &CovMat4) -> Result<ImbalanceEstimate> {
    let spec = alice_transform_angles(gamma)?;
    let (ex, ep) = (gamma.vb_x() - 1.0, gamma.vb_p() - 1.0);
    if !(ex > 0.0) || !(ep > 0.0) {
        return Err(Error::Domain(format!(
            "Bob variances ({}, {}) do not exceed the vacuum level",
            gamma.vb_x(),
            gamma.vb_p()
        )));
    }
    let arg = gamma.s_bx_bp() / (ex * ep).sqrt();
    if !(arg.abs() <= 1.0) {
        return Err(Error::InconsistentCrossCheck { arg });
    }
    Ok(ImbalanceEstimate {
        theta: spec.theta_cap,
        phi: spec.phi_cap,
        crosscheck_delta: -arg.asin(),
    })
}

/// Bob's conditional block given Alice, as `(V_x|A, V_p|A, V_xp|A)`.
fn conditional(gamma: &CovMat4) -> Result<(f64, f64, f64)> {
    let c = gamma.gamma_b_given_a()?;
    Ok((c[(0, 0)], c[(1, 1)], c[(0, 1)]))
}

/// Beamsplitter transmission from the signal share of each output.
pub fn estimate_eta_bs(gamma: &CovMat4) -> Result<f64> {
    let (cx, cp, _) = conditional(gamma)?;
    let (sx, sp) = (gamma.vb_x() - cx, gamma.vb_p() - cp);
    if !(sx > 0.0) || !(sp > 0.0) {
        return Err(Error::Domain(format!(
            "explained variances ({sx:e}, {sp:e}) are not positive"
        )));
    }
    Ok(sx / (sx + sp))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    /// Mean of the x and p quotients.
    pub alpha: f64,
    /// `|α_x − α_p| / α`.
    pub consistency: f64,
}

/// Modulation rescaling from the two aligned correlations.
pub fn estimate_alpha(gamma: &CovMat4, eta: f64, v_a: f64, cal: &Calibration) -> Result<AlphaEstimate> {
    if !(eta > 0.0) || !(v_a > 0.0) {
        return Err(Error::InvalidParams(format!("eta = {eta}, v_a = {v_a}")));
    }
    let ax = gamma.sigma_x() / ((eta * cal.tau_x()).sqrt() * cal.theta.cos() * v_a);
    let ap = -gamma.sigma_p() / ((eta * cal.tau_p()).sqrt() * cal.phi.cos() * v_a);
    let alpha = 0.5 * (ax + ap);
    Ok(AlphaEstimate { alpha, consistency: (ax - ap).abs() / alpha.abs() })
}

fn transmission_from_statistic(c: f64, alpha: f64, v_a: f64, cal: &Calibration) -> Result<f64> {
    let s = cal.tau_x().sqrt() * cal.theta.cos() + cal.tau_p().sqrt() * cal.phi.cos();
    let den = alpha * alpha * v_a * v_a * s * s;
    if !(den > 0.0) {
        return Err(Error::InvalidParams(format!("alpha = {alpha}, v_a = {v_a}")));
    }
    Ok(c * c / den)
}

/// Transmission from `σ^x − σ^p`.
pub fn estimate_transmission(gamma: &CovMat4, alpha: f64, v_a: f64, cal: &Calibration) -> Result<f64> {
    transmission_from_statistic(gamma.sigma_x() - gamma.sigma_p(), alpha, v_a, cal)
}

/// Transmission from the raw sample mean of `x_a·x_B − p_a·p_B`.
pub fn estimate_transmission_frame(
    frame: &QuadratureFrame,
    alpha: f64,
    v_a: f64,
    cal: &Calibration,
) -> Result<f64> {
    if frame.is_empty() {
        return Err(Error::DegenerateFrame("empty frame".into()));
    }
    let c: f64 = (0..frame.len())
        .map(|i| frame.x_a[i] * frame.x_b[i] - frame.p_a[i] * frame.p_b[i])
        .sum::<f64>()
        / frame.len() as f64;
    transmission_from_statistic(c, alpha, v_a, cal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseMode {
    /// Diagonal of Bob's conditional block.
    Conditional,
    /// Off-diagonal of Bob's conditional block.
    CrossCorrelation,
}

/// Channel-referred excess noise.
pub fn estimate_excess_noise(gamma: &CovMat4, mode: NoiseMode, eta: f64, cal: &Calibration) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParams(format!("eta = {eta}")));
    }
    let (cx, cp, cxp) = conditional(gamma)?;
    let (tx, tp) = (cal.tau_x(), cal.tau_p());
    match mode {
        NoiseMode::Conditional => Ok(0.5 * ((cx - 1.0) / (eta * tx) + (cp - 1.0) / (eta * tp))),
        NoiseMode::CrossCorrelation => {
            let sd = cal.sin_delta();
            if sd.abs() <= MIN_SIN_DELTA {
                return Err(Error::ImbalanceTooSmall { sin_delta: sd });
            }
            Ok(-cxp / ((tx * tp).sqrt() * sd) / eta)
        }
    }
}

/// Mean of the residual-noise statistic per unit of channel excess noise.
pub fn noise_coupling(eta: f64, cal: &Calibration) -> f64 {
    let (tx, tp) = (cal.tau_x(), cal.tau_p());
    0.5 * eta * (tx + tp - 2.0 * (tx * tp).sqrt() * cal.sin_delta())
}

/// `(1/2m)·Σ r² − 1`, where `r` is Bob's summed outputs minus their
/// prediction from Alice's data. Its mean is `noise_coupling · ε`.
pub fn noise_statistic(frame: &QuadratureFrame, eta: f64, alpha: f64, cal: &Calibration) -> Result<f64> {
    if frame.is_empty() {
        return Err(Error::DegenerateFrame("empty frame".into()));
    }
    let (tx, tp) = (cal.tau_x().sqrt(), cal.tau_p().sqrt());
    let (st, ct) = cal.theta.sin_cos();
    let (sp, cp) = cal.phi.sin_cos();
    let g = eta.sqrt() * alpha;
    let kx = g * (tx * ct - tp * sp);
    let kp = g * (tx * st - tp * cp);
    let s: f64 = (0..frame.len())
        .map(|i| {
            let r = frame.x_b[i] + frame.p_b[i] - kx * frame.x_a[i] - kp * frame.p_a[i];
            r * r
        })
        .sum();
    Ok(s / (2.0 * frame.len() as f64) - 1.0)
}

/// Rescales Bob's columns to shot-noise units using the Bob-Bob covariance.
///
/// Returns the normalized frame and the shot-noise variances `(V_N^x, V_N^p)`.
pub fn shot_noise_normalize(
    raw: &QuadratureFrame,
    v_elec: f64,
    cal: &Calibration,
) -> Result<(QuadratureFrame, (f64, f64))> {
    let sd = cal.sin_delta();
    if sd.abs() <= MIN_SIN_DELTA {
        return Err(Error::ImbalanceTooSmall { sin_delta: sd });
    }
    let g = empirical_covariance(raw)?;
    let (tx, tp) = (cal.tau_x().sqrt(), cal.tau_p().sqrt());
    let s = g.s_bx_bp();
    let vn_x = g.vb_x() + tx * s / (tp * sd) - v_elec;
    let vn_p = g.vb_p() + tp * s / (tx * sd) - v_elec;
    if !(vn_x > 0.0) || !(vn_p > 0.0) {
        return Err(Error::NormalizationFailed(format!(
            "shot-noise variances ({vn_x}, {vn_p}) are not positive"
        )));
    }
    let (kx, kp) = (vn_x.sqrt().recip(), vn_p.sqrt().recip());
    let mut out = raw.clone();
    out.x_b.iter_mut().for_each(|v| *v *= kx);
    out.p_b.iter_mut().for_each(|v| *v *= kp);
    out.meta.snu = true;
    Ok((out, (vn_x, vn_p)))
}

/// Known inputs to the estimation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationInputs {
    pub v_a: f64,
    pub alpha: f64,
    pub eta_d: f64,
    /// Transmittance used for the α diagnostic; the estimate is used when absent.
    pub eta_ref: Option<f64>,
    /// Confidence multiplier for the angle windows of the transmission variance.
    pub z: f64,
}

/// Point estimates and their predicted variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub m: f64,
    pub theta_hat: f64,
    pub phi_hat: f64,
    pub delta_hat: f64,
    pub crosscheck_delta: f64,
    pub eta_bs_hat: f64,
    pub alpha_hat: f64,
    pub alpha_consistency: f64,
    pub eta_hat: f64,
    pub eps_hat: f64,
    pub eps_hat_crosscorr: Option<f64>,
    pub var_theta: f64,
    pub var_phi: f64,
    pub var_delta: f64,
    pub var_eta: f64,
    pub var_eps: f64,
}

impl EstimationReport {
    /// Report whose point estimates equal `p`, with variances for `m` samples.
    pub fn predicted(p: &PhysicalParams, m: f64, z: f64) -> Result<Self> {
        p.validate()?;
        let v = predicted_variances(p, m, z)?;
        Ok(Self {
            m,
            theta_hat: p.theta,
            phi_hat: p.phi,
            delta_hat: p.delta(),
            crosscheck_delta: p.delta(),
            eta_bs_hat: p.eta_bs,
            alpha_hat: p.alpha,
            alpha_consistency: 0.0,
            eta_hat: p.eta,
            eps_hat: p.eps,
            eps_hat_crosscorr: (p.delta().sin().abs() > MIN_SIN_DELTA).then_some(p.eps),
            var_theta: v.theta,
            var_phi: v.phi,
            var_delta: v.theta + v.phi,
            var_eta: v.eta,
            var_eps: v.eps,
        })
    }

    /// Flat `key=value` lines in a fixed order.
    pub fn to_key_value(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        let rows: [(&str, String); 16] = [
            ("m", self.m.to_string()),
            ("theta_hat", self.theta_hat.to_string()),
            ("phi_hat", self.phi_hat.to_string()),
            ("delta_hat", self.delta_hat.to_string()),
            ("crosscheck_delta", self.crosscheck_delta.to_string()),
            ("eta_bs_hat", self.eta_bs_hat.to_string()),
            ("alpha_hat", self.alpha_hat.to_string()),
            ("alpha_consistency", self.alpha_consistency.to_string()),
            ("eta_hat", self.eta_hat.to_string()),
            ("eps_hat", self.eps_hat.to_string()),
            ("eps_hat_crosscorr", opt(self.eps_hat_crosscorr)),
            ("var_theta", self.var_theta.to_string()),
            ("var_phi", self.var_phi.to_string()),
            ("var_delta", self.var_delta.to_string()),
            ("var_eta", self.var_eta.to_string()),
            ("var_eps", self.var_eps.to_string()),
        ];
        rows.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Runs every estimator on a covariance built from `m` samples.
pub fn estimate_report(gamma: &CovMat4, m: f64, inputs: &EstimationInputs) -> Result<EstimationReport> {
    let imb = estimate_imbalance(gamma)?;
    let eta_bs = estimate_eta_bs(gamma)?;
    let cal = Calibration { eta_d: inputs.eta_d, eta_bs, theta: imb.theta, phi: imb.phi };
    let eta = estimate_transmission(gamma, inputs.alpha, inputs.v_a, &cal)?;
    let alpha = estimate_alpha(gamma, inputs.eta_ref.unwrap_or(eta), inputs.v_a, &cal)?;
    let eps = estimate_excess_noise(gamma, NoiseMode::Conditional, eta, &cal)?;
    let eps_cross = estimate_excess_noise(gamma, NoiseMode::CrossCorrelation, eta, &cal).ok();

    let at_estimate = PhysicalParams {
        eta: eta.min(1.0),
        eps: eps.max(0.0),
        theta: imb.theta,
        phi: imb.phi,
        eta_d: inputs.eta_d,
        eta_bs,
        alpha: inputs.alpha,
        v_a: inputs.v_a,
        beta: 0.5,
    };
    let v = predicted_variances(&at_estimate, m, inputs.z)?;
    Ok(EstimationReport {
        m,
        theta_hat: imb.theta,
        phi_hat: imb.phi,
        delta_hat: imb.theta + imb.phi,
        crosscheck_delta: imb.crosscheck_delta,
        eta_bs_hat: eta_bs,
        alpha_hat: alpha.alpha,
        alpha_consistency: alpha.consistency,
        eta_hat: eta,
        eps_hat: eps,
        eps_hat_crosscorr: eps_cross,
        var_theta: v.theta,
        var_phi: v.phi,
        var_delta: v.theta + v.phi,
        var_eta: v.eta,
        var_eps: v.eps,
    })
}

/// [`estimate_report`] on the sample covariance of a frame.
pub fn estimate_frame(frame: &QuadratureFrame, inputs: &EstimationInputs) -> Result<EstimationReport> {
    let gamma = empirical_covariance(frame)?;
    estimate_report(&gamma, frame.len() as f64, inputs)
}
