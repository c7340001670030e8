//! Prepare-and-measure covariance of the imbalanced heterodyne link and its
//! entanglement-based counterpart.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{CovMat4, SymMat};

/// Ground-truth link and receiver parameters. Angles are in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// Channel transmittance.
    pub eta: f64,
    /// Channel excess noise, shot-noise units.
    pub eps: f64,
    /// Phase error of the x arm.
    pub theta: f64,
    /// Phase error of the p arm.
    pub phi: f64,
    /// Detector efficiency.
    pub eta_d: f64,
    /// Transmission of the heterodyne beamsplitter.
    pub eta_bs: f64,
    /// Modulation rescaling factor.
    pub alpha: f64,
    /// Modulation variance per quadrature, shot-noise units.
    pub v_a: f64,
    /// Reconciliation efficiency.
    pub beta: f64,
}

impl PhysicalParams {
    /// Lossless, noiseless, perfectly balanced link with modulation variance `v_a`.
    pub fn ideal(v_a: f64) -> Self {
        Self {
            eta: 1.0,
            eps: 0.0,
            theta: 0.0,
            phi: 0.0,
            eta_d: 1.0,
            eta_bs: 0.5,
            alpha: 1.0,
            v_a,
            beta: 0.95,
        }
    }

    pub fn tau_x(&self) -> f64 {
        self.eta_d * self.eta_bs
    }

    pub fn tau_p(&self) -> f64 {
        self.eta_d * (1.0 - self.eta_bs)
    }

    /// Effective modulation variance `α²·v_a`.
    pub fn v_mod(&self) -> f64 {
        self.alpha * self.alpha * self.v_a
    }

    /// Total imbalance `θ + φ`.
    pub fn delta(&self) -> f64 {
        self.theta + self.phi
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("eta", self.eta),
            ("eps", self.eps),
            ("theta", self.theta),
            ("phi", self.phi),
            ("eta_d", self.eta_d),
            ("eta_bs", self.eta_bs),
            ("alpha", self.alpha),
            ("v_a", self.v_a),
            ("beta", self.beta),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} = {v} is not finite")));
        }
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::InvalidParams(msg)) };
        check(self.eta > 0.0 && self.eta <= 1.0, format!("eta = {} outside (0,1]", self.eta))?;
        check(self.eps >= 0.0, format!("eps = {} is negative", self.eps))?;
        check(self.eta_d > 0.0 && self.eta_d <= 1.0, format!("eta_d = {} outside (0,1]", self.eta_d))?;
        check(self.eta_bs > 0.0 && self.eta_bs < 1.0, format!("eta_bs = {} outside (0,1)", self.eta_bs))?;
        check(self.alpha > 0.0, format!("alpha = {} is not positive", self.alpha))?;
        check(self.v_a > 0.0, format!("v_a = {} is not positive", self.v_a))?;
        check(self.beta > 0.0 && self.beta < 1.0, format!("beta = {} outside (0,1)", self.beta))?;
        check(self.theta.abs() < FRAC_PI_2, format!("|theta| = {} is not below pi/2", self.theta.abs()))?;
        check(self.phi.abs() < FRAC_PI_2, format!("|phi| = {} is not below pi/2", self.phi.abs()))?;
        let (tx, tp) = (self.tau_x(), self.tau_p());
        check(tx > 0.0 && tx < 1.0, format!("tau_x = {tx} outside (0,1)"))?;
        check(tp > 0.0 && tp < 1.0, format!("tau_p = {tp} outside (0,1)"))?;
        Ok(())
    }
}

/// Covariance of Alice's data and Bob's two measured outputs.
pub fn build_pm_covariance(p: &PhysicalParams) -> Result<CovMat4> {
    p.validate()?;
    let (tx, tp) = (p.tau_x(), p.tau_p());
    let (va, a, eta) = (p.v_a, p.alpha, p.eta);
    let signal = p.v_mod() + p.eps;
    let sigma_x = (eta * tx).sqrt() * p.theta.cos() * va * a;
    let s_ax_bp = -(eta * tp).sqrt() * p.phi.sin() * va * a;
    let s_ap_bx = (eta * tx).sqrt() * p.theta.sin() * va * a;
    let sigma_p = -(eta * tp).sqrt() * p.phi.cos() * va * a;
    let vb_x = 1.0 + eta * tx * signal;
    let vb_p = 1.0 + eta * tp * signal;
    let s_bb = -eta * (tx * tp).sqrt() * signal * p.delta().sin();
    CovMat4::from_row_slice(&[
        va, 0.0, sigma_x, s_ax_bp, //
        0.0, va, s_ap_bx, sigma_p, //
        sigma_x, s_ap_bx, vb_x, s_bb, //
        s_ax_bp, sigma_p, s_bb, vb_p,
    ])
}

/// Beamsplitter and arm phases of the heterodyne receiver.
///
/// The two measured outputs are `U·(X, P) + vacuum`, where `(X, P)` is the
/// optical mode entering the receiver and the vacuum port contributes the
/// covariance [`Receiver::vacuum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Receiver {
    pub eta_bs: f64,
    pub theta: f64,
    pub phi: f64,
}

impl Receiver {
    pub fn from_params(p: &PhysicalParams) -> Self {
        Self { eta_bs: p.eta_bs, theta: p.theta, phi: p.phi }
    }

    /// Receiver with orthogonal arms.
    pub fn aligned(eta_bs: f64) -> Self {
        Self { eta_bs, theta: 0.0, phi: 0.0 }
    }

    pub fn gain(&self) -> Matrix2<f64> {
        let (t, r) = (self.eta_bs.sqrt(), (1.0 - self.eta_bs).sqrt());
        Matrix2::new(
            t * self.theta.cos(),
            t * self.theta.sin(),
            -r * self.phi.sin(),
            -r * self.phi.cos(),
        )
    }

    pub fn vacuum(&self) -> Matrix2<f64> {
        let c = (self.eta_bs * (1.0 - self.eta_bs)).sqrt() * (self.theta + self.phi).sin();
        Matrix2::new(1.0 - self.eta_bs, c, c, self.eta_bs)
    }

    fn gain_inverse(&self) -> Result<Matrix2<f64>> {
        let g = self.gain();
        let det = g.determinant();
        let scale = (self.eta_bs * (1.0 - self.eta_bs)).sqrt();
        if det.abs() < 1e-9 * scale {
            return Err(Error::InvalidParams(format!(
                "receiver arms are parallel (theta + phi = {})",
                self.theta + self.phi
            )));
        }
        g.try_inverse().ok_or_else(|| Error::InvalidParams("receiver gain not invertible".into()))
    }
}

/// Modulation scale of Alice's recorded data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulation {
    pub alpha: f64,
    pub v_a: f64,
}

impl Modulation {
    pub fn from_params(p: &PhysicalParams) -> Self {
        Self { alpha: p.alpha, v_a: p.v_a }
    }

    pub fn v_mod(&self) -> f64 {
        self.alpha * self.alpha * self.v_a
    }
}

/// Entanglement-based state in two views.
#[derive(Debug, Clone, PartialEq)]
pub struct EbCovariance {
    /// Alice's EB mode against Bob's two measured outputs.
    pub measured: SymMat,
    /// Alice's EB mode against the optical mode entering the receiver.
    pub mode: SymMat,
}

/// Entanglement-based covariance for the parameters `p`.
pub fn build_eb_covariance(p: &PhysicalParams) -> Result<EbCovariance> {
    let gamma = build_pm_covariance(p)?;
    eb_from_gamma(&gamma, Modulation::from_params(p), Receiver::from_params(p))
}

/// Maps a prepare-and-measure covariance to its entanglement-based form.
///
/// Alice's block becomes `V·I` with `V = α²v_a + 1`. Correlations are
/// rescaled from the recorded data to the EB mode, whose p quadrature is
/// conjugated relative to the prepared p. The mode view inverts the receiver.
pub fn eb_from_gamma(
    gamma: &CovMat4,
    modulation: Modulation,
    receiver: Receiver,
) -> Result<EbCovariance> {
    let v_mod = modulation.v_mod();
    if !(v_mod > 1e-12) {
        return Err(Error::NoModulation);
    }
    let v = v_mod + 1.0;
    let scale = (v * v - 1.0).sqrt() / (modulation.alpha * modulation.v_a);
    let flip = Matrix2::new(1.0, 0.0, 0.0, -1.0);
    let c_meas = flip * gamma.gamma_c() * scale;
    let b_meas = gamma.gamma_b();

    let u_inv = receiver.gain_inverse()?;
    let b_mode = u_inv * (b_meas - receiver.vacuum()) * u_inv.transpose();
    let c_mode = c_meas * u_inv.transpose();

    Ok(EbCovariance {
        measured: assemble(v, &c_meas, &b_meas)?,
        mode: assemble(v, &c_mode, &b_mode)?,
    })
}

fn assemble(v: f64, c: &Matrix2<f64>, b: &Matrix2<f64>) -> Result<SymMat> {
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 0)] = v;
    m[(1, 1)] = v;
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j + 2)] = c[(i, j)];
            m[(j + 2, i)] = c[(i, j)];
            m[(i + 2, j + 2)] = 0.5 * (b[(i, j)] + b[(j, i)]);
        }
    }
    SymMat::new(m)
}

/// Channel transmittance of a fibre of length `km` at `db_per_km` loss.
pub fn fibre_transmittance(km: f64, db_per_km: f64) -> f64 {
    10f64.powf(-db_per_km * km / 10.0)
}

/// Transmittance for a loss given in dB.
pub fn loss_db_to_eta(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}
