//! Local linear maps that undo receiver phase errors, and symmetrization.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{CovMat4, SymMat, PA, PB, XA, XB};
use crate::simulator::QuadratureFrame;

const DEGENERATE_DET: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Alice,
    Bob,
}

/// Pair of mixing angles applied to one party's data.
///
/// The new pair is `(cosΘ·x + sinΘ·p, sinΦ·x + cosΦ·p)`, so zero angles give
/// the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub side: Side,
    pub theta_cap: f64,
    pub phi_cap: f64,
    /// Sign-rule verdict, only recorded for Bob-side specs.
    pub feasible: Option<bool>,
}

impl TransformSpec {
    pub fn identity(side: Side) -> Self {
        Self {
            side,
            theta_cap: 0.0,
            phi_cap: 0.0,
            feasible: (side == Side::Bob).then_some(true),
        }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        let (st, ct) = self.theta_cap.sin_cos();
        let (sp, cp) = self.phi_cap.sin_cos();
        Matrix2::new(ct, st, sp, cp)
    }

    fn checked_matrix(&self) -> Result<Matrix2<f64>> {
        if !(self.theta_cap.abs() < FRAC_PI_2) || !(self.phi_cap.abs() < FRAC_PI_2) {
            return Err(Error::InvalidParams(format!(
                "transform angles ({}, {}) must lie in (-pi/2, pi/2)",
                self.theta_cap, self.phi_cap
            )));
        }
        let m = self.matrix();
        let det = m.determinant();
        if det.abs() < DEGENERATE_DET {
            return Err(Error::DegenerateTransform { det });
        }
        Ok(m)
    }
}

fn correlation_scale(gamma: &CovMat4) -> f64 {
    (gamma.va_x().max(gamma.va_p()) * gamma.vb_x().max(gamma.vb_p())).sqrt()
}

fn check_correlations(gamma: &CovMat4) -> Result<()> {
    let tiny = 1e-12 * correlation_scale(gamma);
    let (sx, sp) = (gamma.sigma_x(), gamma.sigma_p());
    if !(sx.abs() > tiny) || !(sp.abs() > tiny) {
        return Err(Error::NoCorrelation(format!("sigma_x = {sx:e}, sigma_p = {sp:e}")));
    }
    if sx < 0.0 {
        return Err(Error::InvalidParams(format!(
            "sigma_x = {sx} is negative; the x arm is more than pi/2 off"
        )));
    }
    if sp > 0.0 {
        return Err(Error::InvalidParams(format!(
            "sigma_p = {sp} is positive; the p arm is more than pi/2 off"
        )));
    }
    Ok(())
}

/// Angles that realign Alice's data with Bob's measured quadratures.
pub fn alice_transform_angles(gamma: &CovMat4) -> Result<TransformSpec> {
    check_correlations(gamma)?;
    Ok(TransformSpec {
        side: Side::Alice,
        theta_cap: (gamma.s_ap_bx() / gamma.sigma_x()).atan(),
        phi_cap: (gamma.s_ax_bp() / gamma.sigma_p()).atan(),
        feasible: None,
    })
}

/// Angles that mix Bob's outputs towards Alice's quadratures.
///
/// The flag reports whether both angles oppose the sign of the Bob-Bob
/// covariance, the only case where that covariance lowers both of the
/// transformed variances.
pub fn bob_transform_angles(gamma: &CovMat4) -> Result<TransformSpec> {
    check_correlations(gamma)?;
    let theta_cap = (gamma.s_ax_bp() / gamma.sigma_x()).atan();
    let phi_cap = (gamma.s_ap_bx() / gamma.sigma_p()).atan();
    let s = gamma.s_bx_bp();
    Ok(TransformSpec {
        side: Side::Bob,
        theta_cap,
        phi_cap,
        feasible: Some(theta_cap * s <= 0.0 && phi_cap * s <= 0.0),
    })
}

/// A covariance produced by a local transform, with the matrix it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Transformed {
    original: CovMat4,
    cov: CovMat4,
    spec: TransformSpec,
}

impl Transformed {
    pub fn original(&self) -> &CovMat4 {
        &self.original
    }

    pub fn cov(&self) -> &CovMat4 {
        &self.cov
    }

    pub fn spec(&self) -> &TransformSpec {
        &self.spec
    }
}

fn block_map(spec: &TransformSpec) -> Result<DMatrix<f64>> {
    let m = spec.checked_matrix()?;
    let off = match spec.side {
        Side::Alice => 0,
        Side::Bob => 2,
    };
    let mut a = DMatrix::identity(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            a[(off + i, off + j)] = m[(i, j)];
        }
    }
    Ok(a)
}

/// Pushes the transform through the covariance by full congruence.
pub fn apply_transform_gamma(gamma: &CovMat4, spec: &TransformSpec) -> Result<Transformed> {
    let a = block_map(spec)?;
    let cov = CovMat4::new(gamma.sym().congruence(&a)?)?;
    Ok(Transformed { original: gamma.clone(), cov, spec: *spec })
}

/// Applies the transform sample by sample to the chosen party's columns.
pub fn apply_transform_frame(frame: &QuadratureFrame, spec: &TransformSpec) -> Result<QuadratureFrame> {
    let m = spec.checked_matrix()?;
    let mut out = frame.clone();
    let (xs, ps) = match spec.side {
        Side::Alice => (&mut out.x_a, &mut out.p_a),
        Side::Bob => (&mut out.x_b, &mut out.p_b),
    };
    xs.par_iter_mut().zip(ps.par_iter_mut()).for_each(|(x, p)| {
        let (x0, p0) = (*x, *p);
        *x = m[(0, 0)] * x0 + m[(0, 1)] * p0;
        *p = m[(1, 0)] * x0 + m[(1, 1)] * p0;
    });
    Ok(out)
}

/// Zeroes every cross-quadrature entry, keeping variances and `σ` entries.
pub fn symmetrize(gamma: &CovMat4) -> CovMat4 {
    let mut e = gamma.sym().entries();
    for (i, j) in [(XA, PA), (XA, PB), (PA, XB), (XB, PB)] {
        e[i * 4 + j] = 0.0;
        e[j * 4 + i] = 0.0;
    }
    let sym = SymMat::from_row_slice(4, &e).expect("zeroing entries keeps symmetry");
    // Dropping off-diagonal terms can only lose positive semidefiniteness in
    // degenerate inputs; keep the matrix as-is in that case for the caller to reject.
    CovMat4::new(sym.clone()).unwrap_or_else(|_| CovMat4::unchecked(sym))
}
