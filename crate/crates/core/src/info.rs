//! Mutual information between Alice's modulation and Bob's measured data.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::channel::PhysicalParams;
use crate::compensation::symmetrize;
use crate::error::{Error, Result};
use crate::gaussian::CovMat4;

/// Mutual information split into the SNR term and the two Bob-Bob informations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiBreakdown {
    pub mi_true: f64,
    pub mi_ignorant: f64,
    /// `log₂(1+SNR)` over both quadratures.
    pub snr_term: f64,
    /// `I(B^x : B^p)`.
    pub i_bb: f64,
    /// `I(B^x|A : B^p|A)`.
    pub i_bb_cond: f64,
}

/// Mutual information of the symmetrized matrix, one quadrature at a time.
pub fn ignorant_mi(gamma: &CovMat4) -> Result<f64> {
    let g = symmetrize(gamma);
    let quad = |va: f64, sigma: f64, vb: f64, name: &str| -> Result<f64> {
        if !(vb > 0.0) {
            return Err(Error::Domain(format!("V_B^{name} = {vb} is not positive")));
        }
        let cond = va - sigma * sigma / vb;
        if !(cond > 0.0) || !(va > 0.0) {
            return Err(Error::Domain(format!(
                "conditional variance V_A|B^{name} = {cond} is not positive"
            )));
        }
        Ok((va / cond).log2())
    };
    let ix = quad(g.va_x(), g.sigma_x(), g.vb_x(), "x")?;
    let ip = quad(g.va_p(), g.sigma_p(), g.vb_p(), "p")?;
    Ok(0.5 * (ix + ip))
}

/// Mutual information of the full matrix, `½·log₂(|γ_A| / |γ_A|B|)`.
pub fn true_mi(gamma: &CovMat4) -> Result<f64> {
    let cond = gamma.gamma_a_given_b()?;
    log_det_ratio(&gamma.gamma_a(), &cond)
}

fn log_det_ratio(num: &Matrix2<f64>, den: &Matrix2<f64>) -> Result<f64> {
    let (dn, dd) = (num.determinant(), den.determinant());
    if !(dn > 0.0) || !(dd > 0.0) {
        return Err(Error::Domain(format!(
            "determinants {dn:e} / {dd:e} are not both positive"
        )));
    }
    Ok(0.5 * (dn / dd).log2())
}

/// `½·log₂(V_x·V_p / |γ|)` for a 2x2 block.
fn quadrature_coupling(b: &Matrix2<f64>) -> Result<f64> {
    log_det_ratio(&Matrix2::new(b[(0, 0)], 0.0, 0.0, b[(1, 1)]), b)
}

pub fn mi_decomposition(gamma: &CovMat4) -> Result<MiBreakdown> {
    let b = gamma.gamma_b();
    let b_cond = gamma.gamma_b_given_a()?;
    let diag = Matrix2::new(b[(0, 0)], 0.0, 0.0, b[(1, 1)]);
    let diag_cond = Matrix2::new(b_cond[(0, 0)], 0.0, 0.0, b_cond[(1, 1)]);
    Ok(MiBreakdown {
        mi_true: true_mi(gamma)?,
        mi_ignorant: ignorant_mi(gamma)?,
        snr_term: log_det_ratio(&diag, &diag_cond)?,
        i_bb: quadrature_coupling(&b)?,
        i_bb_cond: quadrature_coupling(&b_cond)?,
    })
}

/// Closed-form correlation between Bob's quadratures, in bits.
///
/// Uses the effective transmittance `η·η_D`; exact for a balanced
/// beamsplitter.
pub fn lost_mi_approx(p: &PhysicalParams) -> Result<f64> {
    p.validate()?;
    let eta = p.eta * p.eta_d;
    let signal = p.v_mod() + p.eps;
    let x = eta * (signal + 2.0 / eta);
    let s = eta * signal * p.delta().sin();
    // log₂x − ½·log₂(x² − s²), written to be exact at zero imbalance
    Ok(-0.5 * (1.0 - (s / x).powi(2)).log2())
}

/// The same approximation transcribed with `2/η²` and a plus sign under the
/// second logarithm. Kept for comparison; it is negative whenever the
/// imbalance is non-zero.
pub fn lost_mi_printed(p: &PhysicalParams) -> Result<f64> {
    p.validate()?;
    let eta = p.eta;
    let signal = p.v_mod() + p.eps;
    let x = signal + 2.0 / (eta * eta);
    let s = eta * signal * p.delta().sin();
    Ok((eta * x).log2() - 0.5 * (eta * eta * x * x + s * s).log2())
}
