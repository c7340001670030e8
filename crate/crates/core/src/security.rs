//! Holevo bound, the four asymptotic key rates, noise tolerance and the
//! phase-fluctuation penalty.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{build_pm_covariance, eb_from_gamma, Modulation, PhysicalParams, Receiver};
use crate::compensation::{symmetrize, Transformed};
use crate::error::{Error, Result};
use crate::gaussian::{schur_condition, von_neumann_entropy, CovMat4};
use crate::info::{ignorant_mi, true_mi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MiMode {
    True,
    Ignorant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HolevoMode {
    True,
    Symmetrized,
}

/// Which mutual information and which Holevo bound enter the rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeyRateVariant {
    pub mi_mode: MiMode,
    pub holevo_mode: HolevoMode,
}

impl KeyRateVariant {
    pub const TT: Self = Self { mi_mode: MiMode::True, holevo_mode: HolevoMode::True };
    pub const IT: Self = Self { mi_mode: MiMode::Ignorant, holevo_mode: HolevoMode::True };
    pub const TI: Self = Self { mi_mode: MiMode::True, holevo_mode: HolevoMode::Symmetrized };
    pub const II: Self = Self { mi_mode: MiMode::Ignorant, holevo_mode: HolevoMode::Symmetrized };

    pub fn all() -> [Self; 4] {
        [Self::TT, Self::IT, Self::TI, Self::II]
    }

    /// Two-letter label: MI mode then Holevo mode.
    pub fn label(&self) -> &'static str {
        match (self.mi_mode, self.holevo_mode) {
            (MiMode::True, HolevoMode::True) => "TT",
            (MiMode::Ignorant, HolevoMode::True) => "IT",
            (MiMode::True, HolevoMode::Symmetrized) => "TI",
            (MiMode::Ignorant, HolevoMode::Symmetrized) => "II",
        }
    }
}

impl fmt::Display for KeyRateVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "K_{}", self.label())
    }
}

impl FromStr for KeyRateVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().trim_start_matches("K_").to_ascii_uppercase();
        Self::all()
            .into_iter()
            .find(|v| v.label() == key)
            .ok_or_else(|| Error::InvalidParams(format!("unknown key-rate variant {s:?}")))
    }
}

/// Rate components in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub variant: KeyRateVariant,
    pub mi: f64,
    pub chi: f64,
    pub rate: f64,
    /// Key fraction `n/N` for finite-size rates.
    pub frac_key: Option<f64>,
}

impl KeyRateReport {
    fn new(variant: KeyRateVariant, beta: f64, mi: f64, chi: f64) -> Self {
        Self { variant, mi, chi, rate: (beta * mi - chi).max(0.0), frac_key: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SecurityOptions {
    /// Evaluate the Holevo bound as if the heterodyne beamsplitter were balanced.
    pub balance_bs: bool,
}

/// Holevo information of Eve on Bob's data from a measured covariance.
///
/// The receiver is trusted: its beamsplitter vacuum and arm phases are
/// inverted to recover the optical mode Eve purifies, while Bob's data are
/// the two measured outputs.
pub fn holevo_from_gamma(
    gamma: &CovMat4,
    modulation: Modulation,
    receiver: Receiver,
    mode: HolevoMode,
) -> Result<f64> {
    let (g, rx) = match mode {
        HolevoMode::True => (gamma.clone(), receiver),
        HolevoMode::Symmetrized => (symmetrize(gamma), Receiver::aligned(receiver.eta_bs)),
    };
    let eb = eb_from_gamma(&g, modulation, rx)?;
    let s_total = von_neumann_entropy(&eb.mode)?;
    let s_cond = von_neumann_entropy(&schur_condition(&eb.measured, &[2, 3], None)?)?;
    Ok(s_total - s_cond)
}

pub fn holevo_bound(p: &PhysicalParams, mode: HolevoMode) -> Result<f64> {
    holevo_bound_with(p, mode, SecurityOptions::default())
}

pub fn holevo_bound_with(p: &PhysicalParams, mode: HolevoMode, opts: SecurityOptions) -> Result<f64> {
    let p = if opts.balance_bs { PhysicalParams { eta_bs: 0.5, ..*p } } else { *p };
    let gamma = build_pm_covariance(&p)?;
    holevo_from_gamma(&gamma, Modulation::from_params(&p), Receiver::from_params(&p), mode)
}

fn mi_for(gamma: &CovMat4, mode: MiMode) -> Result<f64> {
    match mode {
        MiMode::True => true_mi(gamma),
        MiMode::Ignorant => ignorant_mi(gamma),
    }
}

pub fn asymptotic_key_rate(p: &PhysicalParams, v: KeyRateVariant) -> Result<KeyRateReport> {
    asymptotic_key_rate_with(p, v, SecurityOptions::default())
}

pub fn asymptotic_key_rate_with(
    p: &PhysicalParams,
    v: KeyRateVariant,
    opts: SecurityOptions,
) -> Result<KeyRateReport> {
    let gamma = build_pm_covariance(p)?;
    let mi = mi_for(&gamma, v.mi_mode)?;
    let chi = holevo_bound_with(p, v.holevo_mode, opts)?;
    Ok(KeyRateReport::new(v, p.beta, mi, chi))
}

/// Data feeding a rate computed from a covariance matrix.
///
/// Transformed data only admit the true mutual information: symmetrizing a
/// transformed matrix overstates the information Alice and Bob share.
#[derive(Debug, Clone, Copy)]
pub enum RateInput<'a> {
    Measured(&'a CovMat4),
    Transformed(&'a Transformed),
}

pub fn key_rate_from_gamma(
    input: RateInput<'_>,
    modulation: Modulation,
    receiver: Receiver,
    beta: f64,
    v: KeyRateVariant,
) -> Result<KeyRateReport> {
    let (mi, measured) = match input {
        RateInput::Measured(g) => (mi_for(g, v.mi_mode)?, g),
        RateInput::Transformed(t) => {
            if v.mi_mode == MiMode::Ignorant {
                return Err(Error::SymmetrizeAfterTransform);
            }
            (true_mi(t.cov())?, t.original())
        }
    };
    let chi = holevo_from_gamma(measured, modulation, receiver, v.holevo_mode)?;
    Ok(KeyRateReport::new(v, beta, mi, chi))
}

fn raw_rate(p: &PhysicalParams, v: KeyRateVariant) -> Result<f64> {
    let r = asymptotic_key_rate(p, v)?;
    Ok(p.beta * r.mi - r.chi)
}

/// Largest excess noise with a positive rate, found by bisection.
pub fn max_tolerable_noise(p: &PhysicalParams, v: KeyRateVariant) -> Result<f64> {
    const TOL: f64 = 1e-7;
    let at = |eps: f64| raw_rate(&PhysicalParams { eps, ..*p }, v);
    if at(0.0)? <= 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 0.01);
    while at(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Domain("rate stays positive for any excess noise".into()));
        }
    }
    for _ in 0..60 {
        if hi - lo <= TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mean of `cos ϑ` for Gaussian phase noise of variance `sigma2`.
pub fn coherence_exact(sigma2: f64) -> f64 {
    (-sigma2 / 2.0).exp()
}

/// The attenuation `exp(−ς⁴/4)` with `ς² = sigma2`.
pub fn coherence_printed(sigma2: f64) -> f64 {
    (-sigma2 * sigma2 / 4.0).exp()
}

/// K_TT at one modulation variance under phase noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationPoint {
    pub v_mod: f64,
    /// Fixed phase.
    pub rate_fixed: f64,
    /// Correlations scaled by `exp(−σ²/2)`.
    pub rate_exact: f64,
    /// Correlations scaled by `exp(−σ⁴/4)`.
    pub rate_printed: f64,
}

fn rate_with_coherence(p: &PhysicalParams, c: f64) -> Result<f64> {
    let g = build_pm_covariance(p)?;
    let scaled = CovMat4::from_blocks(&g.gamma_a(), &g.gamma_b(), &(g.gamma_c() * c))?;
    let r = key_rate_from_gamma(
        RateInput::Measured(&scaled),
        Modulation::from_params(p),
        Receiver::from_params(p),
        p.beta,
        KeyRateVariant::TT,
    )?;
    Ok(r.rate)
}

/// K_TT over a grid of effective modulation variances `α²·v_a`.
pub fn phase_fluctuation_penalty(
    sigma2: f64,
    p: &PhysicalParams,
    v_mod_grid: &[f64],
) -> Result<Vec<FluctuationPoint>> {
    if !(sigma2 >= 0.0) {
        return Err(Error::Domain(format!("phase variance {sigma2} is negative")));
    }
    let (ce, cp) = (coherence_exact(sigma2), coherence_printed(sigma2));
    v_mod_grid
        .iter()
        .map(|&v_mod| {
            let q = PhysicalParams { v_a: v_mod / (p.alpha * p.alpha), ..*p };
            Ok(FluctuationPoint {
                v_mod,
                rate_fixed: rate_with_coherence(&q, 1.0)?,
                rate_exact: rate_with_coherence(&q, ce)?,
                rate_printed: rate_with_coherence(&q, cp)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compensation::{alice_transform_angles, apply_transform_gamma};
    use std::f64::consts::PI;

    fn reference_point(theta: f64) -> PhysicalParams {
        PhysicalParams { eta: 0.4467, eps: 0.005, theta, ..PhysicalParams::ideal(3.3) }
    }

    #[test]
    fn ideal_channel_leaks_nothing() {
        let p = PhysicalParams::ideal(3.3);
        for mode in [HolevoMode::True, HolevoMode::Symmetrized] {
            assert!(holevo_bound(&p, mode).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn variants_collapse_without_imbalance() {
        let rates: Vec<f64> = KeyRateVariant::all()
            .iter()
            .map(|v| asymptotic_key_rate(&reference_point(0.0), *v).unwrap().rate)
            .collect();
        for r in &rates {
            assert!((r - rates[0]).abs() < 1e-12);
        }
        assert!((rates[0] - 0.24741).abs() < 1e-5);
    }

    #[test]
    fn reference_rates_at_ten_degrees() {
        let p = reference_point(PI / 18.0);
        let want = [(KeyRateVariant::TT, 0.24697), (KeyRateVariant::IT, 0.23566), (KeyRateVariant::TI, 0.14906), (KeyRateVariant::II, 0.13775)];
        for (v, w) in want {
            let r = asymptotic_key_rate(&p, v).unwrap().rate;
            assert!((r - w).abs() < 1e-5, "{v}: {r}");
        }
    }

    #[test]
    fn symmetrization_raises_holevo() {
        let p = reference_point(PI / 18.0);
        assert!(holevo_bound(&p, HolevoMode::Symmetrized).unwrap() >= holevo_bound(&p, HolevoMode::True).unwrap());
    }

    #[test]
    fn conjugate_rotation_keeps_tt() {
        let base = asymptotic_key_rate(&reference_point(0.0), KeyRateVariant::TT).unwrap().rate;
        let p = PhysicalParams { phi: -PI / 18.0, ..reference_point(PI / 18.0) };
        let r = asymptotic_key_rate(&p, KeyRateVariant::TT).unwrap().rate;
        assert!((r - base).abs() < 1e-9);
    }

    #[test]
    fn balance_option_only_touches_holevo() {
        let p = PhysicalParams { eta_bs: 0.6, ..reference_point(0.1) };
        let a = holevo_bound_with(&p, HolevoMode::True, SecurityOptions { balance_bs: true }).unwrap();
        let b = holevo_bound(&PhysicalParams { eta_bs: 0.5, ..p }, HolevoMode::True).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transformed_input_refuses_ignorant_mi() {
        let p = reference_point(PI / 18.0);
        let g = build_pm_covariance(&p).unwrap();
        let t = apply_transform_gamma(&g, &alice_transform_angles(&g).unwrap()).unwrap();
        let (m, rx) = (Modulation::from_params(&p), Receiver::from_params(&p));
        for v in [KeyRateVariant::IT, KeyRateVariant::II] {
            assert!(matches!(
                key_rate_from_gamma(RateInput::Transformed(&t), m, rx, p.beta, v),
                Err(Error::SymmetrizeAfterTransform)
            ));
        }
        let tt = key_rate_from_gamma(RateInput::Transformed(&t), m, rx, p.beta, KeyRateVariant::TT).unwrap();
        let direct = asymptotic_key_rate(&p, KeyRateVariant::TT).unwrap();
        assert!((tt.rate - direct.rate).abs() < 1e-12);
    }

    #[test]
    fn tolerance_collapses_without_imbalance() {
        let p = reference_point(0.0);
        let e: Vec<f64> = KeyRateVariant::all().iter().map(|v| max_tolerable_noise(&p, *v).unwrap()).collect();
        for x in &e {
            assert!((x - e[0]).abs() < 1e-6);
        }
        // the boundary is a sign change of the raw rate
        assert!(raw_rate(&PhysicalParams { eps: e[0] - 1e-5, ..p }, KeyRateVariant::TT).unwrap() > 0.0);
        assert!(raw_rate(&PhysicalParams { eps: e[0] + 1e-5, ..p }, KeyRateVariant::TT).unwrap() < 0.0);
    }

    #[test]
    fn coherence_factors() {
        assert!((coherence_exact(0.02) - 0.990050).abs() < 1e-6);
        assert_eq!(coherence_exact(0.0), 1.0);
        assert_eq!(coherence_printed(0.0), 1.0);
    }

    #[test]
    fn labels_parse() {
        for v in KeyRateVariant::all() {
            assert_eq!(v.label().parse::<KeyRateVariant>().unwrap(), v);
            assert_eq!(v.to_string().parse::<KeyRateVariant>().unwrap(), v);
        }
        assert!("XX".parse::<KeyRateVariant>().is_err());
    }
}
