//! Test-side oracles, written independently of the library internals.
#![allow(dead_code)]

use hetqkd::{CovMat4, PhysicalParams};
use nalgebra::{Matrix2, Matrix4};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn deg(d: f64) -> f64 {
    d.to_radians()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Field parameters used throughout the experimental comparison.
pub fn lab_params(theta: f64, phi: f64) -> PhysicalParams {
    PhysicalParams {
        eta: 10f64.powf(-0.35),
        eps: 0.005,
        theta,
        phi,
        eta_d: 0.85,
        eta_bs: 0.5,
        alpha: 1.0,
        v_a: 3.3,
        beta: 0.95,
    }
}

pub fn random_params(r: &mut StdRng) -> PhysicalParams {
    PhysicalParams {
        eta: r.random_range(0.05..1.0),
        eps: r.random_range(0.0..0.1),
        theta: deg(r.random_range(-30.0..30.0)),
        phi: deg(r.random_range(-30.0..30.0)),
        eta_d: r.random_range(0.5..=1.0),
        eta_bs: r.random_range(0.3..0.7),
        alpha: r.random_range(0.5..2.0),
        v_a: r.random_range(0.5..10.0),
        beta: r.random_range(0.8..1.0),
    }
}

/// A random positive-definite 4x4 covariance, not necessarily physical.
pub fn random_covariance(r: &mut StdRng) -> CovMat4 {
    let mut a = Matrix4::<f64>::zeros();
    for v in a.iter_mut() {
        *v = r.random_range(-1.0..1.0);
    }
    let m = a * a.transpose() + Matrix4::identity() * r.random_range(0.05..2.0);
    CovMat4::from_matrix(&m).unwrap()
}

fn h_entropy(nu: f64) -> f64 {
    let (a, b) = ((nu + 1.0) / 2.0, (nu - 1.0) / 2.0);
    if b <= 1e-15 {
        return 0.0;
    }
    a * a.log2() - b * b.log2()
}

/// Holevo bound of the no-switching protocol with an ideal heterodyne
/// receiver, from the closed-form symplectic spectrum.
pub fn textbook_heterodyne_holevo(t: f64, eps: f64, v_mod: f64) -> f64 {
    let v = v_mod + 1.0;
    let chi_line = 1.0 / t - 1.0 + eps;
    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line).powi(2);
    let b = t * t * (v * chi_line + 1.0).powi(2);
    let disc = (a * a - 4.0 * b).max(0.0).sqrt();
    let l1 = (0.5 * (a + disc)).sqrt();
    let l2 = (0.5 * (a - disc)).max(1.0).sqrt();
    let l3 = v - t * (v * v - 1.0) / (t * (v + chi_line) + 1.0);
    h_entropy(l1) + h_entropy(l2) - h_entropy(l3)
}

/// `½·log₂(|γ_A|·|γ_B| / |Γ|)`.
pub fn entropy_mi(m: &Matrix4<f64>) -> f64 {
    let a = Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let b = Matrix2::new(m[(2, 2)], m[(2, 3)], m[(3, 2)], m[(3, 3)]);
    0.5 * (a.determinant() * b.determinant() / m.determinant()).log2()
}

/// Per-quadrature Gaussian MI after discarding every cross-quadrature term.
pub fn diagonal_mi(m: &Matrix4<f64>) -> f64 {
    let one = |va: f64, vb: f64, c: f64| -0.5 * (1.0 - c * c / (va * vb)).log2();
    one(m[(0, 0)], m[(2, 2)], m[(0, 2)]) + one(m[(1, 1)], m[(3, 3)], m[(1, 3)])
}

const PAIRS: [(usize, usize); 10] =
    [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];

/// Delta-method standard error of `f(Γ̂)` for `m` Gaussian samples, with the
/// sampling covariance of the entries from Isserlis' theorem and a central
/// difference gradient.
pub fn delta_method_se(gamma: &Matrix4<f64>, m: f64, f: impl Fn(&Matrix4<f64>) -> f64) -> f64 {
    let scale = gamma.diagonal().max();
    let h = 1e-6 * scale;
    let grad: Vec<f64> = PAIRS
        .iter()
        .map(|&(i, j)| {
            let bump = |s: f64| {
                let mut g = *gamma;
                g[(i, j)] += s;
                if i != j {
                    g[(j, i)] += s;
                }
                f(&g)
            };
            (bump(h) - bump(-h)) / (2.0 * h)
        })
        .collect();
    let mut var = 0.0;
    for (a, &(i, j)) in PAIRS.iter().enumerate() {
        for (b, &(k, l)) in PAIRS.iter().enumerate() {
            let cov = (gamma[(i, k)] * gamma[(j, l)] + gamma[(i, l)] * gamma[(j, k)]) / m;
            var += grad[a] * grad[b] * cov;
        }
    }
    var.sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample covariance computed directly from the four columns.
pub fn sample_covariance(cols: [&[f64]; 4]) -> Matrix4<f64> {
    let n = cols[0].len() as f64;
    let mu: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    Matrix4::from_fn(|i, j| {
        cols[i].iter().zip(cols[j]).map(|(a, b)| (a - mu[i]) * (b - mu[j])).sum::<f64>() / (n - 1.0)
    })
}
