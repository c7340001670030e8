//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each and exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use hetqkd::channel::fibre_transmittance;
use hetqkd::compensation::{alice_transform_angles, apply_transform_frame, apply_transform_gamma, symmetrize};
use hetqkd::estimation::{
    estimate_alpha, estimate_eta_bs, estimate_excess_noise, estimate_imbalance, estimate_transmission,
    estimate_transmission_frame, noise_coupling, noise_statistic, Calibration, NoiseMode,
};
use hetqkd::finite_size::{
    finite_key_rate_predicted, optimize_fraction, var_noise_hat, var_theta_hat, var_transmission_hat,
    AngleWindow, FiniteScheme, FiniteSizeConfig,
};
use hetqkd::info::{ignorant_mi, lost_mi_approx, lost_mi_printed, mi_decomposition, true_mi};
use hetqkd::security::{asymptotic_key_rate, holevo_bound, HolevoMode};
use hetqkd::simulator::{empirical_covariance, generate_frame, SimConfig};
use hetqkd::{build_pm_covariance, CovMat4, KeyRateVariant, PhysicalParams};
use nalgebra::Matrix4;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn cov(m: &Matrix4<f64>) -> CovMat4 {
    CovMat4::from_matrix(m).unwrap()
}

fn frame_cfg(params: PhysicalParams, m: usize, seed: u64) -> SimConfig {
    SimConfig { params, m, frames: 1, seed }
}

/// Exact recovery of every parameter from the analytic covariance.
fn ac1() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let p = random_params(&mut r);
        let g = build_pm_covariance(&p).unwrap();
        let imb = estimate_imbalance(&g).unwrap();
        let eta_bs = estimate_eta_bs(&g).unwrap();
        let cal = Calibration { eta_d: p.eta_d, eta_bs, theta: imb.theta, phi: imb.phi };
        let alpha = estimate_alpha(&g, p.eta, p.v_a, &cal).unwrap().alpha;
        let eta = estimate_transmission(&g, p.alpha, p.v_a, &cal).unwrap();
        let eps = estimate_excess_noise(&g, NoiseMode::Conditional, eta, &cal).unwrap();
        let eps_cross = estimate_excess_noise(&g, NoiseMode::CrossCorrelation, eta, &cal).unwrap();
        for (got, want) in [
            (imb.theta, p.theta),
            (imb.phi, p.phi),
            (imb.crosscheck_delta, p.delta()),
            (eta_bs, p.eta_bs),
            (alpha, p.alpha),
            (eta, p.eta),
            (eps, p.eps),
            (eps_cross, p.eps),
        ] {
            worst = worst.max((got - want).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 1.0,
        format!("max error {worst:.2e} (tol 1e-9) over 200 sets in {secs:.3} s (limit 1 s)"),
    )
}

/// Sample covariance of a simulated frame against the model.
fn ac2() -> Outcome {
    let start = Instant::now();
    let p = lab_params(deg(10.0), 0.0);
    let m = 1_000_000;
    let frame = generate_frame(&frame_cfg(p, m, 2), 0).unwrap();
    let got = empirical_covariance(&frame).unwrap().matrix4();
    let secs = start.elapsed().as_secs_f64();
    let want = build_pm_covariance(&p).unwrap().matrix4();
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in i..4 {
            let se = ((want[(i, i)] * want[(j, j)] + want[(i, j)].powi(2)) / m as f64).sqrt();
            worst = worst.max((got[(i, j)] - want[(i, j)]).abs() / se);
        }
    }
    let bb = (got[(2, 3)], want[(2, 3)]);
    outcome(
        worst <= 5.0 && secs < 10.0,
        format!(
            "max |dev|/SE {worst:.2} (tol 5), Bob-Bob {:.5} vs {:.5}, {secs:.2} s (limit 10 s)",
            bb.0, bb.1
        ),
    )
}

/// Collapse of the four variants and their ordering under imbalance.
fn ac3() -> Outcome {
    let rates = |p: &PhysicalParams| KeyRateVariant::all().map(|v| asymptotic_key_rate(p, v).unwrap().rate);

    let mut spread = 0.0f64;
    for (eta, eps) in [(0.4467, 0.005), (0.9, 0.0), (0.1, 0.02), (0.7, 0.05)] {
        let p = PhysicalParams { eta, eps, ..PhysicalParams::ideal(3.3) };
        let k = rates(&p);
        let (lo, hi) = k.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        spread = spread.max(hi - lo);
    }

    let base = PhysicalParams { theta: std::f64::consts::PI / 18.0, ..PhysicalParams::ideal(3.3) };
    let mut violations = 0;
    for i in 0..20 {
        for j in 0..20 {
            // the symmetrized matrix stops being a state near eta = 1, eps = 0
            let eta = 0.95 * 10f64.powf(-2.0 * i as f64 / 19.0);
            let eps = 0.05 * j as f64 / 19.0;
            let k = rates(&PhysicalParams { eta, eps, ..base });
            let (tt, it, ii) = (k[0], k[1], k[3]);
            if tt < it - 1e-12 || it < ii - 1e-12 {
                violations += 1;
            }
        }
    }

    let mut frontier = None;
    for i in 0..=400 {
        let eta = 0.99 * 10f64.powf(-4.0 * i as f64 / 400.0);
        let k = rates(&PhysicalParams { eta, eps: 0.0, ..base });
        if k[3] == 0.0 && k[0] > 0.0 {
            frontier = Some((eta, k[0]));
            break;
        }
    }
    let frontier_txt = match frontier {
        Some((eta, tt)) => format!("K_II = 0 with K_TT = {tt:.3e} at eta = {eta:.3e}"),
        None => "no loss found with K_II = 0 < K_TT".into(),
    };
    outcome(
        spread <= 1e-9 && violations == 0 && frontier.is_some(),
        format!("aligned spread {spread:.1e} (tol 1e-9), {violations} ordering violations on 20x20, {frontier_txt}"),
    )
}

fn realigned_ignorant_mi(m: &Matrix4<f64>) -> f64 {
    let g = cov(m);
    let t = apply_transform_gamma(&g, &alice_transform_angles(&g).unwrap()).unwrap();
    ignorant_mi(t.cov()).unwrap()
}

/// Alice's transform undoes a conjugate rotation.
fn ac4() -> Outcome {
    let p = lab_params(deg(10.0), deg(-10.0));
    let g = build_pm_covariance(&p).unwrap();
    let target = ignorant_mi(&build_pm_covariance(&lab_params(0.0, 0.0)).unwrap()).unwrap();
    let before = ignorant_mi(&g).unwrap();
    let analytic = realigned_ignorant_mi(&g.matrix4());

    let m = 1_000_000;
    let frame = generate_frame(&frame_cfg(p, m, 4), 0).unwrap();
    let spec = alice_transform_angles(&empirical_covariance(&frame).unwrap()).unwrap();
    let realigned = apply_transform_frame(&frame, &spec).unwrap();
    let sampled = ignorant_mi(&empirical_covariance(&realigned).unwrap()).unwrap();
    let se = delta_method_se(&g.matrix4(), m as f64, realigned_ignorant_mi);
    let z = (sampled - target).abs() / se;
    outcome(
        (analytic - target).abs() <= 1e-9 && z <= 3.0,
        format!(
            "aligned {target:.6}, imbalanced {before:.6}, realigned {analytic:.6} (|diff| {:.1e}), sampled {sampled:.6} at {z:.2} SE (tol 3)",
            (analytic - target).abs()
        ),
    )
}

/// Decomposition of the true MI.
fn ac5() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let mut oracle = 0.0f64;
    for _ in 0..1000 {
        let g = random_covariance(&mut r);
        let bd = mi_decomposition(&g).unwrap();
        worst = worst.max((bd.mi_true - (bd.snr_term - bd.i_bb + bd.i_bb_cond)).abs());
        oracle = oracle.max((bd.mi_true - entropy_mi(&g.matrix4())).abs());
    }
    outcome(
        worst <= 1e-9 && oracle <= 1e-9,
        format!("identity residual {worst:.1e}, entropy-form residual {oracle:.1e} (tol 1e-9) over 1000 matrices"),
    )
}

/// Closed-form Bob-Bob information against the exact value.
fn ac6() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_printed = 0.0f64;
    for eps in [0.0, 0.0025, 0.005, 0.0075, 0.01] {
        for d in 1..=20 {
            for k in 0..=8 {
                let eta = 0.2 + 0.1 * k as f64;
                let p = PhysicalParams { eta, eps, theta: deg(d as f64), ..lab_params(0.0, 0.0) };
                let exact = mi_decomposition(&build_pm_covariance(&p).unwrap()).unwrap().i_bb;
                let rel = |v: f64| (v - exact).abs() / exact;
                worst = worst.max(rel(lost_mi_approx(&p).unwrap()));
                worst_printed = worst_printed.max(rel(lost_mi_printed(&p).unwrap()));
            }
        }
    }
    outcome(
        worst <= 0.10,
        format!("max relative error {worst:.2e} (tol 0.10); uncorrected transcription {worst_printed:.2}"),
    )
}

/// Symmetrizing transformed data overstates the shared information.
fn ac7() -> Outcome {
    let g = build_pm_covariance(&lab_params(deg(10.0), 0.0)).unwrap();
    let t = apply_transform_gamma(&g, &alice_transform_angles(&g).unwrap()).unwrap();
    let hazard = ignorant_mi(&symmetrize(t.cov())).unwrap();
    let truth = true_mi(&g).unwrap();
    outcome(hazard > truth, format!("symmetrized after transform {hazard:.6} vs true {truth:.6}"))
}

/// Spread of the estimators over independent frames.
fn ac8() -> Outcome {
    let start = Instant::now();
    let p = lab_params(deg(10.0), 0.0);
    let m = 100_000;
    let cfg = frame_cfg(p, m, 8);
    let true_cal = Calibration::from_params(&p);
    let (mut th, mut tr, mut ns) = (vec![], vec![], vec![]);
    for k in 0..200 {
        let frame = generate_frame(&cfg, k).unwrap();
        let imb = estimate_imbalance(&empirical_covariance(&frame).unwrap()).unwrap();
        let cal = Calibration { theta: imb.theta, phi: imb.phi, ..true_cal };
        th.push(imb.theta);
        tr.push(estimate_transmission_frame(&frame, p.alpha, p.v_a, &cal).unwrap());
        ns.push(noise_statistic(&frame, p.eta, p.alpha, &true_cal).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    let mf = m as f64;
    let window = AngleWindow::around(&p, mf, 6.5).unwrap();
    let predicted = [
        var_theta_hat(&p, mf).unwrap(),
        var_transmission_hat(&p, mf, &window).unwrap(),
        var_noise_hat(noise_coupling(p.eta, &true_cal) * p.eps, mf).unwrap(),
    ];
    let ratios: Vec<f64> = [&th, &tr, &ns].iter().zip(predicted).map(|(xs, v)| variance(xs) / v).collect();
    let ok = ratios.iter().all(|r| (1.0 / 1.5..=1.5).contains(r));
    outcome(
        ok && secs < 60.0,
        format!(
            "empirical/predicted variance: angle {:.3}, transmission {:.3}, noise {:.3} (band [0.667, 1.5]); {secs:.1} s (limit 60 s)",
            ratios[0], ratios[1], ratios[2]
        ),
    )
}

fn two_route_gap(m: &Matrix4<f64>) -> f64 {
    let e = estimate_imbalance(&cov(m)).unwrap();
    e.theta + e.phi - e.crosscheck_delta
}

/// Agreement of the two imbalance estimates across modulation variances.
fn ac9() -> Outcome {
    let (mut d_ab, mut d_bb) = (vec![], vec![]);
    let mut agree = 0;
    let m = 1_000_000;
    for k in 0..10 {
        let v_a = 1.6 + (4.5 - 1.6) * k as f64 / 9.0;
        let p = PhysicalParams { v_a, ..lab_params(deg(7.0), deg(3.0)) };
        let frame = generate_frame(&frame_cfg(p, m, 9), k).unwrap();
        let e = estimate_imbalance(&empirical_covariance(&frame).unwrap()).unwrap();
        let g = build_pm_covariance(&p).unwrap().matrix4();
        let se = delta_method_se(&g, m as f64, two_route_gap);
        if (e.theta + e.phi - e.crosscheck_delta).abs() <= 3.0 * se {
            agree += 1;
        }
        d_ab.push((e.theta + e.phi).to_degrees());
        d_bb.push(e.crosscheck_delta.to_degrees());
    }
    let (a, b) = (mean(&d_ab), mean(&d_bb));
    outcome(
        agree as f64 >= 0.95 * 10.0 && (a - 10.0).abs() <= 0.5 && (b - 10.0).abs() <= 0.5,
        format!("{agree}/10 frames agree within 3 SE; mean delta {a:.3} deg (Alice-Bob), {b:.3} deg (Bob-Bob)"),
    )
}

/// Finite-size rates against distance for three block sizes.
fn ac10() -> Outcome {
    let base = PhysicalParams { eps: 5e-3, ..lab_params(deg(10.0), 0.0) };
    let distances: Vec<f64> = (0..=150).map(|k| 2.0 * k as f64).collect();
    let sizes = [1e6, 1e7, 1e8];
    let mut split = vec![vec![0.0; distances.len()]; 3];
    let mut shared = vec![vec![0.0; distances.len()]; 3];
    for (s, &n_total) in sizes.iter().enumerate() {
        let cfg = FiniteSizeConfig { n_total, ..FiniteSizeConfig::default() };
        for (i, &km) in distances.iter().enumerate() {
            let p = PhysicalParams { eta: fibre_transmittance(km, 0.2), ..base };
            split[s][i] = optimize_fraction(&p, &cfg).unwrap().rate;
            shared[s][i] = finite_key_rate_predicted(&p, &cfg, FiniteScheme::Shared).unwrap().rate;
        }
    }
    let reach = |s: usize| {
        (0..distances.len())
            .filter(|&i| split[s][i].max(shared[s][i]) > 0.0)
            .map(|i| distances[i])
            .fold(f64::NAN, f64::max)
    };
    let mut monotone = true;
    for i in 0..distances.len() {
        for s in 1..3 {
            for series in [&split, &shared] {
                if series[s][i] < series[s - 1][i] {
                    monotone = false;
                }
            }
        }
    }
    let reaches = [reach(0), reach(1), reach(2)];
    let shrinks = reaches[0] < reaches[1] && reaches[1] < reaches[2];
    let last = distances.iter().position(|&d| d == reaches[2]).unwrap();
    let (kn, kbig) = (split[2][last], shared[2][last]);
    outcome(
        monotone && shrinks && kn > kbig,
        format!(
            "rates monotone in N: {monotone}; reach {:.0}/{:.0}/{:.0} km; at {:.0} km with N=1e8 K_n {kn:.3e} vs K_N {kbig:.3e}",
            reaches[0], reaches[1], reaches[2], reaches[2]
        ),
    )
}

/// Symmetrized aligned Holevo bound against the textbook closed form.
fn ac11() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..10 {
        for j in 0..10 {
            let eta = 0.1 + 0.1 * i as f64;
            let eps = 0.01 * j as f64;
            let p = PhysicalParams { eta, eps, ..PhysicalParams::ideal(3.3) };
            let chi = holevo_bound(&p, HolevoMode::Symmetrized).unwrap();
            worst = worst.max((chi - textbook_heterodyne_holevo(eta, eps, p.v_mod())).abs());
        }
    }
    outcome(worst <= 1e-9, format!("max |diff| {worst:.1e} (tol 1e-9) over 10x10"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
        ("AC9", ac9),
        ("AC10", ac10),
        ("AC11", ac11),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        println!("{name} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
