//! Batch commands behind the `hetqkd` binary. Each command is a pure function
//! of the configuration and returns the files it would write.

pub mod config;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};

use hetqkd::channel::{fibre_transmittance, loss_db_to_eta};
use hetqkd::compensation::{alice_transform_angles, apply_transform_gamma};
use hetqkd::estimation::{estimate_frame, estimate_report};
use hetqkd::finite_size::{
    estimation_samples, finite_key_rate, finite_key_rate_predicted, optimize_fraction, optimize_fraction_with,
    FiniteScheme,
};
use hetqkd::info::{ignorant_mi, true_mi};
use hetqkd::security::{asymptotic_key_rate, holevo_bound, max_tolerable_noise};
use hetqkd::simulator::{empirical_covariance, generate_frame, read_frame, write_frame, SimConfig};
use hetqkd::{KeyRateReport, KeyRateVariant, PhysicalParams};
use rayon::prelude::*;

pub use config::RunConfig;
use config::parse_variants;
use table::{num, render};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(#[from] hetqkd::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
            Self::Io(_) => 1,
        }
    }
}

/// A named output; `frame` entries are written as frame files.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Text { name: String, contents: String },
    Frame { name: String, frame: hetqkd::QuadratureFrame },
}

impl Artifact {
    fn text(name: impl Into<String>, contents: String) -> Self {
        Self::Text { name: name.into(), contents }
    }
}

/// Writes artifacts under `out`, or prints text artifacts when `out` is `None`.
pub fn emit(artifacts: &[Artifact], out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for a in artifacts {
                match a {
                    Artifact::Text { name, contents } => fs::write(dir.join(name), contents)?,
                    Artifact::Frame { name, frame } => write_frame(&dir.join(name), frame)?,
                }
            }
        }
        None => {
            for a in artifacts {
                if let Artifact::Text { contents, .. } = a {
                    print!("{contents}");
                }
            }
        }
    }
    Ok(())
}

fn rate_row(r: &KeyRateReport) -> [String; 3] {
    [num(r.mi), num(r.chi), num(r.rate)]
}

pub fn cmd_keyrate(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let base = cfg.params.physical()?;
    let k = &cfg.keyrate;
    let variants = parse_variants(&k.variants)?;
    let mut points = vec![];
    for &t in &k.theta_deg {
        for &f in &k.phi_deg {
            for &eta in &k.eta {
                for &eps in &k.eps {
                    let p = PhysicalParams { eta, eps, theta: t.to_radians(), phi: f.to_radians(), ..base };
                    p.validate().map_err(|e| CliError::Config(format!("keyrate grid: {e}")))?;
                    points.push((p, t, f));
                }
            }
        }
    }
    let blocks = points
        .par_iter()
        .map(|(p, t, f)| {
            variants
                .iter()
                .map(|&v| {
                    let r = asymptotic_key_rate(p, v)?;
                    let mut row = vec![v.to_string(), num(p.eta), num(p.eps), num(*t), num(*f)];
                    row.extend(rate_row(&r));
                    Ok(row)
                })
                .collect::<Result<Vec<_>, hetqkd::Error>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Vec<String>> = blocks.into_iter().flatten().collect();
    let header = ["variant", "eta", "eps", "theta_deg", "phi_deg", "mi", "chi", "rate"];
    Ok(vec![Artifact::text("keyrate.csv", render("keyrate", &header, &rows))])
}

pub fn cmd_tolerance(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let base = cfg.params.physical()?;
    let t = &cfg.tolerance;
    let variants = parse_variants(&t.variants)?;
    let mut points = vec![];
    for &v in &variants {
        for &th in &t.theta_deg {
            for &eta in &t.eta {
                let p = PhysicalParams { eta, eps: 0.0, theta: th.to_radians(), ..base };
                p.validate().map_err(|e| CliError::Config(format!("tolerance grid: {e}")))?;
                points.push((v, th, p));
            }
        }
    }
    let rows = points
        .par_iter()
        .map(|(v, th, p)| {
            let e = max_tolerable_noise(p, *v)?;
            Ok(vec![v.to_string(), num(*th), num(p.eta), num(e)])
        })
        .collect::<Result<Vec<_>, hetqkd::Error>>()?;
    let header = ["variant", "theta_deg", "eta", "eps_max"];
    Ok(vec![Artifact::text("tolerance.csv", render("tolerance", &header, &rows))])
}

pub fn cmd_finite(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let base = cfg.params.physical()?;
    let f = &cfg.finite;
    let mut links: Vec<(String, f64, f64)> = f
        .distances_km
        .iter()
        .map(|&km| (num(km), km * f.db_per_km, fibre_transmittance(km, f.db_per_km)))
        .collect();
    links.extend(f.loss_db.iter().map(|&db| (String::new(), db, loss_db_to_eta(db))));
    let mut points = vec![];
    for &n in &f.block_sizes {
        let size = f.size_config(n)?;
        for (km, db, eta) in &links {
            let p = PhysicalParams { eta: *eta, ..base };
            p.validate().map_err(|e| CliError::Config(format!("finite sweep: {e}")))?;
            points.push((km.clone(), *db, p, size));
        }
    }
    let blocks = points
        .par_iter()
        .map(|(km, db, p, size)| {
            let split = if f.optimize_fraction {
                optimize_fraction(p, size)?
            } else {
                finite_key_rate_predicted(p, size, FiniteScheme::Split)?
            };
            let shared = finite_key_rate_predicted(p, size, FiniteScheme::Shared)?;
            Ok([(FiniteScheme::Split, split), (FiniteScheme::Shared, shared)].map(|(s, r)| {
                vec![
                    km.clone(),
                    num(*db),
                    num(p.eta),
                    num(size.n_total),
                    s.to_string(),
                    num(r.frac_key.unwrap_or(1.0)),
                    num(r.rate),
                ]
            }))
        })
        .collect::<Result<Vec<_>, hetqkd::Error>>()?;
    let rows: Vec<Vec<String>> = blocks.into_iter().flatten().collect();
    let header = ["distance_km", "loss_db", "eta", "n_total", "scheme", "frac_key", "rate"];
    Ok(vec![Artifact::text("finite.csv", render("finite", &header, &rows))])
}

fn frame_name(k: usize) -> String {
    format!("frame_{k:04}.csv")
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let p = cfg.params.physical()?;
    let s = &cfg.simulate;
    if s.m < 1000 {
        return Err(CliError::Config(format!("simulate: m = {} is below 1000", s.m)));
    }
    let size = cfg.finite.size_config(s.n_total)?;
    let inputs = cfg.estimate.inputs(&p);
    let sim = SimConfig { params: p, m: s.m, frames: s.frames, seed: cfg.seed };

    let per_frame = (0..s.frames)
        .map(|k| -> Result<_, CliError> {
            let frame = generate_frame(&sim, k as u64)?;
            let gamma = empirical_covariance(&frame)?;
            let report = estimate_report(&gamma, s.m as f64, &inputs)?;
            let est = PhysicalParams {
                eta: report.eta_hat,
                eps: report.eps_hat,
                theta: report.theta_hat,
                phi: report.phi_hat,
                eta_bs: report.eta_bs_hat,
                ..p
            };
            let spec = alice_transform_angles(&gamma)?;
            let realigned = apply_transform_gamma(&gamma, &spec)?;
            // MI from the data; Eve's information from the channel model at the
            // point estimates, since a sampled matrix need not be a state
            let model = PhysicalParams { eta: est.eta.min(1.0), eps: est.eps.max(0.0), ..est };
            let asym = |variant: KeyRateVariant, mi: f64| -> Result<KeyRateReport, CliError> {
                let chi = holevo_bound(&model, variant.holevo_mode)?;
                Ok(KeyRateReport { variant, mi, chi, rate: (p.beta * mi - chi).max(0.0), frac_key: None })
            };
            let tt = asym(KeyRateVariant::TT, true_mi(realigned.cov())?)?;
            let it = asym(KeyRateVariant::IT, ignorant_mi(&gamma)?)?;
            let split = optimize_fraction_with(&est, &size, |m| estimate_report(&gamma, m, &inputs))?;
            let shared_report = estimate_report(&gamma, estimation_samples(&size, FiniteScheme::Shared), &inputs)?;
            let shared = finite_key_rate(&est, &shared_report, &size, FiniteScheme::Shared)?;

            let mut rows = vec![];
            for (kind, label, realign, n, r) in [
                ("asymptotic", tt.variant.to_string(), true, None, tt),
                ("asymptotic", it.variant.to_string(), false, None, it),
                ("finite", FiniteScheme::Split.to_string(), true, Some(s.n_total), split),
                ("finite", FiniteScheme::Shared.to_string(), false, Some(s.n_total), shared),
            ] {
                let mut row = vec![k.to_string(), kind.to_string(), label, realign.to_string()];
                row.push(n.map(num).unwrap_or_default());
                row.push(r.frac_key.map(num).unwrap_or_default());
                row.extend(rate_row(&r));
                rows.push(row);
            }
            let mut text = report.to_key_value();
            text.push_str(&format!("transform_theta={}\ntransform_phi={}\n", num(spec.theta_cap), num(spec.phi_cap)));
            Ok((frame, text, rows))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut artifacts = vec![];
    let mut rows = vec![];
    for (k, (frame, text, r)) in per_frame.into_iter().enumerate() {
        if s.write_frames {
            artifacts.push(Artifact::Frame { name: frame_name(k), frame });
        }
        artifacts.push(Artifact::text(format!("estimate_{k:04}.txt"), text));
        rows.extend(r);
    }
    let header = ["frame", "kind", "label", "realigned", "n_total", "frac_key", "mi", "chi", "rate"];
    artifacts.push(Artifact::text("rates.csv", render("rates", &header, &rows)));
    Ok(artifacts)
}

pub fn cmd_estimate(cfg: &RunConfig, files: &[PathBuf]) -> Result<Vec<Artifact>, CliError> {
    if files.is_empty() {
        return Err(CliError::Config("estimate needs at least one frame file".into()));
    }
    let p = cfg.params.physical()?;
    let inputs = cfg.estimate.inputs(&p);
    files
        .iter()
        .map(|path| {
            let frame = read_frame(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let report = estimate_frame(&frame, &inputs)?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
            let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("frame");
            let mut text = format!("# {name}\n");
            text.push_str(&report.to_key_value());
            Ok(Artifact::text(format!("{stem}.estimate.txt"), text))
        })
        .collect()
}
