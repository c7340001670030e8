//! Monte Carlo quadrature frames, sample covariances and frame files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::PhysicalParams;
use crate::error::{Error, Result};
use crate::gaussian::CovMat4;

pub const FRAME_SCHEMA: &str = "# hetqkd-frame v1";
pub const FRAME_HEADER: [&str; 4] = ["x_a", "p_a", "x_b", "p_b"];

/// Normals drawn per sample.
const NORMALS_PER_SAMPLE: usize = 12;
/// Each normal pair consumes two 64-bit words, i.e. four 32-bit stream words.
const WORDS_PER_SAMPLE: u128 = (NORMALS_PER_SAMPLE as u128 / 2) * 4;
const DEFAULT_CHUNK: usize = 1 << 14;

/// Provenance stored next to a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameMeta {
    pub seed: Option<u64>,
    pub frame_idx: Option<u64>,
    pub params: Option<PhysicalParams>,
    /// Whether Bob's columns are in shot-noise units.
    pub snu: bool,
}

/// `m` samples of `(x_a, p_a, x_B, p_B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureFrame {
    pub x_a: Vec<f64>,
    pub p_a: Vec<f64>,
    pub x_b: Vec<f64>,
    pub p_b: Vec<f64>,
    pub meta: FrameMeta,
}

impl QuadratureFrame {
    pub fn from_columns(
        x_a: Vec<f64>,
        p_a: Vec<f64>,
        x_b: Vec<f64>,
        p_b: Vec<f64>,
        meta: FrameMeta,
    ) -> Result<Self> {
        let m = x_a.len();
        if p_a.len() != m || x_b.len() != m || p_b.len() != m {
            return Err(Error::Format(format!(
                "column lengths differ: {} {} {} {}",
                m,
                p_a.len(),
                x_b.len(),
                p_b.len()
            )));
        }
        let frame = Self { x_a, p_a, x_b, p_b, meta };
        if let Some((c, i)) = frame.first_non_finite() {
            return Err(Error::Format(format!("non-finite value in column {c}, row {i}")));
        }
        Ok(frame)
    }

    pub fn len(&self) -> usize {
        self.x_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_a.is_empty()
    }

    pub fn columns(&self) -> [&[f64]; 4] {
        [&self.x_a, &self.p_a, &self.x_b, &self.p_b]
    }

    fn first_non_finite(&self) -> Option<(&'static str, usize)> {
        for (name, col) in FRAME_HEADER.iter().zip(self.columns()) {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Some((name, i));
            }
        }
        None
    }

    /// Frame with rows reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let pick = |c: &[f64]| order.iter().map(|&i| c[i]).collect();
        Self {
            x_a: pick(&self.x_a),
            p_a: pick(&self.p_a),
            x_b: pick(&self.x_b),
            p_b: pick(&self.p_b),
            meta: self.meta.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub params: PhysicalParams,
    /// Samples per frame.
    pub m: usize,
    pub frames: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.m < 1 {
            return Err(Error::InvalidParams("m must be at least 1".into()));
        }
        Ok(())
    }
}

/// Gaussian stream positioned at a given sample of a given frame.
struct SampleStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl SampleStream {
    fn at(seed: u64, frame_idx: u64, sample_idx: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(frame_idx);
        rng.set_word_pos(sample_idx as u128 * WORDS_PER_SAMPLE);
        Self { rng, spare: None }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Box-Muller; every pair costs exactly two 64-bit draws.
    fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let r = (-2.0 * (1.0 - self.uniform()).ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * self.uniform()).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// Coefficients of the receiver model, computed once per frame.
struct Model {
    sd_a: f64,
    sd_n: f64,
    alpha: f64,
    sqrt_eta: f64,
    sqrt_loss: f64,
    sqrt_d: f64,
    sqrt_dloss: f64,
    t: f64,
    r: f64,
    ct: f64,
    st: f64,
    cp: f64,
    sp: f64,
}

impl Model {
    fn new(p: &PhysicalParams) -> Self {
        Self {
            sd_a: p.v_a.sqrt(),
            sd_n: p.eps.sqrt(),
            alpha: p.alpha,
            sqrt_eta: p.eta.sqrt(),
            sqrt_loss: (1.0 - p.eta).sqrt(),
            sqrt_d: p.eta_d.sqrt(),
            sqrt_dloss: (1.0 - p.eta_d).sqrt(),
            t: p.eta_bs.sqrt(),
            r: (1.0 - p.eta_bs).sqrt(),
            ct: p.theta.cos(),
            st: p.theta.sin(),
            cp: p.phi.cos(),
            sp: p.phi.sin(),
        }
    }

    fn sample(&self, s: &mut SampleStream) -> [f64; 4] {
        let xa = self.sd_a * s.normal();
        let pa = self.sd_a * s.normal();
        let (xs, ps) = (s.normal(), s.normal());
        let (xn, pn) = (self.sd_n * s.normal(), self.sd_n * s.normal());
        let (xc, pc) = (s.normal(), s.normal());
        let (xv, pv) = (s.normal(), s.normal());
        let (xd, pd) = (s.normal(), s.normal());

        let x_in = self.sqrt_eta * (xs + self.alpha * xa + xn) + self.sqrt_loss * xc;
        let p_in = self.sqrt_eta * (ps + self.alpha * pa + pn) + self.sqrt_loss * pc;

        let xb = self.sqrt_d
            * (self.t * (self.ct * x_in + self.st * p_in) + self.r * (self.ct * xv + self.st * pv))
            + self.sqrt_dloss * xd;
        let pb = -self.sqrt_d
            * (self.r * (self.cp * p_in + self.sp * x_in) - self.t * (self.cp * pv + self.sp * xv))
            + self.sqrt_dloss * pd;
        [xa, pa, xb, pb]
    }
}

/// Generates frame `frame_idx`; the content depends only on the seed, the
/// frame index and the parameters.
pub fn generate_frame(cfg: &SimConfig, frame_idx: u64) -> Result<QuadratureFrame> {
    generate_frame_chunked(cfg, frame_idx, DEFAULT_CHUNK)
}

/// As [`generate_frame`], with an explicit work-unit size. The output does not
/// depend on `chunk`.
pub fn generate_frame_chunked(cfg: &SimConfig, frame_idx: u64, chunk: usize) -> Result<QuadratureFrame> {
    cfg.validate()?;
    let chunk = chunk.max(1);
    let model = Model::new(&cfg.params);
    let m = cfg.m;
    let mut rows = vec![[0.0f64; 4]; m];
    rows.par_chunks_mut(chunk).enumerate().for_each(|(k, block)| {
        let mut stream = SampleStream::at(cfg.seed, frame_idx, k * chunk);
        for row in block.iter_mut() {
            *row = model.sample(&mut stream);
        }
    });
    let col = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<_>>();
    Ok(QuadratureFrame {
        x_a: col(0),
        p_a: col(1),
        x_b: col(2),
        p_b: col(3),
        meta: FrameMeta {
            seed: Some(cfg.seed),
            frame_idx: Some(frame_idx),
            params: Some(cfg.params),
            snu: true,
        },
    })
}

/// Mean-subtracted sample covariance with divisor `m − 1`.
pub fn empirical_covariance(frame: &QuadratureFrame) -> Result<CovMat4> {
    let m = frame.len();
    if m < 2 {
        return Err(Error::DegenerateFrame(format!("{m} samples")));
    }
    let cols = frame.columns();
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / m as f64).collect();
    let mut acc = [0.0f64; 16];
    for i in 0..4 {
        for j in i..4 {
            let (ci, cj) = (cols[i], cols[j]);
            let s: f64 = ci
                .iter()
                .zip(cj)
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum();
            acc[i * 4 + j] = s / (m - 1) as f64;
            acc[j * 4 + i] = acc[i * 4 + j];
        }
    }
    for (i, name) in FRAME_HEADER.iter().enumerate() {
        if acc[i * 5] < 1e-12 {
            return Err(Error::DegenerateFrame(format!(
                "variance of {name} is {:e}",
                acc[i * 5]
            )));
        }
    }
    CovMat4::from_row_slice(&acc)
}

/// Standard error of each sample-covariance entry for Gaussian data,
/// `√((Γ_ii·Γ_jj + Γ_ij²)/m)`, row-major.
pub fn covariance_standard_errors(gamma: &CovMat4, m: usize) -> [f64; 16] {
    let mut se = [0.0; 16];
    for i in 0..4 {
        for j in 0..4 {
            let g = gamma.get(i, j);
            se[i * 4 + j] = ((gamma.get(i, i) * gamma.get(j, j) + g * g) / m as f64).sqrt();
        }
    }
    se
}

/// Path of the metadata file belonging to a frame file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Writes the frame as CSV plus a JSON sidecar.
pub fn write_frame(path: &Path, frame: &QuadratureFrame) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{FRAME_SCHEMA}")?;
    writeln!(w, "{}", FRAME_HEADER.join(","))?;
    for i in 0..frame.len() {
        writeln!(w, "{},{},{},{}", frame.x_a[i], frame.p_a[i], frame.x_b[i], frame.p_b[i])?;
    }
    w.flush()?;
    let meta = serde_json::to_string_pretty(&frame.meta)?;
    std::fs::write(sidecar_path(path), meta + "\n")?;
    Ok(())
}

/// Reads a frame file; the sidecar is optional.
pub fn read_frame(path: &Path) -> Result<QuadratureFrame> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim_end() != FRAME_SCHEMA {
        return Err(Error::Format(format!(
            "{}: expected schema line {FRAME_SCHEMA:?}, found {:?}",
            path.display(),
            first.trim_end()
        )));
    }
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = csv.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != FRAME_HEADER {
        return Err(Error::Format(format!(
            "{}: expected header {}, found {}",
            path.display(),
            FRAME_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut cols: [Vec<f64>; 4] = Default::default();
    for (row, rec) in csv.records().enumerate() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Format(format!("row {row}: {} columns", rec.len())));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("row {row}: cannot parse {field:?}")))?;
            cols[c].push(v);
        }
    }
    let meta_path = sidecar_path(path);
    let meta = if meta_path.exists() {
        serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?
    } else {
        FrameMeta { seed: None, frame_idx: None, params: None, snu: true }
    };
    let [x_a, p_a, x_b, p_b] = cols;
    QuadratureFrame::from_columns(x_a, p_a, x_b, p_b, meta)
}
