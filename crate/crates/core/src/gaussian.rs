//! Symmetric matrices, symplectic spectra, bosonic entropies and Schur conditioning.

use nalgebra::{DMatrix, Matrix2, Matrix4, SymmetricEigen};

use crate::error::{Error, Result};

/// Absolute tolerance for physicality checks on symplectic eigenvalues.
pub const PHYS_TOL: f64 = 1e-9;

const SYM_TOL: f64 = 1e-12;

/// Real symmetric matrix of even dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    m: DMatrix<f64>,
}

impl SymMat {
    /// Validates shape, finiteness and symmetry, then stores the exactly symmetrized matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || n != m.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "expected a square matrix, got {}x{}",
                n,
                m.ncols()
            )));
        }
        if !n.is_multiple_of(2) {
            return Err(Error::InvalidMatrix(format!("dimension {n} is odd")));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        let scale = m.amax();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (m[(i, j)] - m[(j, i)]).abs();
                if d > SYM_TOL * scale {
                    return Err(Error::InvalidMatrix(format!(
                        "asymmetric at ({i},{j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self { m: sym })
    }

    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::InvalidMatrix(format!(
                "{} entries for dimension {dim}",
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Entries in row-major order.
    pub fn entries(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n * n).map(|k| self.m[(k / n, k % n)]).collect()
    }

    /// Rows/columns selected by `idx`, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.m[(rows[i], cols[j])])
    }

    /// `S · self · Sᵀ` for a square `S` of matching dimension.
    pub fn congruence(&self, s: &DMatrix<f64>) -> Result<Self> {
        if s.nrows() != self.dim() || s.ncols() != self.dim() {
            return Err(Error::InvalidMatrix(format!(
                "congruence by {}x{} on dimension {}",
                s.nrows(),
                s.ncols(),
                self.dim()
            )));
        }
        Self::new(s * &self.m * s.transpose())
    }

    fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        SymmetricEigen::new(self.m.clone())
    }

    /// Smallest and largest eigenvalue.
    pub fn eigen_range(&self) -> (f64, f64) {
        let e = self.eigen();
        (e.eigenvalues.min(), e.eigenvalues.max())
    }
}

/// Standard symplectic form with 2x2 blocks `[[0,1],[-1,0]]`.
pub fn symplectic_form(dim: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(dim, dim);
    for k in 0..dim / 2 {
        w[(2 * k, 2 * k + 1)] = 1.0;
        w[(2 * k + 1, 2 * k)] = -1.0;
    }
    w
}

/// Symplectic eigenvalues in ascending order, clipped to 1 inside the tolerance.
///
/// The spectrum of `iΩ·cov` equals the singular values of the antisymmetric
/// matrix `√cov·Ω·√cov`, which avoids complex arithmetic.
pub fn symplectic_eigenvalues(cov: &SymMat) -> Result<Vec<f64>> {
    let eig = cov.eigen();
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if !(lmin > SYM_TOL * lmax.max(1.0)) {
        return Err(Error::NotQuantumCovariance(format!(
            "minimum eigenvalue {lmin:e} is not positive"
        )));
    }
    let root_diag = eig.eigenvalues.map(f64::sqrt);
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&root_diag) * eig.eigenvectors.transpose();
    let a = &root * symplectic_form(cov.dim()) * &root;
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    let mut nus = Vec::with_capacity(sv.len() / 2);
    for pair in sv.chunks(2) {
        let nu = 0.5 * (pair[0] + pair[1]);
        if nu < 1.0 - PHYS_TOL {
            return Err(Error::Unphysical { nu });
        }
        nus.push(nu.max(1.0));
    }
    Ok(nus)
}

/// Entropy of a thermal mode with mean photon number `x`, in bits.
pub fn g_entropy(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("g_entropy of {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok((x + 1.0) * (x + 1.0).log2() - x * x.log2())
}

pub fn von_neumann_entropy(cov: &SymMat) -> Result<f64> {
    symplectic_eigenvalues(cov)?
        .into_iter()
        .map(|nu| g_entropy(0.5 * (nu - 1.0)))
        .sum()
}

/// Conditions `cov` on the coordinates in `measured`:
/// `γ_kept − γ_C (γ_meas + R)⁻¹ γ_Cᵀ`, with `R = 0` when `regularizer` is `None`.
pub fn schur_condition(
    cov: &SymMat,
    measured: &[usize],
    regularizer: Option<&SymMat>,
) -> Result<SymMat> {
    let n = cov.dim();
    let mut seen = vec![false; n];
    for &i in measured {
        if i >= n || seen[i] {
            return Err(Error::InvalidMatrix(format!(
                "bad measured index set {measured:?} for dimension {n}"
            )));
        }
        seen[i] = true;
    }
    let kept: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
    if kept.is_empty() || measured.is_empty() {
        return Err(Error::InvalidMatrix(
            "measured block must be a proper non-empty subset".into(),
        ));
    }
    let mut b = cov.submatrix(measured, measured);
    if let Some(r) = regularizer {
        if r.dim() != measured.len() {
            return Err(Error::InvalidMatrix(format!(
                "regularizer dimension {} for a {}-dimensional block",
                r.dim(),
                measured.len()
            )));
        }
        b += r.matrix();
    }
    let b_inv = inverse_symmetric(&b)?;
    let a = cov.submatrix(&kept, &kept);
    let c = cov.submatrix(&kept, measured);
    SymMat::new(a - &c * b_inv * c.transpose())
}

pub(crate) fn inverse_symmetric(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(b.clone());
    let big = eig.eigenvalues.amax();
    let small = eig.eigenvalues.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if !(big > 0.0) || small <= SYM_TOL * big {
        return Err(Error::Singular {
            dim: b.nrows(),
            entries: b.transpose().iter().copied().collect(),
        });
    }
    let inv_diag = eig.eigenvalues.map(|v| 1.0 / v);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&inv_diag) * eig.eigenvectors.transpose())
}

pub const XA: usize = 0;
pub const PA: usize = 1;
pub const XB: usize = 2;
pub const PB: usize = 3;

/// Covariance of `(x_a, p_a, x_B, p_B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMat4 {
    inner: SymMat,
}

impl CovMat4 {
    /// Requires dimension 4, non-negative diagonal and positive semidefiniteness.
    pub fn new(inner: SymMat) -> Result<Self> {
        if inner.dim() != 4 {
            return Err(Error::InvalidMatrix(format!(
                "expected dimension 4, got {}",
                inner.dim()
            )));
        }
        if (0..4).any(|i| inner.get(i, i) < 0.0) {
            return Err(Error::InvalidMatrix("negative variance on the diagonal".into()));
        }
        let (lmin, lmax) = inner.eigen_range();
        if lmin < -PHYS_TOL * lmax.max(1.0) {
            return Err(Error::InvalidMatrix(format!(
                "not positive semidefinite (eigenvalue {lmin:e})"
            )));
        }
        Ok(Self { inner })
    }

    pub(crate) fn unchecked(inner: SymMat) -> Self {
        Self { inner }
    }

    pub fn from_row_slice(entries: &[f64; 16]) -> Result<Self> {
        Self::new(SymMat::from_row_slice(4, entries)?)
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        Self::new(SymMat::new(DMatrix::from_fn(4, 4, |i, j| m[(i, j)]))?)
    }

    pub fn sym(&self) -> &SymMat {
        &self.inner
    }

    pub fn matrix4(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.inner.get(i, j))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn va_x(&self) -> f64 {
        self.get(XA, XA)
    }
    pub fn va_p(&self) -> f64 {
        self.get(PA, PA)
    }
    pub fn vb_x(&self) -> f64 {
        self.get(XB, XB)
    }
    pub fn vb_p(&self) -> f64 {
        self.get(PB, PB)
    }
    pub fn sigma_x(&self) -> f64 {
        self.get(XA, XB)
    }
    pub fn sigma_p(&self) -> f64 {
        self.get(PA, PB)
    }
    pub fn s_ax_bp(&self) -> f64 {
        self.get(XA, PB)
    }
    pub fn s_ap_bx(&self) -> f64 {
        self.get(PA, XB)
    }
    pub fn s_bx_bp(&self) -> f64 {
        self.get(XB, PB)
    }
    pub fn s_ax_ap(&self) -> f64 {
        self.get(XA, PA)
    }

    pub fn gamma_a(&self) -> Matrix2<f64> {
        Matrix2::new(self.va_x(), self.s_ax_ap(), self.s_ax_ap(), self.va_p())
    }

    pub fn gamma_b(&self) -> Matrix2<f64> {
        Matrix2::new(self.vb_x(), self.s_bx_bp(), self.s_bx_bp(), self.vb_p())
    }

    /// Alice rows, Bob columns.
    pub fn gamma_c(&self) -> Matrix2<f64> {
        Matrix2::new(self.sigma_x(), self.s_ax_bp(), self.s_ap_bx(), self.sigma_p())
    }

    /// Assembles a matrix from its blocks.
    pub fn from_blocks(a: &Matrix2<f64>, b: &Matrix2<f64>, c: &Matrix2<f64>) -> Result<Self> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(b);
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(c);
        m.fixed_view_mut::<2, 2>(2, 0).copy_from(&c.transpose());
        Self::from_matrix(&m)
    }

    /// Bob's block conditioned on Alice's classical data.
    pub fn gamma_b_given_a(&self) -> Result<Matrix2<f64>> {
        let s = schur_condition(&self.inner, &[XA, PA], None)?;
        Ok(Matrix2::new(s.get(0, 0), s.get(0, 1), s.get(1, 0), s.get(1, 1)))
    }

    /// Alice's block conditioned on Bob's classical data.
    pub fn gamma_a_given_b(&self) -> Result<Matrix2<f64>> {
        let s = schur_condition(&self.inner, &[XB, PB], None)?;
        Ok(Matrix2::new(s.get(0, 0), s.get(0, 1), s.get(1, 0), s.get(1, 1)))
    }
}
