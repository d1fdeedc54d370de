//! Dense complex linear algebra shared by the whole crate.
//!
//! Everything here works on small matrices (dimension ≤ ~50), so the
//! decompositions are Jacobi-type: a one-sided Jacobi SVD and a two-sided
//! Jacobi eigensolver for Hermitian matrices. Jacobi iterations converge
//! unconditionally and deliver singular values with high *relative*
//! accuracy, which the rank diagnostics in this crate depend on (they count
//! singular values against thresholds as small as 1e-10 of the largest).
//!
//! Conventions fixed here and used everywhere:
//! * matrices are row-major;
//! * `vectorize` stacks columns (entry `(i, j)` lands at `i + j*rows`);
//! * spectra and singular values are returned in descending order.

use num_complex::Complex64;
use thiserror::Error;

/// Absolute tolerance for structural checks (hermiticity, traces, norms).
pub const STRUCTURAL_TOL: f64 = 1e-12;
/// Absolute tolerance for derived quantities (pseudoinverse identities, spans).
pub const DERIVED_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid state vector: {0}")]
    InvalidKet(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::Contract("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn add(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        ComplexMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        ComplexMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: Complex64) -> ComplexMatrix {
        let data = self.data.iter().map(|a| a * s).collect();
        ComplexMatrix { rows: self.rows, cols: self.cols, data }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> Complex64 {
        assert_eq!(self.rows, self.cols, "trace of a non-square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in i..self.cols {
                if (self[(i, j)] - self[(j, i)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Column-stacked vectorization: entry `(i, j)` lands at `i + j*rows`.
    pub fn vectorize(&self) -> Vec<Complex64> {
        let mut v = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                v.push(self[(i, j)]);
            }
        }
        v
    }

    /// Inverse of [`ComplexMatrix::vectorize`] for a `rows x cols` target.
    pub fn from_vectorized(rows: usize, cols: usize, v: &[Complex64]) -> Result<Self> {
        if v.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "vectorized length {} does not match {}x{}",
                v.len(),
                rows,
                cols
            )));
        }
        Ok(ComplexMatrix::from_fn(rows, cols, |i, j| v[i + j * rows]))
    }

    /// Hermitian part (A + A†)/2.
    pub fn hermitian_part(&self) -> ComplexMatrix {
        self.add(&self.adjoint()).scale(Complex64::new(0.5, 0.0))
    }

    pub fn real_part(&self) -> RealMatrix {
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.re).collect(),
        }
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dense real matrix, row-major. Outcome statistics and readout weights are real.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn mul(&self, other: &RealMatrix) -> RealMatrix {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = RealMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn transpose(&self) -> RealMatrix {
        RealMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn to_complex(&self) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &RealMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for RealMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RealMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Unit-norm complex state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: Vec<Complex64>,
}

impl Ket {
    /// Accepts a vector that is already unit-norm within [`STRUCTURAL_TOL`].
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > STRUCTURAL_TOL {
            return Err(LinalgError::InvalidKet(format!("norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes the vector; fails on (near-)zero input.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(LinalgError::InvalidKet("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.iter().map(|z| z / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn projector(&self) -> ComplexMatrix {
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |i, j| self.amplitudes[i] * self.amplitudes[j].conj())
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        let mut amplitudes = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        Ket { amplitudes }
    }

    pub fn inner(&self, other: &Ket) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(LinalgError::InvalidDensityMatrix("not square".into()));
        }
        if !matrix.is_hermitian(STRUCTURAL_TOL) {
            return Err(LinalgError::InvalidDensityMatrix("not Hermitian".into()));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STRUCTURAL_TOL || tr.im.abs() > STRUCTURAL_TOL {
            return Err(LinalgError::InvalidDensityMatrix(format!("trace {tr} is not 1")));
        }
        let (eigs, _) = eigh(&matrix)?;
        if let Some(min) = eigs.last() {
            if *min < -STRUCTURAL_TOL {
                return Err(LinalgError::InvalidDensityMatrix(format!(
                    "negative eigenvalue {min}"
                )));
            }
        }
        Ok(Self { matrix })
    }

    pub fn from_ket(ket: &Ket) -> Self {
        Self { matrix: ket.projector() }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn vectorize(&self) -> Vec<Complex64> {
        self.matrix.vectorize()
    }
}

/// Kronecker product with row-major block convention:
/// `out[(i1*rb + i2, j1*cb + j2)] = a[(i1, j1)] * b[(i2, j2)]`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ra, ca, rb, cb) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut out = ComplexMatrix::zeros(ra * rb, ca * cb);
    for i1 in 0..ra {
        for j1 in 0..ca {
            let x = a[(i1, j1)];
            if x == Complex64::new(0.0, 0.0) {
                continue;
            }
            for i2 in 0..rb {
                for j2 in 0..cb {
                    out[(i1 * rb + i2, j1 * cb + j2)] = x * b[(i2, j2)];
                }
            }
        }
    }
    out
}

/// Eigenvectors of the 2x2 Hermitian block [[alpha, gamma], [conj(gamma), beta]],
/// returned as a unitary whose columns are the eigenvectors (any eigenvalue order).
fn hermitian_2x2_rotation(alpha: f64, beta: f64, gamma: Complex64) -> [[Complex64; 2]; 2] {
    let half_diff = 0.5 * (alpha - beta);
    let radius = (half_diff * half_diff + gamma.norm_sqr()).sqrt();
    // Eigenvector for lambda_plus is (gamma, lambda_plus - alpha); its orthogonal
    // complement is (-(lambda_plus - alpha), conj(gamma)). The difference
    // lambda_plus - alpha cancels catastrophically when alpha > beta and gamma is
    // small, which would inflate the rotation angle by eps/|gamma| and make the
    // sweep diverge; rewrite it as |gamma|^2 / (radius + half_diff) in that case.
    let second = if half_diff >= 0.0 {
        let denom = radius + half_diff;
        if denom > 0.0 {
            gamma.norm_sqr() / denom
        } else {
            0.0
        }
    } else {
        radius - half_diff
    };
    let norm = (gamma.norm_sqr() + second * second).sqrt();
    if norm < 1e-300 {
        return [
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        ];
    }
    let v0 = gamma / norm;
    let v1 = Complex64::new(second / norm, 0.0);
    [[v0, -v1], [v1, v0.conj()]]
}

/// Singular value decomposition `m = u * diag(s) * v_adjoint`.
///
/// `u` is `rows x k` and `v_adjoint` is `k x cols` with `k = min(rows, cols)`;
/// columns of `u` associated with zero singular values are zero vectors.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v_adjoint: ComplexMatrix,
}

/// One-sided Jacobi SVD. Deterministic; singular values descending.
pub fn svd(m: &ComplexMatrix) -> Result<Svd> {
    if m.rows() < m.cols() {
        let t = svd(&m.adjoint())?;
        return Ok(Svd {
            u: t.v_adjoint.adjoint(),
            singular_values: t.singular_values,
            v_adjoint: t.u.adjoint(),
        });
    }
    let rows = m.rows();
    let n = m.cols();
    // Column-major working copy of m; rotations act on columns.
    let mut w: Vec<Vec<Complex64>> = (0..n).map(|j| (0..rows).map(|i| m[(i, j)]).collect()).collect();
    let mut v = ComplexMatrix::identity(n);

    let tol = 1e-15;
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = Complex64::new(0.0, 0.0);
                for i in 0..rows {
                    alpha += w[p][i].norm_sqr();
                    beta += w[q][i].norm_sqr();
                    gamma += w[p][i].conj() * w[q][i];
                }
                if gamma.norm() <= tol * (alpha * beta).sqrt() || gamma.norm() == 0.0 {
                    continue;
                }
                rotated = true;
                let j = hermitian_2x2_rotation(alpha, beta, gamma);
                for i in 0..rows {
                    let wp = w[p][i];
                    let wq = w[q][i];
                    w[p][i] = wp * j[0][0] + wq * j[1][0];
                    w[q][i] = wp * j[0][1] + wq * j[1][1];
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = vp * j[0][0] + vq * j[1][0];
                    v[(i, q)] = vp * j[0][1] + vq * j[1][1];
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = w.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal));

    let mut u = ComplexMatrix::zeros(rows, n);
    let mut v_sorted = ComplexMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (slot, &j) in order.iter().enumerate() {
        let s = norms[j];
        singular_values.push(s);
        if s > 0.0 {
            for i in 0..rows {
                u[(i, slot)] = w[j][i] / s;
            }
        }
        for i in 0..n {
            v_sorted[(i, slot)] = v[(i, j)];
        }
    }

    Ok(Svd { u, singular_values, v_adjoint: v_sorted.adjoint() })
}

/// Singular values in descending order; length `min(rows, cols)`, zeros included.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    svd(m).expect("Jacobi SVD cannot fail on finite input").singular_values
}

/// Number of singular values above `tol * sigma_max`. `tol` must be positive.
pub fn numerical_rank(m: &ComplexMatrix, tol: f64) -> Result<usize> {
    if tol <= 0.0 {
        return Err(LinalgError::Contract("numerical_rank requires tol > 0".into()));
    }
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > tol * smax).count())
}

/// Moore-Penrose pseudoinverse; singular values below `rcond * sigma_max`
/// are treated as zero. `rcond` must be positive.
pub fn pseudoinverse(m: &ComplexMatrix, rcond: f64) -> Result<ComplexMatrix> {
    if rcond <= 0.0 {
        return Err(LinalgError::Contract("pseudoinverse requires rcond > 0".into()));
    }
    let Svd { u, singular_values, v_adjoint } = svd(m)?;
    let smax = singular_values.first().copied().unwrap_or(0.0);
    let cut = rcond * smax;
    let k = singular_values.len();
    // pinv = V * diag(1/s) * U^dagger
    let v = v_adjoint.adjoint();
    let mut scaled = ComplexMatrix::zeros(m.cols(), k);
    for j in 0..k {
        if singular_values[j] > cut && singular_values[j] > 0.0 {
            let inv = 1.0 / singular_values[j];
            for i in 0..m.cols() {
                scaled[(i, j)] = v[(i, j)] * inv;
            }
        }
    }
    Ok(scaled.mul(&u.adjoint()))
}

/// Pseudoinverse of a real matrix (computed through the complex path).
pub fn pseudoinverse_real(m: &RealMatrix, rcond: f64) -> Result<RealMatrix> {
    Ok(pseudoinverse(&m.to_complex(), rcond)?.real_part())
}

pub fn singular_values_real(m: &RealMatrix) -> Vec<f64> {
    singular_values(&m.to_complex())
}

/// Hermitian eigendecomposition via two-sided Jacobi.
///
/// Returns eigenvalues in descending order and the unitary of eigenvectors
/// (column `k` belongs to eigenvalue `k`). Fails if the input is not
/// Hermitian within [`STRUCTURAL_TOL`] scaled by the matrix magnitude.
pub fn eigh(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = m.rows();
    if n != m.cols() {
        return Err(LinalgError::DimensionMismatch("eigh requires a square matrix".into()));
    }
    let scale = m.max_abs().max(1.0);
    if !m.is_hermitian(STRUCTURAL_TOL * scale * 10.0) {
        return Err(LinalgError::Contract("eigh requires a Hermitian matrix".into()));
    }
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let tol = 1e-15 * scale;
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let gamma = a[(p, q)];
                if gamma.norm() <= tol * 1e-2 {
                    continue;
                }
                let j = hermitian_2x2_rotation(a[(p, p)].re, a[(q, q)].re, gamma);
                // A <- J^dagger A J on rows/cols (p, q)
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * j[0][0] + aiq * j[1][0];
                    a[(i, q)] = aip * j[0][1] + aiq * j[1][1];
                }
                for i in 0..n {
                    let api = a[(p, i)];
                    let aqi = a[(q, i)];
                    a[(p, i)] = j[0][0].conj() * api + j[1][0].conj() * aqi;
                    a[(q, i)] = j[0][1].conj() * api + j[1][1].conj() * aqi;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * j[0][0] + viq * j[1][0];
                    v[(i, q)] = vip * j[0][1] + viq * j[1][1];
                }
            }
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (a[(i, i)].re, i)).collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues: Vec<f64> = pairs.iter().map(|(l, _)| *l).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (slot, &(_, src)) in pairs.iter().enumerate() {
        for i in 0..n {
            vectors[(i, slot)] = v[(i, src)];
        }
    }
    Ok((eigenvalues, vectors))
}

/// Tr(obs * rho) for a Hermitian observable; the imaginary residue is checked
/// against [`DERIVED_TOL`] and discarded.
pub fn expectation_value(obs: &ComplexMatrix, rho: &DensityMatrix) -> Result<f64> {
    if !obs.is_hermitian(STRUCTURAL_TOL * obs.max_abs().max(1.0)) {
        return Err(LinalgError::Contract("expectation_value requires a Hermitian observable".into()));
    }
    if obs.rows() != rho.dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "observable dim {} vs state dim {}",
            obs.rows(),
            rho.dim()
        )));
    }
    let mut tr = Complex64::new(0.0, 0.0);
    let m = rho.matrix();
    for i in 0..obs.rows() {
        for j in 0..obs.cols() {
            tr += obs[(i, j)] * m[(j, i)];
        }
    }
    if tr.im.abs() > DERIVED_TOL {
        return Err(LinalgError::Numerical(format!(
            "expectation value has imaginary residue {}",
            tr.im
        )));
    }
    Ok(tr.re)
}
