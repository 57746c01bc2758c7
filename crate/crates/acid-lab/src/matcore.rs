//! Dense complex matrix kernel: Hermitian eigendecomposition, singular values,
//! Schatten norms, partial trace, fidelity, and von Neumann entropy.
//!
//! Everything here operates on small dense matrices (dimensions up to a few
//! dozen) stored in row-major order. The eigensolver is a cyclic Jacobi
//! iteration for Hermitian matrices; singular values are obtained by
//! diagonalizing `M† M`, with a 1e-12 floor on eigenvalues before square
//! roots and logarithms so that rank-deficient inputs stay numerically sane.

use num_complex::Complex64;
use thiserror::Error;

/// Eigenvalue floor applied before `sqrt`/`log` in spectral functions.
pub const EIG_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MatError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("sample budget exhausted: {0}")]
    Budget(String),
}

pub type Result<T> = std::result::Result<T, MatError>;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self {
            rows,
            cols,
            entries,
        }
    }

    /// Builds a matrix from a nested array of `(re, im)` pairs.
    pub fn from_rows(rows: &[Vec<(f64, f64)>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(MatError::InvalidInput("ragged rows".into()));
        }
        let entries = rows
            .iter()
            .flat_map(|row| row.iter().map(|&(re, im)| Complex64::new(re, im)))
            .collect();
        Ok(Self {
            rows: r,
            cols: c,
            entries,
        })
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "add: shape mismatch"
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "sub: shape mismatch"
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul: inner dims");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matvec: dims");
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

    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i1 in 0..self.rows {
            for j1 in 0..self.cols {
                let a = self[(i1, j1)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for i2 in 0..other.rows {
                    for j2 in 0..other.cols {
                        out[(i1 * other.rows + i2, j1 * other.cols + j2)] = a * other[(i2, j2)];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square(), "trace: square only");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius norm, `sqrt(tr(M† M))`.
    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Entrywise max absolute value.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `tr(self · other)`.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    /// Hermiticity defect `‖M − M†‖_max`.
    pub fn herm_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// `(M + M†)/2`.
    pub fn symmetrize(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    /// Outer product `|u⟩⟨v|`.
    pub fn outer(u: &[Complex64], v: &[Complex64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.cols + j]
    }
}

/// Hermitian matrix; symmetrized on construction.
#[derive(Debug, Clone)]
pub struct HermMatrix {
    mat: CMatrix,
}

impl HermMatrix {
    /// Symmetrizes the input and rejects matrices that are far from Hermitian
    /// (defect above `1e-12` relative to the largest entry).
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(MatError::InvalidInput("HermMatrix: not square".into()));
        }
        if !m.is_finite() {
            return Err(MatError::InvalidInput(
                "HermMatrix: non-finite entries".into(),
            ));
        }
        let scale = m.max_abs().max(1.0);
        if m.herm_defect() > 1e-12 * scale {
            return Err(MatError::InvalidInput(format!(
                "HermMatrix: defect {} exceeds 1e-12 relative",
                m.herm_defect() / scale
            )));
        }
        Ok(Self {
            mat: m.symmetrize(),
        })
    }

    /// Symmetrizes without the defect check, for matrices that are Hermitian
    /// by construction up to round-off.
    pub fn symmetrized(m: CMatrix) -> Self {
        assert!(m.is_square());
        Self {
            mat: m.symmetrize(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn eigh(&self) -> EigH {
        eigh(&self.mat)
    }
}

/// Eigendecomposition of a Hermitian matrix: `A = V diag(λ) V†`.
#[derive(Debug, Clone)]
pub struct EigH {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Column `k` of `vectors` is the eigenvector for `values[k]`.
    pub vectors: CMatrix,
}

impl EigH {
    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        (0..self.vectors.rows)
            .map(|i| self.vectors[(i, k)])
            .collect()
    }

    /// Reassembles `V f(diag) V†` for a scalar function of the eigenvalues.
    pub fn apply_spectral(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut out = CMatrix::zeros(n, n);
        for k in 0..n {
            let fv = f(self.values[k]);
            if fv == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors[(i, k)];
                if vik.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vik * self.vectors[(j, k)].conj() * fv;
                }
            }
        }
        out
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// The input is symmetrized first; callers guarantee Hermiticity up to
/// round-off. Converges to off-diagonal mass below `1e-14 · ‖A‖_F`.
pub fn eigh(a: &CMatrix) -> EigH {
    assert!(a.is_square(), "eigh: square only");
    let n = a.rows;
    let mut m = a.symmetrize();
    let mut v = CMatrix::identity(n);
    if n == 0 {
        return EigH {
            values: vec![],
            vectors: v,
        };
    }
    let scale = m.frobenius_norm().max(1e-300);
    let tol = 1e-14 * scale;

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.norm() <= 1e-300 {
                    continue;
                }
                // Unitary plane rotation G = P·R zeroing the (p,q) element:
                // P = diag(1, e^{-iθ}) strips the phase of a_pq = |a_pq|e^{iθ},
                // then R is the real Jacobi rotation for the resulting real
                // symmetric 2x2 block. The update is A ← G† A G, V ← V G.
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let abs = apq.norm();
                let phase = apq / abs;
                let tau = (aqq - app) / (2.0 * abs);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let e_minus = phase.conj();
                let e_plus = phase;
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = mip * c - miq * e_minus * s;
                    m[(i, q)] = mip * s + miq * e_minus * c;
                }
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = mpj * c - mqj * e_plus * s;
                    m[(q, j)] = mpj * s + mqj * e_plus * c;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c - viq * e_minus * s;
                    v[(i, q)] = vip * s + viq * e_minus * c;
                }
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    EigH { values, vectors }
}

/// Singular values of an arbitrary matrix, descending, via `eigh(M† M)`.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let gram = m.conj_transpose().matmul(m);
    let mut sv: Vec<f64> = eigh(&gram)
        .values
        .iter()
        .map(|&l| if l < EIG_FLOOR { 0.0 } else { l.sqrt() })
        .collect();
    sv.reverse();
    sv
}

/// Thin SVD `M = Σ s_k |u_k⟩⟨v_k|` keeping singular values above `tol`.
///
/// Right vectors come from `eigh(M† M)`; left vectors are `M v_k / s_k`.
pub fn svd_thin(m: &CMatrix, tol: f64) -> Vec<(f64, Vec<Complex64>, Vec<Complex64>)> {
    let gram = m.conj_transpose().matmul(m);
    let eig = eigh(&gram);
    let mut out = Vec::new();
    for k in (0..eig.values.len()).rev() {
        let l = eig.values[k];
        if l <= tol.max(EIG_FLOOR) {
            continue;
        }
        let s = l.sqrt();
        let vk = eig.eigenvector(k);
        let mut uk = m.matvec(&vk);
        for z in &mut uk {
            *z /= s;
        }
        out.push((s, uk, vk));
    }
    out
}

/// Schatten p-norm for p ∈ {1, 2, ∞}.
pub fn schatten_norm(m: &CMatrix, p: SchattenP) -> Result<f64> {
    if !m.is_finite() {
        return Err(MatError::InvalidInput(
            "schatten_norm: non-finite entries".into(),
        ));
    }
    Ok(match p {
        SchattenP::Two => m.frobenius_norm(),
        SchattenP::One => {
            // Hermitian fast path: trace norm is the sum of |eigenvalues|.
            if m.is_square() && m.herm_defect() <= 1e-12 * m.max_abs().max(1.0) {
                eigh(m).values.iter().map(|l| l.abs()).sum()
            } else {
                singular_values(m).iter().sum()
            }
        }
        SchattenP::Inf => {
            if m.is_square() && m.herm_defect() <= 1e-12 * m.max_abs().max(1.0) {
                eigh(m).values.iter().map(|l| l.abs()).fold(0.0, f64::max)
            } else {
                singular_values(m).first().copied().unwrap_or(0.0)
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchattenP {
    One,
    Two,
    Inf,
}

/// Trace norm `‖M‖₁`.
pub fn trace_norm(m: &CMatrix) -> f64 {
    schatten_norm(m, SchattenP::One).expect("finite input")
}

/// Which factor of a bipartite system to keep in a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

/// Partial trace of a square matrix on `C^{dA} ⊗ C^{dB}`.
pub fn partial_trace(m: &CMatrix, keep: Keep, d_a: usize, d_b: usize) -> Result<CMatrix> {
    if !m.is_square() || m.rows != d_a * d_b {
        return Err(MatError::DimMismatch(format!(
            "partial_trace: matrix side {} != {}·{}",
            m.rows, d_a, d_b
        )));
    }
    let out = match keep {
        Keep::First => CMatrix::from_fn(d_a, d_a, |i, j| {
            (0..d_b).map(|k| m[(i * d_b + k, j * d_b + k)]).sum()
        }),
        Keep::Second => CMatrix::from_fn(d_b, d_b, |i, j| {
            (0..d_a).map(|k| m[(k * d_b + i, k * d_b + j)]).sum()
        }),
    };
    Ok(out)
}

/// PSD square root via spectral decomposition, flooring eigenvalues at 0.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    eigh(m).apply_spectral(|l| if l > EIG_FLOOR { l.sqrt() } else { 0.0 })
}

/// Square fidelity `F(ρ, σ) = ‖√ρ √σ‖₁²` of two density matrices.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.rows != sigma.rows || !rho.is_square() || !sigma.is_square() {
        return Err(MatError::DimMismatch("fidelity: dims".into()));
    }
    for m in [rho, sigma] {
        let eig = eigh(m);
        if eig.values.first().copied().unwrap_or(0.0) < -1e-9 {
            return Err(MatError::InvalidInput(format!(
                "fidelity: input not PSD (min eigenvalue {})",
                eig.values[0]
            )));
        }
    }
    let prod = psd_sqrt(rho).matmul(&psd_sqrt(sigma));
    let tn: f64 = singular_values(&prod).iter().sum();
    Ok((tn * tn).clamp(0.0, 1.0 + 1e-9).min(1.0))
}

/// Von Neumann entropy in bits, eigenvalues clipped at 0 before the log.
pub fn vn_entropy(rho: &CMatrix) -> f64 {
    eigh(rho)
        .values
        .iter()
        .map(|&l| if l > EIG_FLOOR { -l * l.log2() } else { 0.0 })
        .sum()
}

/// Conditional entropy `S(A|B) = S(AB) − S(B)` of a state on `C^{dA} ⊗ C^{dB}`.
pub fn cond_entropy(rho: &CMatrix, d_a: usize, d_b: usize) -> Result<f64> {
    let rho_b = partial_trace(rho, Keep::Second, d_a, d_b)?;
    Ok(vn_entropy(rho) - vn_entropy(&rho_b))
}
