//! Dense complex-Hermitian kernel: eigendecomposition, rank-one gap,
//! Kronecker/vectorization identities, and the complex-to-real embedding
//! used to feed Hermitian semidefinite programs to a real-symmetric
//! conic solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type ComplexVector = DVector<C64>;
pub type ComplexMatrix = DMatrix<C64>;

/// Hermitian symmetry tolerance for constructors.
pub const HERM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MatError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: max asymmetry {0:.3e}")]
    NotHermitian(f64),
    #[error("non-finite entry at ({0},{1})")]
    NonFinite(usize, usize),
    #[error("matrix is not positive semidefinite: min eigenvalue {0:.3e}")]
    NotPsd(f64),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
}

/// Square complex matrix with enforced Hermitian symmetry.
///
/// The upper triangle is authoritative: construction mirrors it onto the
/// lower triangle so the two halves cannot drift apart.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    mat: ComplexMatrix,
}

impl HermitianMatrix {
    /// Builds from a general matrix, verifying Hermitian symmetry to `HERM_TOL`
    /// relative to the largest entry magnitude.
    pub fn new(mat: ComplexMatrix) -> Result<Self, MatError> {
        if mat.nrows() != mat.ncols() {
            return Err(MatError::NotSquare { rows: mat.nrows(), cols: mat.ncols() });
        }
        let n = mat.nrows();
        let mut scale: f64 = 0.0;
        for v in mat.iter() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(MatError::NonFinite(0, 0));
            }
            scale = scale.max(v.norm());
        }
        let mut asym: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                asym = asym.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
            }
        }
        if asym > HERM_TOL * (1.0 + scale) {
            return Err(MatError::NotHermitian(asym));
        }
        Ok(Self::from_upper(mat))
    }

    /// Mirrors the upper triangle without a symmetry check. Diagonal imaginary
    /// parts are discarded.
    pub fn from_upper(mat: ComplexMatrix) -> Self {
        let n = mat.nrows();
        let mut m = mat;
        for i in 0..n {
            m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                m[(j, i)] = m[(i, j)].conj();
            }
        }
        Self { mat: m }
    }

    /// Symmetrizes (A + A^H)/2. Useful for products that are Hermitian in
    /// exact arithmetic but carry roundoff.
    pub fn hermitize(mat: &ComplexMatrix) -> Result<Self, MatError> {
        if mat.nrows() != mat.ncols() {
            return Err(MatError::NotSquare { rows: mat.nrows(), cols: mat.ncols() });
        }
        let h = (mat + mat.adjoint()).scale(0.5);
        Ok(Self::from_upper(h))
    }

    /// Rank-one lift x x^H.
    pub fn outer(x: &ComplexVector) -> Self {
        Self::from_upper(x * x.adjoint())
    }

    pub fn identity(n: usize) -> Self {
        Self { mat: ComplexMatrix::identity(n, n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { mat: ComplexMatrix::zeros(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self { mat: self.mat.scale(alpha) }
    }

    /// Real part of Tr(self * other); exact for Hermitian arguments where the
    /// trace is real.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        (&self.mat * &other.mat).trace().re
    }
}

/// Eigendecomposition of a Hermitian matrix with deterministic ordering.
#[derive(Debug, Clone)]
pub struct EigH {
    /// Eigenvalues sorted descending.
    pub values: Vec<f64>,
    /// Columns are eigenvectors matching `values`; each rotated so its
    /// largest-magnitude entry is real nonnegative.
    pub vectors: ComplexMatrix,
}

impl EigH {
    pub fn principal_value(&self) -> f64 {
        self.values[0]
    }

    pub fn principal_vector(&self) -> ComplexVector {
        self.vectors.column(0).into_owned()
    }

    /// nuclear norm = sum of |eigenvalue|
    pub fn nuclear_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    /// spectral norm = max |eigenvalue|
    pub fn spectral_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Eigendecomposition A = U diag(lambda) U^H, eigenvalues descending.
pub fn eig_hermitian(a: &HermitianMatrix) -> EigH {
    let n = a.dim();
    let se = a.mat.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[j].partial_cmp(&se.eigenvalues[i]).unwrap());
    let mut values = Vec::with_capacity(n);
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        values.push(se.eigenvalues[idx]);
        let mut v = se.eigenvectors.column(idx).into_owned();
        // deterministic global phase: largest-magnitude entry real nonnegative
        let mut imax = 0;
        let mut best = 0.0;
        for (i, e) in v.iter().enumerate() {
            let m = e.norm();
            if m > best {
                best = m;
                imax = i;
            }
        }
        if best > 0.0 {
            let phase = v[imax] / best;
            for e in v.iter_mut() {
                *e /= phase;
            }
        }
        vectors.set_column(col, &v);
    }
    EigH { values, vectors }
}

/// Nuclear norm minus spectral norm of a PSD matrix; zero iff rank <= 1.
pub fn rank_one_gap(a: &HermitianMatrix) -> Result<f64, MatError> {
    let eig = eig_hermitian(a);
    let tr: f64 = eig.values.iter().sum();
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min < -1e-8 * tr.abs().max(1.0) {
        return Err(MatError::NotPsd(min));
    }
    Ok((eig.nuclear_norm() - eig.spectral_norm()).max(0.0))
}

/// Ratio of the second eigenvalue to the largest, the numerical rank-one
/// witness. Zero for dimension-one matrices.
pub fn rank_one_ratio(eig: &EigH) -> f64 {
    if eig.values.len() < 2 || eig.values[0].abs() == 0.0 {
        return 0.0;
    }
    (eig.values[1] / eig.values[0]).abs()
}

/// Threshold under which a PSD iterate counts as numerically rank-one.
pub const RANK_ONE_RATIO_TOL: f64 = 1e-6;

/// Standard normal via Box-Muller; avoids a distributions crate for one
/// density and keeps draws reproducible across rand versions.
pub fn standard_normal(rng: &mut impl rand::Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Circularly-symmetric complex Gaussian CN(0, 1).
pub fn standard_complex_normal(rng: &mut impl rand::Rng) -> C64 {
    C64::new(standard_normal(rng), standard_normal(rng)) / 2f64.sqrt()
}

/// vec(X): column-major stacking.
pub fn vec_mat(x: &ComplexMatrix) -> ComplexVector {
    let (r, c) = (x.nrows(), x.ncols());
    let mut v = ComplexVector::zeros(r * c);
    for j in 0..c {
        for i in 0..r {
            v[j * r + i] = x[(i, j)];
        }
    }
    v
}

/// Kronecker product A (x) B.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s != C64::new(0.0, 0.0) {
                for p in 0..br {
                    for q in 0..bc {
                        out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                    }
                }
            }
        }
    }
    out
}

/// Evaluates |Tr(A^H B C D) - vec^H(A) (D^T (x) B) vec(C)| as a self-test of
/// the Kronecker/vectorization plumbing behind the robust LMI assembly.
pub fn kron_vec_identity_check(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    c: &ComplexMatrix,
    d: &ComplexMatrix,
) -> Result<f64, MatError> {
    // A: p x q, B: p x r, C: r x s, D: s x q
    if a.nrows() != b.nrows()
        || b.ncols() != c.nrows()
        || c.ncols() != d.nrows()
        || d.ncols() != a.ncols()
    {
        return Err(MatError::DimMismatch(format!(
            "A {}x{}, B {}x{}, C {}x{}, D {}x{}",
            a.nrows(), a.ncols(), b.nrows(), b.ncols(),
            c.nrows(), c.ncols(), d.nrows(), d.ncols()
        )));
    }
    let lhs = (a.adjoint() * b * c * d).trace();
    let rhs = (vec_mat(a).adjoint() * kron(&d.transpose(), b) * vec_mat(c))[(0, 0)];
    Ok((lhs - rhs).norm())
}

/// Real-symmetric embedding [[Re A, -Im A], [Im A, Re A]] of a Hermitian A.
/// PSD status is preserved in both directions; every eigenvalue of A appears
/// twice and the trace doubles.
pub fn embed_hermitian_real(a: &HermitianMatrix) -> DMatrix<f64> {
    let n = a.dim();
    let mut out = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = a.mat[(i, j)];
            out[(i, j)] = v.re;
            out[(i, j + n)] = -v.im;
            out[(i + n, j)] = v.im;
            out[(i + n, j + n)] = v.re;
        }
    }
    out
}

/// Inverse of `embed_hermitian_real` for matrices carrying the embedding
/// structure; averages the redundant blocks.
pub fn unembed_real_hermitian(m: &DMatrix<f64>) -> Result<HermitianMatrix, MatError> {
    if m.nrows() != m.ncols() || m.nrows() % 2 != 0 {
        return Err(MatError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let n = m.nrows() / 2;
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (m[(i, j)] + m[(i + n, j + n)]);
            let im = 0.5 * (m[(i + n, j)] - m[(i, j + n)]);
            out[(i, j)] = C64::new(re, im);
        }
    }
    HermitianMatrix::hermitize(&out)
}
