//! Small dense Hermitian helpers shared by the solver and its callers.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::SdpError;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    let mut out = m.clone();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
        }
    }
    out
}

/// Largest entrywise magnitude of `M - M^H`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Real embedding `[[Re M, -Im M], [Im M, Re M]]` of a Hermitian matrix.
pub fn embed_complex(m: &CMat) -> Result<DMatrix<f64>, SdpError> {
    if m.nrows() != m.ncols() {
        return Err(SdpError::Dimension(format!(
            "embed_complex expects a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let defect = hermitian_defect(m);
    if defect > 1e-12 * (1.0 + frobenius(m)) {
        return Err(SdpError::NotHermitian(defect));
    }
    Ok(embed_unchecked(m))
}

pub(crate) fn embed_unchecked(m: &CMat) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`embed_complex`]. Averages the redundant copies, so it also
/// projects an arbitrary real symmetric `2n x 2n` matrix onto the embedded
/// subspace.
pub fn deembed_complex(r: &DMatrix<f64>) -> Result<CMat, SdpError> {
    if r.nrows() != r.ncols() || r.nrows() % 2 != 0 {
        return Err(SdpError::Dimension(format!(
            "deembed_complex expects an even square matrix, got {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    let n = r.nrows() / 2;
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (r[(i, j)] + r[(i + n, j + n)]);
            let im = 0.5 * (r[(i + n, j)] - r[(i, j + n)]);
            out[(i, j)] = c64(re, im);
        }
    }
    Ok(out)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in ascending
/// order. Ties keep the order produced by the underlying solver, which is
/// deterministic for a given input.
pub fn herm_eigen(m: &CMat) -> (DVector<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), CMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Spectral norm of a Hermitian matrix.
pub fn herm_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// PSD test with the tolerance `-tol * (1 + ||M||)`.
pub fn is_psd(m: &CMat, tol: f64) -> bool {
    let (vals, _) = herm_eigen(m);
    let scale = vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    vals.iter().all(|&v| v >= -tol * (1.0 + scale))
}

/// Re Tr(A B) for Hermitian A, B (equivalently Re <A, B>_F).
pub fn herm_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

pub fn to_complex(r: &DMatrix<f64>) -> CMat {
    r.map(|v| c64(v, 0.0))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}
