//! Dense linear-algebra helpers shared by the spectral and guarantee modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Iteration budget handed to the symmetric QR solver (0 means unbounded in nalgebra).
pub const EIGEN_MAX_ITER: usize = 10_000;

/// Full symmetric eigendecomposition, eigenvalues ascending.
///
/// Each eigenvector is scaled so its largest-magnitude entry is positive,
/// ties broken by the lowest index.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::invalid(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("matrix has non-finite entries"));
    }
    if n == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITER).ok_or_else(|| {
        Error::numerical(format!(
            "symmetric eigensolver did not converge within {EIGEN_MAX_ITER} iterations"
        ))
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).iter().copied().fold(0.0, f64::max)
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// max |XᵀX − I|, entrywise.
pub fn orthonormality_error(x: &DMatrix<f64>) -> f64 {
    let gram = x.transpose() * x;
    let k = gram.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// max |m_ij − m_ji|.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Random N×k matrix with orthonormal columns (QR of a Gaussian matrix).
pub fn random_orthonormal<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> DMatrix<f64> {
    assert!(k <= n, "cannot draw {k} orthonormal columns in dimension {n}");
    let g = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // Make the factorization unique (positive diagonal of R) so the draw is Haar-distributed.
    let mut q = q.columns(0, k).into_owned();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Sum of the diagonal of AᵀBA without forming the product.
pub fn quadratic_trace(b: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let ba = b * a;
    a.iter().zip(ba.iter()).map(|(x, y)| x * y).sum()
}
