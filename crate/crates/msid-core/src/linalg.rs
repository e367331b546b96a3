//! Small dense linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative singular-value threshold below which values are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Promotes a real matrix to complex entries.
pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Applies `(A ⊗ I_b)` to `x`, where `x` has `A.ncols() * b` rows.
///
/// `x` is interpreted as a stack of `A.ncols()` row-blocks of height `b`;
/// output block `j` is `Σ_r A[j, r] * x_block_r`.
pub fn kron_identity_apply(
    a: &DMatrix<Complex64>,
    x: &DMatrix<Complex64>,
    b: usize,
) -> DMatrix<Complex64> {
    assert_eq!(x.nrows(), a.ncols() * b, "block count mismatch");
    let mut out = DMatrix::zeros(a.nrows() * b, x.ncols());
    for j in 0..a.nrows() {
        for r in 0..a.ncols() {
            let w = a[(j, r)];
            if w == Complex64::ZERO {
                continue;
            }
            let src = x.rows(r * b, b);
            let mut dst = out.rows_mut(j * b, b);
            dst += src * w;
        }
    }
    out
}

/// Solves `(A ⊗ I_b) x = y` for square `A` through one LU factorization.
///
/// `y` is a stack of `A.nrows()` row-blocks of height `b`; the equation
/// decouples per scalar position inside a block, so it reduces to a
/// multi-right-hand-side solve with `A`.
pub fn kron_identity_solve(
    a: &DMatrix<Complex64>,
    y: &DMatrix<Complex64>,
    b: usize,
    what: &str,
) -> Result<DMatrix<Complex64>> {
    let l = a.nrows();
    assert_eq!(a.ncols(), l, "square factor required");
    assert_eq!(y.nrows(), l * b, "block count mismatch");
    let c = y.ncols();
    let mut packed = DMatrix::zeros(l, b * c);
    for j in 0..l {
        for p in 0..b {
            for q in 0..c {
                packed[(j, p * c + q)] = y[(j * b + p, q)];
            }
        }
    }
    let solved = a
        .clone()
        .lu()
        .solve(&packed)
        .ok_or_else(|| Error::Singular(what.to_string()))?;
    let mut out = DMatrix::zeros(l * b, c);
    for r in 0..l {
        for p in 0..b {
            for q in 0..c {
                out[(r * b + p, q)] = solved[(r, p * c + q)];
            }
        }
    }
    Ok(out)
}

/// Stacks real and imaginary parts vertically: `[Re(a); Im(a)]`.
pub fn real_stack(a: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let mut out = DMatrix::zeros(2 * r, c);
    for j in 0..c {
        for i in 0..r {
            out[(i, j)] = a[(i, j)].re;
            out[(r + i, j)] = a[(i, j)].im;
        }
    }
    out
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<Complex64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

/// Smallest singular value.
pub fn min_singular_value(a: &DMatrix<Complex64>) -> f64 {
    a.clone().svd(false, false).singular_values.min()
}

/// Ratio of largest to smallest singular value (infinite when rank deficient).
pub fn condition_number(a: &DMatrix<Complex64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Numerical rank at relative tolerance `rel_tol`.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let cutoff = rel_tol * sv.max();
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Minimum-norm least-squares solution of `a x = b` through the SVD, treating
/// singular values below `rel_tol * σ_max` as zero.
pub fn lstsq_min_norm(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    rel_tol: f64,
) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    let cutoff = rel_tol * svd.singular_values.max();
    svd.solve(b, cutoff)
        .map_err(|e| Error::Singular(e.to_string()))
}

/// Orthonormal basis of the null space of `a`, with the rank decided at
/// relative tolerance `rel_tol` on the singular values of `a`.
///
/// The basis is read off the eigenvectors of `aᵀa` belonging to its smallest
/// eigenvalues, which form an orthonormal set.
pub fn nullspace(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let cols = a.ncols();
    let rk = rank(a, rel_tol);
    let dim = cols - rk;
    if dim == 0 {
        return DMatrix::zeros(cols, 0);
    }
    let gram = a.transpose() * a;
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut basis = DMatrix::zeros(cols, dim);
    for (k, &idx) in order.iter().take(dim).enumerate() {
        basis.set_column(k, &eig.eigenvectors.column(idx));
    }
    basis
}

/// Moore-Penrose pseudoinverse with singular values below `rel_tol * σ_max`
/// treated as zero.
pub fn pinv(a: &DMatrix<Complex64>, rel_tol: f64) -> Result<DMatrix<Complex64>> {
    let svd = a.clone().svd(true, true);
    let cutoff = rel_tol * svd.singular_values.max();
    svd.pseudo_inverse(cutoff)
        .map_err(|e| Error::Singular(e.to_string()))
}

/// Hermitian positive-definite solve `a x = b`; falls back with an error when
/// the Cholesky factorization fails.
pub fn hpd_solve(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    what: &str,
) -> Result<DMatrix<Complex64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))?;
    Ok(chol.solve(b))
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn hpd_inverse(a: &DMatrix<Complex64>, what: &str) -> Result<DMatrix<Complex64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))?;
    Ok(chol.inverse())
}

/// Hermitian square root `a^{1/2}` through the eigendecomposition.
pub fn hermitian_sqrt(a: &DMatrix<Complex64>, what: &str) -> Result<DMatrix<Complex64>> {
    let eig = a.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < 0.0) {
        return Err(Error::NotPositiveDefinite(what.to_string()));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(l.sqrt(), 0.0)));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

/// Largest eigenvalue of a real symmetric matrix.
pub fn sym_eig_max(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.max()
}

/// Smallest eigenvalue of a complex Hermitian matrix.
pub fn herm_eig_min(a: &DMatrix<Complex64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.min()
}

/// Column-major vectorization.
pub fn vec_of(a: &DMatrix<Complex64>) -> DVector<Complex64> {
    DVector::from_column_slice(a.as_slice())
}

/// Maximum absolute imaginary part.
pub fn max_imag(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

/// Drops imaginary parts after checking the residue stays below
/// `threshold * max(1, max|entry|)`.
pub fn real_part_checked(a: &DMatrix<Complex64>, threshold: f64) -> Result<DMatrix<f64>> {
    let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let residue = max_imag(a);
    if residue > threshold * scale {
        return Err(Error::ImaginaryResidue {
            residue,
            threshold: threshold * scale,
        });
    }
    Ok(a.map(|z| z.re))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kron_identity_apply_matches_dense_kronecker() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]).map(|x| Complex64::new(x, 0.5));
        let x = DMatrix::from_fn(6, 2, |i, j| Complex64::new(i as f64, j as f64));
        let eye = DMatrix::<Complex64>::identity(3, 3);
        let dense = a.kronecker(&eye) * &x;
        let fast = kron_identity_apply(&a, &x, 3);
        assert_relative_eq!((dense - fast).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn nullspace_of_wide_matrix() {
        // Rows span a 2-dimensional subspace of R^3.
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, -1.0]);
        let k = nullspace(&a, RANK_TOL);
        assert_eq!(k.ncols(), 1);
        assert_relative_eq!((&a * &k).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(k.column(0).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_one_spectral_norm() {
        // ||u v^H|| = ||u|| ||v||
        let u = DVector::from_vec(vec![
            Complex64::new(1.0, 2.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(3.0, 0.0),
        ]);
        let v = DVector::from_vec(vec![Complex64::new(2.0, 1.0), Complex64::new(-1.0, 1.0)]);
        let m = &u * v.adjoint();
        assert_relative_eq!(spectral_norm(&m), u.norm() * v.norm(), epsilon = 1e-12);
    }

    #[test]
    fn hermitian_sqrt_squares_back() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.0]);
        let a = to_complex(&(b.transpose() * &b));
        let s = hermitian_sqrt(&a, "test").unwrap();
        assert_relative_eq!((&s * &s - &a).norm(), 0.0, epsilon = 1e-10);
    }
}
