use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Solves `m x = b` by LU with partial pivoting.
pub fn dense_solve(m: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::dim("dense_solve (square)", m.nrows(), m.ncols()));
    }
    if b.len() != m.nrows() {
        return Err(Error::dim("dense_solve rhs", m.nrows(), b.len()));
    }
    let n = m.nrows();
    let scale = m.amax();
    let lu = m.clone().lu();
    // nalgebra only reports exact zero pivots; treat tiny ones as singular too.
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if n > 0 && !(min_pivot > scale * f64::EPSILON * n as f64) {
        return Err(Error::Singular);
    }
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = lu.solve(&rhs).ok_or(Error::Singular)?;
    Ok(x.as_slice().to_vec())
}

/// Applies the inverse of an SPD matrix to the columns of `rhs` via Cholesky.
pub fn spd_inverse_apply(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m.clone().cholesky().ok_or(Error::Singular)?;
    Ok(chol.solve(rhs))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_diagonal() {
        let x = dense_solve(&DMatrix::identity(2, 2), &[1.0, 1.0]).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = dense_solve(&m, &[2.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_is_error() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(dense_solve(&m, &[1.0, 1.0]), Err(Error::Singular)));
    }

    #[test]
    fn random_residual_self_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = DMatrix::from_fn(12, 12, |r, c| {
            rng.random_range(-1.0..1.0) + if r == c { 6.0 } else { 0.0 }
        });
        let b: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = dense_solve(&m, &b).unwrap();
        let r = &m * nalgebra::DVector::from_column_slice(&x) - nalgebra::DVector::from_column_slice(&b);
        assert!(r.norm() <= 1e-10 * crate::linalg::norm(&b));
    }
}
