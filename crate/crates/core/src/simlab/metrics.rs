use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};
use crate::spectral::singular_values;

/// `1 − |⟨a, b⟩| / (‖a‖ ‖b‖)` with the Frobenius inner product; clamped to `[0, 1]`.
pub fn cosine_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("cosine distance of {:?} and {:?}", a.shape(), b.shape())));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((1.0 - a.dot(b).abs() / (na * nb)).clamp(0.0, 1.0))
}

/// Singular values of `AᵀB`, i.e. the cosines of the principal angles.
fn principal_cosines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("subspace bases {:?} and {:?} differ in shape", a.shape(), b.shape())));
    }
    Ok(singular_values(&(a.transpose() * b))?.iter().map(|s| s.min(1.0)).collect())
}

/// `min_O ‖A − B O‖_F` over orthogonal `O`, for orthonormal `A`, `B`.
/// Equals `√(2k − 2 Σ σ_i(AᵀB))`; evaluated at the Procrustes rotation
/// `O = U Vᵀ` (from `BᵀA = U Σ Vᵀ`) to keep precision near zero.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("subspace bases {:?} and {:?} differ in shape", a.shape(), b.shape())));
    }
    let svd = SVD::try_new(b.transpose() * a, true, true, 1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    Ok((a - b * (u * vt)).norm())
}

/// `1 − Σ σ_i(AᵀB) / k` for orthonormal `d x k` bases. Equals
/// [`cosine_distance`] when `k = 1`.
pub fn subspace_cosine_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let k = a.ncols() as f64;
    let s: f64 = principal_cosines(a, b)?.iter().sum();
    Ok((1.0 - s / k).clamp(0.0, 1.0))
}
