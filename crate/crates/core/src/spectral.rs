//! Dense spectral kernels: symmetric eigendecomposition, SVD-based maps,
//! proximal operators, Fantope projection and tensor square unfolding.

use nalgebra::allocator::Allocator;
use nalgebra::{DMatrix, DVector, DefaultAllocator, Dim, Matrix, OMatrix, RawStorage, SymmetricEigen, SVD};

use crate::error::{Error, Result};

const EIG_EPS: f64 = 1e-15;
const MAX_SWEEPS: usize = 10_000;

/// Eigenvalues in descending order with matching orthonormal columns.
/// Each column's first entry with magnitude above `1e-12` is positive.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::shape(format!("expected a square matrix, got {:?}", a.shape())));
    }
    let scale = a.amax().max(1.0);
    let asym = (a - a.transpose()).amax();
    if asym > 1e-8 * scale {
        return Err(Error::invalid(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Flips the sign of `v` so its first non-negligible entry is positive.
pub fn canonical_sign<S>(v: &mut Matrix<f64, nalgebra::Dyn, nalgebra::U1, S>)
where
    S: nalgebra::StorageMut<f64, nalgebra::Dyn, nalgebra::U1>,
{
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

pub fn sym_eig(a: &DMatrix<f64>) -> Result<EigenPairs> {
    check_symmetric(a)?;
    let sym = (a + a.transpose()) * 0.5;
    let n = sym.nrows();
    let eig = SymmetricEigen::try_new(sym, EIG_EPS, MAX_SWEEPS)
        .ok_or_else(|| Error::Numerical("symmetric eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
        canonical_sign(&mut vectors.column_mut(c));
    }
    Ok(EigenPairs { values, vectors })
}

/// First `k` eigenvectors (largest eigenvalues) of symmetric `w`.
pub fn leading_eigvecs(w: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || k > w.nrows() {
        return Err(Error::invalid(format!("k = {k} out of range for dimension {}", w.nrows())));
    }
    let e = sym_eig(w)?;
    Ok(e.vectors.columns(0, k).into_owned())
}

/// Rebuilds `V diag(f(λ)) Vᵀ`, symmetrized.
pub fn spectral_map(e: &EigenPairs, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut scaled = e.vectors.clone();
    for (c, &lam) in e.values.iter().enumerate() {
        scaled.column_mut(c).scale_mut(f(lam));
    }
    let m = scaled * e.vectors.transpose();
    (&m + m.transpose()) * 0.5
}

#[inline]
pub fn soft_threshold_scalar(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Entrywise `sign(x) * max(|x| - t, 0)`: the prox of `t * ||.||_1`.
pub fn soft_threshold<R, C, S>(v: &Matrix<f64, R, C, S>, t: f64) -> OMatrix<f64, R, C>
where
    R: Dim,
    C: Dim,
    S: RawStorage<f64, R, C>,
    DefaultAllocator: Allocator<R, C>,
{
    assert!(t >= 0.0, "threshold must be nonnegative");
    v.map(|x| soft_threshold_scalar(x, t))
}

fn svd(a: &DMatrix<f64>) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    SVD::try_new(a.clone(), true, true, EIG_EPS, MAX_SWEEPS)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))
}

pub fn singular_values(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let mut s = svd(a)?.singular_values;
    s.as_mut_slice().sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

pub fn nuclear_norm(a: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(a)?.sum())
}

pub fn operator_norm(a: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(a)?.iter().copied().fold(0.0, f64::max))
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    let s = singular_values(a)?;
    let top = s.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&v| v > rel_tol * top).count())
}

/// Singular-value soft thresholding `U (Σ - t)_+ Vᵀ`, the prox of
/// `t * ||.||_*`.
pub fn svt(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if t < 0.0 {
        return Err(Error::invalid("threshold must be nonnegative"));
    }
    let mut dec = svd(a)?;
    dec.singular_values
        .iter_mut()
        .for_each(|s| *s = (*s - t).max(0.0));
    dec.recompose().map_err(|e| Error::Numerical(e.to_string()))
}

/// A point of the Fantope `{W : 0 ⪯ W ⪯ I, tr W = k}`.
#[derive(Clone, Debug)]
pub struct FantopeMatrix {
    pub w: DMatrix<f64>,
    pub k: usize,
}

impl FantopeMatrix {
    /// Largest violation of the eigenvalue bounds and the trace constraint.
    pub fn violation(&self) -> Result<(f64, f64)> {
        let e = sym_eig(&self.w)?;
        let lo = e.values.iter().fold(0.0f64, |acc, &l| acc.max(-l));
        let hi = e.values.iter().fold(0.0f64, |acc, &l| acc.max(l - 1.0));
        let trace = (self.w.trace() - self.k as f64).abs();
        Ok((lo.max(hi), trace))
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self.violation(), Ok((eig, tr)) if eig <= 1e-8 && tr <= 1e-6)
    }
}

fn capped_sum(values: &DVector<f64>, theta: f64) -> f64 {
    values.iter().map(|&l| (l - theta).clamp(0.0, 1.0)).sum()
}

/// Frobenius projection of symmetric `a` onto the rank-`k` Fantope.
///
/// Eigenvalues are mapped to `clamp(λ - θ, 0, 1)` with `θ` solving
/// `Σ clamp(λ_i - θ, 0, 1) = k`. When the solution set of `θ` is an interval
/// its midpoint is used; the projection is the same for every `θ` in it.
pub fn fantope_project(a: &DMatrix<f64>, k: usize) -> Result<FantopeMatrix> {
    let d = a.nrows();
    if k == 0 || k > d {
        return Err(Error::invalid(format!("Fantope rank k = {k} must lie in 1..={d}")));
    }
    let e = sym_eig(a)?;
    if k == d {
        return Ok(FantopeMatrix {
            w: DMatrix::identity(d, d),
            k,
        });
    }
    let kf = k as f64;
    let top = e.values[0];
    let bottom = e.values[d - 1] - 1.0;
    let bisect = |pred: &dyn Fn(f64) -> bool| {
        // pred(lo) is false, pred(hi) is true; returns the boundary
        let (mut lo, mut hi) = (bottom, top);
        for _ in 0..2000 {
            if hi - lo <= 1e-12 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if pred(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo, hi)
    };
    // smallest θ with f(θ) <= k, largest θ with f(θ) >= k
    let (_, left) = bisect(&|t| capped_sum(&e.values, t) <= kf);
    let (right, _) = bisect(&|t| capped_sum(&e.values, t) < kf);
    let theta = 0.5 * (left + right.max(left));
    let w = spectral_map(&e, |l| (l - theta).clamp(0.0, 1.0));
    Ok(FantopeMatrix { w, k })
}

/// Cubical fourth-order tensor stored row-major: entry `(j1, j2, j3, j4)`
/// (zero-based) at `((j1 * d + j2) * d + j3) * d + j4`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    d: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(d: usize) -> Self {
        Tensor4 {
            d,
            data: vec![0.0; d.pow(4)],
        }
    }

    pub fn from_vec(d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != d.pow(4) {
            return Err(Error::shape(format!("{} entries for a tensor of side {d}", data.len())));
        }
        Ok(Tensor4 { d, data })
    }

    /// `u ⊗ v ⊗ s ⊗ t`.
    pub fn rank_one(u: &[f64], v: &[f64], s: &[f64], t: &[f64]) -> Result<Self> {
        let d = u.len();
        if v.len() != d || s.len() != d || t.len() != d {
            return Err(Error::shape("rank-one factors must share one length"));
        }
        let mut flat = Vec::with_capacity(d.pow(4));
        for &ua in u {
            for &vb in v {
                for &sc in s {
                    flat.extend(t.iter().map(|&te| ua * vb * sc * te));
                }
            }
        }
        Tensor4::from_vec(d, flat)
    }

    pub fn side(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn index(&self, j1: usize, j2: usize, j3: usize, j4: usize) -> usize {
        ((j1 * self.d + j2) * self.d + j3) * self.d + j4
    }

    pub fn get(&self, j1: usize, j2: usize, j3: usize, j4: usize) -> f64 {
        self.data[self.index(j1, j2, j3, j4)]
    }

    pub fn set(&mut self, j1: usize, j2: usize, j3: usize, j4: usize, v: f64) {
        let i = self.index(j1, j2, j3, j4);
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `<Z, W> = vec(Z)ᵀ vec(W)`.
    pub fn inner(&self, other: &Tensor4) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn add_assign(&mut self, other: &Tensor4, scale: f64) {
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += scale * b);
    }

    pub fn frobenius(&self) -> f64 {
        self.inner(self).sqrt()
    }
}

/// Square unfolding `Mat(Z)`: `Mat(Z)[k1, k2] = Z(j1, j2, j3, j4)` with
/// `k1 = j1 + j2 * d` and `k2 = j3 + j4 * d` (zero-based).
pub fn square_unfold(z: &Tensor4) -> DMatrix<f64> {
    let d = z.d;
    let mut m = DMatrix::zeros(d * d, d * d);
    for j1 in 0..d {
        for j2 in 0..d {
            for j3 in 0..d {
                for j4 in 0..d {
                    m[(j1 + j2 * d, j3 + j4 * d)] = z.get(j1, j2, j3, j4);
                }
            }
        }
    }
    m
}

/// Inverse of [`square_unfold`].
pub fn square_fold(m: &DMatrix<f64>) -> Result<Tensor4> {
    let dd = m.nrows();
    let d = (dd as f64).sqrt().round() as usize;
    if d * d != dd || !m.is_square() {
        return Err(Error::shape(format!("cannot fold a {:?} matrix", m.shape())));
    }
    let mut z = Tensor4::zeros(d);
    for j1 in 0..d {
        for j2 in 0..d {
            for j3 in 0..d {
                for j4 in 0..d {
                    z.set(j1, j2, j3, j4, m[(j1 + j2 * d, j3 + j4 * d)]);
                }
            }
        }
    }
    Ok(z)
}

/// Square unfolding of a row-major tensor slice, returned as the row-major
/// flattening of the `d^2 x d^2` result.
pub fn square_unfold_flat(d: usize, tensor: &[f64]) -> Result<Vec<f64>> {
    if tensor.len() != d.pow(4) {
        return Err(Error::shape(format!("{} entries for a tensor of side {d}", tensor.len())));
    }
    let dd = d * d;
    let mut out = vec![0.0; dd * dd];
    let mut src = 0;
    for j1 in 0..d {
        for j2 in 0..d {
            let k1 = j1 + j2 * d;
            for j3 in 0..d {
                for j4 in 0..d {
                    out[k1 * dd + j3 + j4 * d] = tensor[src];
                    src += 1;
                }
            }
        }
    }
    Ok(out)
}
