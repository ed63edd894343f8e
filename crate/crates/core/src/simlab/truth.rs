use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::CovariateShape;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::spectral::{square_unfold, Tensor4};

/// Ground-truth parameter of a simulated index model.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub shape: CovariateShape,
    /// Entries aligned with dataset rows, so `⟨X, β*⟩ = Σ_j x_j · flat_j`.
    pub flat: Vec<f64>,
    /// `s*` for sparse vectors, `r*` for matrices and tensors.
    pub level: usize,
    /// Sorted support (vector case only).
    pub support: Vec<usize>,
}

impl GroundTruth {
    /// `d x 1` column, `d1 x d2` matrix, or the `d² x d²` square unfolding.
    pub fn as_matrix(&self) -> DMatrix<f64> {
        match self.shape {
            CovariateShape::Vector(d) => DMatrix::from_column_slice(d, 1, &self.flat),
            CovariateShape::Matrix(d1, d2) => DMatrix::from_row_slice(d1, d2, &self.flat),
            CovariateShape::Tensor4(d) => {
                square_unfold(&Tensor4::from_vec(d, self.flat.clone()).expect("tensor truth has d⁴ entries"))
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.flat.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn rademacher<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Orthonormal `d x k` basis of a random Gaussian subspace.
fn random_orthonormal<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, d, k).qr().q()
}

/// Uniform-random support of size `s_star` with entries `±1/√s*`.
pub fn gen_sparse_beta(d: usize, s_star: usize, seed: u64) -> Result<GroundTruth> {
    if s_star == 0 || s_star > d {
        return Err(Error::invalid(format!("need 1 <= s* <= d, got s* = {s_star}, d = {d}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut support = sample(&mut rng, d, s_star).into_vec();
    support.sort_unstable();
    let mut flat = vec![0.0; d];
    let scale = 1.0 / (s_star as f64).sqrt();
    for &j in &support {
        flat[j] = scale * rademacher(&mut rng);
    }
    Ok(GroundTruth {
        shape: CovariateShape::Vector(d),
        flat,
        level: s_star,
        support,
    })
}

/// `U S Vᵀ` with random orthonormal `U`, `V` and `S = I_r/√r`.
pub fn gen_lowrank_beta(d1: usize, d2: usize, r_star: usize, seed: u64) -> Result<GroundTruth> {
    if r_star == 0 || r_star > d1.min(d2) {
        return Err(Error::invalid(format!("need 1 <= r* <= min(d1, d2), got r* = {r_star}")));
    }
    let mut rng = rng_from_seed(seed);
    let u = random_orthonormal(&mut rng, d1, r_star);
    let v = random_orthonormal(&mut rng, d2, r_star);
    let beta = (u * v.transpose()) / (r_star as f64).sqrt();
    let mut flat = Vec::with_capacity(d1 * d2);
    for i in 0..d1 {
        flat.extend(beta.row(i).iter());
    }
    Ok(GroundTruth {
        shape: CovariateShape::Matrix(d1, d2),
        flat,
        level: r_star,
        support: Vec::new(),
    })
}

/// Sum of `r_star` symmetric rank-one tensors `u⊗u⊗u⊗u` with Gaussian `u`,
/// scaled to unit Frobenius norm.
pub fn gen_cp_tensor_beta(d: usize, r_star: usize, seed: u64) -> Result<GroundTruth> {
    if d == 0 || r_star == 0 {
        return Err(Error::invalid("tensor truth needs d >= 1 and r* >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut z = Tensor4::zeros(d);
    for _ in 0..r_star {
        let u = gaussian_matrix(&mut rng, d, 1).normalize();
        let u = u.as_slice();
        z.add_assign(&Tensor4::rank_one(u, u, u, u)?, 1.0);
    }
    let norm = z.frobenius();
    let flat = z.as_slice().iter().map(|v| v / norm).collect();
    Ok(GroundTruth {
        shape: CovariateShape::Tensor4(d),
        flat,
        level: r_star,
        support: Vec::new(),
    })
}

/// Orthonormal `d x k` matrix whose rows vanish outside a uniform-random
/// support of size `s_star`.
pub fn gen_sparse_subspace(d: usize, s_star: usize, k: usize, seed: u64) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if k == 0 || k > s_star || s_star > d {
        return Err(Error::invalid(format!("need 1 <= k <= s* <= d, got k = {k}, s* = {s_star}, d = {d}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut support = sample(&mut rng, d, s_star).into_vec();
    support.sort_unstable();
    let q = random_orthonormal(&mut rng, s_star, k);
    let mut b = DMatrix::zeros(d, k);
    for (r, &j) in support.iter().enumerate() {
        b.set_row(j, &q.row(r));
    }
    Ok((b, support))
}
