use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::links::LinkFunction;
use super::truth::GroundTruth;
use crate::dataset::{CovariateShape, SimDataset};
use crate::error::{Error, Result};
use crate::scoremodel::ScoreModel;
use crate::seed::rng_from_seed;

fn check_noise(noise_stddev: f64) -> Result<()> {
    if noise_stddev >= 0.0 && noise_stddev.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("noise stddev must be nonnegative, got {noise_stddev}")))
    }
}

/// Draws `n x p` covariates from `model`, then `n` standard normal noise
/// values, from a single stream seeded by `seed`.
fn draw_design(model: &ScoreModel, p: usize, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = rng_from_seed(seed);
    let mut x = vec![0.0; n * p];
    model.fill(&mut rng, &mut x)?;
    let eps = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Ok((x, eps))
}

/// `Y = f(⟨X, β*⟩) + σ ε` with i.i.d. covariate entries from `model`.
pub fn gen_sim_data(
    model: &ScoreModel,
    truth: &GroundTruth,
    link: &LinkFunction,
    noise_stddev: f64,
    n: usize,
    seed: u64,
) -> Result<SimDataset> {
    check_noise(noise_stddev)?;
    link.check_arity(1)?;
    let p = truth.shape.len();
    let (x, eps) = draw_design(model, p, n, seed)?;
    let y = x
        .chunks_exact(p)
        .zip(&eps)
        .map(|(row, e)| {
            let u: f64 = row.iter().zip(&truth.flat).map(|(a, b)| a * b).sum();
            link.eval1(u) + noise_stddev * e
        })
        .collect();
    SimDataset::new(truth.shape, x, Some(y))
}

/// `Y = f(Xᵀ B*) + σ ε` for vector covariates and a `d x k` index matrix.
pub fn gen_mim_data(
    model: &ScoreModel,
    b_star: &DMatrix<f64>,
    link: &LinkFunction,
    noise_stddev: f64,
    n: usize,
    seed: u64,
) -> Result<SimDataset> {
    check_noise(noise_stddev)?;
    let (d, k) = b_star.shape();
    link.check_arity(k)?;
    let (x, eps) = draw_design(model, d, n, seed)?;
    let mut u = vec![0.0; k];
    let y = x
        .chunks_exact(d)
        .zip(&eps)
        .map(|(row, e)| {
            for (l, ul) in u.iter_mut().enumerate() {
                *ul = row.iter().zip(b_star.column(l).iter()).map(|(a, b)| a * b).sum();
            }
            link.eval(&u) + noise_stddev * e
        })
        .collect();
    SimDataset::new(CovariateShape::Vector(d), x, Some(y))
}

/// Spiked covariates `X = √θ · z · v + w` with `z` and the entries of `w`
/// i.i.d. from `model`. No responses.
pub fn gen_spiked_data(model: &ScoreModel, v: &[f64], theta: f64, n: usize, seed: u64) -> Result<SimDataset> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::invalid(format!("spike strength must be nonnegative, got {theta}")));
    }
    let d = v.len();
    let mut rng = rng_from_seed(seed);
    let mut x = vec![0.0; n * d];
    model.fill(&mut rng, &mut x)?;
    let mut z = vec![0.0; n];
    model.fill(&mut rng, &mut z)?;
    let amp = theta.sqrt();
    for (row, zi) in x.chunks_exact_mut(d).zip(&z) {
        for (xj, vj) in row.iter_mut().zip(v) {
            *xj += amp * zi * vj;
        }
    }
    SimDataset::new(CovariateShape::Vector(d), x, None)
}
