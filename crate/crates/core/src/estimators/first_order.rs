use nalgebra::DMatrix;

use super::{Diagnostics, SimEstimate};
use crate::dataset::{CovariateShape, SimDataset};
use crate::error::{Error, Result};
use crate::robusttrunc::{truncated_first_moment, truncated_mean_matrix, TruncationSchedule};
use crate::scoremodel::ScoreModel;
use crate::spectral::{nuclear_norm, numerical_rank, soft_threshold, svt};

/// Learning rate of the iterative mode.
pub const PROX_GRADIENT_STEP: f64 = 0.05;

const RANK_TOL: f64 = 1e-10;

/// `‖β‖² − 2⟨m, β⟩ + λ‖β‖₁`.
pub fn sparse_objective(beta: &DMatrix<f64>, m: &DMatrix<f64>, lambda: f64) -> f64 {
    beta.norm_squared() - 2.0 * beta.dot(m) + lambda * beta.lp_norm(1)
}

/// `‖β‖²_F − 2⟨m, β⟩ + λ‖β‖_*`.
pub fn lowrank_objective(beta: &DMatrix<f64>, m: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    Ok(beta.norm_squared() - 2.0 * beta.dot(m) + lambda * nuclear_norm(beta)?)
}

fn prox_gradient(
    m: &DMatrix<f64>,
    lambda: f64,
    step: f64,
    iters: usize,
    prox: impl Fn(&DMatrix<f64>, f64) -> Result<DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::invalid(format!("step must lie in (0, 0.5], got {step}")));
    }
    let mut beta = DMatrix::zeros(m.nrows(), m.ncols());
    for _ in 0..iters {
        // gradient of the smooth part is 2(β − m)
        let moved = &beta * (1.0 - 2.0 * step) + m * (2.0 * step);
        beta = prox(&moved, step * lambda)?;
    }
    Ok(beta)
}

/// Proximal gradient for [`sparse_objective`] started at zero.
pub fn prox_gradient_sparse(m: &DMatrix<f64>, lambda: f64, step: f64, iters: usize) -> Result<DMatrix<f64>> {
    prox_gradient(m, lambda, step, iters, |v, t| Ok(soft_threshold(v, t)))
}

/// Proximal gradient for [`lowrank_objective`] started at zero.
pub fn prox_gradient_lowrank(m: &DMatrix<f64>, lambda: f64, step: f64, iters: usize) -> Result<DMatrix<f64>> {
    prox_gradient(m, lambda, step, iters, svt)
}

/// Closed-form sparse solution `soft_threshold(m, λ/2)` for a given moment.
pub fn sim1_sparse_from_moment(m: &DMatrix<f64>, schedule: TruncationSchedule) -> Result<SimEstimate> {
    sparse_estimate(m, schedule, 0.0)
}

/// Closed-form low-rank solution `svt(mean, λ/2)` for a given mean matrix.
pub fn sim1_lowrank_from_mean(mean: &DMatrix<f64>, schedule: TruncationSchedule) -> Result<SimEstimate> {
    lowrank_estimate(mean, schedule, 0.0)
}

fn sparse_estimate(m: &DMatrix<f64>, schedule: TruncationSchedule, clip_fraction: f64) -> Result<SimEstimate> {
    let lambda = schedule.lambda;
    let raw = soft_threshold(m, lambda / 2.0);
    let diagnostics = Diagnostics {
        support_or_rank: raw.iter().filter(|v| **v != 0.0).count(),
        objective: sparse_objective(&raw, m, lambda),
        clip_fraction,
        converged: true,
        iterations: 0,
    };
    Ok(SimEstimate::from_raw(raw, schedule, diagnostics))
}

fn lowrank_estimate(mean: &DMatrix<f64>, schedule: TruncationSchedule, clip_fraction: f64) -> Result<SimEstimate> {
    let lambda = schedule.lambda;
    let raw = svt(mean, lambda / 2.0)?;
    let diagnostics = Diagnostics {
        support_or_rank: numerical_rank(&raw, RANK_TOL)?,
        objective: lowrank_objective(&raw, mean, lambda)?,
        clip_fraction,
        converged: true,
        iterations: 0,
    };
    Ok(SimEstimate::from_raw(raw, schedule, diagnostics))
}

/// Sparse vector SIM with a first-order link. Needs `schedule.tau`.
pub fn fit_sim1_sparse(data: &SimDataset, model: &ScoreModel, schedule: TruncationSchedule) -> Result<SimEstimate> {
    if !matches!(data.shape(), CovariateShape::Vector(_)) {
        return Err(Error::shape(format!("sparse SIM needs vector covariates, got {:?}", data.shape())));
    }
    let m = truncated_first_moment(data, model, schedule.require_tau()?)?;
    sparse_estimate(&m.value, schedule, m.clip_fraction)
}

/// Low-rank matrix SIM with a first-order link. Needs `schedule.kappa`.
pub fn fit_sim1_lowrank(data: &SimDataset, model: &ScoreModel, schedule: TruncationSchedule) -> Result<SimEstimate> {
    let mean = truncated_mean_matrix(data, model, schedule.require_kappa()?)?;
    lowrank_estimate(&mean.value, schedule, mean.clip_fraction)
}

/// Low-rank tensor SIM: square-unfolds every covariate and runs the matrix
/// pipeline. The estimate lives in the `d² x d²` unfolded space.
pub fn fit_sim1_tensor(data: &SimDataset, model: &ScoreModel, schedule: TruncationSchedule) -> Result<SimEstimate> {
    if !matches!(data.shape(), CovariateShape::Tensor4(_)) {
        return Err(Error::shape(format!("tensor SIM needs fourth-order covariates, got {:?}", data.shape())));
    }
    fit_sim1_lowrank(&data.square_unfolded()?, model, schedule)
}
