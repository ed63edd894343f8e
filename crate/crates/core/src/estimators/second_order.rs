use nalgebra::DMatrix;

use super::admm::{admm_fantope, AdmmOptions, FantopeSolution};
use super::{Diagnostics, SimEstimate};
use crate::dataset::SimDataset;
use crate::error::Result;
use crate::robusttrunc::{truncated_covariance, truncated_second_moment, TruncationSchedule};
use crate::scoremodel::ScoreModel;

const SUPPORT_TOL: f64 = 1e-8;

/// Runs the Fantope program on a precomputed moment matrix.
pub fn subspace_from_sigma(
    sigma: &DMatrix<f64>,
    schedule: &TruncationSchedule,
    k: usize,
    opts: AdmmOptions,
) -> Result<FantopeSolution> {
    admm_fantope(sigma, schedule.lambda, k, opts)
}

fn sim2_estimate(sol: &FantopeSolution, schedule: TruncationSchedule, clip_fraction: f64) -> SimEstimate {
    let v = sol.extracted.columns(0, 1).into_owned();
    let diagnostics = Diagnostics {
        support_or_rank: v.iter().filter(|x| x.abs() > SUPPORT_TOL).count(),
        objective: sol.objective,
        clip_fraction,
        converged: sol.converged,
        iterations: sol.iterations,
    };
    SimEstimate::from_raw(v, schedule, diagnostics)
}

/// Sparse SIM with a second-order link: leading eigenvector of the rank-1
/// Fantope solution for the truncated second-order Stein moment. Needs
/// `schedule.tau`. Nonconvergence is reported in the diagnostics.
pub fn fit_sim2_sparse(
    data: &SimDataset,
    model: &ScoreModel,
    schedule: TruncationSchedule,
    opts: AdmmOptions,
) -> Result<(SimEstimate, FantopeSolution)> {
    let sigma = truncated_second_moment(data, model, schedule.require_tau()?)?;
    let sol = subspace_from_sigma(&sigma.value, &schedule, 1, opts)?;
    Ok((sim2_estimate(&sol, schedule, sigma.clip_fraction), sol))
}

/// Multiple index model: top-`k` eigenvectors of the rank-`k` Fantope
/// solution, as a `d x k` orthonormal basis.
pub fn fit_mim2(
    data: &SimDataset,
    model: &ScoreModel,
    schedule: TruncationSchedule,
    k: usize,
    opts: AdmmOptions,
) -> Result<(DMatrix<f64>, FantopeSolution)> {
    let sigma = truncated_second_moment(data, model, schedule.require_tau()?)?;
    let sol = subspace_from_sigma(&sigma.value, &schedule, k, opts)?;
    Ok((sol.extracted.clone(), sol))
}

/// Sparse PCA on the entrywise-truncated second-moment matrix of the
/// covariates. Responses are ignored; `tau = ∞` gives the classical program.
pub fn fit_spca_heavy(
    data: &SimDataset,
    schedule: TruncationSchedule,
    k: usize,
    opts: AdmmOptions,
) -> Result<(DMatrix<f64>, FantopeSolution)> {
    let sigma = truncated_covariance(data, schedule.require_tau()?)?;
    let sol = subspace_from_sigma(&sigma.value, &schedule, k, opts)?;
    Ok((sol.extracted.clone(), sol))
}
