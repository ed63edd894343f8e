//! Index-model estimators built on the truncated Stein moments.
//!
//! * first order: [`fit_sim1_sparse`], [`fit_sim1_lowrank`], [`fit_sim1_tensor`]
//!   solve `min ‖β‖² − 2⟨m, β⟩ + λ R(β)` in closed form;
//! * second order: [`fit_sim2_sparse`], [`fit_mim2`] and [`fit_spca_heavy`]
//!   solve the Fantope-constrained sparse PCA program with [`admm_fantope`].

mod admm;
mod first_order;
mod second_order;

use nalgebra::DMatrix;

pub use admm::{admm_fantope, fantope_objective, AdmmOptions, FantopeSolution, Residual};
pub use first_order::{
    fit_sim1_lowrank, fit_sim1_sparse, fit_sim1_tensor, lowrank_objective, prox_gradient_lowrank,
    prox_gradient_sparse, sim1_lowrank_from_mean, sim1_sparse_from_moment, sparse_objective,
    PROX_GRADIENT_STEP,
};
pub use second_order::{fit_mim2, fit_sim2_sparse, fit_spca_heavy, subspace_from_sigma};

use crate::dataset::CovariateShape;
use crate::error::{Error, Result};
use crate::robusttrunc::{
    experiment_first_lowrank, experiment_first_sparse, experiment_second, experiment_tensor, schedule_first_lowrank,
    schedule_first_sparse, schedule_second, schedule_spca, schedule_tensor, ParamSetting, ScheduleSource,
    TruncationSchedule,
};
use crate::scoremodel::MomentBound;

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    /// Nonzero entries (sparse estimators) or numerical rank (low-rank ones).
    pub support_or_rank: usize,
    /// Value of the estimator's objective at the returned point.
    pub objective: f64,
    pub clip_fraction: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SimEstimate {
    /// `raw` scaled to unit ℓ₂/Frobenius norm; `None` when `raw` is zero.
    pub direction: Option<DMatrix<f64>>,
    /// Unnormalized solution; vectors are stored as `d x 1`.
    pub raw: DMatrix<f64>,
    pub schedule: TruncationSchedule,
    pub diagnostics: Diagnostics,
}

impl SimEstimate {
    pub(crate) fn from_raw(raw: DMatrix<f64>, schedule: TruncationSchedule, diagnostics: Diagnostics) -> Self {
        let norm = raw.norm();
        let direction = (norm > 0.0).then(|| &raw / norm);
        SimEstimate {
            direction,
            raw,
            schedule,
            diagnostics,
        }
    }

    /// True when everything was thresholded away.
    pub fn is_degenerate(&self) -> bool {
        self.direction.is_none()
    }
}

/// The estimators exposed by the sweep runner and the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Sim1Sparse,
    Sim1Lowrank,
    Sim1Tensor,
    Sim2Sparse,
    Mim2,
    SpcaHeavy,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::Sim1Sparse,
        EstimatorKind::Sim1Lowrank,
        EstimatorKind::Sim1Tensor,
        EstimatorKind::Sim2Sparse,
        EstimatorKind::Mim2,
        EstimatorKind::SpcaHeavy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Sim1Sparse => "sim1-sparse",
            EstimatorKind::Sim1Lowrank => "sim1-lowrank",
            EstimatorKind::Sim1Tensor => "sim1-tensor",
            EstimatorKind::Sim2Sparse => "sim2-sparse",
            EstimatorKind::Mim2 => "mim2",
            EstimatorKind::SpcaHeavy => "spca-heavy",
        }
    }

    /// Resolves `(τ, κ, λ)` for `n` samples of the given covariate shape.
    /// Each setting picks the theorem formula, the simulation default or a
    /// given value; any given value makes the schedule `Manual`.
    pub fn schedule(
        self,
        m: MomentBound,
        n: usize,
        shape: CovariateShape,
        lambda: ParamSetting,
        tau: ParamSetting,
        kappa: ParamSetting,
    ) -> Result<TruncationSchedule> {
        let (theorem, experiment) = match (self, shape) {
            (EstimatorKind::Sim1Sparse, CovariateShape::Vector(d)) => {
                (schedule_first_sparse(m, n, d)?, experiment_first_sparse(m, n, d)?)
            }
            (EstimatorKind::Sim1Lowrank, CovariateShape::Matrix(d1, d2)) => (
                schedule_first_lowrank(m, n, d1, d2)?,
                experiment_first_lowrank(m, n, d1, d2)?,
            ),
            (EstimatorKind::Sim1Tensor, CovariateShape::Tensor4(d)) => {
                (schedule_tensor(m, n, d)?, experiment_tensor(m, n, d)?)
            }
            (EstimatorKind::Sim2Sparse | EstimatorKind::Mim2, CovariateShape::Vector(d)) => {
                (schedule_second(m, n, d)?, experiment_second(n, d)?)
            }
            (EstimatorKind::SpcaHeavy, CovariateShape::Vector(d)) => {
                let s = schedule_spca(m, n, d)?;
                (s, s)
            }
            (kind, shape) => {
                return Err(Error::shape(format!("estimator {} does not accept {shape:?} covariates", kind.name())))
            }
        };
        let settings = [lambda, tau, kappa];
        if settings.iter().any(|s| matches!(s, ParamSetting::Value(_))) {
            return TruncationSchedule::manual(
                tau.pick(theorem.tau, experiment.tau),
                kappa.pick(theorem.kappa, experiment.kappa),
                lambda.pick(Some(theorem.lambda), Some(experiment.lambda)).expect("lambda always set"),
            );
        }
        let mut out = theorem;
        if let ParamSetting::PaperDefault = lambda {
            out.lambda = experiment.lambda;
        }
        if let ParamSetting::PaperDefault = tau {
            out.tau = experiment.tau;
        }
        if let ParamSetting::PaperDefault = kappa {
            out.kappa = experiment.kappa;
        }
        if settings.contains(&ParamSetting::PaperDefault) {
            out.source = ScheduleSource::ExperimentDefault;
        }
        Ok(out)
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<_> = EstimatorKind::ALL.iter().map(|k| k.name()).collect();
                Error::invalid(format!("unknown estimator `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_resolution() {
        let m = MomentBound::default();
        let shape = CovariateShape::Vector(100);
        let auto = ParamSetting::Auto;
        let paper = ParamSetting::PaperDefault;
        let s = EstimatorKind::Sim2Sparse.schedule(m, 2000, shape, paper, paper, auto).unwrap();
        assert_eq!(s, experiment_second(2000, 100).unwrap());
        let t = EstimatorKind::Sim2Sparse.schedule(m, 2000, shape, auto, auto, auto).unwrap();
        assert_eq!(t, schedule_second(m, 2000, 100).unwrap());
        let manual = EstimatorKind::Sim1Sparse
            .schedule(m, 2000, shape, ParamSetting::Value(0.3), auto, auto)
            .unwrap();
        assert_eq!(manual.source, ScheduleSource::Manual);
        assert_eq!(manual.lambda, 0.3);
        assert_eq!(manual.tau, schedule_first_sparse(m, 2000, 100).unwrap().tau);
        assert!(EstimatorKind::Sim1Lowrank.schedule(m, 2000, shape, auto, auto, auto).is_err());
    }

    #[test]
    fn names_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.name().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("lasso".parse::<EstimatorKind>().is_err());
    }
}
