//! `fit-sim1`, `fit-sim2`, `fit-mim` and `fit-spca`.

use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use stein_index::estimators::{
    fit_mim2, fit_sim1_lowrank, fit_sim1_sparse, fit_sim1_tensor, fit_sim2_sparse, fit_spca_heavy, AdmmOptions,
    EstimatorKind, FantopeSolution, SimEstimate,
};
use stein_index::exec::with_jobs;
use stein_index::robusttrunc::{ParamSetting, TruncationSchedule};
use stein_index::{CovariateShape, MomentBound, ScoreModel, SimDataset};

use crate::{AdmmArgs, CliError, Common, FitArgs, Status};

const SUPPORT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub enum FitKind {
    Sim1,
    Sim2,
    Mim,
    Spca,
}

pub fn read_dataset(path: &Path, with_response: bool) -> Result<SimDataset, CliError> {
    let file = fs::File::open(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })?;
    SimDataset::read_csv(BufReader::new(file), with_response).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn admm_options(a: &AdmmArgs) -> Result<AdmmOptions, CliError> {
    let d = AdmmOptions::default();
    let opts = AdmmOptions {
        rho: a.rho.unwrap_or(d.rho),
        tol: a.tol.unwrap_or(d.tol),
        max_iter: a.max_iter.unwrap_or(d.max_iter),
        adaptive_rho: !a.fixed_rho,
    };
    if !(opts.rho > 0.0 && opts.tol > 0.0 && opts.max_iter >= 1) {
        return Err(CliError::Input("--rho and --tol must be positive and --max-iter at least 1".into()));
    }
    Ok(opts)
}

pub fn moment_bound(c: &Common) -> Result<MomentBound, CliError> {
    Ok(match c.moment_bound {
        Some(m) => MomentBound::new(m)?,
        None => MomentBound::default(),
    })
}

fn kind_for(kind: FitKind, shape: CovariateShape) -> EstimatorKind {
    match (kind, shape) {
        (FitKind::Sim1, CovariateShape::Matrix(..)) => EstimatorKind::Sim1Lowrank,
        (FitKind::Sim1, CovariateShape::Tensor4(_)) => EstimatorKind::Sim1Tensor,
        (FitKind::Sim1, CovariateShape::Vector(_)) => EstimatorKind::Sim1Sparse,
        (FitKind::Sim2, _) => EstimatorKind::Sim2Sparse,
        (FitKind::Mim, _) => EstimatorKind::Mim2,
        (FitKind::Spca, _) => EstimatorKind::SpcaHeavy,
    }
}

/// Key/value diagnostics written next to the estimate.
#[derive(Default)]
struct Diag(String);

impl Diag {
    fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        writeln!(self.0, "{key}: {value}").unwrap();
    }

    fn schedule(&mut self, s: &TruncationSchedule) {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        self.put("tau", opt(s.tau));
        self.put("kappa", opt(s.kappa));
        self.put("lambda", s.lambda);
        self.put("schedule_source", s.source);
    }

    fn admm(&mut self, sol: &FantopeSolution) {
        self.put("objective", sol.objective);
        self.put("converged", sol.converged);
        self.put("iterations", sol.iterations);
        if let Some(r) = sol.residuals.last() {
            self.put("primal_residual", r.primal);
            self.put("dual_residual", r.dual);
        }
    }
}

fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = if m.ncols() == 1 {
        format!("#dims={}\n", m.nrows())
    } else {
        format!("#dims={},{}\n", m.nrows(), m.ncols())
    };
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(s, "{}", row.join(",")).unwrap();
    }
    s
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

pub fn diag_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".diag");
    PathBuf::from(s)
}

fn sim1_diag(diag: &mut Diag, est: &SimEstimate) {
    let d = &est.diagnostics;
    diag.put("support_or_rank", d.support_or_rank);
    diag.put("objective", d.objective);
    diag.put("clip_fraction", d.clip_fraction);
    diag.put("degenerate", est.is_degenerate());
    diag.put("converged", d.converged);
    diag.put("iterations", d.iterations);
}

pub fn run(kind: FitKind, a: FitArgs) -> Result<Status, CliError> {
    let out = a
        .common
        .out
        .clone()
        .ok_or_else(|| CliError::Input("--out is required".into()))?;
    let with_response = !matches!(kind, FitKind::Spca);
    let data = read_dataset(&a.data, with_response)?;
    let model: ScoreModel = a.common.dist.clone().unwrap_or_else(ScoreModel::standard_gaussian);
    let est_kind = kind_for(kind, data.shape());
    let schedule = est_kind.schedule(
        moment_bound(&a.common)?,
        data.n(),
        data.shape(),
        a.common.lambda.unwrap_or(ParamSetting::Auto),
        a.common.tau.unwrap_or(ParamSetting::Auto),
        a.common.kappa.unwrap_or(ParamSetting::Auto),
    )?;
    let opts = admm_options(&a.admm)?;
    let k = a.admm.k;

    let mut diag = Diag::default();
    diag.put("estimator", est_kind);
    diag.put("n", data.n());
    diag.put("dims", format!("{:?}", data.shape().dims()));
    diag.put("dist", &model);
    diag.schedule(&schedule);

    let (estimate, converged) = with_jobs(a.common.jobs, || -> Result<_, CliError> {
        Ok(match est_kind {
            EstimatorKind::Sim1Sparse | EstimatorKind::Sim1Lowrank | EstimatorKind::Sim1Tensor => {
                let est = match est_kind {
                    EstimatorKind::Sim1Sparse => fit_sim1_sparse(&data, &model, schedule)?,
                    EstimatorKind::Sim1Lowrank => fit_sim1_lowrank(&data, &model, schedule)?,
                    _ => fit_sim1_tensor(&data, &model, schedule)?,
                };
                sim1_diag(&mut diag, &est);
                (est.direction.clone().unwrap_or(est.raw), true)
            }
            EstimatorKind::Sim2Sparse => {
                let (est, sol) = fit_sim2_sparse(&data, &model, schedule, opts)?;
                diag.put("support_or_rank", est.diagnostics.support_or_rank);
                diag.put("clip_fraction", est.diagnostics.clip_fraction);
                diag.admm(&sol);
                (est.direction.clone().unwrap_or(est.raw), sol.converged)
            }
            EstimatorKind::Mim2 | EstimatorKind::SpcaHeavy => {
                let (basis, sol) = if est_kind == EstimatorKind::Mim2 {
                    fit_mim2(&data, &model, schedule, k, opts)?
                } else {
                    fit_spca_heavy(&data, schedule, k, opts)?
                };
                let support = basis.row_iter().filter(|r| r.norm() > SUPPORT_TOL).count();
                diag.put("k", k);
                diag.put("support_or_rank", support);
                diag.admm(&sol);
                (basis, sol.converged)
            }
        })
    })?;

    write_file(&out, matrix_csv(&estimate).as_bytes())?;
    write_file(&diag_path(&out), diag.0.as_bytes())?;
    Ok(if converged { Status::Done } else { Status::NotConverged })
}
