//! `sweep`: runs a TOML-described simulation grid and writes the sweep CSV.

use std::fs;

use stein_index::exec::with_jobs;
use stein_index::simlab::{run_sweep, write_sweep_csv, SweepConfig};

use crate::fit::write_file;
use crate::{CliError, Status, SweepArgs};

/// Command-line flags override the matching config entries.
fn apply_overrides(cfg: &mut SweepConfig, a: &SweepArgs) {
    let c = &a.common;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(dist) = &c.dist {
        cfg.model.dist = dist.to_string();
    }
    if let Some(link) = &c.link {
        cfg.estimator.link = Some(link.to_string());
    }
    if let Some(v) = c.lambda {
        cfg.estimator.lambda = v;
    }
    if let Some(v) = c.tau {
        cfg.estimator.tau = v;
    }
    if let Some(v) = c.kappa {
        cfg.estimator.kappa = v;
    }
    if let Some(m) = c.moment_bound {
        cfg.estimator.moment_bound = m;
    }
    if a.admm.rho.is_some() {
        cfg.estimator.rho = a.admm.rho;
    }
    if a.admm.tol.is_some() {
        cfg.estimator.tol = a.admm.tol;
    }
    if a.admm.max_iter.is_some() {
        cfg.estimator.max_iter = a.admm.max_iter;
    }
    if a.admm.fixed_rho {
        cfg.estimator.adaptive_rho = Some(false);
    }
}

pub fn run(a: SweepArgs) -> Result<Status, CliError> {
    let out = a
        .common
        .out
        .clone()
        .ok_or_else(|| CliError::Input("--out is required".into()))?;
    let text = fs::read_to_string(&a.config).map_err(|source| CliError::Read {
        path: a.config.clone(),
        source,
    })?;
    let mut cfg = SweepConfig::from_toml(&text)?;
    apply_overrides(&mut cfg, &a);
    let rows = with_jobs(a.common.jobs, || run_sweep(&cfg))?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf)?;
    write_file(&out, &buf)?;
    let failed = rows.iter().filter(|r| r.cosine_distance.is_err()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} trials failed and are recorded as `error`", rows.len());
    }
    Ok(Status::Done)
}
