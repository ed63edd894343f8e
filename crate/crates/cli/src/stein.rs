//! `stein-check`: Monte Carlo residual of a Stein identity for
//! `g(x) = f(<β, x>)` with `β = (1, ..., 1) / √d`.

use nalgebra::{DMatrix, DVector};
use stein_index::exec::with_jobs;
use stein_index::simlab::LinkFunction;
use stein_index::steincore::{stein_check1_sharded, stein_check2_sharded};
use stein_index::ScoreModel;

use crate::{CliError, SteinArgs, Status};

/// `(f', f'')` for the scalar links. `f4 = |u|` only has a first derivative.
fn derivatives(link: &LinkFunction, u: f64) -> Option<(f64, Option<f64>)> {
    Some(match link {
        LinkFunction::F1 => (3.0 + 10.0 * u.cos(), Some(-10.0 * u.sin())),
        LinkFunction::F2 => {
            let e = (-2.0 * u * u).exp();
            (2f64.sqrt() - 16.0 * u * e, Some(-16.0 * e * (1.0 - 4.0 * u * u)))
        }
        LinkFunction::F3 => (2.0 * u, Some(2.0)),
        LinkFunction::F4 => (u.signum(), None),
        LinkFunction::F5 => (8.0 * u - 3.0 * u.sin(), Some(8.0 - 3.0 * u.cos())),
        LinkFunction::Identity => (1.0, Some(0.0)),
        _ => return None,
    })
}

/// Residual and standard-error norms for the requested identity.
pub fn check(model: &ScoreModel, link: &LinkFunction, order: u8, d: usize, n: usize, seed: u64, shards: usize) -> Result<(f64, f64), CliError> {
    if d == 0 || n < 2 {
        return Err(CliError::Input("stein-check needs --d >= 1 and --n >= 2".into()));
    }
    let Some((_, second)) = derivatives(link, 0.5) else {
        return Err(CliError::Input(format!("stein-check supports scalar links f1..f5 and identity, not `{link}`")));
    };
    if order == 2 && second.is_none() {
        return Err(CliError::Input(format!("link `{link}` is not twice differentiable; use --order 1")));
    }
    let w = 1.0 / (d as f64).sqrt();
    let beta = DVector::from_element(d, w);
    let u = move |x: &[f64]| x.iter().sum::<f64>() * w;
    let g = |x: &[f64]| link.eval1(u(x));
    if order == 1 {
        let grad = |x: &[f64]| &beta * derivatives(link, u(x)).unwrap().0;
        let r = stein_check1_sharded(model, d, g, grad, n, seed, shards)?;
        Ok((r.residual_norm(), r.stderr_norm()))
    } else {
        let outer: DMatrix<f64> = &beta * beta.transpose();
        let hess = |x: &[f64]| &outer * derivatives(link, u(x)).unwrap().1.unwrap();
        let r = stein_check2_sharded(model, d, g, hess, n, seed, shards)?;
        Ok((r.residual_norm(), r.stderr_norm()))
    }
}

pub fn run(a: SteinArgs) -> Result<Status, CliError> {
    let c = &a.common;
    let model = c.dist.clone().unwrap_or_else(ScoreModel::standard_gaussian);
    let link = c
        .link
        .clone()
        .unwrap_or(if a.order == 1 { LinkFunction::F1 } else { LinkFunction::F3 });
    let shards = c.jobs.max(1);
    let (res, se) = with_jobs(c.jobs, || check(&model, &link, a.order, a.d, a.n, c.seed.unwrap_or(0), shards))?;
    let table = format!("statistic      value\nresidual_norm  {res:.6e}\nstderr_norm    {se:.6e}\n");
    print!("{table}");
    if let Some(out) = &c.out {
        crate::fit::write_file(out, table.as_bytes())?;
    }
    Ok(Status::Done)
}
