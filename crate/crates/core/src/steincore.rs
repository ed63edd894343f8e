//! Multivariate scores of i.i.d.-entry covariates and Monte Carlo checks of
//! the first- and second-order Stein identities
//!
//! ```text
//! E[g(X) S(X)] = E[∇g(X)],      S(x) = s0∘(x)
//! E[g(X) T(X)] = E[∇²g(X)],     T(x) = S(x) S(x)ᵀ − diag(s0'∘(x))
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exec::map_shards;
use crate::scoremodel::ScoreModel;
use crate::seed::{derive_seed, rng_from_seed};

/// `S(x)`: entrywise first-order score.
pub type ScoreVector = DVector<f64>;
/// `T(x)`: second-order score, symmetric `d x d`.
pub type SecondScoreMatrix = DMatrix<f64>;

/// Writes `s0(x_j)` into `out`, failing with the offending coordinate.
pub(crate) fn score_into(model: &ScoreModel, x: &[f64], out: &mut [f64]) -> Result<()> {
    let support = model.support();
    for (j, (&xj, o)) in x.iter().zip(out.iter_mut()).enumerate() {
        if !support.contains(xj) {
            return Err(Error::DomainAt { index: j, x: xj });
        }
        *o = model.score1_unchecked(xj);
    }
    Ok(())
}

pub(crate) fn score_deriv_into(model: &ScoreModel, x: &[f64], out: &mut [f64]) -> Result<()> {
    let support = model.support();
    for (j, (&xj, o)) in x.iter().zip(out.iter_mut()).enumerate() {
        if !support.contains(xj) {
            return Err(Error::DomainAt { index: j, x: xj });
        }
        *o = model.score1_deriv_unchecked(xj);
    }
    Ok(())
}

pub fn score_vec(model: &ScoreModel, x: &[f64]) -> Result<ScoreVector> {
    let mut out = DVector::zeros(x.len());
    score_into(model, x, out.as_mut_slice())?;
    Ok(out)
}

pub fn score_mat2(model: &ScoreModel, x: &[f64]) -> Result<SecondScoreMatrix> {
    let d = x.len();
    let s = score_vec(model, x)?;
    let mut ds = vec![0.0; d];
    score_deriv_into(model, x, &mut ds)?;
    let mut t = DMatrix::zeros(d, d);
    for k in 0..d {
        for j in 0..d {
            t[(j, k)] = s[j] * s[k];
        }
        t[(k, k)] -= ds[k];
    }
    Ok(t)
}

/// Both sides of a Stein identity estimated by Monte Carlo.
#[derive(Clone, Debug)]
pub struct SteinResidual<T> {
    /// Sample mean of `g(X) S(X)` (or `g(X) T(X)`).
    pub lhs: T,
    /// Sample mean of `∇g(X)` (or `∇²g(X)`).
    pub rhs: T,
    /// `lhs - rhs`.
    pub residual: T,
    /// Per-entry standard error of `residual`.
    pub stderr: T,
    pub n: usize,
}

impl<T> SteinResidual<T>
where
    T: AsRef<[f64]>,
{
    pub fn residual_norm(&self) -> f64 {
        self.residual.as_ref().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn stderr_norm(&self) -> f64 {
        self.stderr.as_ref().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// True when every entry satisfies `|residual| <= z * stderr`.
    pub fn within(&self, z: f64) -> bool {
        self.residual
            .as_ref()
            .iter()
            .zip(self.stderr.as_ref())
            .all(|(r, s)| r.abs() <= z * s)
    }
}

#[derive(Clone)]
struct Acc {
    lhs: Vec<f64>,
    rhs: Vec<f64>,
    diff: Vec<f64>,
    diff_sq: Vec<f64>,
}

impl Acc {
    fn new(m: usize) -> Self {
        Acc {
            lhs: vec![0.0; m],
            rhs: vec![0.0; m],
            diff: vec![0.0; m],
            diff_sq: vec![0.0; m],
        }
    }

    fn merge(&mut self, other: &Acc) {
        for (a, b) in [
            (&mut self.lhs, &other.lhs),
            (&mut self.rhs, &other.rhs),
            (&mut self.diff, &other.diff),
            (&mut self.diff_sq, &other.diff_sq),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

/// Shared Monte Carlo driver: `sample_terms(x, lhs, rhs)` fills the two
/// per-sample summands (flattened, length `m`).
fn monte_carlo<F>(
    model: &ScoreModel,
    d: usize,
    m: usize,
    n: usize,
    seed: u64,
    shards: usize,
    sample_terms: F,
) -> Result<(Acc, usize)>
where
    F: Fn(&[f64], &mut [f64], &mut [f64]) -> Result<()> + Sync + Send,
{
    if n < 100 {
        return Err(Error::invalid(format!("Monte Carlo check needs n >= 100, got {n}")));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let partials = map_shards(n, shards, |s, range| -> Result<Acc> {
        let mut rng = rng_from_seed(derive_seed(seed, &[s as u64]));
        let mut acc = Acc::new(m);
        let mut x = vec![0.0; d];
        let mut lhs = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for _ in range {
            model.fill(&mut rng, &mut x)?;
            sample_terms(&x, &mut lhs, &mut rhs)?;
            for e in 0..m {
                let diff = lhs[e] - rhs[e];
                acc.lhs[e] += lhs[e];
                acc.rhs[e] += rhs[e];
                acc.diff[e] += diff;
                acc.diff_sq[e] += diff * diff;
            }
        }
        Ok(acc)
    });
    let mut total = Acc::new(m);
    for p in partials {
        total.merge(&p?);
    }
    Ok((total, n))
}

fn finish(acc: Acc, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let lhs: Vec<f64> = acc.lhs.iter().map(|v| v / nf).collect();
    let rhs: Vec<f64> = acc.rhs.iter().map(|v| v / nf).collect();
    let residual: Vec<f64> = acc.diff.iter().map(|v| v / nf).collect();
    let stderr = acc
        .diff
        .iter()
        .zip(&acc.diff_sq)
        .map(|(s, sq)| {
            let mean = s / nf;
            let var = ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        })
        .collect();
    (lhs, rhs, residual, stderr)
}

/// Monte Carlo estimate of `E[g(X) S(X)] − E[∇g(X)]` with `X` having `d`
/// i.i.d. entries from `model`.
pub fn stein_check1<G, DG>(
    model: &ScoreModel,
    d: usize,
    g: G,
    grad: DG,
    n: usize,
    seed: u64,
) -> Result<SteinResidual<DVector<f64>>>
where
    G: Fn(&[f64]) -> f64 + Sync + Send,
    DG: Fn(&[f64]) -> DVector<f64> + Sync + Send,
{
    stein_check1_sharded(model, d, g, grad, n, seed, 1)
}

/// As [`stein_check1`], splitting the samples into `shards` independent
/// streams whose accumulators are summed in shard order.
pub fn stein_check1_sharded<G, DG>(
    model: &ScoreModel,
    d: usize,
    g: G,
    grad: DG,
    n: usize,
    seed: u64,
    shards: usize,
) -> Result<SteinResidual<DVector<f64>>>
where
    G: Fn(&[f64]) -> f64 + Sync + Send,
    DG: Fn(&[f64]) -> DVector<f64> + Sync + Send,
{
    let (acc, n) = monte_carlo(model, d, d, n, seed, shards, |x, lhs, rhs| {
        score_into(model, x, lhs)?;
        let gx = g(x);
        lhs.iter_mut().for_each(|v| *v *= gx);
        let gr = grad(x);
        if gr.len() != d {
            return Err(Error::shape(format!("gradient has length {}, expected {d}", gr.len())));
        }
        rhs.copy_from_slice(gr.as_slice());
        Ok(())
    })?;
    let (lhs, rhs, residual, stderr) = finish(acc, n);
    Ok(SteinResidual {
        lhs: DVector::from_vec(lhs),
        rhs: DVector::from_vec(rhs),
        residual: DVector::from_vec(residual),
        stderr: DVector::from_vec(stderr),
        n,
    })
}

/// Monte Carlo estimate of `E[g(X) T(X)] − E[∇²g(X)]`.
pub fn stein_check2<G, HG>(
    model: &ScoreModel,
    d: usize,
    g: G,
    hessian: HG,
    n: usize,
    seed: u64,
) -> Result<SteinResidual<DMatrix<f64>>>
where
    G: Fn(&[f64]) -> f64 + Sync + Send,
    HG: Fn(&[f64]) -> DMatrix<f64> + Sync + Send,
{
    stein_check2_sharded(model, d, g, hessian, n, seed, 1)
}

pub fn stein_check2_sharded<G, HG>(
    model: &ScoreModel,
    d: usize,
    g: G,
    hessian: HG,
    n: usize,
    seed: u64,
    shards: usize,
) -> Result<SteinResidual<DMatrix<f64>>>
where
    G: Fn(&[f64]) -> f64 + Sync + Send,
    HG: Fn(&[f64]) -> DMatrix<f64> + Sync + Send,
{
    let (acc, n) = monte_carlo(model, d, d * d, n, seed, shards, |x, lhs, rhs| {
        let t = score_mat2(model, x)?;
        let gx = g(x);
        lhs.iter_mut()
            .zip(t.as_slice())
            .for_each(|(l, tv)| *l = gx * tv);
        let h = hessian(x);
        if h.shape() != (d, d) {
            return Err(Error::shape(format!("hessian has shape {:?}, expected ({d}, {d})", h.shape())));
        }
        rhs.copy_from_slice(h.as_slice());
        Ok(())
    })?;
    let (lhs, rhs, residual, stderr) = finish(acc, n);
    Ok(SteinResidual {
        lhs: DMatrix::from_vec(d, d, lhs),
        rhs: DMatrix::from_vec(d, d, rhs),
        residual: DMatrix::from_vec(d, d, residual),
        stderr: DMatrix::from_vec(d, d, stderr),
        n,
    })
}
