//! Heavy-tail truncation: elementwise clipping, the Catoni-type matrix map
//! `ψ`, truncated Stein moments and the hyperparameter schedules that go with
//! them.
//!
//! All moment estimators accumulate per-shard partial sums and add them in
//! shard order, so a result is reproducible bit-for-bit for a fixed shard
//! count. The plain functions use a single shard.

use nalgebra::DMatrix;

use crate::dataset::{CovariateShape, SimDataset};
use crate::error::{Error, Result};
use crate::exec::map_shards;
use crate::scoremodel::{MomentBound, ScoreModel};
use crate::spectral::{spectral_map, sym_eig};
use crate::steincore::{score_deriv_into, score_into};

/// Value used for the unspecified absolute constants `C`, `C1`, `C2`.
pub const DEFAULT_CONSTANT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleSource {
    TheoremFormula,
    ExperimentDefault,
    Manual,
}

impl std::fmt::Display for ScheduleSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScheduleSource::TheoremFormula => "theorem",
            ScheduleSource::ExperimentDefault => "experiment-default",
            ScheduleSource::Manual => "manual",
        })
    }
}

/// Truncation level `tau` (elementwise clipping), influence scale `kappa`
/// (matrix `ψ` truncation) and penalty `lambda`. Fields that an estimator
/// does not use are `None`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationSchedule {
    pub tau: Option<f64>,
    pub kappa: Option<f64>,
    pub lambda: f64,
    pub source: ScheduleSource,
}

fn check_positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && !v.is_nan() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

fn check_sizes(n: usize, dims: &[usize]) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!("schedules need n >= 2, got {n}")));
    }
    if dims.iter().any(|&d| d < 2) {
        return Err(Error::invalid(format!("schedules need every dimension >= 2, got {dims:?}")));
    }
    Ok(())
}

impl TruncationSchedule {
    /// A fully user-specified schedule. `lambda` may be zero.
    pub fn manual(tau: Option<f64>, kappa: Option<f64>, lambda: f64) -> Result<Self> {
        if let Some(t) = tau {
            check_positive("tau", t)?;
        }
        if let Some(k) = kappa {
            check_positive("kappa", k)?;
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be nonnegative, got {lambda}")));
        }
        Ok(TruncationSchedule {
            tau,
            kappa,
            lambda,
            source: ScheduleSource::Manual,
        })
    }

    pub fn with_tau(self, tau: f64) -> Result<Self> {
        TruncationSchedule::manual(Some(tau), self.kappa, self.lambda)
    }

    pub fn with_kappa(self, kappa: f64) -> Result<Self> {
        TruncationSchedule::manual(self.tau, Some(kappa), self.lambda)
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        TruncationSchedule::manual(self.tau, self.kappa, lambda)
    }

    pub fn require_tau(&self) -> Result<f64> {
        self.tau
            .ok_or_else(|| Error::invalid("schedule has no truncation level tau"))
    }

    pub fn require_kappa(&self) -> Result<f64> {
        self.kappa
            .ok_or_else(|| Error::invalid("schedule has no influence scale kappa"))
    }
}

/// How a single hyperparameter is chosen: from the theorem formula
/// (`auto`), from the simulation setting (`paper-default`) or given.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum ParamSetting {
    #[default]
    Auto,
    PaperDefault,
    Value(f64),
}

impl ParamSetting {
    /// Picks the theorem value, the simulation-setting value or the given one.
    pub fn pick(self, theorem: Option<f64>, experiment: Option<f64>) -> Option<f64> {
        match self {
            ParamSetting::Auto => theorem,
            ParamSetting::PaperDefault => experiment,
            ParamSetting::Value(v) => Some(v),
        }
    }
}

impl std::fmt::Display for ParamSetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamSetting::Auto => f.write_str("auto"),
            ParamSetting::PaperDefault => f.write_str("paper-default"),
            ParamSetting::Value(v) => write!(f, "{v}"),
        }
    }
}

impl std::str::FromStr for ParamSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(ParamSetting::Auto),
            "paper-default" => Ok(ParamSetting::PaperDefault),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() || *v == f64::INFINITY)
                .map(ParamSetting::Value)
                .ok_or_else(|| Error::invalid(format!("expected `auto`, `paper-default` or a number, got `{other}`"))),
        }
    }
}

impl<'de> serde::Deserialize<'de> for ParamSetting {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Number(v) => Ok(ParamSetting::Value(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// First-order sparse SIM: `τ = 2 (M n / log d)^{1/4}`, `λ = C √(M log d / n)`.
pub fn schedule_first_sparse(m: MomentBound, n: usize, d: usize) -> Result<TruncationSchedule> {
    check_sizes(n, &[d])?;
    let (m, nf, ld) = (m.value(), n as f64, (d as f64).ln());
    Ok(TruncationSchedule {
        tau: Some(2.0 * (m * nf / ld).powf(0.25)),
        kappa: None,
        lambda: DEFAULT_CONSTANT * (m * ld / nf).sqrt(),
        source: ScheduleSource::TheoremFormula,
    })
}

/// Simulation setting for the sparse first-order SIM: `λ = 4 √(log d / n)`,
/// `τ` as in [`schedule_first_sparse`].
pub fn experiment_first_sparse(m: MomentBound, n: usize, d: usize) -> Result<TruncationSchedule> {
    let base = schedule_first_sparse(m, n, d)?;
    Ok(TruncationSchedule {
        lambda: 4.0 * ((d as f64).ln() / n as f64).sqrt(),
        source: ScheduleSource::ExperimentDefault,
        ..base
    })
}

/// First-order low-rank SIM: `κ = 2 √(n log(d1+d2)) / √((d1+d2) M)`,
/// `λ = C √(M (d1+d2) log(d1+d2) / n)`.
pub fn schedule_first_lowrank(
    m: MomentBound,
    n: usize,
    d1: usize,
    d2: usize,
) -> Result<TruncationSchedule> {
    check_sizes(n, &[d1, d2])?;
    let (m, nf) = (m.value(), n as f64);
    let dsum = (d1 + d2) as f64;
    let ld = dsum.ln();
    Ok(TruncationSchedule {
        tau: None,
        kappa: Some(2.0 * (nf * ld).sqrt() / (dsum * m).sqrt()),
        lambda: DEFAULT_CONSTANT * (m * dsum * ld / nf).sqrt(),
        source: ScheduleSource::TheoremFormula,
    })
}

/// `κ = 2 √(log_term / (n · dsum · M))`: the influence scale that balances
/// the matrix deviation bound `exp(−κ t n + κ² n dsum M / 2)` at
/// `t = √(dsum M / n) · 2 √log_term`. `1/κ` grows like `√n`, so truncation
/// relaxes as the sample grows.
fn influence_scale(m: MomentBound, n: usize, dsum: f64, log_term: f64) -> f64 {
    2.0 * (log_term / (n as f64 * dsum * m.value())).sqrt()
}

/// Simulation setting for the low-rank SIM: `λ = 2 √((d1+d2) log(d1+d2) / n)`.
/// `κ` from [`influence_scale`] with `dsum = d1 + d2`.
pub fn experiment_first_lowrank(
    m: MomentBound,
    n: usize,
    d1: usize,
    d2: usize,
) -> Result<TruncationSchedule> {
    let base = schedule_first_lowrank(m, n, d1, d2)?;
    let dsum = (d1 + d2) as f64;
    Ok(TruncationSchedule {
        kappa: Some(influence_scale(m, n, dsum, dsum.ln())),
        lambda: 2.0 * (dsum * dsum.ln() / n as f64).sqrt(),
        source: ScheduleSource::ExperimentDefault,
        ..base
    })
}

/// Second-order SIM/MIM: `τ = (1.5 M n / log d)^{1/6}`, `λ = 10 √(M log d / n)`.
pub fn schedule_second(m: MomentBound, n: usize, d: usize) -> Result<TruncationSchedule> {
    check_sizes(n, &[d])?;
    let (m, nf, ld) = (m.value(), n as f64, (d as f64).ln());
    Ok(TruncationSchedule {
        tau: Some((1.5 * m * nf / ld).powf(1.0 / 6.0)),
        kappa: None,
        lambda: 10.0 * (m * ld / nf).sqrt(),
        source: ScheduleSource::TheoremFormula,
    })
}

/// Simulation setting for sparse phase retrieval: `λ = 4 √(log d / n)`, `τ = 20`.
pub fn experiment_second(n: usize, d: usize) -> Result<TruncationSchedule> {
    check_sizes(n, &[d])?;
    Ok(TruncationSchedule {
        tau: Some(20.0),
        kappa: None,
        lambda: 4.0 * ((d as f64).ln() / n as f64).sqrt(),
        source: ScheduleSource::ExperimentDefault,
    })
}

/// Tensor SIM on the square unfolding: `κ = 2 √(2 n log d) / √(2 d² M)`,
/// `λ = C √(2 M · 2d² · log d / n)`.
pub fn schedule_tensor(m: MomentBound, n: usize, d: usize) -> Result<TruncationSchedule> {
    check_sizes(n, &[d])?;
    let (m, nf, df) = (m.value(), n as f64, d as f64);
    let ld = df.ln();
    Ok(TruncationSchedule {
        tau: None,
        kappa: Some(2.0 * (2.0 * nf * ld).sqrt() / (2.0 * df * df * m).sqrt()),
        lambda: DEFAULT_CONSTANT * (2.0 * m * 2.0 * df * df * ld / nf).sqrt(),
        source: ScheduleSource::TheoremFormula,
    })
}

/// Tensor analogue of [`experiment_first_lowrank`] on the `d² x d²`
/// unfolding: `λ = 2 √(2d² log(2d²) / n)`, `κ` from [`influence_scale`]
/// with `dsum = 2d²` and log term `2 log d`.
pub fn experiment_tensor(m: MomentBound, n: usize, d: usize) -> Result<TruncationSchedule> {
    let base = schedule_tensor(m, n, d)?;
    let dsum = 2.0 * (d * d) as f64;
    Ok(TruncationSchedule {
        kappa: Some(influence_scale(m, n, dsum, 2.0 * (d as f64).ln())),
        lambda: 2.0 * (dsum * dsum.ln() / n as f64).sqrt(),
        source: ScheduleSource::ExperimentDefault,
        ..base
    })
}

/// Heavy-tailed sparse PCA: `τ = (C2 M n / log d)^{1/4}`, `λ = C1 √(M log d / n)`.
pub fn schedule_spca(m: MomentBound, n: usize, d: usize) -> Result<TruncationSchedule> {
    check_sizes(n, &[d])?;
    let (m, nf, ld) = (m.value(), n as f64, (d as f64).ln());
    Ok(TruncationSchedule {
        tau: Some((DEFAULT_CONSTANT * m * nf / ld).powf(0.25)),
        kappa: None,
        lambda: DEFAULT_CONSTANT * (m * ld / nf).sqrt(),
        source: ScheduleSource::TheoremFormula,
    })
}

/// `sign(y) * min(|y|, tau)`.
#[inline]
pub fn clip(y: f64, tau: f64) -> f64 {
    y.clamp(-tau, tau)
}

/// A truncated moment and how much truncation it took.
#[derive(Clone, Debug)]
pub struct TruncatedMoment {
    /// `p x 1` for first moments of vector data, otherwise the matrix.
    pub value: DMatrix<f64>,
    pub n_used: usize,
    /// Fraction of truncated quantities that actually hit their bound
    /// (for `ψ`: fraction of samples with `‖κ Y S(X)‖_op > 1`).
    pub clip_fraction: f64,
}

struct Partial {
    sum: Vec<f64>,
    clipped: usize,
    total: usize,
}

fn reduce(parts: Vec<Result<Partial>>, len: usize) -> Result<(Vec<f64>, usize, usize)> {
    let mut sum = vec![0.0; len];
    let (mut clipped, mut total) = (0, 0);
    for p in parts {
        let p = p?;
        sum.iter_mut().zip(&p.sum).for_each(|(a, b)| *a += b);
        clipped += p.clipped;
        total += p.total;
    }
    Ok((sum, clipped, total))
}

fn nonempty(data: &SimDataset) -> Result<()> {
    if data.n() == 0 {
        Err(Error::invalid("dataset has no samples"))
    } else {
        Ok(())
    }
}

fn fraction(clipped: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        clipped as f64 / total as f64
    }
}

pub fn truncated_first_moment(
    data: &SimDataset,
    model: &ScoreModel,
    tau: f64,
) -> Result<TruncatedMoment> {
    truncated_first_moment_sharded(data, model, tau, 1)
}

/// `(1/n) Σ clip(Y_i, τ) · clip(S(X_i), τ)` with the score clipped entrywise.
pub fn truncated_first_moment_sharded(
    data: &SimDataset,
    model: &ScoreModel,
    tau: f64,
    shards: usize,
) -> Result<TruncatedMoment> {
    check_positive("tau", tau)?;
    nonempty(data)?;
    let y = data.require_responses()?;
    let p = data.p();
    let parts = map_shards(data.n(), shards, |_, range| -> Result<Partial> {
        let mut part = Partial {
            sum: vec![0.0; p],
            clipped: 0,
            total: 0,
        };
        let mut s = vec![0.0; p];
        for i in range {
            score_into(model, data.row(i), &mut s)?;
            let yc = clip(y[i], tau);
            part.clipped += usize::from(y[i].abs() > tau);
            for (acc, &sj) in part.sum.iter_mut().zip(&s) {
                part.clipped += usize::from(sj.abs() > tau);
                *acc += yc * clip(sj, tau);
            }
            part.total += p + 1;
        }
        Ok(part)
    });
    let (sum, clipped, total) = reduce(parts, p)?;
    let nf = data.n() as f64;
    Ok(TruncatedMoment {
        value: DMatrix::from_iterator(p, 1, sum.into_iter().map(|v| v / nf)),
        n_used: data.n(),
        clip_fraction: fraction(clipped, total),
    })
}

/// Catoni-type influence function `ψ(x) = sign(x) log(1 + |x| + x²/2)`.
#[inline]
pub fn psi_catoni(x: f64) -> f64 {
    let a = x.abs();
    (a + 0.5 * a * a).ln_1p().copysign(x)
}

/// Symmetric dilation `[[0, A], [Aᵀ, 0]]`.
pub fn dilation(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (d1, d2) = a.shape();
    let mut m = DMatrix::zeros(d1 + d2, d1 + d2);
    m.view_mut((0, d1), (d1, d2)).copy_from(a);
    m.view_mut((d1, 0), (d2, d1)).copy_from(&a.transpose());
    m
}

/// `B = Υ ψ(Λ) Υᵀ` where `Υ Λ Υᵀ` is the eigendecomposition of the dilation
/// of `a`. Symmetric by construction.
pub fn psi_dilation(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("psi_matrix input has non-finite entries".into()));
    }
    let eig = sym_eig(&dilation(a))?;
    Ok(spectral_map(&eig, psi_catoni))
}

/// The upper-right `d1 x d2` block of [`psi_dilation`].
pub fn psi_matrix(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (d1, d2) = a.shape();
    Ok(psi_dilation(a)?.view((0, d1), (d1, d2)).into_owned())
}

fn matrix_dims(data: &SimDataset) -> Result<(usize, usize)> {
    match data.shape() {
        CovariateShape::Matrix(d1, d2) => Ok((d1, d2)),
        other => Err(Error::shape(format!("expected matrix covariates, got {other:?}"))),
    }
}

pub fn truncated_mean_matrix(
    data: &SimDataset,
    model: &ScoreModel,
    kappa: f64,
) -> Result<TruncatedMoment> {
    truncated_mean_matrix_sharded(data, model, kappa, 1)
}

/// `(1/n) Σ (1/κ) ψ(κ Y_i S(X_i))` for matrix covariates.
pub fn truncated_mean_matrix_sharded(
    data: &SimDataset,
    model: &ScoreModel,
    kappa: f64,
    shards: usize,
) -> Result<TruncatedMoment> {
    check_positive("kappa", kappa)?;
    if !kappa.is_finite() {
        return Err(Error::invalid("kappa must be finite; a small kappa approaches the untruncated mean"));
    }
    nonempty(data)?;
    let (d1, d2) = matrix_dims(data)?;
    let y = data.require_responses()?;
    let parts = map_shards(data.n(), shards, |_, range| -> Result<Partial> {
        let mut part = Partial {
            sum: vec![0.0; d1 * d2],
            clipped: 0,
            total: 0,
        };
        let mut s = vec![0.0; d1 * d2];
        for i in range {
            score_into(model, data.row(i), &mut s)?;
            part.total += 1;
            if y[i] == 0.0 {
                continue;
            }
            let scaled = DMatrix::from_row_slice(d1, d2, &s) * (kappa * y[i]);
            let psi = psi_matrix(&scaled)?;
            // ‖·‖_op > 1 means ψ moved some eigenvalue noticeably
            if scaled.norm() > 1.0 && crate::spectral::operator_norm(&scaled)? > 1.0 {
                part.clipped += 1;
            }
            // accumulate in row-major order to match the covariate layout
            for r in 0..d1 {
                for c in 0..d2 {
                    part.sum[r * d2 + c] += psi[(r, c)] / kappa;
                }
            }
        }
        Ok(part)
    });
    let (sum, clipped, total) = reduce(parts, d1 * d2)?;
    let nf = data.n() as f64;
    Ok(TruncatedMoment {
        value: DMatrix::from_row_iterator(d1, d2, sum.into_iter().map(|v| v / nf)),
        n_used: data.n(),
        clip_fraction: fraction(clipped, total),
    })
}

fn vector_dim(data: &SimDataset) -> Result<usize> {
    match data.shape() {
        CovariateShape::Vector(d) => Ok(d),
        other => Err(Error::shape(format!("expected vector covariates, got {other:?}"))),
    }
}

fn mirror_upper(d: usize, upper: &[f64], scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        for k in j..d {
            let v = upper[j * d + k] * scale;
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
    m
}

pub fn truncated_second_moment(
    data: &SimDataset,
    model: &ScoreModel,
    tau: f64,
) -> Result<TruncatedMoment> {
    truncated_second_moment_sharded(data, model, tau, 1)
}

/// `Σ̃ = (1/n) Σ clip(Y_i, τ) · clip(T(X_i), τ²)` with `T` clipped entrywise.
pub fn truncated_second_moment_sharded(
    data: &SimDataset,
    model: &ScoreModel,
    tau: f64,
    shards: usize,
) -> Result<TruncatedMoment> {
    check_positive("tau", tau)?;
    nonempty(data)?;
    let d = vector_dim(data)?;
    let y = data.require_responses()?;
    let tau2 = tau * tau;
    let parts = map_shards(data.n(), shards, |_, range| -> Result<Partial> {
        let mut part = Partial {
            sum: vec![0.0; d * d],
            clipped: 0,
            total: 0,
        };
        let mut s = vec![0.0; d];
        let mut ds = vec![0.0; d];
        for i in range {
            let x = data.row(i);
            score_into(model, x, &mut s)?;
            score_deriv_into(model, x, &mut ds)?;
            let yc = clip(y[i], tau);
            part.clipped += usize::from(y[i].abs() > tau);
            for j in 0..d {
                let row = &mut part.sum[j * d..(j + 1) * d];
                let sj = s[j];
                let diag = sj * sj - ds[j];
                part.clipped += usize::from(diag.abs() > tau2);
                row[j] += yc * clip(diag, tau2);
                for k in j + 1..d {
                    let t = sj * s[k];
                    part.clipped += usize::from(t.abs() > tau2);
                    row[k] += yc * clip(t, tau2);
                }
            }
            part.total += 1 + d * (d + 1) / 2;
        }
        Ok(part)
    });
    let (sum, clipped, total) = reduce(parts, d * d)?;
    Ok(TruncatedMoment {
        value: mirror_upper(d, &sum, 1.0 / data.n() as f64),
        n_used: data.n(),
        clip_fraction: fraction(clipped, total),
    })
}

pub fn truncated_covariance(data: &SimDataset, tau: f64) -> Result<TruncatedMoment> {
    truncated_covariance_sharded(data, tau, 1)
}

/// `Σ̄ = (1/n) Σ X̄_i X̄_iᵀ` with `X̄ = clip(X, τ)` entrywise. Responses,
/// if present, are ignored.
pub fn truncated_covariance_sharded(
    data: &SimDataset,
    tau: f64,
    shards: usize,
) -> Result<TruncatedMoment> {
    check_positive("tau", tau)?;
    nonempty(data)?;
    let d = vector_dim(data)?;
    let parts = map_shards(data.n(), shards, |_, range| -> Result<Partial> {
        let mut part = Partial {
            sum: vec![0.0; d * d],
            clipped: 0,
            total: 0,
        };
        let mut xc = vec![0.0; d];
        for i in range {
            for (c, &x) in xc.iter_mut().zip(data.row(i)) {
                part.clipped += usize::from(x.abs() > tau);
                *c = clip(x, tau);
            }
            part.total += d;
            for j in 0..d {
                let row = &mut part.sum[j * d..(j + 1) * d];
                let xj = xc[j];
                for k in j..d {
                    row[k] += xj * xc[k];
                }
            }
        }
        Ok(part)
    });
    let (sum, clipped, total) = reduce(parts, d * d)?;
    Ok(TruncatedMoment {
        value: mirror_upper(d, &sum, 1.0 / data.n() as f64),
        n_used: data.n(),
        clip_fraction: fraction(clipped, total),
    })
}
