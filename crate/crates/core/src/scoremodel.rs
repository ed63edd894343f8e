//! Univariate covariate distributions and their score functions.
//!
//! Every covariate entry is drawn i.i.d. from a [`ScoreModel`]. The score is
//! `s0(x) = -p0'(x) / p0(x) = -(d/dx) log p0(x)`, so that the multivariate
//! score `S(x) = s0∘(x)` satisfies `E[g(X) S(X)] = E[∇g(X)]`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StudentT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Open interval `(lower, upper)` on which a density is positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Support {
    pub lower: f64,
    pub upper: f64,
}

impl Support {
    pub const REAL_LINE: Support = Support {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };
    pub const POSITIVE: Support = Support {
        lower: 0.0,
        upper: f64::INFINITY,
    };

    pub fn contains(&self, x: f64) -> bool {
        x.is_finite() && x > self.lower && x < self.upper
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type SamplerFn = Arc<dyn Fn(&mut dyn rand::RngCore) -> f64 + Send + Sync>;

/// A user-supplied model given by function values. No differentiation is
/// performed: the caller provides `s0` and `s0'` directly.
#[derive(Clone)]
pub struct CustomModel {
    pub name: String,
    pub support: Support,
    density: ScalarFn,
    score: ScalarFn,
    score_deriv: ScalarFn,
    sampler: Option<SamplerFn>,
}

impl CustomModel {
    pub fn new(
        name: impl Into<String>,
        support: Support,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        score: impl Fn(f64) -> f64 + Send + Sync + 'static,
        score_deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CustomModel {
            name: name.into(),
            support,
            density: Arc::new(density),
            score: Arc::new(score),
            score_deriv: Arc::new(score_deriv),
            sampler: None,
        }
    }

    pub fn with_sampler(
        mut self,
        sampler: impl Fn(&mut dyn rand::RngCore) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.sampler = Some(Arc::new(sampler));
        self
    }
}

impl fmt::Debug for CustomModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomModel")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("has_sampler", &self.sampler.is_some())
            .finish()
    }
}

/// Distribution of a single covariate entry.
#[derive(Clone, Debug)]
pub enum ScoreModel {
    Gaussian { mean: f64, stddev: f64 },
    Gamma { shape: f64, scale: f64 },
    StudentT { dof: f64 },
    Rayleigh { scale: f64 },
    Custom(Arc<CustomModel>),
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ScoreModel {
    pub fn gaussian(mean: f64, stddev: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::invalid("gaussian mean must be finite"));
        }
        Ok(ScoreModel::Gaussian {
            mean,
            stddev: positive("gaussian stddev", stddev)?,
        })
    }

    pub fn standard_gaussian() -> Self {
        ScoreModel::Gaussian {
            mean: 0.0,
            stddev: 1.0,
        }
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        Ok(ScoreModel::Gamma {
            shape: positive("gamma shape", shape)?,
            scale: positive("gamma scale", scale)?,
        })
    }

    pub fn student_t(dof: f64) -> Result<Self> {
        Ok(ScoreModel::StudentT {
            dof: positive("student-t degrees of freedom", dof)?,
        })
    }

    pub fn rayleigh(scale: f64) -> Result<Self> {
        Ok(ScoreModel::Rayleigh {
            scale: positive("rayleigh scale", scale)?,
        })
    }

    pub fn custom(model: CustomModel) -> Self {
        ScoreModel::Custom(Arc::new(model))
    }

    pub fn support(&self) -> Support {
        match self {
            ScoreModel::Gaussian { .. } | ScoreModel::StudentT { .. } => Support::REAL_LINE,
            ScoreModel::Gamma { .. } | ScoreModel::Rayleigh { .. } => Support::POSITIVE,
            ScoreModel::Custom(c) => c.support,
        }
    }

    /// `log p0(x)`; `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        if !self.support().contains(x) {
            return f64::NEG_INFINITY;
        }
        match *self {
            ScoreModel::Gaussian { mean, stddev } => {
                let z = (x - mean) / stddev;
                -0.5 * z * z - stddev.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            ScoreModel::Gamma { shape, scale } => {
                (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
            }
            ScoreModel::StudentT { dof } => {
                ln_gamma(0.5 * (dof + 1.0))
                    - ln_gamma(0.5 * dof)
                    - 0.5 * (dof * std::f64::consts::PI).ln()
                    - 0.5 * (dof + 1.0) * (x * x / dof).ln_1p()
            }
            ScoreModel::Rayleigh { scale } => {
                x.ln() - 2.0 * scale.ln() - x * x / (2.0 * scale * scale)
            }
            ScoreModel::Custom(ref c) => (c.density)(x).ln(),
        }
    }

    /// `p0(x)`, zero outside the support.
    pub fn density(&self, x: f64) -> f64 {
        if !x.is_finite() || !self.support().contains(x) {
            return 0.0;
        }
        match self {
            ScoreModel::Custom(c) => (c.density)(x).max(0.0),
            _ => self.log_density(x).exp(),
        }
    }

    fn check_interior(&self, x: f64) -> Result<()> {
        let s = self.support();
        if s.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                x,
                lower: s.lower,
                upper: s.upper,
            })
        }
    }

    /// `s0(x) = -(log p0)'(x)`. Errors at or outside the support boundary.
    pub fn score1(&self, x: f64) -> Result<f64> {
        self.check_interior(x)?;
        Ok(self.score1_unchecked(x))
    }

    /// `s0'(x)`. Errors at or outside the support boundary.
    pub fn score1_deriv(&self, x: f64) -> Result<f64> {
        self.check_interior(x)?;
        Ok(self.score1_deriv_unchecked(x))
    }

    pub(crate) fn score1_unchecked(&self, x: f64) -> f64 {
        match *self {
            ScoreModel::Gaussian { mean, stddev } => (x - mean) / (stddev * stddev),
            ScoreModel::Gamma { shape, scale } => 1.0 / scale - (shape - 1.0) / x,
            ScoreModel::StudentT { dof } => (dof + 1.0) * x / (dof + x * x),
            ScoreModel::Rayleigh { scale } => x / (scale * scale) - 1.0 / x,
            ScoreModel::Custom(ref c) => (c.score)(x),
        }
    }

    pub(crate) fn score1_deriv_unchecked(&self, x: f64) -> f64 {
        match *self {
            ScoreModel::Gaussian { stddev, .. } => 1.0 / (stddev * stddev),
            ScoreModel::Gamma { shape, .. } => (shape - 1.0) / (x * x),
            ScoreModel::StudentT { dof } => {
                let q = dof + x * x;
                (dof + 1.0) * (dof - x * x) / (q * q)
            }
            ScoreModel::Rayleigh { scale } => 1.0 / (scale * scale) + 1.0 / (x * x),
            ScoreModel::Custom(ref c) => (c.score_deriv)(x),
        }
    }

    /// Draws one value from `rng`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match *self {
            ScoreModel::Gaussian { mean, stddev } => Normal::new(mean, stddev)
                .map_err(|e| Error::invalid(e.to_string()))?
                .sample(rng),
            ScoreModel::Gamma { shape, scale } => Gamma::new(shape, scale)
                .map_err(|e| Error::invalid(e.to_string()))?
                .sample(rng),
            ScoreModel::StudentT { dof } => StudentT::new(dof)
                .map_err(|e| Error::invalid(e.to_string()))?
                .sample(rng),
            ScoreModel::Rayleigh { scale } => {
                // inverse CDF on (0, 1]
                let u: f64 = 1.0 - rng.random::<f64>();
                scale * (-2.0 * u.ln()).sqrt()
            }
            ScoreModel::Custom(ref c) => {
                let sampler = c
                    .sampler
                    .as_ref()
                    .ok_or_else(|| Error::NoSampler(c.name.clone()))?;
                let mut adapter = RngAdapter(rng);
                sampler(&mut adapter)
            }
        })
    }

    /// Fills `out` with i.i.d. draws from `rng`.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        match *self {
            ScoreModel::Gaussian { mean, stddev } => {
                let dist = Normal::new(mean, stddev).map_err(|e| Error::invalid(e.to_string()))?;
                out.iter_mut().for_each(|v| *v = dist.sample(rng));
            }
            ScoreModel::Gamma { shape, scale } => {
                let dist = Gamma::new(shape, scale).map_err(|e| Error::invalid(e.to_string()))?;
                out.iter_mut().for_each(|v| *v = dist.sample(rng));
            }
            ScoreModel::StudentT { dof } => {
                let dist = StudentT::new(dof).map_err(|e| Error::invalid(e.to_string()))?;
                out.iter_mut().for_each(|v| *v = dist.sample(rng));
            }
            _ => {
                for v in out.iter_mut() {
                    *v = self.draw(rng)?;
                }
            }
        }
        Ok(())
    }

    /// `n` i.i.d. draws, deterministic in `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Result<Vec<f64>> {
        let mut rng = rng_from_seed(seed);
        let mut out = vec![0.0; n];
        self.fill(&mut rng, &mut out)?;
        Ok(out)
    }
}

struct RngAdapter<'a, R: ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> rand::RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

impl fmt::Display for ScoreModel {
    /// Formats as the spec string accepted by [`FromStr`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreModel::Gaussian { mean, stddev } => write!(f, "gaussian:{mean},{stddev}"),
            ScoreModel::Gamma { shape, scale } => write!(f, "gamma:{shape},{scale}"),
            ScoreModel::StudentT { dof } => write!(f, "t:{dof}"),
            ScoreModel::Rayleigh { scale } => write!(f, "rayleigh:{scale}"),
            ScoreModel::Custom(c) => write!(f, "custom:{}", c.name),
        }
    }
}

impl FromStr for ScoreModel {
    type Err = Error;

    /// Parses `gaussian:0,1`, `gamma:5,1`, `t:5`, `rayleigh:2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::DistSpec(s.to_string());
        let (name, params) = s.trim().split_once(':').ok_or_else(bad)?;
        let params: Vec<f64> = params
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (name.trim().to_ascii_lowercase().as_str(), params.as_slice()) {
            ("gaussian" | "normal", [m, sd]) => ScoreModel::gaussian(*m, *sd),
            ("gamma", [k, theta]) => ScoreModel::gamma(*k, *theta),
            ("t" | "student-t" | "studentt", [nu]) => ScoreModel::student_t(*nu),
            ("rayleigh", [sigma]) => ScoreModel::rayleigh(*sigma),
            _ => Err(bad()),
        }
    }
}

/// Upper bound `M` on the fourth (first-order) or sixth (second-order)
/// moments of the response and the score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentBound(f64);

impl MomentBound {
    pub fn new(m: f64) -> Result<Self> {
        Ok(MomentBound(positive("moment bound M", m)?))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for MomentBound {
    fn default() -> Self {
        MomentBound(1.0)
    }
}
