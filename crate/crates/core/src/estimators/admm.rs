use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{fantope_project, leading_eigvecs, soft_threshold, FantopeMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmmOptions {
    /// Initial penalty.
    pub rho: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Residual balancing: doubles `ρ` when the primal residual exceeds ten
    /// times the dual one and halves it in the opposite case.
    pub adaptive_rho: bool,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        AdmmOptions {
            rho: 1.0,
            tol: 1e-6,
            max_iter: 5000,
            adaptive_rho: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    /// `‖W − Z‖_F`
    pub primal: f64,
    /// `ρ ‖Z − Z_prev‖_F`
    pub dual: f64,
}

impl Residual {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual)
    }
}

#[derive(Clone, Debug)]
pub struct FantopeSolution {
    /// The Fantope-feasible iterate; on nonconvergence, the one with the
    /// smallest residual seen.
    pub w: FantopeMatrix,
    /// Top-`k` eigenvectors of `w`.
    pub extracted: DMatrix<f64>,
    pub residuals: Vec<Residual>,
    pub iterations: usize,
    pub converged: bool,
    /// `⟨W, Σ⟩ − λ‖W‖₁` at `w`.
    pub objective: f64,
}

/// `⟨W, Σ⟩ − λ Σ_ij |W_ij|`.
pub fn fantope_objective(w: &DMatrix<f64>, sigma: &DMatrix<f64>, lambda: f64) -> f64 {
    w.dot(sigma) - lambda * w.lp_norm(1)
}

/// Scaled-form ADMM for `max ⟨W, Σ⟩ − λ‖W‖₁` over the rank-`k` Fantope,
/// splitting `W` (Fantope) from `Z` (ℓ₁ prox) with scaled dual `U`.
pub fn admm_fantope(sigma: &DMatrix<f64>, lambda: f64, k: usize, opts: AdmmOptions) -> Result<FantopeSolution> {
    if !sigma.is_square() || sigma.nrows() == 0 {
        return Err(Error::shape(format!("Sigma must be square and nonempty, got {:?}", sigma.shape())));
    }
    if !(opts.rho > 0.0 && opts.rho.is_finite()) {
        return Err(Error::invalid(format!("rho must be positive, got {}", opts.rho)));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::invalid(format!("tol must be positive, got {}", opts.tol)));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    if opts.max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    let d = sigma.nrows();
    let mut rho = opts.rho;
    let mut z = DMatrix::zeros(d, d);
    let mut u = DMatrix::zeros(d, d);
    let mut residuals = Vec::new();
    let mut best: Option<(f64, FantopeMatrix)> = None;
    let mut converged = false;
    for it in 0..opts.max_iter {
        let w = fantope_project(&(&z - &u + sigma / rho), k)?;
        let z_next = soft_threshold(&(&w.w + &u), lambda / rho);
        let r = Residual {
            primal: (&w.w - &z_next).norm(),
            dual: rho * (&z_next - &z).norm(),
        };
        u += &w.w - &z_next;
        z = z_next;
        residuals.push(r);
        if best.as_ref().is_none_or(|(b, _)| r.max() <= *b) {
            best = Some((r.max(), w));
        }
        if r.max() <= opts.tol {
            converged = true;
            break;
        }
        if opts.adaptive_rho && it % 10 == 9 {
            // U is scaled by 1/ρ, so it is rescaled along with ρ
            if r.primal > 10.0 * r.dual {
                rho *= 2.0;
                u /= 2.0;
            } else if r.dual > 10.0 * r.primal {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }
    let (_, w) = best.expect("at least one iteration ran");
    let extracted = leading_eigvecs(&w.w, k)?;
    let objective = fantope_objective(&w.w, sigma, lambda);
    Ok(FantopeSolution {
        iterations: residuals.len(),
        w,
        extracted,
        residuals,
        converged,
        objective,
    })
}
