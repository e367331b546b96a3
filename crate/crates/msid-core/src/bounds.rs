//! Finite-sample concentration radii for the line FRF estimate and for
//! parametric estimates built from it.
//!
//! The radii combine a Gaussian norm tail with the smallest excitation power
//! over the stacked lines; the parameter radius additionally divides by a
//! local lower bound `β σ_min(J(θ₀))` of the parameter-to-FRF map and is
//! therefore conditional on the estimate staying inside the ball where that
//! bound holds.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::ParametricStructure;
use crate::multisine::{AmplitudeMatrices, LineSet};

/// Inputs shared by the bound computations.
#[derive(Debug, Clone)]
pub struct BoundInputs<'a> {
    /// Noise covariance `Σ` (`n_y × n_y`).
    pub sigma: &'a DMatrix<f64>,
    /// Stacked amplitude matrices of the design.
    pub amps: &'a AmplitudeMatrices,
    /// Sample count per experiment.
    pub n: usize,
    /// Confidence level parameter `δ ∈ (0, 1]`.
    pub delta: f64,
    /// `σ_min(J(θ₀))`, required for the parameter radius.
    pub sigma_min_j0: Option<f64>,
    /// Bi-Lipschitz margin `β ∈ (0, 1)`, required for the parameter radius.
    pub beta: Option<f64>,
}

impl BoundInputs<'_> {
    fn validate(&self) -> Result<()> {
        if self.n <= 2 * self.amps.m_lines() {
            return Err(Error::TooFewSamples {
                n: self.n,
                lines: 2 * self.amps.m_lines() + 1,
            });
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        Ok(())
    }

    fn dims(&self) -> (usize, usize, usize) {
        let n_y = self.sigma.nrows();
        let n_u = self.amps.n_u();
        let lines = 2 * self.amps.m_lines() + 1;
        (n_y, n_u, lines)
    }
}

/// Norm tail radius of an `m`-dimensional standard complex Gaussian:
/// `√(2 log(2/δ)) + √m`; the norm exceeds it with probability at most `δ`.
pub fn gaussian_tail_radius(m: usize, delta: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    Ok((2.0 * (2.0 / delta).ln()).sqrt() + (m as f64).sqrt())
}

/// Smallest eigenvalue of `A_ℓᴴ A_ℓ` over all stacked lines, with `A₀ᵀ A₀`
/// for the DC line. Errors when any line carries no excitation power.
pub fn min_line_gram_eigenvalue(amps: &AmplitudeMatrices) -> Result<f64> {
    let mut min = f64::INFINITY;
    for ell in 0..=amps.m_lines() {
        let a = amps.line(ell);
        let gram = a.adjoint() * &a;
        let lam = linalg::herm_eig_min(&gram);
        if lam <= 0.0 {
            return Err(Error::RankCondition(format!(
                "amplitude matrix {ell} has no excitation power (lambda_min = {lam:.3e})"
            )));
        }
        min = min.min(lam);
    }
    Ok(min)
}

/// High-probability radius for the Frobenius error of the fitted FRF at the
/// excited lines:
/// `2 √(λ_max(Σ) / (N min_ℓ λ_min(A_ℓᴴA_ℓ))) (√(2 log(2/δ)) + √(n_u n_y (2M+1)))`.
pub fn frf_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let (n_y, n_u, lines) = inputs.dims();
    let lam_sigma = linalg::sym_eig_max(inputs.sigma);
    let lam_min = min_line_gram_eigenvalue(inputs.amps)?;
    let tail = gaussian_tail_radius(n_u * n_y * lines, inputs.delta)?;
    Ok(2.0 * (lam_sigma / (inputs.n as f64 * lam_min)).sqrt() * tail)
}

/// Conditional high-probability radius for the parameter error:
/// [`frf_bound`] divided by `β σ_min(J(θ₀))`. Valid on the event that the
/// estimate stays in the ball where
/// `‖J(θ) - J(θ₀)‖ ≤ (1-β) σ_min(J(θ₀))`.
pub fn theta_bound(inputs: &BoundInputs) -> Result<f64> {
    let sigma_min = inputs.sigma_min_j0.ok_or_else(|| {
        Error::InvalidArgument("sigma_min_j0 required for the parameter radius".into())
    })?;
    let beta = inputs
        .beta
        .ok_or_else(|| Error::InvalidArgument("beta required for the parameter radius".into()))?;
    if sigma_min.is_nan() || sigma_min <= 0.0 {
        return Err(Error::InvalidArgument("sigma_min_j0 must be positive".into()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    Ok(frf_bound(inputs)? / (beta * sigma_min))
}

/// Mean-squared-error bound for the fitted FRF at the excited lines:
/// `(4/N) λ_max(Σ) / min_ℓ λ_min(A_ℓᴴA_ℓ) (B² + 2√(2π) B + 4)` with
/// `B = √(n_u n_y (2M+1))`.
pub fn frf_mse_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let (n_y, n_u, lines) = inputs.dims();
    let lam_sigma = linalg::sym_eig_max(inputs.sigma);
    let lam_min = min_line_gram_eigenvalue(inputs.amps)?;
    let b = ((n_u * n_y * lines) as f64).sqrt();
    Ok(4.0 / inputs.n as f64 * lam_sigma / lam_min
        * (b * b + 2.0 * (2.0 * std::f64::consts::PI).sqrt() * b + 4.0))
}

/// All radii at once, for reporting.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub frf_radius: f64,
    pub theta_radius: Option<f64>,
    pub mse_bound: f64,
    pub gaussian_tail_radius: f64,
    pub delta: f64,
    pub n: usize,
}

pub fn bound_report(inputs: &BoundInputs) -> Result<BoundReport> {
    let (n_y, n_u, lines) = inputs.dims();
    let theta_radius = match (inputs.sigma_min_j0, inputs.beta) {
        (Some(_), Some(_)) => Some(theta_bound(inputs)?),
        _ => None,
    };
    Ok(BoundReport {
        frf_radius: frf_bound(inputs)?,
        theta_radius,
        mse_bound: frf_mse_bound(inputs)?,
        gaussian_tail_radius: gaussian_tail_radius(n_u * n_y * lines, inputs.delta)?,
        delta: inputs.delta,
        n: inputs.n,
    })
}

/// Outcome of the local Jacobian-deviation check.
#[derive(Debug, Clone, Copy)]
pub struct BiLipschitzReport {
    /// `‖J(θ̂) - J(θ₀)‖` in spectral norm.
    pub jacobian_gap: f64,
    /// `σ_min(J(θ₀))`.
    pub sigma_min_j0: f64,
    /// Whether the gap stays within `(1-β) σ_min(J(θ₀))`.
    pub in_ball: bool,
}

/// Evaluates the conditioning event of the parameter radius: the Jacobian at
/// the estimate must deviate from the one at the truth by at most
/// `(1-β) σ_min(J(θ₀))` in spectral norm.
pub fn bi_lipschitz_check<S: ParametricStructure + ?Sized>(
    structure: &S,
    lines: &LineSet,
    theta0: &DVector<f64>,
    theta_hat: &DVector<f64>,
    beta: f64,
) -> Result<BiLipschitzReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    let j0 = structure.jacobian(theta0, lines)?;
    let jh = structure.jacobian(theta_hat, lines)?;
    let jacobian_gap = linalg::spectral_norm(&(&jh - &j0));
    let sigma_min_j0 = linalg::min_singular_value(&j0);
    Ok(BiLipschitzReport {
        jacobian_gap,
        sigma_min_j0,
        in_ball: jacobian_gap <= (1.0 - beta) * sigma_min_j0,
    })
}

/// Conservative relaxation of `σ_min(J(θ₀))`: the smallest value over a
/// caller-supplied grid of parameter points.
pub fn min_sigma_min_over<S: ParametricStructure + ?Sized>(
    structure: &S,
    lines: &LineSet,
    thetas: &[DVector<f64>],
) -> Result<f64> {
    if thetas.is_empty() {
        return Err(Error::InvalidArgument("empty parameter grid".into()));
    }
    let mut min = f64::INFINITY;
    for theta in thetas {
        let j = structure.jacobian(theta, lines)?;
        min = min.min(linalg::min_singular_value(&j));
    }
    Ok(min)
}
