//! Parametric estimation from the line FRF estimate.
//!
//! Three routes to the same optimum are provided: the covariance-weighted
//! frequency-domain cost, its explicit trace form for leakage-free records,
//! and the time-domain prediction-error cost — the three differ only by a
//! data constant, so they share minimizers. Under- and fully-constrained
//! matrix fraction models are fitted in closed form by rational
//! interpolation; overconstrained ones by damped Gauss-Newton iterations on
//! the weighted frequency-domain residual. A linear Levy-style fit is
//! included as a baseline; it is not the weighted optimum in the
//! overconstrained case.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{FrfStack, LmfdStructure, ParametricStructure};
use crate::multisine::{AmplitudeMatrices, ExcitationDesign, Line, LineSet};
use crate::rng::derive_rng;
use crate::sim::Dataset;

/// How a fit terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    /// Solved by linear algebra, no iterations.
    ClosedForm,
    /// Iterations met the cost or gradient tolerance.
    Converged,
    /// Iteration limit reached.
    MaxIter,
}

/// Result of a parametric fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: DVector<f64>,
    /// Achieved cost: the weighted frequency-domain cost for iterative fits,
    /// the unweighted squared interpolation residual for closed-form ones
    /// (zero up to rounding when the interpolation conditions are met).
    pub cost: f64,
    pub status: FitStatus,
    /// Orthonormal basis of the solution set's direction space, present for
    /// closed-form fits: every `θ̂ + K L` satisfies the same interpolation
    /// conditions (columnwise per output).
    pub kernel: Option<DMatrix<f64>>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Covariance-weighted frequency-domain cost
/// `‖vec(Ĝ - 𝒢(θ))‖²` in the metric of `cov⁻¹`.
pub fn cost_ml<S: ParametricStructure + ?Sized>(
    gms: &FrfStack,
    cov: &DMatrix<Complex64>,
    structure: &S,
    theta: &DVector<f64>,
) -> Result<f64> {
    let model_stack = structure.frf_stack_at(theta, gms.lines())?;
    let e = linalg::vec_of(&(gms.values() - model_stack.values()));
    let dim = e.len();
    if cov.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {:?}, expected {dim} x {dim}",
            cov.shape()
        )));
    }
    let e_mat = DMatrix::from_column_slice(dim, 1, e.as_slice());
    let x = linalg::hpd_solve(cov, &e_mat, "estimate covariance")?;
    let q = (e_mat.adjoint() * x)[(0, 0)];
    Ok(q.re)
}

/// Explicit trace form of the weighted cost for leakage-free records,
/// `N tr{Σ⁻¹ [G̃(0) A₀ᵀA₀ G̃ᵀ(0) + 2 Σ_ℓ Re{G̃(iω_ℓ) conj(A_ℓᴴA_ℓ) G̃ᴴ(iω_ℓ)}]}`,
/// scaled to equal [`cost_ml`] exactly.
pub fn cost_explicit<S: ParametricStructure + ?Sized>(
    gms: &FrfStack,
    amps: &AmplitudeMatrices,
    sigma: &DMatrix<f64>,
    structure: &S,
    theta: &DVector<f64>,
    n: usize,
) -> Result<f64> {
    let lines = gms.lines();
    let model_stack = structure.frf_stack_at(theta, lines)?;
    let sigma_inv = linalg::hpd_inverse(&linalg::to_complex(sigma), "noise covariance")?;
    let mut acc = 0.0;
    if lines.include_dc() {
        let diff = gms.g_at(0) - model_stack.g_at(0);
        let gram = linalg::to_complex(&(amps.a0.transpose() * &amps.a0));
        acc += (&sigma_inv * &diff * gram * diff.adjoint()).trace().re;
    }
    for ell in 0..lines.grid().len() {
        let j = lines.pos_index(ell);
        let diff = gms.g_at(j) - model_stack.g_at(j);
        let gram = (amps.a[ell].adjoint() * &amps.a[ell]).map(|z| z.conj());
        let term = (&sigma_inv * &diff * gram * diff.adjoint()).trace();
        acc += 2.0 * term.re;
    }
    Ok(n as f64 * acc)
}

/// Time-domain prediction-error cost
/// `Σ_i Σ_k ‖y_i(kh) - ŷ_i(kh, θ)‖²_{Σ⁻¹}` with the steady-state predictor
/// `ŷ = G(0,θ) a₀ + Σ_ℓ Re{G(iω_ℓ,θ) (a_ℓ ⊙ e^{iφ_ℓ}) e^{iω_ℓ kh}}`.
pub fn pem_cost_time<S: ParametricStructure + ?Sized>(
    dataset: &Dataset,
    structure: &S,
    theta: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<f64> {
    let design = dataset.design();
    let n_y = dataset.n_y();
    let sigma_inv = linalg::hpd_inverse(&linalg::to_complex(sigma), "noise covariance")?;
    let sigma_inv = sigma_inv.map(|z| z.re);
    let grid = design.grid();
    // One full-stack evaluation gives G(0) and all G(i omega_l).
    let full = LineSet::with_dc(grid.clone());
    let stack = structure.frf_stack_at(theta, &full)?;
    let g_dc = stack.g_at(0).map(|z| z.re);
    let g_pos: Vec<DMatrix<Complex64>> =
        (0..grid.len()).map(|ell| stack.g_at(full.pos_index(ell))).collect();

    let mut cost = 0.0;
    for (i, e) in design.experiments().iter().enumerate() {
        // Complex output phasor per line: G(iw) (a ⊙ e^{i phi}).
        let base = &g_dc * &e.offset;
        let phasors: Vec<DVector<Complex64>> = (0..grid.len())
            .map(|ell| {
                let amp = DVector::from_fn(design.n_u(), |p, _| {
                    Complex64::from_polar(e.amplitudes[(ell, p)], e.phases[(ell, p)])
                });
                &g_pos[ell] * amp
            })
            .collect();
        for k in 1..=dataset.n() {
            let t = k as f64 * design.h();
            let mut pred = base.clone();
            for (ell, &w) in grid.omegas().iter().enumerate() {
                let rot = Complex64::new(0.0, w * t).exp();
                for q in 0..n_y {
                    pred[q] += (phasors[ell][q] * rot).re;
                }
            }
            let resid = DVector::from_fn(n_y, |q, _| dataset.outputs()[i][(k - 1, q)] - pred[q]);
            cost += (resid.transpose() * &sigma_inv * &resid)[(0, 0)];
        }
    }
    Ok(cost)
}

/// Closed-form first-order fit from a single FRF value:
/// `â₁ = -Im{Ĝ} / (ω₁ Re{Ĝ})`, `b̂₀ = |Ĝ|² / Re{Ĝ}`.
pub fn fit_first_order(g: Complex64, omega1: f64) -> Result<(f64, f64)> {
    if omega1.is_nan() || omega1 <= 0.0 {
        return Err(Error::InvalidArgument("omega1 must be positive".into()));
    }
    if g.re == 0.0 || !g.is_finite() {
        return Err(Error::InvalidArgument(
            "vanishing real part: first-order fit undefined".into(),
        ));
    }
    Ok((-g.im / (omega1 * g.re), g.norm_sqr() / g.re))
}

/// First-order fit with an enforced zero at DC, `G(p) = b₁ p / (a₁ p + 1)`:
/// `â₁ = Re{Ĝ} / (ω₁ Im{Ĝ})`, `b̂₁ = |Ĝ|² / (ω₁ Im{Ĝ})`.
pub fn fit_first_order_zero_dc(g: Complex64, omega1: f64) -> Result<(f64, f64)> {
    if omega1.is_nan() || omega1 <= 0.0 {
        return Err(Error::InvalidArgument("omega1 must be positive".into()));
    }
    if g.im == 0.0 || !g.is_finite() {
        return Err(Error::InvalidArgument(
            "vanishing imaginary part: zero-at-DC fit undefined".into(),
        ));
    }
    Ok((g.re / (omega1 * g.im), g.norm_sqr() / (omega1 * g.im)))
}

/// The linear interpolation system `J Θ = Ĝ` of a matrix fraction fit:
/// column blocks `-Ω Ĝ, ..., -Ω^{n_D} Ĝ, ℐ, Ω ℐ, ..., Ω^{n_N} ℐ` with
/// `Ω = diag(i s_j) ⊗ I`.
pub struct InterpolationSystem {
    pub j: DMatrix<Complex64>,
    /// `i s_j` per stacked line.
    pub line_values: Vec<Complex64>,
}

/// Builds the interpolation system for an LMFD structure over the stack's
/// line set.
pub fn interpolation_system(gms: &FrfStack, n_d: usize, n_n: usize) -> InterpolationSystem {
    let lines = gms.lines();
    let (l, n_u, n_y) = (lines.len(), gms.n_u(), gms.n_y());
    let rows = l * n_u;
    let cols = n_d * n_y + (n_n + 1) * n_u;
    let line_values: Vec<Complex64> = lines
        .signed_omegas()
        .iter()
        .map(|&s| Complex64::new(0.0, s))
        .collect();
    let mut j = DMatrix::zeros(rows, cols);
    for (jl, &s) in line_values.iter().enumerate() {
        // Powers of s for this line.
        let maxdeg = n_d.max(n_n);
        let mut pow = Vec::with_capacity(maxdeg + 1);
        pow.push(Complex64::new(1.0, 0.0));
        for _ in 0..maxdeg {
            pow.push(pow.last().unwrap() * s);
        }
        // Denominator blocks: -s^k * (block row of the estimate).
        for k in 1..=n_d {
            let block = gms.values().rows(jl * n_u, n_u);
            for p in 0..n_u {
                for c in 0..n_y {
                    j[(jl * n_u + p, (k - 1) * n_y + c)] = -pow[k] * block[(p, c)];
                }
            }
        }
        // Numerator blocks: s^k * I.
        for k in 0..=n_n {
            for p in 0..n_u {
                j[(jl * n_u + p, n_d * n_y + k * n_u + p)] = pow[k];
            }
        }
    }
    InterpolationSystem { j, line_values }
}

/// Closed-form matrix-fraction fit by rational interpolation of the line FRF
/// estimate, for under- and fully-constrained structures.
///
/// The complex system `J Θ = Ĝ` is solved as the real-stacked system
/// `[Re J; Im J] Θ = [Re Ĝ; Im Ĝ]`, which keeps the minimum-norm solution
/// and the kernel basis real by construction. The returned kernel spans the
/// directions along which the interpolation conditions stay satisfied.
pub fn fit_lmfd_closed_form(gms: &FrfStack, n_d: usize, n_n: usize) -> Result<FitResult> {
    let lines = gms.lines();
    let (n_u, n_y) = (gms.n_u(), gms.n_y());
    let rows = lines.len() * n_u;
    let cols = n_d * n_y + (n_n + 1) * n_u;
    if cols < rows {
        return Err(Error::Overconstrained(format!(
            "{cols} coefficient rows cannot satisfy {rows} interpolation rows"
        )));
    }
    let system = interpolation_system(gms, n_d, n_n);
    let sv = system.j.clone().svd(false, false).singular_values;
    let rank_c = sv.iter().filter(|&&s| s > linalg::RANK_TOL * sv.max()).count();
    if rank_c < rows {
        return Err(Error::RowRankDeficient { rank: rank_c, rows });
    }

    let a = linalg::real_stack(&system.j);
    let b = linalg::real_stack(gms.values());
    let theta_mat = linalg::lstsq_min_norm(&a, &b, linalg::RANK_TOL)?;
    let kernel = linalg::nullspace(&a, linalg::RANK_TOL);
    let theta = DVector::from_column_slice(theta_mat.as_slice());

    // Residual of the interpolation conditions, unweighted.
    let structure = LmfdStructure::new(n_y, n_u, n_d, n_n);
    let achieved = structure.frf_stack_at(&theta, lines)?;
    let cost = (gms.values() - achieved.values()).norm_squared();

    Ok(FitResult {
        theta,
        cost,
        status: FitStatus::ClosedForm,
        kernel: Some(kernel),
        iterations: 0,
        gradient_norm: 0.0,
    })
}

/// Levy-style linear least squares on `D(iω_ℓ) Ĝ(iω_ℓ) - N(iω_ℓ)` with
/// per-frequency weights (identity by default). Coincides with the
/// closed-form interpolation when that system is solvable; in the
/// overconstrained case it is a baseline, not the weighted optimum.
pub fn fit_levy(
    gms: &FrfStack,
    n_d: usize,
    n_n: usize,
    weights: Option<&[DMatrix<f64>]>,
) -> Result<FitResult> {
    let lines = gms.lines();
    let (n_u, n_y) = (gms.n_u(), gms.n_y());
    let l = lines.len();
    let system = interpolation_system(gms, n_d, n_n);
    let cols = system.j.ncols();

    // Weight index per stacked line: 0 for DC, ell+1 for the pair lines.
    let widx: Vec<usize> = lines
        .lines()
        .iter()
        .map(|line| match line {
            Line::Dc => 0,
            Line::Neg(ell) | Line::Pos(ell) => ell + 1,
        })
        .collect();
    let w_half: Vec<Option<DMatrix<Complex64>>> = match weights {
        None => vec![None; lines.grid().len() + 1],
        Some(ws) => {
            if ws.len() != lines.grid().len() + 1 {
                return Err(Error::DimensionMismatch(
                    "one weight per frequency (DC first) required".into(),
                ));
            }
            ws.iter()
                .map(|w| linalg::hermitian_sqrt(&linalg::to_complex(w), "Levy weight").map(Some))
                .collect::<Result<_>>()?
        }
    };

    // Vectorized system over theta = vec(Theta): block row per line,
    // (W^{1/2} ⊗ I_nu) [(I_ny ⊗ J_l) theta - vec(G_l)].
    let mut big = DMatrix::<Complex64>::zeros(l * n_u * n_y, cols * n_y);
    let mut rhs = DMatrix::<Complex64>::zeros(l * n_u * n_y, 1);
    for jl in 0..l {
        let j_block = system.j.rows(jl * n_u, n_u);
        let g_block = gms.values().rows(jl * n_u, n_u);
        let mut rows_block = DMatrix::<Complex64>::zeros(n_u * n_y, cols * n_y);
        let mut rhs_block = DMatrix::<Complex64>::zeros(n_u * n_y, 1);
        for c in 0..n_y {
            rows_block
                .view_mut((c * n_u, c * cols), (n_u, cols))
                .copy_from(&j_block);
            for p in 0..n_u {
                rhs_block[(c * n_u + p, 0)] = g_block[(p, c)];
            }
        }
        if let Some(w) = &w_half[widx[jl]] {
            let kron = w.kronecker(&DMatrix::<Complex64>::identity(n_u, n_u));
            rows_block = &kron * rows_block;
            rhs_block = &kron * rhs_block;
        }
        big.rows_mut(jl * n_u * n_y, n_u * n_y).copy_from(&rows_block);
        rhs.rows_mut(jl * n_u * n_y, n_u * n_y).copy_from(&rhs_block);
    }

    let a = linalg::real_stack(&big);
    let b = linalg::real_stack(&rhs);
    let unknowns = cols * n_y;
    let rank = linalg::rank(&a, linalg::RANK_TOL);
    if unknowns <= a.nrows() && rank < unknowns {
        return Err(Error::Singular(format!(
            "Levy system rank {rank} below {unknowns} unknowns"
        )));
    }
    let theta = linalg::lstsq_min_norm(&a, &b, linalg::RANK_TOL)?;
    let resid = (&a * &theta - &b).norm_squared();
    Ok(FitResult {
        theta: DVector::from_column_slice(theta.as_slice()),
        cost: resid,
        status: FitStatus::ClosedForm,
        kernel: None,
        iterations: 0,
        gradient_norm: 0.0,
    })
}

/// Options for the iterative weighted fit.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Relative cost-change stopping tolerance.
    pub rel_cost_tol: f64,
    /// Gradient-norm stopping tolerance.
    pub grad_tol: f64,
    /// Number of additional perturbed starts beyond the supplied initial
    /// point; the best local minimum wins (ties broken by smaller `‖θ‖`,
    /// then by start index).
    pub multistart: usize,
    /// Relative magnitude of the start perturbations.
    pub perturb_scale: f64,
    pub seed: u64,
    /// Optional box constraints, applied by projection after each step.
    pub bounds: Option<(DVector<f64>, DVector<f64>)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            rel_cost_tol: 1e-12,
            grad_tol: 1e-10,
            multistart: 8,
            perturb_scale: 0.1,
            seed: 0,
            bounds: None,
        }
    }
}

struct DescentOutcome {
    theta: DVector<f64>,
    cost: f64,
    iterations: usize,
    gradient_norm: f64,
    status: FitStatus,
}

/// Gauss-Newton with Levenberg damping on the whitened frequency-domain
/// residual `cov^{-1/2} vec(Ĝ - 𝒢(θ))`; the damping factor moves up by 10
/// on a rejected step and down by 10 on an accepted one.
pub fn fit_iterative<S: ParametricStructure + ?Sized>(
    gms: &FrfStack,
    cov: &DMatrix<Complex64>,
    structure: &S,
    theta_init: &DVector<f64>,
    options: &FitOptions,
) -> Result<FitResult> {
    let dim = gms.values().len();
    if cov.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {:?}, expected {dim} x {dim}",
            cov.shape()
        )));
    }
    if theta_init.len() != structure.n_theta() {
        return Err(Error::DimensionMismatch(format!(
            "theta has length {}, expected {}",
            theta_init.len(),
            structure.n_theta()
        )));
    }
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("estimate covariance".into()))?;
    let white = chol.l();

    let mut starts = vec![theta_init.clone()];
    let mut rng = derive_rng(options.seed, &[0x6d73]);
    for _ in 0..options.multistart {
        let perturbed = DVector::from_fn(theta_init.len(), |k, _| {
            let eps: f64 = rng.sample(StandardNormal);
            theta_init[k] + options.perturb_scale * (theta_init[k].abs() + 0.1) * eps
        });
        starts.push(perturbed);
    }

    let mut best: Option<(usize, DescentOutcome)> = None;
    let mut last_err = None;
    for (idx, start) in starts.iter().enumerate() {
        match descend(gms, &white, structure, start, options) {
            Ok(out) => {
                let better = match &best {
                    None => true,
                    Some((bidx, b)) => {
                        out.cost < b.cost
                            || (out.cost == b.cost
                                && (out.theta.norm() < b.theta.norm()
                                    || (out.theta.norm() == b.theta.norm() && idx < *bidx)))
                    }
                };
                if better {
                    best = Some((idx, out));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, out)) => Ok(FitResult {
            theta: out.theta,
            cost: out.cost,
            status: out.status,
            kernel: None,
            iterations: out.iterations,
            gradient_norm: out.gradient_norm,
        }),
        None => Err(last_err
            .unwrap_or_else(|| Error::OptimizationFailed("no start converged".into()))),
    }
}

fn clamp(theta: &mut DVector<f64>, bounds: &Option<(DVector<f64>, DVector<f64>)>) {
    if let Some((lo, hi)) = bounds {
        for k in 0..theta.len() {
            theta[k] = theta[k].clamp(lo[k], hi[k]);
        }
    }
}

fn whitened_residual<S: ParametricStructure + ?Sized>(
    gms: &FrfStack,
    white: &DMatrix<Complex64>,
    structure: &S,
    theta: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let model_stack = structure.frf_stack_at(theta, gms.lines())?;
    let e = linalg::vec_of(&(gms.values() - model_stack.values()));
    let e_mat = DMatrix::from_column_slice(e.len(), 1, e.as_slice());
    let r = white
        .clone()
        .solve_lower_triangular(&e_mat)
        .ok_or_else(|| Error::Singular("covariance Cholesky factor".into()))?;
    let stacked = linalg::real_stack(&r);
    let cost = stacked.norm_squared();
    if !cost.is_finite() {
        return Err(Error::NonFinite("weighted cost".into()));
    }
    Ok((DVector::from_column_slice(stacked.as_slice()), cost))
}

fn descend<S: ParametricStructure + ?Sized>(
    gms: &FrfStack,
    white: &DMatrix<Complex64>,
    structure: &S,
    theta0: &DVector<f64>,
    options: &FitOptions,
) -> Result<DescentOutcome> {
    let mut theta = theta0.clone();
    clamp(&mut theta, &options.bounds);
    let (mut resid, mut cost) = whitened_residual(gms, white, structure, &theta)?;
    let mut damping = 1e-3;
    let mut gradient_norm = f64::INFINITY;
    let mut status = FitStatus::MaxIter;
    let mut iterations = 0;

    for iter in 1..=options.max_iter {
        iterations = iter;
        let jac_c = structure.jacobian(&theta, gms.lines())?;
        let jw = white
            .clone()
            .solve_lower_triangular(&jac_c)
            .ok_or_else(|| Error::Singular("covariance Cholesky factor".into()))?;
        let a = linalg::real_stack(&jw);
        // residual r(θ) = white⁻¹ e(θ) with e = Ĝ - 𝒢(θ), so ∂r/∂θ = -A.
        let grad = -2.0 * a.transpose() * &resid;
        gradient_norm = grad.norm();
        if gradient_norm < options.grad_tol {
            status = FitStatus::Converged;
            break;
        }
        let gram = a.transpose() * &a;
        let rhs = a.transpose() * &resid;

        let mut accepted = false;
        loop {
            let mut damped = gram.clone();
            for k in 0..damped.nrows() {
                damped[(k, k)] += damping;
            }
            let step = match damped.cholesky() {
                Some(c) => c.solve(&rhs),
                None => {
                    damping *= 10.0;
                    if damping > 1e14 {
                        return Err(Error::Singular(
                            "damped normal matrix at maximum damping".into(),
                        ));
                    }
                    continue;
                }
            };
            let mut candidate = &theta + step;
            clamp(&mut candidate, &options.bounds);
            match whitened_residual(gms, white, structure, &candidate) {
                Ok((new_resid, new_cost)) if new_cost <= cost => {
                    let rel_change = (cost - new_cost) / cost.max(1e-300);
                    theta = candidate;
                    resid = new_resid;
                    cost = new_cost;
                    damping = (damping / 10.0).max(1e-12);
                    accepted = true;
                    if rel_change < options.rel_cost_tol {
                        status = FitStatus::Converged;
                    }
                    break;
                }
                _ => {
                    damping *= 10.0;
                    if damping > 1e14 {
                        break;
                    }
                }
            }
        }
        if status == FitStatus::Converged {
            break;
        }
        if !accepted {
            // No downhill step exists at maximum damping: stationary point.
            status = FitStatus::Converged;
            break;
        }
    }

    Ok(DescentOutcome {
        theta,
        cost,
        iterations,
        gradient_norm,
        status,
    })
}

/// Normal approximation of the closed-form first-order time-constant
/// estimate under single-sinusoid excitation.
#[derive(Debug, Clone, Copy)]
pub struct NormalApprox {
    pub mean: f64,
    pub variance: f64,
    /// Ratio of the denominator's standard deviation to its mean,
    /// `σ √(2/N) / (α₁ |Re G₀(iω₁)|)`.
    pub criterion: f64,
    /// The approximation is taken as valid when the criterion is at most 0.1.
    pub valid: bool,
}

/// Normal approximation for `â₁` with true parameters `(a₁₀, b₀₀)`, noise
/// standard deviation `σ`, input amplitude `α₁`, frequency `ω₁`, and `N`
/// samples. The variance is evaluated through the real and imaginary parts
/// of the true frequency response.
pub fn first_order_normal_approx(
    a10: f64,
    b00: f64,
    sigma: f64,
    alpha1: f64,
    omega1: f64,
    n: usize,
) -> Result<NormalApprox> {
    if a10 <= 0.0 || sigma <= 0.0 || alpha1 <= 0.0 || omega1 <= 0.0 || n == 0 {
        return Err(Error::InvalidArgument(
            "a10, sigma, alpha1, omega1, N must be positive".into(),
        ));
    }
    if b00 == 0.0 {
        return Err(Error::InvalidArgument("b00 must be nonzero".into()));
    }
    let den = Complex64::new(1.0, a10 * omega1);
    let g0 = Complex64::new(b00, 0.0) / den;
    let re2 = g0.re * g0.re;
    let variance = 2.0 * sigma * sigma / (n as f64 * alpha1 * alpha1 * omega1 * omega1 * re2)
        * (1.0 + g0.im * g0.im / re2);
    let criterion = sigma / (alpha1 * g0.re.abs()) * (2.0 / n as f64).sqrt();
    Ok(NormalApprox {
        mean: a10,
        variance,
        criterion,
        valid: criterion <= 0.1,
    })
}

/// Large-sample variances of the first-order estimates in closed form:
/// `Var â₁ = 2σ²(a₁₀²ω₁²+1)³ / (N α₁² b₀₀² ω₁²)` and
/// `Var b̂₀ = 2σ²(a₁₀²ω₁²+1)² / (N α₁²)`.
pub fn first_order_asymptotic_variance(
    a10: f64,
    b00: f64,
    sigma: f64,
    alpha1: f64,
    omega1: f64,
    n: usize,
) -> Result<(f64, f64)> {
    if a10 <= 0.0 || sigma <= 0.0 || alpha1 <= 0.0 || omega1 <= 0.0 || n == 0 {
        return Err(Error::InvalidArgument(
            "a10, sigma, alpha1, omega1, N must be positive".into(),
        ));
    }
    if b00 == 0.0 {
        return Err(Error::InvalidArgument("b00 must be nonzero".into()));
    }
    let q = a10 * a10 * omega1 * omega1 + 1.0;
    let nf = n as f64;
    let var_a1 = 2.0 * sigma * sigma * q.powi(3) / (nf * alpha1 * alpha1 * b00 * b00 * omega1 * omega1);
    let var_b0 = 2.0 * sigma * sigma * q.powi(2) / (nf * alpha1 * alpha1);
    Ok((var_a1, var_b0))
}

/// Convenience: covariance of a fit target built from an estimate.
pub fn estimate_covariance(est: &crate::frf::FrfEstimate) -> Result<DMatrix<Complex64>> {
    est.covariance()
}

/// Steady-state predictor matrix, exposed for diagnostics:
/// `ŷ_i(kh, θ)` rows for `k = 1..N`.
pub fn predict_outputs<S: ParametricStructure + ?Sized>(
    design: &ExcitationDesign,
    structure: &S,
    theta: &DVector<f64>,
    i: usize,
    n: usize,
) -> Result<DMatrix<f64>> {
    let grid = design.grid();
    let full = LineSet::with_dc(grid.clone());
    let stack = structure.frf_stack_at(theta, &full)?;
    let e = design
        .experiments()
        .get(i)
        .ok_or(Error::IndexOutOfRange {
            index: i,
            m: design.m(),
        })?;
    let n_y = structure.n_y();
    let g_dc = stack.g_at(0).map(|z| z.re);
    let base = &g_dc * &e.offset;
    let phasors: Vec<DVector<Complex64>> = (0..grid.len())
        .map(|ell| {
            let amp = DVector::from_fn(design.n_u(), |p, _| {
                Complex64::from_polar(e.amplitudes[(ell, p)], e.phases[(ell, p)])
            });
            stack.g_at(full.pos_index(ell)) * amp
        })
        .collect();
    let mut out = DMatrix::zeros(n, n_y);
    for k in 1..=n {
        let t = k as f64 * design.h();
        for q in 0..n_y {
            let mut v = base[q];
            for (ell, &w) in grid.omegas().iter().enumerate() {
                v += (phasors[ell][q] * Complex64::new(0.0, w * t).exp()).re;
            }
            out[(k - 1, q)] = v;
        }
    }
    Ok(out)
}
