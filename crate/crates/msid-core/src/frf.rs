//! Least-squares estimation of the multisine-equivalent FIR model and the
//! frequency response at the excited lines.
//!
//! The regression runs over the active line set of the design; past input
//! samples are evaluated analytically from the known continuous-time
//! multisine, so no burn-in is discarded and the sums run over `k = 1..N`
//! exactly. The estimate carries the exact covariance `Σ ⊗ Z⁻¹`, where `Z`
//! is the Gram matrix of the complex line-phasor regressors, and a
//! frequency-domain route through DTFT ratios is provided as a cross-check
//! for leakage-free records.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::FrfStack;
use crate::multisine::{
    input_rank_check, lag_vandermonde, leakage_check, line_overlap_check, LineSet, LEAKAGE_TOL,
    OVERLAP_TOL, RANK_CHECK_TOL,
};
use crate::sim::{hms_from_stack, line_phasors, Dataset};

/// Condition number above which the normal-equation solve should be treated
/// as unreliable (reported, never regularized).
pub const CONDITION_WARN: f64 = 1e12;

/// Least-squares estimate of the multisine-equivalent model.
#[derive(Debug, Clone)]
pub struct FrfEstimate {
    lines: LineSet,
    h: f64,
    n: usize,
    m: usize,
    n_u: usize,
    n_y: usize,
    /// FIR taps, `L n_u × n_y`, block row `r` holds `Ĥ(rh)ᵀ`.
    fir: DMatrix<f64>,
    /// FRF at the active lines, `Ĝ = (Γ̃ᴴ ⊗ I) Ĥ`.
    stack: FrfStack,
    /// Gram matrix of the line phasors, `Z = Σ_k 𝒵(kh) 𝒵ᴴ(kh)`.
    z: DMatrix<Complex64>,
    /// Noise covariance used for covariance reporting.
    sigma: DMatrix<f64>,
    /// Condition number of the matrix inverted by the estimator.
    normal_condition: f64,
}

impl FrfEstimate {
    /// Reassembles an estimate from stored parts (deserialization), checking
    /// shapes and the tap/line-FRF consistency `Ĝ = (Γ̃ᴴ ⊗ I) Ĥ`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        grid: crate::multisine::FrequencyGrid,
        include_dc: bool,
        h: f64,
        n: usize,
        m: usize,
        fir: DMatrix<f64>,
        gms: DMatrix<Complex64>,
        z: DMatrix<Complex64>,
        sigma: DMatrix<f64>,
        normal_condition: f64,
    ) -> Result<Self> {
        let lines = if include_dc {
            LineSet::with_dc(grid)
        } else {
            LineSet::without_dc(grid)
        };
        let n_y = sigma.nrows();
        if fir.nrows() == 0 || !fir.nrows().is_multiple_of(lines.len()) {
            return Err(Error::DimensionMismatch("FIR tap rows".into()));
        }
        let n_u = fir.nrows() / lines.len();
        let dim = lines.len() * n_u;
        if gms.shape() != (dim, n_y) || fir.ncols() != n_y {
            return Err(Error::DimensionMismatch("stack shape".into()));
        }
        if z.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch("Gram matrix shape".into()));
        }
        let gamma = lag_vandermonde(&lines, h);
        let derived = linalg::kron_identity_apply(&gamma.adjoint(), &linalg::to_complex(&fir), n_u);
        if (&derived - &gms).norm() > 1e-9 * gms.norm().max(1.0) {
            return Err(Error::DimensionMismatch(
                "FIR taps and line FRF disagree".into(),
            ));
        }
        let stack = FrfStack::new(lines.clone(), gms, n_u)?;
        Ok(Self {
            lines,
            h,
            n,
            m,
            n_u,
            n_y,
            fir,
            stack,
            z,
            sigma,
            normal_condition,
        })
    }

    pub fn lines(&self) -> &LineSet {
        &self.lines
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn fir(&self) -> &DMatrix<f64> {
        &self.fir
    }

    pub fn stack(&self) -> &FrfStack {
        &self.stack
    }

    pub fn z(&self) -> &DMatrix<Complex64> {
        &self.z
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn normal_condition(&self) -> f64 {
        self.normal_condition
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.normal_condition > CONDITION_WARN
    }

    /// `Ĝ(i s_j)` at stack line `j`.
    pub fn g_at(&self, j: usize) -> DMatrix<Complex64> {
        self.stack.g_at(j)
    }

    /// `Ĝ(i ω_ℓ)` at the `ℓ`-th grid frequency (0-based).
    pub fn g_pos(&self, ell: usize) -> DMatrix<Complex64> {
        self.stack.g_at(self.lines.pos_index(ell))
    }

    /// `Ĝ(0)`; only available when the DC line is part of the stack.
    pub fn g_dc(&self) -> Option<DMatrix<Complex64>> {
        self.lines.include_dc().then(|| self.stack.g_at(0))
    }

    /// Trigonometric interpolation of the FRF estimate:
    /// `Ĝ(iω) = Ĥᵀ (Γ(e^{iωh}) ⊗ I)` with `Γ(z) = [1, z⁻¹, ..., z^{-(L-1)}]ᵀ`.
    ///
    /// Matches the stacked estimate exactly at the excited lines, satisfies
    /// `Ĝ(-iω) = conj(Ĝ(iω))`, and is `2π/h`-periodic in `ω`: content above
    /// the Nyquist frequency aliases into the fundamental band by design.
    pub fn interpolate(&self, omega: f64) -> DMatrix<Complex64> {
        let mut g = DMatrix::zeros(self.n_y, self.n_u);
        for r in 0..self.lines.len() {
            let w = Complex64::new(0.0, -omega * self.h * r as f64).exp();
            let block = self.fir.rows(r * self.n_u, self.n_u).transpose();
            g += block.map(|x| w * x);
        }
        g
    }

    /// Exact covariance of `vec(Ĝ)`: `Σ ⊗ Z⁻¹`, Hermitian of side
    /// `n_y L n_u` in the column-major ordering of the stack.
    pub fn covariance(&self) -> Result<DMatrix<Complex64>> {
        let zinv = linalg::hpd_inverse(&self.z, "line-phasor Gram matrix Z")?;
        Ok(linalg::to_complex(&self.sigma).kronecker(&zinv))
    }

    /// Per-entry standard deviations of the stacked estimate, `L n_u × n_y`.
    pub fn line_std(&self) -> Result<DMatrix<f64>> {
        let zinv = linalg::hpd_inverse(&self.z, "line-phasor Gram matrix Z")?;
        let rows = self.lines.len() * self.n_u;
        Ok(DMatrix::from_fn(rows, self.n_y, |r, q| {
            (self.sigma[(q, q)] * zinv[(r, r)].re).max(0.0).sqrt()
        }))
    }

    /// Real-coordinate covariance of `[Re Ĝ_{qp}(iω_ℓ); Im Ĝ_{qp}(iω_ℓ)]`
    /// for output `q`, input `p`, and grid line `ell` (0-based): the 2x2
    /// block used for confidence ellipses.
    pub fn real_pair_covariance(&self, ell: usize, q: usize, p: usize) -> Result<Matrix2<f64>> {
        if ell >= self.lines.grid().len() || q >= self.n_y || p >= self.n_u {
            return Err(Error::InvalidArgument("index out of range".into()));
        }
        let zinv = linalg::hpd_inverse(&self.z, "line-phasor Gram matrix Z")?;
        let rp = self.lines.pos_index(ell) * self.n_u + p;
        let rn = self.lines.neg_index(ell) * self.n_u + p;
        let s = self.sigma[(q, q)];
        let gamma = s * zinv[(rp, rp)].re;
        let rho = Complex64::new(s, 0.0) * zinv[(rp, rn)];
        Ok(Matrix2::new(
            0.5 * (gamma + rho.re),
            0.5 * rho.im,
            0.5 * rho.im,
            0.5 * (gamma - rho.re),
        ))
    }
}

fn validate_design(dataset: &Dataset) -> Result<LineSet> {
    let design = dataset.design();
    let rank = input_rank_check(design, RANK_CHECK_TOL);
    if !rank.holds {
        let failing: Vec<String> = rank
            .lines
            .iter()
            .filter(|l| !l.full_rank && (l.line > 0 || rank.dc_active))
            .map(|l| format!("line {} (sigma_min = {:.3e})", l.line, l.sigma_min))
            .collect();
        return Err(Error::RankCondition(failing.join(", ")));
    }
    let overlap = line_overlap_check(design.grid(), design.h(), OVERLAP_TOL);
    if !overlap.holds {
        let msgs: Vec<String> = overlap.violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::LineOverlap(msgs.join("; ")));
    }
    let lines = design.line_set();
    if dataset.n() < lines.len() {
        return Err(Error::TooFewSamples {
            n: dataset.n(),
            lines: lines.len(),
        });
    }
    Ok(lines)
}

/// Gram matrix of the line phasors over the record, `Σ_k 𝒵(kh) 𝒵ᴴ(kh)`.
fn phasor_gram(dataset: &Dataset, lines: &LineSet) -> Result<DMatrix<Complex64>> {
    let design = dataset.design();
    let dim = lines.len() * design.n_u();
    let mut z = DMatrix::zeros(dim, dim);
    for k in 1..=dataset.n() {
        let t = k as f64 * design.h();
        let mut zk = DMatrix::zeros(dim, design.m());
        for i in 0..design.m() {
            zk.set_column(i, &line_phasors(design, lines, i, t)?);
        }
        z += &zk * zk.adjoint();
    }
    Ok(z)
}

/// Least-squares estimator of the FIR taps over the active line set,
/// `Ĥ = [Σ_k 𝒰 𝒰ᵀ]⁻¹ Σ_k 𝒰 𝒴ᵀ`, and the derived line FRF estimate.
///
/// The inverse-covariance weighting of the underlying weighted least-squares
/// cost cancels in the solution, so `Σ` enters covariance reporting only.
pub fn ls_estimate(dataset: &Dataset) -> Result<FrfEstimate> {
    let lines = validate_design(dataset)?;
    let design = dataset.design();
    let (n_u, m, n, h) = (design.n_u(), design.m(), dataset.n(), design.h());
    let l = lines.len();
    let dim = l * n_u;

    // Input table: u_i(t) for t = (2-L)h .. Nh, so regressors reach back
    // before the first sample without discarding data.
    let mut r_mat = DMatrix::<f64>::zeros(dim, dim);
    let mut s_mat = DMatrix::<f64>::zeros(dim, dataset.n_y());
    let mut u_table = vec![DMatrix::zeros(n_u, n + l - 1); m];
    for (i, table) in u_table.iter_mut().enumerate() {
        for (col, k) in ((2 - l as i64)..=(n as i64)).enumerate() {
            let u = design.eval_input(i, k as f64 * h)?;
            table.set_column(col, &u);
        }
    }
    let col_of = |k: i64| (k - (2 - l as i64)) as usize;
    let mut reg = DMatrix::<f64>::zeros(dim, m);
    for k in 1..=n as i64 {
        for i in 0..m {
            for r in 0..l {
                let src = u_table[i].column(col_of(k - r as i64));
                for p in 0..n_u {
                    reg[(r * n_u + p, i)] = src[p];
                }
            }
        }
        let y_k = DMatrix::from_fn(dataset.n_y(), m, |q, i| {
            dataset.outputs()[i][((k - 1) as usize, q)]
        });
        r_mat += &reg * reg.transpose();
        s_mat += &reg * y_k.transpose();
    }
    if r_mat.iter().any(|v| !v.is_finite()) || s_mat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("normal equations".into()));
    }

    let normal_condition = linalg::condition_number(&linalg::to_complex(&r_mat));
    let chol = r_mat
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("normal matrix of the FIR regression".into()))?;
    let fir = chol.solve(&s_mat);

    let gamma = lag_vandermonde(&lines, h);
    let gms = linalg::kron_identity_apply(&gamma.adjoint(), &linalg::to_complex(&fir), n_u);
    let stack = FrfStack::new(lines.clone(), gms, n_u)?;
    let z = phasor_gram(dataset, &lines)?;

    Ok(FrfEstimate {
        lines,
        h,
        n,
        m,
        n_u,
        n_y: dataset.n_y(),
        fir,
        stack,
        z,
        sigma: dataset.sigma().clone(),
        normal_condition,
    })
}

/// The phasor Gram matrix computed the long way around, from the real
/// regressor normal matrix: `Z = (Γ̃⁻¹ ⊗ I) R (Γ̃⁻ᴴ ⊗ I)`. Used to
/// cross-check [`ls_estimate`]'s direct accumulation.
pub fn z_from_regressors(dataset: &Dataset) -> Result<DMatrix<Complex64>> {
    let lines = validate_design(dataset)?;
    let design = dataset.design();
    let (n_u, h) = (design.n_u(), design.h());
    let l = lines.len();
    let dim = l * n_u;
    let mut r_mat = DMatrix::<f64>::zeros(dim, dim);
    for k in 1..=dataset.n() as i64 {
        let mut reg = DMatrix::<f64>::zeros(dim, design.m());
        for i in 0..design.m() {
            for r in 0..l {
                let u = design.eval_input(i, (k - r as i64) as f64 * h)?;
                for p in 0..n_u {
                    reg[(r * n_u + p, i)] = u[p];
                }
            }
        }
        r_mat += &reg * reg.transpose();
    }
    let gamma = lag_vandermonde(&lines, h);
    let half = linalg::kron_identity_solve(&gamma, &linalg::to_complex(&r_mat), n_u, "lag Vandermonde")?;
    let z = linalg::kron_identity_solve(&gamma, &half.adjoint(), n_u, "lag Vandermonde")?;
    Ok(z.adjoint())
}

/// Frequency-domain estimator through DTFT ratios, valid for leakage-free
/// records: block `j` is `(Υ[z_j] Ξ†[z_j])ᵀ` with `Υ, Ξ` the DTFTs of the
/// outputs and raw inputs at the line frequencies. Agrees with
/// [`ls_estimate`] whenever the record spans integer periods of every line.
pub fn etfe_estimate(dataset: &Dataset) -> Result<FrfEstimate> {
    let lines = validate_design(dataset)?;
    let design = dataset.design();
    let leak = leakage_check(design.grid(), design.h(), dataset.n(), LEAKAGE_TOL)?;
    if !leak.holds {
        return Err(Error::SpectralLeakage(format!(
            "fractional periods {:?}",
            leak.fractional_parts
        )));
    }
    let (n_u, m, n, h) = (design.n_u(), design.m(), dataset.n(), design.h());
    let n_y = dataset.n_y();
    let l = lines.len();

    let signed = lines.signed_omegas();
    let mut gms = DMatrix::zeros(l * n_u, n_y);
    for (j, &s) in signed.iter().enumerate() {
        let mut upsilon = DMatrix::<Complex64>::zeros(n_y, m);
        let mut xi = DMatrix::<Complex64>::zeros(n_u, m);
        for k in 1..=n {
            let t = k as f64 * h;
            let w = Complex64::new(0.0, -s * t).exp();
            for i in 0..m {
                let u = design.eval_input(i, t)?;
                for p in 0..n_u {
                    xi[(p, i)] += w * u[p];
                }
                for q in 0..n_y {
                    upsilon[(q, i)] += w * dataset.outputs()[i][(k - 1, q)];
                }
            }
        }
        let sv = xi.clone().svd(false, false).singular_values;
        if sv.min() <= linalg::RANK_TOL * sv.max() {
            return Err(Error::Singular(format!(
                "input DTFT at line frequency {s} is column-rank deficient"
            )));
        }
        let block = (upsilon * linalg::pinv(&xi, linalg::RANK_TOL)?).transpose();
        gms.rows_mut(j * n_u, n_u).copy_from(&block);
    }

    let stack = FrfStack::new(lines.clone(), gms, n_u)?;
    let fir = hms_from_stack(&stack, h)?;
    let z = phasor_gram(dataset, &lines)?;
    let normal_condition = linalg::condition_number(&z);

    Ok(FrfEstimate {
        lines,
        h,
        n,
        m,
        n_u,
        n_y,
        fir,
        stack,
        z,
        sigma: dataset.sigma().clone(),
        normal_condition,
    })
}
