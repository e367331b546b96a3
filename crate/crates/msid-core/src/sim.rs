//! Exact steady-state simulation of multisine experiments.
//!
//! Outputs are generated directly from the frequency response at the excited
//! lines, `x_i(kh) = 𝒢₀ᴴ ζ_i(kh)`, so there is no transient and no ODE solver
//! error; measurement noise is added as i.i.d. Gaussian vectors with a fixed
//! covariance. Generation is deterministic per (seed, experiment index).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{frf_stack, FrfModel, FrfStack, LmfdModel, ModalModel, FirstOrderSiso};
use crate::multisine::{ExcitationDesign, FrequencyGrid, Line, LineSet};
use crate::rng::derive_rng;

/// Imaginary-residue threshold used before dropping imaginary parts of
/// quantities that are real in exact arithmetic.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Frequency response values tabulated on a grid (plus DC); conjugate
/// symmetry is built in, and evaluation off the tabulated lines is an error.
#[derive(Debug, Clone)]
pub struct FrfTable {
    grid: FrequencyGrid,
    /// `G(0)`, real.
    dc: DMatrix<f64>,
    /// `G(i ω_ℓ)` per grid line.
    pos: Vec<DMatrix<Complex64>>,
}

impl FrfTable {
    pub fn new(grid: FrequencyGrid, dc: DMatrix<f64>, pos: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if pos.len() != grid.len() {
            return Err(Error::DimensionMismatch(
                "one FRF value per grid line required".into(),
            ));
        }
        let shape = dc.shape();
        if pos.iter().any(|g| g.shape() != shape) {
            return Err(Error::DimensionMismatch("FRF table blocks differ in shape".into()));
        }
        Ok(Self { grid, dc, pos })
    }
}

impl FrfModel for FrfTable {
    fn dims(&self) -> (usize, usize) {
        self.dc.shape()
    }

    fn frf(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        if omega == 0.0 {
            return Ok(linalg::to_complex(&self.dc));
        }
        let target = omega.abs();
        let hit = self
            .grid
            .omegas()
            .iter()
            .position(|&w| (w - target).abs() <= 1e-12 * w.max(1.0));
        match hit {
            Some(ell) => {
                let g = &self.pos[ell];
                Ok(if omega > 0.0 { g.clone() } else { g.map(|z| z.conj()) })
            }
            None => Err(Error::FrfUndefined {
                omega,
                reason: "frequency not tabulated".into(),
            }),
        }
    }
}

/// The data-generating system: any FRF oracle with conjugate symmetry.
#[derive(Debug, Clone)]
pub enum TrueSystem {
    Lmfd(LmfdModel),
    Modal(ModalModel),
    FirstOrder(FirstOrderSiso),
    Table(FrfTable),
}

impl FrfModel for TrueSystem {
    fn dims(&self) -> (usize, usize) {
        match self {
            Self::Lmfd(m) => m.dims(),
            Self::Modal(m) => m.dims(),
            Self::FirstOrder(m) => m.dims(),
            Self::Table(m) => m.dims(),
        }
    }

    fn frf(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        match self {
            Self::Lmfd(m) => m.frf(omega),
            Self::Modal(m) => m.frf(omega),
            Self::FirstOrder(m) => m.frf(omega),
            Self::Table(m) => m.frf(omega),
        }
    }
}

/// Measurement-noise covariance; must admit a Cholesky factorization.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    sigma: DMatrix<f64>,
    chol_lower: DMatrix<f64>,
}

impl NoiseModel {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != sigma.ncols() {
            return Err(Error::DimensionMismatch("covariance must be square".into()));
        }
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("noise covariance".into()))?;
        Ok(Self {
            chol_lower: chol.l(),
            sigma,
        })
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn n_y(&self) -> usize {
        self.sigma.nrows()
    }
}

/// Complex line phasors of experiment `i` at time `t`, stacked over `lines`:
/// the DC block holds the offset, the block of a signed line `s` holds
/// `(a/2) ⊙ e^{-i (s t + sign(s) φ)}`, so that
/// `u_i(t - τ) = (φᵀ(τ) ⊗ I) ζ_i(t)` with the steering vector `φ`.
pub fn line_phasors(
    design: &ExcitationDesign,
    lines: &LineSet,
    i: usize,
    t: f64,
) -> Result<DVector<Complex64>> {
    let e = design
        .experiments()
        .get(i)
        .ok_or(Error::IndexOutOfRange {
            index: i,
            m: design.m(),
        })?;
    let n_u = design.n_u();
    let mut out = DVector::zeros(lines.len() * n_u);
    for (j, line) in lines.lines().iter().enumerate() {
        match line {
            Line::Dc => {
                for p in 0..n_u {
                    out[j * n_u + p] = Complex64::new(e.offset[p], 0.0);
                }
            }
            Line::Pos(ell) => {
                let w = design.grid().omegas()[*ell];
                for p in 0..n_u {
                    let half = 0.5 * e.amplitudes[(*ell, p)];
                    out[j * n_u + p] = Complex64::from_polar(half, -(w * t + e.phases[(*ell, p)]));
                }
            }
            Line::Neg(ell) => {
                let w = design.grid().omegas()[*ell];
                for p in 0..n_u {
                    let half = 0.5 * e.amplitudes[(*ell, p)];
                    out[j * n_u + p] = Complex64::from_polar(half, w * t + e.phases[(*ell, p)]);
                }
            }
        }
    }
    Ok(out)
}

/// Full-stack line phasors `ζ_i(t)` (DC line included).
pub fn zeta(design: &ExcitationDesign, i: usize, t: f64) -> Result<DVector<Complex64>> {
    line_phasors(design, &LineSet::with_dc(design.grid().clone()), i, t)
}

/// Noise-free sampled output of experiment `i`: an `N × n_y` matrix with row
/// `k-1` holding `x_i(kh) = 𝒢₀ᴴ ζ_i(kh)`.
///
/// The formula is exact in a stationary regime for any sampling period; the
/// result must be real up to [`IMAG_RESIDUE_TOL`] or an error is raised.
pub fn steady_state_output(
    system: &TrueSystem,
    design: &ExcitationDesign,
    i: usize,
    n: usize,
) -> Result<DMatrix<f64>> {
    let (n_y, n_u) = system.dims();
    if n_u != design.n_u() {
        return Err(Error::DimensionMismatch(
            "system input dimension differs from design".into(),
        ));
    }
    let lines = LineSet::with_dc(design.grid().clone());
    let stack = frf_stack(system, &lines)?;
    let gh = stack.values().adjoint(); // n_y x (L n_u)
    let h = design.h();
    let mut out = DMatrix::zeros(n, n_y);
    for k in 1..=n {
        let z = line_phasors(design, &lines, i, k as f64 * h)?;
        let x = &gh * z;
        let scale = x.iter().map(|v| v.norm()).fold(1.0, f64::max);
        for (q, v) in x.iter().enumerate() {
            if v.im.abs() > IMAG_RESIDUE_TOL * scale {
                return Err(Error::ImaginaryResidue {
                    residue: v.im.abs(),
                    threshold: IMAG_RESIDUE_TOL * scale,
                });
            }
            out[(k - 1, q)] = v.re;
        }
    }
    Ok(out)
}

/// Multisine-equivalent FIR taps of a system on the full line stack:
/// the real `ℋ` solving `(Γ̃ᴴ ⊗ I) ℋ = 𝒢₀`, shape `(2M+1) n_u × n_y`.
pub fn true_hms_from_frf(
    system: &TrueSystem,
    grid: &FrequencyGrid,
    h: f64,
) -> Result<DMatrix<f64>> {
    let lines = LineSet::with_dc(grid.clone());
    hms_from_stack(&frf_stack(system, &lines)?, h)
}

/// FIR taps from an already-stacked FRF matrix.
pub fn hms_from_stack(stack: &FrfStack, h: f64) -> Result<DMatrix<f64>> {
    let gamma = crate::multisine::lag_vandermonde(stack.lines(), h);
    let solved = linalg::kron_identity_solve(
        &gamma.adjoint(),
        stack.values(),
        stack.n_u(),
        "lag Vandermonde matrix (line frequencies overlap after sampling)",
    )?;
    linalg::real_part_checked(&solved, IMAG_RESIDUE_TOL)
}

/// Sampled records of a full experiment battery.
#[derive(Debug, Clone)]
pub struct Dataset {
    design: ExcitationDesign,
    n: usize,
    sigma: DMatrix<f64>,
    /// Per experiment: `N × n_y`, row `k-1` is `y_i(kh)`.
    outputs: Vec<DMatrix<f64>>,
    /// Noise-free outputs kept for diagnostics when generated by simulation.
    noiseless: Option<Vec<DMatrix<f64>>>,
}

impl Dataset {
    /// Wraps already-measured records.
    pub fn from_records(
        design: ExcitationDesign,
        sigma: DMatrix<f64>,
        outputs: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        if outputs.len() != design.m() {
            return Err(Error::DimensionMismatch(
                "one output record per experiment required".into(),
            ));
        }
        let n = outputs.first().map_or(0, |y| y.nrows());
        if n == 0 {
            return Err(Error::InvalidArgument("empty records".into()));
        }
        let n_y = outputs[0].ncols();
        if outputs.iter().any(|y| y.shape() != (n, n_y)) {
            return Err(Error::DimensionMismatch("records differ in shape".into()));
        }
        if sigma.shape() != (n_y, n_y) {
            return Err(Error::DimensionMismatch("noise covariance shape".into()));
        }
        if outputs.iter().any(|y| y.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("output records".into()));
        }
        Ok(Self {
            design,
            n,
            sigma,
            outputs,
            noiseless: None,
        })
    }

    /// Exact noise-free dataset (σ = 0).
    pub fn noiseless(system: &TrueSystem, design: &ExcitationDesign, n: usize) -> Result<Self> {
        let outputs: Vec<DMatrix<f64>> = (0..design.m())
            .map(|i| steady_state_output(system, design, i, n))
            .collect::<Result<_>>()?;
        let n_y = system.dims().0;
        Ok(Self {
            design: design.clone(),
            n,
            sigma: DMatrix::zeros(n_y, n_y),
            outputs,
            noiseless: None,
        })
    }

    pub fn design(&self) -> &ExcitationDesign {
        &self.design
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_y(&self) -> usize {
        self.outputs[0].ncols()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn outputs(&self) -> &[DMatrix<f64>] {
        &self.outputs
    }

    pub fn noiseless_outputs(&self) -> Option<&[DMatrix<f64>]> {
        self.noiseless.as_deref()
    }
}

/// Simulates all experiments of a design: exact steady-state outputs plus
/// i.i.d. Gaussian noise `L w` with `L` the lower Cholesky factor of `Σ`.
///
/// Each experiment draws from its own ChaCha12 stream keyed by
/// `(seed, experiment index)`, so records are independent of generation order.
pub fn simulate_dataset(
    system: &TrueSystem,
    design: &ExcitationDesign,
    noise: &NoiseModel,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    let n_y = system.dims().0;
    if noise.n_y() != n_y {
        return Err(Error::DimensionMismatch(
            "noise covariance does not match output dimension".into(),
        ));
    }
    let mut outputs = Vec::with_capacity(design.m());
    let mut clean = Vec::with_capacity(design.m());
    for i in 0..design.m() {
        let x = steady_state_output(system, design, i, n)?;
        let mut rng = derive_rng(seed, &[i as u64]);
        let mut y = x.clone();
        for k in 0..n {
            let w = DVector::from_fn(n_y, |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = &noise.chol_lower * w;
            for q in 0..n_y {
                y[(k, q)] += v[q];
            }
        }
        outputs.push(y);
        clean.push(x);
    }
    Ok(Dataset {
        design: design.clone(),
        n,
        sigma: noise.sigma().clone(),
        outputs,
        noiseless: Some(clean),
    })
}
