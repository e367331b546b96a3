//! Multisine excitation designs and their admissibility checks.
//!
//! An excitation is a sum of a constant offset and `M` cosines at shared
//! angular frequencies, with per-experiment amplitudes and phases. The module
//! owns the fixed spectral-line ordering used throughout the crate,
//!
//! ```text
//! (0, -ω₁, +ω₁, ..., -ω_M, +ω_M)
//! ```
//!
//! with the DC line dropped whenever every experiment has a zero offset, and
//! provides the three admissibility checks the estimators rely on: input rank,
//! no line overlap after sampling, and no spectral leakage.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::derive_rng;

/// Default relative rank tolerance for the input-rank check.
pub const RANK_CHECK_TOL: f64 = 1e-10;
/// Default unit-circle distance tolerance for the line-overlap check.
pub const OVERLAP_TOL: f64 = 1e-9;
/// Default distance-to-integer tolerance for the leakage check.
pub const LEAKAGE_TOL: f64 = 1e-9;

/// Strictly ascending positive angular frequencies of the sinusoidal lines.
///
/// The DC line at ω = 0 is implicit and not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        for w in &omegas {
            if !w.is_finite() || *w <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "frequencies must be positive and finite, got {w}"
                )));
            }
        }
        if omegas.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidArgument(
                "frequencies must be strictly ascending".into(),
            ));
        }
        Ok(Self { omegas })
    }

    /// Number of sinusoidal lines `M` (zero means DC-only excitation).
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// Highest excited frequency, or 0 for a DC-only grid.
    pub fn max_omega(&self) -> f64 {
        self.omegas.last().copied().unwrap_or(0.0)
    }
}

/// One line of the stacked spectral ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Line {
    Dc,
    /// `-ω_ℓ` for the grid index `ℓ` (0-based).
    Neg(usize),
    /// `+ω_ℓ` for the grid index `ℓ` (0-based).
    Pos(usize),
}

/// An ordered set of spectral lines: optionally DC, then `(-ω_ℓ, +ω_ℓ)` pairs.
///
/// All stacked objects in the crate (steering vectors, FIR taps, FRF stacks,
/// Gram matrices) follow this order.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSet {
    grid: FrequencyGrid,
    include_dc: bool,
}

impl LineSet {
    /// Full stack with the DC line, `2M + 1` lines.
    pub fn with_dc(grid: FrequencyGrid) -> Self {
        Self {
            grid,
            include_dc: true,
        }
    }

    /// Sinusoidal lines only, `2M` lines.
    pub fn without_dc(grid: FrequencyGrid) -> Self {
        Self {
            grid,
            include_dc: false,
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn include_dc(&self) -> bool {
        self.include_dc
    }

    /// Number of stacked lines.
    pub fn len(&self) -> usize {
        2 * self.grid.len() + usize::from(self.include_dc)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lines in stack order.
    pub fn lines(&self) -> Vec<Line> {
        let mut out = Vec::with_capacity(self.len());
        if self.include_dc {
            out.push(Line::Dc);
        }
        for l in 0..self.grid.len() {
            out.push(Line::Neg(l));
            out.push(Line::Pos(l));
        }
        out
    }

    /// Signed frequency of each line in stack order: `0, -ω₁, +ω₁, ...`.
    pub fn signed_omegas(&self) -> Vec<f64> {
        self.lines()
            .iter()
            .map(|l| match l {
                Line::Dc => 0.0,
                Line::Neg(i) => -self.grid.omegas()[*i],
                Line::Pos(i) => self.grid.omegas()[*i],
            })
            .collect()
    }

    /// Index of the line carrying the conjugate frequency of line `j`.
    pub fn conj_index(&self, j: usize) -> usize {
        let dc = usize::from(self.include_dc);
        if self.include_dc && j == 0 {
            return 0;
        }
        let k = j - dc;
        dc + if k.is_multiple_of(2) { k + 1 } else { k - 1 }
    }

    /// Stack index of the `+ω_ℓ` line (`ℓ` 0-based).
    pub fn pos_index(&self, ell: usize) -> usize {
        usize::from(self.include_dc) + 2 * ell + 1
    }

    /// Stack index of the `-ω_ℓ` line (`ℓ` 0-based).
    pub fn neg_index(&self, ell: usize) -> usize {
        usize::from(self.include_dc) + 2 * ell
    }
}

/// Steering vector of a line set at lag `tau`: entries `e^{i s_j τ}` with
/// `s_j` the signed line frequencies, i.e. `[1, e^{-iω₁τ}, e^{iω₁τ}, ...]`
/// when DC is included. Conjugate line pairs give conjugate entries.
pub fn steering_vector(lines: &LineSet, tau: f64) -> DVector<Complex64> {
    DVector::from_iterator(
        lines.len(),
        lines
            .signed_omegas()
            .iter()
            .map(|s| Complex64::new(0.0, s * tau).exp()),
    )
}

/// Full-stack steering vector `[1, e^{-iω₁τ}, e^{iω₁τ}, ...]` of a grid.
pub fn phi_vector(grid: &FrequencyGrid, tau: f64) -> DVector<Complex64> {
    steering_vector(&LineSet::with_dc(grid.clone()), tau)
}

/// Square Vandermonde matrix whose row `k` is the steering vector at lag
/// `k h`, for `k = 0, ..., L-1`. Nonsingular exactly when the sampled line
/// frequencies do not overlap.
pub fn lag_vandermonde(lines: &LineSet, h: f64) -> DMatrix<Complex64> {
    let l = lines.len();
    let mut out = DMatrix::zeros(l, l);
    for k in 0..l {
        let row = steering_vector(lines, k as f64 * h);
        for j in 0..l {
            out[(k, j)] = row[j];
        }
    }
    out
}

/// Full-stack `(2M+1) × (2M+1)` lag Vandermonde matrix of a grid.
pub fn gamma_tilde(grid: &FrequencyGrid, h: f64) -> DMatrix<Complex64> {
    lag_vandermonde(&LineSet::with_dc(grid.clone()), h)
}

/// Per-experiment excitation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    /// Constant offset, length `n_u`.
    pub offset: DVector<f64>,
    /// Cosine amplitudes, `M × n_u` (row ℓ holds the amplitudes of line ℓ).
    pub amplitudes: DMatrix<f64>,
    /// Cosine phases in radians, `M × n_u`.
    pub phases: DMatrix<f64>,
}

/// A complete multisine experiment battery: shared frequency grid and
/// sampling period, per-experiment offsets, amplitudes, and phases.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationDesign {
    grid: FrequencyGrid,
    h: f64,
    experiments: Vec<Experiment>,
}

impl ExcitationDesign {
    pub fn new(grid: FrequencyGrid, h: f64, experiments: Vec<Experiment>) -> Result<Self> {
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "sampling period must be positive, got {h}"
            )));
        }
        if experiments.is_empty() {
            return Err(Error::InvalidArgument("no experiments".into()));
        }
        let n_u = experiments[0].offset.len();
        if n_u == 0 {
            return Err(Error::InvalidArgument("zero input dimension".into()));
        }
        let m_lines = grid.len();
        for (i, e) in experiments.iter().enumerate() {
            if e.offset.len() != n_u {
                return Err(Error::DimensionMismatch(format!(
                    "experiment {i}: offset has length {}, expected {n_u}",
                    e.offset.len()
                )));
            }
            if e.amplitudes.shape() != (m_lines, n_u) || e.phases.shape() != (m_lines, n_u) {
                return Err(Error::DimensionMismatch(format!(
                    "experiment {i}: amplitude/phase arrays must be {m_lines} x {n_u}"
                )));
            }
        }
        if experiments.len() < n_u {
            return Err(Error::InvalidArgument(format!(
                "need at least n_u = {n_u} experiments, got {}",
                experiments.len()
            )));
        }
        Ok(Self {
            grid,
            h,
            experiments,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Same design with a different sampling period.
    pub fn with_sampling_period(self, h: f64) -> Result<Self> {
        Self::new(self.grid, h, self.experiments)
    }

    /// Number of experiments `m`.
    pub fn m(&self) -> usize {
        self.experiments.len()
    }

    /// Input dimension `n_u`.
    pub fn n_u(&self) -> usize {
        self.experiments[0].offset.len()
    }

    pub fn experiments(&self) -> &[Experiment] {
        &self.experiments
    }

    /// True when any experiment carries a nonzero offset.
    pub fn has_dc_power(&self) -> bool {
        self.experiments
            .iter()
            .any(|e| e.offset.iter().any(|&x| x != 0.0))
    }

    /// Active spectral lines: the DC line participates only when some offset
    /// is nonzero, so that designs with pure sinusoidal excitation are not
    /// rejected for an unexcited (hence unidentifiable) DC line.
    pub fn line_set(&self) -> LineSet {
        if self.has_dc_power() {
            LineSet::with_dc(self.grid.clone())
        } else {
            LineSet::without_dc(self.grid.clone())
        }
    }

    /// Evaluates the input of experiment `i` (0-based) at time `t`:
    /// `a₀ + Σ_ℓ a_ℓ ⊙ cos(ω_ℓ t + φ_ℓ)`.
    pub fn eval_input(&self, i: usize, t: f64) -> Result<DVector<f64>> {
        let e = self
            .experiments
            .get(i)
            .ok_or(Error::IndexOutOfRange {
                index: i,
                m: self.m(),
            })?;
        let mut u = e.offset.clone();
        for (ell, &w) in self.grid.omegas().iter().enumerate() {
            for j in 0..u.len() {
                u[j] += e.amplitudes[(ell, j)] * (w * t + e.phases[(ell, j)]).cos();
            }
        }
        Ok(u)
    }
}

/// Stacked amplitude matrices of a design: `A₀` holds the offsets row-wise,
/// `A_ℓ` the complex half-amplitudes `(a_{ℓ,i}/2) e^{i φ_{ℓ,i}}` row-wise.
#[derive(Debug, Clone)]
pub struct AmplitudeMatrices {
    /// `m × n_u`, row `i` is the offset of experiment `i`.
    pub a0: DMatrix<f64>,
    /// One `m × n_u` complex matrix per sinusoidal line.
    pub a: Vec<DMatrix<Complex64>>,
}

impl AmplitudeMatrices {
    /// Matrix for stack line `ell`, with `ell = 0` meaning `A₀`.
    pub fn line(&self, ell: usize) -> DMatrix<Complex64> {
        if ell == 0 {
            self.a0.map(|x| Complex64::new(x, 0.0))
        } else {
            self.a[ell - 1].clone()
        }
    }

    /// Number of sinusoidal lines `M`.
    pub fn m_lines(&self) -> usize {
        self.a.len()
    }

    pub fn n_u(&self) -> usize {
        self.a0.ncols()
    }
}

/// Builds the stacked amplitude matrices of a design.
pub fn amplitude_matrices(design: &ExcitationDesign) -> AmplitudeMatrices {
    let m = design.m();
    let n_u = design.n_u();
    let m_lines = design.grid().len();
    let mut a0 = DMatrix::zeros(m, n_u);
    for (i, e) in design.experiments().iter().enumerate() {
        for j in 0..n_u {
            a0[(i, j)] = e.offset[j];
        }
    }
    let mut a = Vec::with_capacity(m_lines);
    for ell in 0..m_lines {
        let mut al = DMatrix::zeros(m, n_u);
        for (i, e) in design.experiments().iter().enumerate() {
            for j in 0..n_u {
                let half = 0.5 * e.amplitudes[(ell, j)];
                al[(i, j)] = Complex64::from_polar(half, e.phases[(ell, j)]);
            }
        }
        a.push(al);
    }
    AmplitudeMatrices { a0, a }
}

/// Outcome of the input-rank check for one stacked amplitude matrix.
#[derive(Debug, Clone)]
pub struct RankCheckLine {
    /// 0 for `A₀`, otherwise the 1-based sinusoidal line index.
    pub line: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub full_rank: bool,
}

/// Report of the input-rank check.
#[derive(Debug, Clone)]
pub struct RankCheck {
    pub holds: bool,
    pub lines: Vec<RankCheckLine>,
    /// Whether the DC line carries power and therefore participated in the
    /// verdict.
    pub dc_active: bool,
}

/// Checks that every active stacked amplitude matrix has full column rank:
/// `σ_min(A_ℓ) > tol · σ_max(A_ℓ)`.
///
/// A rank-deficient `A₀` fails the check only when some offset is nonzero;
/// an all-zero DC line is reported but ignored, since it is simply not part
/// of the excitation.
pub fn input_rank_check(design: &ExcitationDesign, tol: f64) -> RankCheck {
    let amps = amplitude_matrices(design);
    let dc_active = design.has_dc_power();
    let mut lines = Vec::new();
    let mut holds = true;
    for ell in 0..=amps.m_lines() {
        let a = amps.line(ell);
        let sv = a.svd(false, false).singular_values;
        let sigma_max = sv.max();
        let sigma_min = sv.min();
        let full_rank = sigma_min > tol * sigma_max;
        if !full_rank && (ell > 0 || dc_active) {
            holds = false;
        }
        lines.push(RankCheckLine {
            line: ell,
            sigma_min,
            sigma_max,
            full_rank,
        });
    }
    RankCheck {
        holds,
        lines,
        dc_active,
    }
}

/// A frequency pair (or single line) that folds onto another after sampling.
#[derive(Debug, Clone, PartialEq)]
pub enum OverlapViolation {
    /// `ω_a - ω_b` is a multiple of `2π/h`.
    Difference { omega_a: f64, omega_b: f64 },
    /// `ω_a + ω_b` is a multiple of `2π/h`.
    Sum { omega_a: f64, omega_b: f64 },
    /// `ω` is a multiple of `π/h`, so `+ω` and `-ω` fold together.
    SelfImage { omega: f64 },
}

impl std::fmt::Display for OverlapViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Difference { omega_a, omega_b } => {
                write!(f, "omega {omega_a} - omega {omega_b} = 2 pi n / h")
            }
            Self::Sum { omega_a, omega_b } => {
                write!(f, "omega {omega_a} + omega {omega_b} = 2 pi n / h")
            }
            Self::SelfImage { omega } => write!(f, "omega {omega} = pi n / h"),
        }
    }
}

/// Report of the line-overlap check.
#[derive(Debug, Clone)]
pub struct OverlapCheck {
    pub holds: bool,
    pub violations: Vec<OverlapViolation>,
}

/// Distance of `e^{iθ}` from 1 on the unit circle.
fn circle_distance(theta: f64) -> f64 {
    (Complex64::new(0.0, theta).exp() - Complex64::new(1.0, 0.0)).norm()
}

/// Checks that distinct excitation lines stay distinct after sampling with
/// period `h`, on the unit circle: for every pair `|e^{i(ω_ℓ ± ω_τ)h} - 1| >
/// tol` and for every line `|e^{2iω_ℓ h} - 1| > tol`.
pub fn line_overlap_check(grid: &FrequencyGrid, h: f64, tol: f64) -> OverlapCheck {
    let w = grid.omegas();
    let mut violations = Vec::new();
    for a in 0..w.len() {
        for b in 0..a {
            if circle_distance((w[a] - w[b]) * h) <= tol {
                violations.push(OverlapViolation::Difference {
                    omega_a: w[a],
                    omega_b: w[b],
                });
            }
            if circle_distance((w[a] + w[b]) * h) <= tol {
                violations.push(OverlapViolation::Sum {
                    omega_a: w[a],
                    omega_b: w[b],
                });
            }
        }
        if circle_distance(2.0 * w[a] * h) <= tol {
            violations.push(OverlapViolation::SelfImage { omega: w[a] });
        }
    }
    OverlapCheck {
        holds: violations.is_empty(),
        violations,
    }
}

/// Exact-arithmetic variant of [`line_overlap_check`] for grids whose
/// `ω_ℓ h / π` are rational. Each ratio is given as `(numerator, denominator)`.
pub fn line_overlap_check_exact(ratios: &[(i64, i64)]) -> Result<OverlapCheck> {
    fn normalized(n: i64, d: i64) -> Result<(i64, i64)> {
        if d == 0 {
            return Err(Error::InvalidArgument("zero denominator".into()));
        }
        Ok(if d < 0 { (-n, -d) } else { (n, d) })
    }
    // (n1/d1 ± n2/d2) is an even integer?
    fn combo_is_even_integer(a: (i64, i64), b: (i64, i64), sign: i64) -> bool {
        let num = a.0 * b.1 + sign * b.0 * a.1;
        let den = a.1 * b.1;
        num % (2 * den) == 0
    }
    let ratios: Vec<(i64, i64)> = ratios
        .iter()
        .map(|&(n, d)| normalized(n, d))
        .collect::<Result<_>>()?;
    let mut violations = Vec::new();
    let as_omega = |r: (i64, i64)| r.0 as f64 / r.1 as f64; // in units of pi/h
    for a in 0..ratios.len() {
        for b in 0..a {
            if combo_is_even_integer(ratios[a], ratios[b], -1) {
                violations.push(OverlapViolation::Difference {
                    omega_a: as_omega(ratios[a]),
                    omega_b: as_omega(ratios[b]),
                });
            }
            if combo_is_even_integer(ratios[a], ratios[b], 1) {
                violations.push(OverlapViolation::Sum {
                    omega_a: as_omega(ratios[a]),
                    omega_b: as_omega(ratios[b]),
                });
            }
        }
        // ω = n π / h  <=>  ω h / π integer
        if ratios[a].0 % ratios[a].1 == 0 {
            violations.push(OverlapViolation::SelfImage {
                omega: as_omega(ratios[a]),
            });
        }
    }
    Ok(OverlapCheck {
        holds: violations.is_empty(),
        violations,
    })
}

/// Report of the leakage check.
#[derive(Debug, Clone)]
pub struct LeakageCheck {
    pub holds: bool,
    /// Distance of `N h ω_ℓ / 2π` from the nearest integer, per line.
    pub fractional_parts: Vec<f64>,
}

/// Checks that the record length `N h` spans an integer number of periods of
/// every excited line: `N h ω_ℓ / 2π` within `tol` of an integer.
pub fn leakage_check(grid: &FrequencyGrid, h: f64, n: usize, tol: f64) -> Result<LeakageCheck> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let mut fractional_parts = Vec::with_capacity(grid.len());
    let mut holds = true;
    for &w in grid.omegas() {
        let cycles = n as f64 * h * w / std::f64::consts::TAU;
        let frac = (cycles - cycles.round()).abs();
        if frac > tol {
            holds = false;
        }
        fractional_parts.push(frac);
    }
    Ok(LeakageCheck {
        holds,
        fractional_parts,
    })
}

/// Mutual coherence of the columns of the stacked amplitude matrix at line
/// `ell` (0 for `A₀`): the largest normalized inner product between distinct
/// columns. Zero for a single input.
pub fn mutual_coherence(amps: &AmplitudeMatrices, ell: usize) -> Result<f64> {
    let a = amps.line(ell);
    let n_u = a.ncols();
    let norms: Vec<f64> = (0..n_u).map(|j| a.column(j).norm()).collect();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::InvalidArgument(format!(
            "column {j} of amplitude matrix {ell} is zero"
        )));
    }
    let mut best: f64 = 0.0;
    for i in 0..n_u {
        for j in 0..i {
            let ip = a.column(i).adjoint() * a.column(j);
            best = best.max(ip[(0, 0)].norm() / (norms[i] * norms[j]));
        }
    }
    Ok(best)
}

/// Draws a design with standard-normal offsets, nonzero amplitudes, and
/// phases uniform on `[0, 2π)`; deterministic for a given seed. Such designs
/// pass the input-rank check with probability one.
pub fn random_design(
    grid: &FrequencyGrid,
    m: usize,
    n_u: usize,
    amplitude_scale: f64,
    seed: u64,
) -> Result<ExcitationDesign> {
    if m < n_u {
        return Err(Error::InvalidArgument(format!(
            "need m >= n_u, got m = {m}, n_u = {n_u}"
        )));
    }
    if amplitude_scale.is_nan() || amplitude_scale <= 0.0 {
        return Err(Error::InvalidArgument("amplitude scale must be positive".into()));
    }
    let mut rng = derive_rng(seed, &[m as u64, n_u as u64, grid.len() as u64]);
    let m_lines = grid.len();
    let mut experiments = Vec::with_capacity(m);
    for _ in 0..m {
        let offset =
            DVector::from_fn(n_u, |_, _| amplitude_scale * rng.sample::<f64, _>(StandardNormal));
        let amplitudes = DMatrix::from_fn(m_lines, n_u, |_, _| {
            let g: f64 = rng.sample(StandardNormal);
            amplitude_scale * (0.25 + g.abs())
        });
        let phases =
            DMatrix::from_fn(m_lines, n_u, |_, _| rng.random::<f64>() * std::f64::consts::TAU);
        experiments.push(Experiment {
            offset,
            amplitudes,
            phases,
        });
    }
    // The sampling period is not part of the randomization; callers override
    // it as needed. Default to safely sub-Nyquist for the given grid.
    let h = if grid.is_empty() {
        1.0
    } else {
        0.5 * std::f64::consts::PI / grid.max_omega()
    };
    ExcitationDesign::new(grid.clone(), h, experiments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn siso_design(offset: f64, amp: f64, phase: f64, omega: f64, h: f64) -> ExcitationDesign {
        let grid = FrequencyGrid::new(vec![omega]).unwrap();
        ExcitationDesign::new(
            grid,
            h,
            vec![Experiment {
                offset: DVector::from_vec(vec![offset]),
                amplitudes: DMatrix::from_vec(1, 1, vec![amp]),
                phases: DMatrix::from_vec(1, 1, vec![phase]),
            }],
        )
        .unwrap()
    }

    #[test]
    fn constant_input_evaluates_to_offset() {
        let grid = FrequencyGrid::new(vec![]).unwrap();
        let d = ExcitationDesign::new(
            grid,
            0.3,
            vec![Experiment {
                offset: DVector::from_vec(vec![2.5]),
                amplitudes: DMatrix::zeros(0, 1),
                phases: DMatrix::zeros(0, 1),
            }],
        )
        .unwrap();
        let u = d.eval_input(0, 17.3).unwrap();
        assert_relative_eq!(u[0], 2.5);
    }

    #[test]
    fn case_study_input_value() {
        // u(t) = 1/2 + cos(2t - pi/2) at t = pi/4 gives 1.5.
        let d = siso_design(0.5, 1.0, -PI / 2.0, 2.0, PI / 10.0);
        let u = d.eval_input(0, PI / 4.0).unwrap();
        assert_relative_eq!(u[0], 1.5, epsilon = 1e-14);
    }

    #[test]
    fn quadrature_phase_zeroes_at_t0() {
        let d = siso_design(0.0, 1.0, -PI / 2.0, 1.0, 0.1);
        let u = d.eval_input(0, 0.0).unwrap();
        assert_relative_eq!(u[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn index_out_of_range_is_an_error() {
        let d = siso_design(0.0, 1.0, 0.0, 1.0, 0.1);
        assert!(d.eval_input(1, 0.0).is_err());
    }

    #[test]
    fn steering_vector_at_zero_lag_is_ones() {
        let grid = FrequencyGrid::new(vec![1.0, 2.5]).unwrap();
        let phi = phi_vector(&grid, 0.0);
        for z in phi.iter() {
            assert_relative_eq!(z.re, 1.0, epsilon = 1e-15);
            assert_relative_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn steering_vector_quarter_turn() {
        // M = 1, omega h = pi/2, tau = h: [1, -i, i].
        let grid = FrequencyGrid::new(vec![PI / 2.0]).unwrap();
        let phi = phi_vector(&grid, 1.0);
        assert_relative_eq!((phi[0] - Complex64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-14);
        assert_relative_eq!((phi[1] - Complex64::new(0.0, -1.0)).norm(), 0.0, epsilon = 1e-14);
        assert_relative_eq!((phi[2] - Complex64::new(0.0, 1.0)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn vandermonde_rows_are_steering_vectors() {
        let grid = FrequencyGrid::new(vec![PI / 2.0]).unwrap();
        let g = gamma_tilde(&grid, 1.0);
        // rows phi(0), phi(h), phi(2h) = [1,1,1], [1,-i,i], [1,-1,-1]
        let expect = [
            [
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
            [
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
            ],
            [
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(-1.0, 0.0),
            ],
        ];
        for r in 0..3 {
            for c in 0..3 {
                assert_relative_eq!((g[(r, c)] - expect[r][c]).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dc_only_vandermonde_is_one() {
        let grid = FrequencyGrid::new(vec![]).unwrap();
        let g = gamma_tilde(&grid, 0.7);
        assert_eq!(g.shape(), (1, 1));
        assert_relative_eq!((g[(0, 0)] - Complex64::new(1.0, 0.0)).norm(), 0.0);
    }

    #[test]
    fn amplitude_matrix_quadrature_entry() {
        // a = 1, phi = -pi/2 -> A_1 = -i/2.
        let d = siso_design(0.0, 1.0, -PI / 2.0, 1.0, 0.1);
        let amps = amplitude_matrices(&d);
        assert_relative_eq!(
            (amps.a[0][(0, 0)] - Complex64::new(0.0, -0.5)).norm(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn rank_check_flags_duplicate_experiments() {
        let grid = FrequencyGrid::new(vec![1.0]).unwrap();
        let e = Experiment {
            offset: DVector::from_vec(vec![1.0, 0.5]),
            amplitudes: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            phases: DMatrix::from_row_slice(1, 2, &[0.2, 0.4]),
        };
        let d = ExcitationDesign::new(grid, 0.3, vec![e.clone(), e]).unwrap();
        let report = input_rank_check(&d, RANK_CHECK_TOL);
        assert!(!report.holds);
        assert!(!report.lines[0].full_rank);
    }

    #[test]
    fn rank_check_ignores_unexcited_dc() {
        // No offsets at all: A_0 = 0 is reported but not fatal.
        let d = siso_design(0.0, 1.0, 0.3, 1.0, 0.1);
        let report = input_rank_check(&d, RANK_CHECK_TOL);
        assert!(report.holds);
        assert!(!report.dc_active);
        assert!(!report.lines[0].full_rank);
        assert!(report.lines[1].full_rank);
    }

    #[test]
    fn rank_check_case_study_design_holds() {
        let d = siso_design(0.5, 1.0, -PI / 2.0, 2.0, PI / 10.0);
        assert!(input_rank_check(&d, RANK_CHECK_TOL).holds);
    }

    #[test]
    fn overlap_check_on_aliasing_example() {
        // omega in {pi, 5pi}: h = 4/7 passes, h = 1/2 folds 5pi onto pi.
        let grid = FrequencyGrid::new(vec![PI, 5.0 * PI]).unwrap();
        assert!(line_overlap_check(&grid, 4.0 / 7.0, OVERLAP_TOL).holds);
        let bad = line_overlap_check(&grid, 0.5, OVERLAP_TOL);
        assert!(!bad.holds);
        assert!(bad.violations.iter().any(|v| matches!(
            v,
            OverlapViolation::Difference { omega_a, omega_b }
                if (*omega_a - 5.0 * PI).abs() < 1e-12 && (*omega_b - PI).abs() < 1e-12
        )));
    }

    #[test]
    fn overlap_check_exact_mode() {
        // Same configurations as above, with omega h / pi as rationals.
        // h = 4/7: ratios 4/7 and 20/7 -> no violation.
        let ok = line_overlap_check_exact(&[(4, 7), (20, 7)]).unwrap();
        assert!(ok.holds);
        // h = 1/2: ratios 1/2 and 5/2 -> difference 2 is an even integer.
        let bad = line_overlap_check_exact(&[(1, 2), (5, 2)]).unwrap();
        assert!(!bad.holds);
    }

    #[test]
    fn leakage_check_integer_and_fractional_periods() {
        let grid = FrequencyGrid::new(vec![2.0]).unwrap();
        let h = PI / 10.0;
        assert!(leakage_check(&grid, h, 10, LEAKAGE_TOL).unwrap().holds);
        let bad = leakage_check(&grid, h, 13, LEAKAGE_TOL).unwrap();
        assert!(!bad.holds);
        assert_relative_eq!(bad.fractional_parts[0], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn leakage_check_single_period_irrational_frequency() {
        let w = 1.0 / 2f64.sqrt();
        let grid = FrequencyGrid::new(vec![w]).unwrap();
        // N h = 2 pi sqrt(2) = one full period.
        let n = 100;
        let h = std::f64::consts::TAU * 2f64.sqrt() / n as f64;
        assert!(leakage_check(&grid, h, n, LEAKAGE_TOL).unwrap().holds);
    }

    #[test]
    fn coherence_known_values() {
        let grid = FrequencyGrid::new(vec![]).unwrap();
        let mk = |rows: &[[f64; 2]]| {
            let exps = rows
                .iter()
                .map(|r| Experiment {
                    offset: DVector::from_vec(vec![r[0], r[1]]),
                    amplitudes: DMatrix::zeros(0, 2),
                    phases: DMatrix::zeros(0, 2),
                })
                .collect();
            ExcitationDesign::new(grid.clone(), 1.0, exps).unwrap()
        };
        // Orthogonal columns.
        let amps = amplitude_matrices(&mk(&[[1.0, 0.0], [0.0, 1.0]]));
        assert_relative_eq!(mutual_coherence(&amps, 0).unwrap(), 0.0, epsilon = 1e-15);
        // Duplicated column.
        let amps = amplitude_matrices(&mk(&[[1.0, 1.0], [2.0, 2.0]]));
        assert_relative_eq!(mutual_coherence(&amps, 0).unwrap(), 1.0, epsilon = 1e-12);
        // A0 = [[1,0],[1,1]] -> coherence 1/sqrt(2).
        let amps = amplitude_matrices(&mk(&[[1.0, 0.0], [1.0, 1.0]]));
        assert_relative_eq!(
            mutual_coherence(&amps, 0).unwrap(),
            1.0 / 2f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn coherence_zero_column_errors() {
        let grid = FrequencyGrid::new(vec![]).unwrap();
        let exps = vec![
            Experiment {
                offset: DVector::from_vec(vec![1.0, 0.0]),
                amplitudes: DMatrix::zeros(0, 2),
                phases: DMatrix::zeros(0, 2),
            },
            Experiment {
                offset: DVector::from_vec(vec![2.0, 0.0]),
                amplitudes: DMatrix::zeros(0, 2),
                phases: DMatrix::zeros(0, 2),
            },
        ];
        let d = ExcitationDesign::new(grid, 1.0, exps).unwrap();
        let amps = amplitude_matrices(&d);
        assert!(mutual_coherence(&amps, 0).is_err());
    }

    #[test]
    fn random_design_is_deterministic_and_full_rank() {
        let grid = FrequencyGrid::new(vec![1.0, 3.0]).unwrap();
        let a = random_design(&grid, 3, 2, 1.0, 42).unwrap();
        let b = random_design(&grid, 3, 2, 1.0, 42).unwrap();
        assert_eq!(a, b);
        for seed in 0..100 {
            let d = random_design(&grid, 3, 2, 1.0, seed).unwrap();
            assert!(input_rank_check(&d, RANK_CHECK_TOL).holds, "seed {seed}");
        }
    }

    #[test]
    fn random_design_scalar_case() {
        let grid = FrequencyGrid::new(vec![1.0]).unwrap();
        let d = random_design(&grid, 1, 1, 1.0, 9).unwrap();
        assert_eq!(d.m(), 1);
        assert!(d.experiments()[0].amplitudes[(0, 0)] != 0.0);
    }

    #[test]
    fn line_set_indices_and_conjugates() {
        let grid = FrequencyGrid::new(vec![1.0, 2.0]).unwrap();
        let full = LineSet::with_dc(grid.clone());
        assert_eq!(full.len(), 5);
        assert_eq!(full.conj_index(0), 0);
        assert_eq!(full.conj_index(1), 2);
        assert_eq!(full.conj_index(4), 3);
        assert_eq!(full.pos_index(1), 4);
        let bare = LineSet::without_dc(grid);
        assert_eq!(bare.len(), 4);
        assert_eq!(bare.conj_index(0), 1);
        assert_eq!(bare.neg_index(1), 2);
    }
}
