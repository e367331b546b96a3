//! Parametric continuous-time model structures and their frequency responses.
//!
//! The workhorse is the left matrix fraction description `G(p) = D(p)⁻¹ N(p)`
//! with `D(0) = I` fixed, evaluated by linear solves. A first-order SISO
//! model and a modal (additive second-order) form are provided alongside, and
//! every structure can produce the stacked FRF matrix over a [`LineSet`] plus
//! its Jacobian with respect to the parameter vector.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::multisine::LineSet;

/// Anything that can evaluate its frequency response `G(iω)`.
pub trait FrfModel {
    /// `(n_y, n_u)`.
    fn dims(&self) -> (usize, usize);
    /// Frequency response at the (signed) angular frequency `omega`.
    fn frf(&self, omega: f64) -> Result<DMatrix<Complex64>>;
}

/// Stacked frequency response evaluations over a line set.
///
/// `values` has `L * n_u` rows and `n_y` columns; block row `j` holds
/// `G(i s_j)ᵀ` for the signed line frequency `s_j`.
#[derive(Debug, Clone)]
pub struct FrfStack {
    lines: LineSet,
    values: DMatrix<Complex64>,
    n_u: usize,
}

impl FrfStack {
    pub fn new(lines: LineSet, values: DMatrix<Complex64>, n_u: usize) -> Result<Self> {
        if values.nrows() != lines.len() * n_u {
            return Err(Error::DimensionMismatch(format!(
                "stack has {} rows, expected {} lines x {} inputs",
                values.nrows(),
                lines.len(),
                n_u
            )));
        }
        Ok(Self { lines, values, n_u })
    }

    pub fn lines(&self) -> &LineSet {
        &self.lines
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_y(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    /// `G(i s_j)` for stack line `j`.
    pub fn g_at(&self, j: usize) -> DMatrix<Complex64> {
        self.values.rows(j * self.n_u, self.n_u).transpose()
    }

    /// Largest deviation from block conjugate symmetry, relative to the
    /// largest entry magnitude.
    pub fn conjugacy_residual(&self) -> f64 {
        let scale = self.values.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut worst: f64 = 0.0;
        for j in 0..self.lines.len() {
            let k = self.lines.conj_index(j);
            let a = self.values.rows(j * self.n_u, self.n_u);
            let b = self.values.rows(k * self.n_u, self.n_u).map(|z| z.conj());
            worst = worst.max((a - b).norm());
        }
        worst / scale
    }
}

/// Evaluates a model's stacked FRF matrix over a line set.
pub fn frf_stack<M: FrfModel + ?Sized>(model: &M, lines: &LineSet) -> Result<FrfStack> {
    let (n_y, n_u) = model.dims();
    let signed = lines.signed_omegas();
    let mut values = DMatrix::zeros(lines.len() * n_u, n_y);
    for (j, &s) in signed.iter().enumerate() {
        let g = model.frf(s)?;
        if g.shape() != (n_y, n_u) {
            return Err(Error::DimensionMismatch("frf block shape".into()));
        }
        values.rows_mut(j * n_u, n_u).copy_from(&g.transpose());
    }
    FrfStack::new(lines.clone(), values, n_u)
}

/// Left matrix fraction description `G(p) = D(p)⁻¹ N(p)` with
/// `D(p) = I + D₁ p + ... + D_{n_D} p^{n_D}` and
/// `N(p) = N₀ + N₁ p + ... + N_{n_N} p^{n_N}`.
///
/// The constant denominator coefficient is pinned to the identity and never
/// stored or estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct LmfdModel {
    n_y: usize,
    n_u: usize,
    /// `D₁ .. D_{n_D}`, each `n_y × n_y`.
    d: Vec<DMatrix<f64>>,
    /// `N₀ .. N_{n_N}`, each `n_y × n_u`.
    n: Vec<DMatrix<f64>>,
}

impl LmfdModel {
    pub fn new(
        n_y: usize,
        n_u: usize,
        d: Vec<DMatrix<f64>>,
        n: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        if n_y == 0 || n_u == 0 {
            return Err(Error::InvalidArgument("zero model dimension".into()));
        }
        if n.is_empty() {
            return Err(Error::InvalidArgument(
                "numerator needs at least the constant coefficient".into(),
            ));
        }
        for (k, m) in d.iter().enumerate() {
            if m.shape() != (n_y, n_y) {
                return Err(Error::DimensionMismatch(format!(
                    "D_{} must be {n_y} x {n_y}",
                    k + 1
                )));
            }
        }
        for (k, m) in n.iter().enumerate() {
            if m.shape() != (n_y, n_u) {
                return Err(Error::DimensionMismatch(format!("N_{k} must be {n_y} x {n_u}")));
            }
        }
        Ok(Self { n_y, n_u, d, n })
    }

    /// Static-gain model `G(p) = C`.
    pub fn static_gain(c: DMatrix<f64>) -> Self {
        let (n_y, n_u) = c.shape();
        Self {
            n_y,
            n_u,
            d: vec![],
            n: vec![c],
        }
    }

    pub fn degree_d(&self) -> usize {
        self.d.len()
    }

    pub fn degree_n(&self) -> usize {
        self.n.len() - 1
    }

    pub fn d_coeffs(&self) -> &[DMatrix<f64>] {
        &self.d
    }

    pub fn n_coeffs(&self) -> &[DMatrix<f64>] {
        &self.n
    }

    /// `D(s) = I + Σ D_k s^k`.
    pub fn d_at(&self, s: Complex64) -> DMatrix<Complex64> {
        let mut out = DMatrix::identity(self.n_y, self.n_y);
        let mut p = Complex64::new(1.0, 0.0);
        for dk in &self.d {
            p *= s;
            out += dk.map(|x| x * p);
        }
        out
    }

    /// `N(s) = Σ N_k s^k`.
    pub fn n_at(&self, s: Complex64) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.n_y, self.n_u);
        let mut p = Complex64::new(1.0, 0.0);
        for (k, nk) in self.n.iter().enumerate() {
            if k > 0 {
                p *= s;
            }
            out += nk.map(|x| x * p);
        }
        out
    }

    /// Flattened parameter vector `vec([D₁,...,D_{n_D},N₀,...,N_{n_N}]ᵀ)`.
    pub fn theta(&self) -> DVector<f64> {
        let structure = LmfdStructure {
            n_y: self.n_y,
            n_u: self.n_u,
            n_d: self.degree_d(),
            n_n: self.degree_n(),
        };
        let k = structure.theta_rows();
        let mut theta = DVector::zeros(structure.n_theta());
        for c in 0..self.n_y {
            for r in 0..k {
                let (mat, a, b) = structure.param_of_row(r, c);
                theta[c * k + r] = match mat {
                    CoeffBlock::D(i) => self.d[i][(a, b)],
                    CoeffBlock::N(j) => self.n[j][(a, b)],
                };
            }
        }
        theta
    }

    /// Poles in the closed right half plane (roots of `det D(p)` with
    /// nonnegative real part). The leading coefficient must be nonsingular.
    pub fn rhp_poles(&self) -> Result<Vec<Complex64>> {
        let nd = self.degree_d();
        if nd == 0 {
            return Ok(vec![]);
        }
        let ny = self.n_y;
        let lead = self.d[nd - 1].clone();
        let lu = lead.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular(
                "leading denominator coefficient; pole diagnostic unavailable".into(),
            ));
        }
        // Block companion of the monic polynomial D_nd^{-1} D(p).
        let dim = nd * ny;
        let mut comp = DMatrix::zeros(dim, dim);
        for b in 0..nd.saturating_sub(1) {
            for i in 0..ny {
                comp[(b * ny + i, (b + 1) * ny + i)] = 1.0;
            }
        }
        for k in 0..nd {
            let coeff = if k == 0 {
                DMatrix::identity(ny, ny)
            } else {
                self.d[k - 1].clone()
            };
            let block = lu.solve(&coeff).ok_or_else(|| {
                Error::Singular("leading denominator coefficient".into())
            })?;
            for i in 0..ny {
                for j in 0..ny {
                    comp[((nd - 1) * ny + i, k * ny + j)] = -block[(i, j)];
                }
            }
        }
        let eigs = comp.complex_eigenvalues();
        Ok(eigs.iter().filter(|z| z.re >= 0.0).copied().collect())
    }
}

impl FrfModel for LmfdModel {
    fn dims(&self) -> (usize, usize) {
        (self.n_y, self.n_u)
    }

    fn frf(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let s = Complex64::new(0.0, omega);
        let d = self.d_at(s);
        let n = self.n_at(s);
        d.lu().solve(&n).ok_or(Error::FrfUndefined {
            omega,
            reason: "denominator D(i omega) is singular".into(),
        })
    }
}

/// Which coefficient matrix a parameter row belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
enum CoeffBlock {
    /// `D_{i+1}` (0-based index into the stored list).
    D(usize),
    /// `N_j`.
    N(usize),
}

/// The shape of an LMFD parametrization: dimensions and polynomial degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmfdStructure {
    pub n_y: usize,
    pub n_u: usize,
    pub n_d: usize,
    pub n_n: usize,
}

impl LmfdStructure {
    pub fn new(n_y: usize, n_u: usize, n_d: usize, n_n: usize) -> Self {
        Self { n_y, n_u, n_d, n_n }
    }

    /// Rows of the stacked coefficient matrix `Θ`.
    pub fn theta_rows(&self) -> usize {
        self.n_d * self.n_y + (self.n_n + 1) * self.n_u
    }

    /// `n_θ = n_y (n_D n_y + (n_N + 1) n_u)`.
    pub fn n_theta(&self) -> usize {
        self.n_y * self.theta_rows()
    }

    /// Maps a `Θ` entry `(row, col)` to its coefficient-matrix entry.
    ///
    /// Block rows of `Θ` hold `D₁ᵀ, ..., D_{n_D}ᵀ, N₀ᵀ, ..., N_{n_N}ᵀ`, so
    /// `Θ[(i-1) n_y + s, c] = D_i[c, s]` and the analogous relation for `N_j`.
    fn param_of_row(&self, row: usize, col: usize) -> (CoeffBlock, usize, usize) {
        let d_rows = self.n_d * self.n_y;
        if row < d_rows {
            (CoeffBlock::D(row / self.n_y), col, row % self.n_y)
        } else {
            let r = row - d_rows;
            (CoeffBlock::N(r / self.n_u), col, r % self.n_u)
        }
    }

    /// Rebuilds coefficient matrices from a flattened parameter vector.
    pub fn model_from_theta(&self, theta: &DVector<f64>) -> Result<LmfdModel> {
        if theta.len() != self.n_theta() {
            return Err(Error::DimensionMismatch(format!(
                "theta has length {}, expected {}",
                theta.len(),
                self.n_theta()
            )));
        }
        let k = self.theta_rows();
        let mut d = vec![DMatrix::zeros(self.n_y, self.n_y); self.n_d];
        let mut n = vec![DMatrix::zeros(self.n_y, self.n_u); self.n_n + 1];
        for c in 0..self.n_y {
            for r in 0..k {
                let v = theta[c * k + r];
                match self.param_of_row(r, c) {
                    (CoeffBlock::D(i), a, b) => d[i][(a, b)] = v,
                    (CoeffBlock::N(j), a, b) => n[j][(a, b)] = v,
                }
            }
        }
        LmfdModel::new(self.n_y, self.n_u, d, n)
    }
}

/// First-order SISO model `G(p) = (b₁ p + b₀) / (a₁ p + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderSiso {
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
}

impl FirstOrderSiso {
    pub fn new(a1: f64, b0: f64) -> Self {
        Self { a1, b0, b1: 0.0 }
    }

    pub fn with_zero(a1: f64, b0: f64, b1: f64) -> Self {
        Self { a1, b0, b1 }
    }

    /// Estimated models may come out unstable; flagged, not rejected.
    pub fn is_stable(&self) -> bool {
        self.a1 > 0.0
    }
}

impl FrfModel for FirstOrderSiso {
    fn dims(&self) -> (usize, usize) {
        (1, 1)
    }

    fn frf(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let s = Complex64::new(0.0, omega);
        let den = self.a1 * s + Complex64::new(1.0, 0.0);
        if den.norm() == 0.0 {
            return Err(Error::FrfUndefined {
                omega,
                reason: "first-order denominator vanishes".into(),
            });
        }
        let num = self.b1 * s + Complex64::new(self.b0, 0.0);
        Ok(DMatrix::from_element(1, 1, num / den))
    }
}

/// One additive second-order term `φ_l φ_rᵀ / (a₂ p² + a₁ p + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalTerm {
    pub phi_l: DVector<f64>,
    pub phi_r: DVector<f64>,
    pub a1: f64,
    pub a2: f64,
}

/// Modal (additive) model: a sum of second-order rank-one terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalModel {
    terms: Vec<ModalTerm>,
    n_y: usize,
    n_u: usize,
}

impl ModalModel {
    pub fn new(terms: Vec<ModalTerm>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("modal model needs at least one term".into()))?;
        let (n_y, n_u) = (first.phi_l.len(), first.phi_r.len());
        for (k, t) in terms.iter().enumerate() {
            if t.phi_l.len() != n_y || t.phi_r.len() != n_u {
                return Err(Error::DimensionMismatch(format!("modal term {k}")));
            }
            if t.a1 <= 0.0 || t.a2 < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "modal term {k}: need a1 > 0 and a2 >= 0"
                )));
            }
        }
        Ok(Self { terms, n_y, n_u })
    }

    pub fn terms(&self) -> &[ModalTerm] {
        &self.terms
    }
}

impl FrfModel for ModalModel {
    fn dims(&self) -> (usize, usize) {
        (self.n_y, self.n_u)
    }

    fn frf(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let mut out = DMatrix::zeros(self.n_y, self.n_u);
        for t in &self.terms {
            let den = Complex64::new(1.0 - t.a2 * omega * omega, t.a1 * omega);
            if den.norm() < 1e-300 {
                return Err(Error::FrfUndefined {
                    omega,
                    reason: "modal denominator vanishes".into(),
                });
            }
            let outer = &t.phi_l * t.phi_r.transpose();
            out += outer.map(|x| x / den);
        }
        Ok(out)
    }
}

/// A parametric model family: maps a parameter vector to FRF stacks and
/// Jacobians over a line set.
pub trait ParametricStructure {
    fn n_y(&self) -> usize;
    fn n_u(&self) -> usize;
    fn n_theta(&self) -> usize;

    fn frf_stack_at(&self, theta: &DVector<f64>, lines: &LineSet) -> Result<FrfStack>;

    /// Jacobian `∂ vec(𝒢(θ)) / ∂θᵀ`, shape `L n_u n_y × n_θ`.
    ///
    /// The default is a central finite difference with relative step `1e-6`;
    /// structures with closed-form derivatives override it.
    fn jacobian(&self, theta: &DVector<f64>, lines: &LineSet) -> Result<DMatrix<Complex64>> {
        let rows = lines.len() * self.n_u() * self.n_y();
        let mut jac = DMatrix::zeros(rows, self.n_theta());
        for k in 0..self.n_theta() {
            let step = 1e-6 * theta[k].abs().max(1.0);
            let mut plus = theta.clone();
            plus[k] += step;
            let mut minus = theta.clone();
            minus[k] -= step;
            let gp = self.frf_stack_at(&plus, lines)?;
            let gm = self.frf_stack_at(&minus, lines)?;
            let diff = (gp.values() - gm.values()).map(|z| z / (2.0 * step));
            let col = crate::linalg::vec_of(&diff);
            jac.set_column(k, &col);
        }
        Ok(jac)
    }
}

impl ParametricStructure for LmfdStructure {
    fn n_y(&self) -> usize {
        self.n_y
    }

    fn n_u(&self) -> usize {
        self.n_u
    }

    fn n_theta(&self) -> usize {
        LmfdStructure::n_theta(self)
    }

    fn frf_stack_at(&self, theta: &DVector<f64>, lines: &LineSet) -> Result<FrfStack> {
        frf_stack(&self.model_from_theta(theta)?, lines)
    }

    /// Analytic Jacobian assembled from
    /// `∂(D⁻¹N) = -D⁻¹ (∂D) D⁻¹ N + D⁻¹ (∂N)` column by column.
    fn jacobian(&self, theta: &DVector<f64>, lines: &LineSet) -> Result<DMatrix<Complex64>> {
        let model = self.model_from_theta(theta)?;
        let (ny, nu) = (self.n_y, self.n_u);
        let ell = lines.len();
        let krows = self.theta_rows();
        let mut jac = DMatrix::zeros(ell * nu * ny, self.n_theta());
        let signed = lines.signed_omegas();
        for (j, &omega) in signed.iter().enumerate() {
            let s = Complex64::new(0.0, omega);
            let d = model.d_at(s);
            let lu = d.lu();
            let dinv = lu
                .try_inverse()
                .ok_or(Error::FrfUndefined {
                    omega,
                    reason: "denominator D(i omega) is singular".into(),
                })?;
            let g = &dinv * model.n_at(s);
            // Powers of s up to max(n_d, n_n).
            let maxdeg = self.n_d.max(self.n_n);
            let mut pow = Vec::with_capacity(maxdeg + 1);
            pow.push(Complex64::new(1.0, 0.0));
            for _ in 0..maxdeg {
                pow.push(pow.last().unwrap() * s);
            }
            for c in 0..ny {
                for r in 0..krows {
                    let col = c * krows + r;
                    match self.param_of_row(r, c) {
                        (CoeffBlock::D(i), a, b) => {
                            // dG[p, q] = -s^{i+1} Dinv[p, a] G[b, q]
                            let w = -pow[i + 1];
                            for q in 0..nu {
                                for p in 0..ny {
                                    jac[(p * ell * nu + j * nu + q, col)] =
                                        w * dinv[(p, a)] * g[(b, q)];
                                }
                            }
                        }
                        (CoeffBlock::N(jd), a, b) => {
                            // dG[p, q] = s^{jd} Dinv[p, a] delta(q == b)
                            let w = pow[jd];
                            for p in 0..ny {
                                jac[(p * ell * nu + j * nu + b, col)] = w * dinv[(p, a)];
                            }
                        }
                    }
                }
            }
        }
        Ok(jac)
    }
}
