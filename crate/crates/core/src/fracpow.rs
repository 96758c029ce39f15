//! Fractional powers of symmetric positive-definite matrices through the
//! Balakrishnan integral, together with the moment inequalities and the
//! small-exponent lemma they support.
//!
//! `A^η φ = (sin πη/π) ∫₀^∞ s^{η-1} A(s+A)⁻¹φ ds` for `η ∈ (0,1)` and
//! `A^{1+α} φ = (sin πα/(πα)) ∫₀^∞ s^α [A(s+A)⁻¹]² φ ds` for `α ∈ (0,1)`.
//! Both integrals are evaluated with composite Gauss–Legendre quadrature in
//! `t = ln s` on a truncated interval, plus the leading terms of the
//! expansions of the kernel at both ends.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::diagnostics::BoundReport;

pub const MAX_DIM: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FracPowError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositive(String),
    #[error("ill-conditioned solve: {0}")]
    IllConditioned(String),
}

/// Dense SPD operator with its resolvent bound `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    matrix: DMatrix<f64>,
    resolvent_bound: f64,
}

impl OperatorSpec {
    /// Validates symmetry and positivity. For SPD matrices `M = 1`.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, FracPowError> {
        let n = matrix.nrows();
        if n == 0 || n != matrix.ncols() || n > MAX_DIM {
            return Err(FracPowError::Usage(format!(
                "operator must be square with size 1..={MAX_DIM}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.amax();
        let asym = (&matrix - matrix.transpose()).amax();
        if !(asym <= 1e-12 * scale) {
            return Err(FracPowError::NotPositive(format!(
                "asymmetry {asym:e} relative to entries of size {scale:e}"
            )));
        }
        if Cholesky::new(matrix.clone()).is_none() {
            return Err(FracPowError::NotPositive("Cholesky factorization failed".into()));
        }
        Ok(Self {
            matrix,
            resolvent_bound: 1.0,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is SPD")
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self, FracPowError> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    /// `-d²/dx²` on `(0,1)` with Dirichlet ends, `n` interior points, `h = 1/(n+1)`.
    pub fn dirichlet_laplacian(n: usize) -> Self {
        let h = 1.0 / (n as f64 + 1.0);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 2.0 / (h * h);
            if i + 1 < n {
                m[(i, i + 1)] = -1.0 / (h * h);
                m[(i + 1, i)] = -1.0 / (h * h);
            }
        }
        Self::new(m).expect("Dirichlet Laplacian is SPD")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn resolvent_bound(&self) -> f64 {
        self.resolvent_bound
    }

    fn cholesky(&self) -> Cholesky<f64, Dyn> {
        Cholesky::new(self.matrix.clone()).expect("validated SPD")
    }

    /// Extreme eigenvalues by power and inverse power iteration.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let n = self.dim();
        let chol = self.cholesky();
        let start = DVector::from_fn(n, |i, _| 1.0 + 0.37 * i as f64 / n as f64);
        let iterate = |apply: &dyn Fn(&DVector<f64>) -> DVector<f64>| -> f64 {
            let mut x = start.normalize();
            let mut rho = 0.0;
            for _ in 0..5000 {
                let y = apply(&x);
                let next = x.dot(&y);
                let norm = y.norm();
                if norm == 0.0 {
                    return 0.0;
                }
                x = y / norm;
                if (next - rho).abs() <= 1e-13 * next.abs() {
                    rho = next;
                    break;
                }
                rho = next;
            }
            rho
        };
        let lmax = iterate(&|x| &self.matrix * x);
        let inv = iterate(&|x| chol.solve(x));
        (1.0 / inv, lmax)
    }

    /// `max ‖λ(λ+A)⁻¹‖₂` over `samples` points log-spaced in `[1e-6, 1e6]·λ_max`.
    pub fn sampled_resolvent_bound(&self, samples: usize) -> f64 {
        let (_lmin, lmax) = self.spectral_bounds();
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..samples.max(2) {
            let frac = j as f64 / (samples.max(2) - 1) as f64;
            let lam = lmax * 10f64.powf(-6.0 + 12.0 * frac);
            let shifted = &self.matrix + DMatrix::identity(n, n) * lam;
            let Some(chol) = Cholesky::new(shifted) else {
                continue;
            };
            // The resolvent is SPD; its norm is the top eigenvalue.
            let mut x = DVector::from_element(n, 1.0).normalize();
            let mut rho = 0.0;
            for _ in 0..500 {
                let y = chol.solve(&x) * lam;
                let next = x.dot(&y);
                x = y.normalize();
                if (next - rho).abs() <= 1e-12 * next {
                    rho = next;
                    break;
                }
                rho = next;
            }
            worst = worst.max(rho);
        }
        worst
    }
}

/// Truncation and panel layout of the log-substituted quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub panels: usize,
    pub nodes_per_panel: usize,
}

impl QuadratureConfig {
    /// `[λ_min(A)·10⁻⁴, λ_max(A)·10⁴]`, 64 panels of 8 nodes.
    pub fn default_for(a: &OperatorSpec) -> Self {
        let (lmin, lmax) = a.spectral_bounds();
        Self {
            lambda_min: lmin * 1e-4,
            lambda_max: lmax * 1e4,
            panels: 64,
            nodes_per_panel: 8,
        }
    }

    fn validate(&self) -> Result<(), FracPowError> {
        if !(self.lambda_min > 0.0 && self.lambda_max > self.lambda_min) {
            return Err(FracPowError::Usage(
                "quadrature needs 0 < lambda_min < lambda_max".into(),
            ));
        }
        if self.panels == 0 || self.nodes_per_panel == 0 {
            return Err(FracPowError::Usage("quadrature needs panels and nodes".into()));
        }
        Ok(())
    }

    /// Nodes `s_j` and weights in `t = ln s`.
    fn nodes(&self) -> Vec<(f64, f64)> {
        let (x, w) = gauss_legendre(self.nodes_per_panel);
        let a = self.lambda_min.ln();
        let b = self.lambda_max.ln();
        let width = (b - a) / self.panels as f64;
        let mut out = Vec::with_capacity(self.panels * x.len());
        for p in 0..self.panels {
            let mid = a + (p as f64 + 0.5) * width;
            for (xi, wi) in x.iter().zip(&w) {
                out.push(((mid + 0.5 * width * xi).exp(), 0.5 * width * wi));
            }
        }
        out
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Quadrature value with the size of the first neglected tail terms.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerResult {
    pub value: DVector<f64>,
    pub remainder: f64,
}

fn check_vector(a: &OperatorSpec, v: &DVector<f64>) -> Result<(), FracPowError> {
    if v.len() != a.dim() {
        return Err(FracPowError::Usage(format!(
            "vector has length {}, operator is {}x{}",
            v.len(),
            a.dim(),
            a.dim()
        )));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(FracPowError::Usage("vector has non-finite entries".into()));
    }
    Ok(())
}

fn shifted_factor(a: &OperatorSpec, s: f64) -> Result<Cholesky<f64, Dyn>, FracPowError> {
    let n = a.dim();
    Cholesky::new(a.matrix() + DMatrix::identity(n, n) * s)
        .ok_or_else(|| FracPowError::IllConditioned(format!("(s + A) singular at s = {s:e}")))
}

/// `A^η v` for `η ∈ (0, 1)`.
pub fn frac_power(
    a: &OperatorSpec,
    eta: f64,
    q: &QuadratureConfig,
    v: &DVector<f64>,
) -> Result<PowerResult, FracPowError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(FracPowError::Usage(format!(
            "eta = {eta} outside (0, 1); use frac_power_1plus or an integer power"
        )));
    }
    check_vector(a, v)?;
    q.validate()?;
    let mut acc = DVector::zeros(a.dim());
    for (s, w) in q.nodes() {
        let x = shifted_factor(a, s)?.solve(v);
        // A(s+A)⁻¹v = v - s(s+A)⁻¹v, times the Jacobian s of t = ln s.
        acc += (v - &x * s) * (w * s.powf(eta));
    }
    let (s0, s1) = (q.lambda_min, q.lambda_max);
    let m = a.matrix();
    let inv = a.cholesky().solve(v);
    let av = m * v;
    let a2v = m * &av;
    acc += v * (s0.powf(eta) / eta) - &inv * (s0.powf(eta + 1.0) / (eta + 1.0));
    acc += &av * (s1.powf(eta - 1.0) / (1.0 - eta)) - &a2v * (s1.powf(eta - 2.0) / (2.0 - eta));
    let c = (PI * eta).sin() / PI;
    let inv2 = a.cholesky().solve(&inv);
    let a3v = m * &a2v;
    let remainder = c
        * (s0.powf(eta + 2.0) / (eta + 2.0) * inv2.norm()
            + s1.powf(eta - 3.0) / (3.0 - eta) * a3v.norm());
    Ok(PowerResult {
        value: acc * c,
        remainder,
    })
}

/// `A^{1+α} v` for `α ∈ (0, 1)` via the squared-resolvent kernel.
pub fn frac_power_1plus(
    a: &OperatorSpec,
    alpha: f64,
    q: &QuadratureConfig,
    v: &DVector<f64>,
) -> Result<PowerResult, FracPowError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FracPowError::Usage(format!("alpha = {alpha} outside (0, 1)")));
    }
    check_vector(a, v)?;
    q.validate()?;
    let mut acc = DVector::zeros(a.dim());
    for (s, w) in q.nodes() {
        let chol = shifted_factor(a, s)?;
        let y = v - chol.solve(v) * s;
        let z = &y - chol.solve(&y) * s;
        acc += z * (w * s.powf(alpha + 1.0));
    }
    let (s0, s1) = (q.lambda_min, q.lambda_max);
    let m = a.matrix();
    let chol = a.cholesky();
    let inv = chol.solve(v);
    let av = m * v;
    let a2v = m * &av;
    let a3v = m * &a2v;
    acc += v * (s0.powf(alpha + 1.0) / (alpha + 1.0))
        - &inv * (2.0 * s0.powf(alpha + 2.0) / (alpha + 2.0));
    acc += &a2v * (s1.powf(alpha - 1.0) / (1.0 - alpha))
        - &a3v * (2.0 * s1.powf(alpha - 2.0) / (2.0 - alpha));
    let c = (PI * alpha).sin() / (PI * alpha);
    let inv2 = chol.solve(&inv);
    let a4v = m * &a3v;
    let remainder = c
        * (3.0 * s0.powf(alpha + 3.0) / (alpha + 3.0) * inv2.norm()
            + 3.0 * s1.powf(alpha - 3.0) / (3.0 - alpha) * a4v.norm());
    Ok(PowerResult {
        value: acc * c,
        remainder,
    })
}

/// Eigendecomposition of the operator, used for exact spectral calculus.
pub fn eigen(a: &OperatorSpec) -> SymmetricEigen<f64, Dyn> {
    SymmetricEigen::new(a.matrix().clone())
}

fn apply_power(e: &SymmetricEigen<f64, Dyn>, p: f64, v: &DVector<f64>) -> DVector<f64> {
    let coeffs = e.eigenvectors.transpose() * v;
    let scaled = DVector::from_iterator(
        coeffs.len(),
        coeffs
            .iter()
            .zip(e.eigenvalues.iter())
            .map(|(c, &l)| c * l.powf(p)),
    );
    &e.eigenvectors * scaled
}

/// `A^p v` for any real `p` through the eigendecomposition.
pub fn spectral_power(a: &OperatorSpec, p: f64, v: &DVector<f64>) -> DVector<f64> {
    apply_power(&eigen(a), p, v)
}

/// `‖(I - A^{-β})v‖`, which vanishes as `β → 0⁺`.
pub fn lemma_new_error(a: &OperatorSpec, beta: f64, v: &DVector<f64>) -> Result<f64, FracPowError> {
    if !(beta > 0.0 && beta <= 0.5) {
        return Err(FracPowError::Usage(format!("beta = {beta} outside (0, 1/2]")));
    }
    check_vector(a, v)?;
    Ok((v - spectral_power(a, -beta, v)).norm())
}

/// Shape of the lemma's bound: `sin(πβ)(2L(1+M)/π + M/L)‖φ‖ + ε`.
pub fn lemma_new_bound(beta: f64, split: f64, m: f64, eps: f64, phi_norm: f64) -> f64 {
    (PI * beta).sin() * (2.0 * split * (1.0 + m) / PI + m / split) * phi_norm + eps
}

/// Constant `sin(πx)(γ-α)²/(π(γ-β)(β-α))` with `x = (β-α)/(γ-α)`.
pub fn moment_constant(alpha: f64, beta: f64, gamma: f64) -> f64 {
    let x = (beta - alpha) / (gamma - alpha);
    (PI * x).sin() * (gamma - alpha).powi(2) / (PI * (gamma - beta) * (beta - alpha))
}

/// `‖A^β v‖ ≤ C(M+1)‖A^γ v‖^x‖A^α v‖^{1-x}` for `0 ≤ α < β < γ ≤ 1`.
pub fn moment_inequality_check(
    a: &OperatorSpec,
    alpha: f64,
    beta: f64,
    gamma: f64,
    v: &DVector<f64>,
) -> Result<BoundReport, FracPowError> {
    if !(0.0 <= alpha && alpha < beta && beta < gamma && gamma <= 1.0) {
        return Err(FracPowError::Usage(format!(
            "need 0 <= alpha < beta < gamma <= 1, got ({alpha}, {beta}, {gamma})"
        )));
    }
    check_vector(a, v)?;
    if v.norm() == 0.0 {
        return Err(FracPowError::Usage("v must be nonzero".into()));
    }
    let e = eigen(a);
    let x = (beta - alpha) / (gamma - alpha);
    let lhs = apply_power(&e, beta, v).norm();
    let rhs = moment_constant(alpha, beta, gamma)
        * (a.resolvent_bound() + 1.0)
        * apply_power(&e, gamma, v).norm().powf(x)
        * apply_power(&e, alpha, v).norm().powf(1.0 - x);
    Ok(BoundReport::new("moment", lhs, rhs))
}

/// `2 sin(πα)/((1-α)²πα)`, tending to 2 as `α → 0⁺`.
pub fn extended_coefficient(alpha: f64) -> f64 {
    2.0 * (PI * alpha).sin() / ((1.0 - alpha).powi(2) * PI * alpha)
}

/// `‖A^{1+α}v‖ ≤ coef·M^{1+α}(M+1)^α‖Av‖^{1-α}‖A²v‖^α` for `α ∈ (0, 1/2]`.
pub fn extended_moment_check(
    a: &OperatorSpec,
    alpha: f64,
    v: &DVector<f64>,
) -> Result<BoundReport, FracPowError> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(FracPowError::Usage(format!("alpha = {alpha} outside (0, 1/2]")));
    }
    check_vector(a, v)?;
    let e = eigen(a);
    let m = a.resolvent_bound();
    let lhs = apply_power(&e, 1.0 + alpha, v).norm();
    let rhs = extended_rhs(&e, m, alpha, v);
    Ok(BoundReport::new("extended_moment", lhs, rhs))
}

fn extended_rhs(e: &SymmetricEigen<f64, Dyn>, m: f64, alpha: f64, v: &DVector<f64>) -> f64 {
    extended_coefficient(alpha)
        * m.powf(1.0 + alpha)
        * (m + 1.0).powf(alpha)
        * apply_power(e, 1.0, v).norm().powf(1.0 - alpha)
        * apply_power(e, 2.0, v).norm().powf(alpha)
}

/// Relative distance of the extended right side at `alpha` from `2M‖Av‖`.
pub fn extended_limit_deviation(a: &OperatorSpec, alpha: f64, v: &DVector<f64>) -> f64 {
    let e = eigen(a);
    let m = a.resolvent_bound();
    let limit = 2.0 * m * apply_power(&e, 1.0, v).norm();
    (extended_rhs(&e, m, alpha, v) - limit).abs() / limit
}

/// `(α, coefficient)` rows for a decreasing list of exponents.
pub fn extended_limit_table(alphas: &[f64]) -> Vec<(f64, f64)> {
    alphas.iter().map(|&a| (a, extended_coefficient(a))).collect()
}

/// Random SPD matrix `QΛQᵀ` with eigenvalues log-uniform in `[1, cond]`.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize, cond: f64) -> OperatorSpec {
    let g: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut *rng));
    let q: DMatrix<f64> = g.qr().q();
    let lams: DVector<f64> = DVector::from_fn(n, |_, _| cond.powf(rng.random::<f64>()));
    let m: DMatrix<f64> = &q * DMatrix::from_diagonal(&lams) * q.transpose();
    let m = (&m + m.transpose()) * 0.5;
    OperatorSpec::new(m).expect("constructed SPD")
}

/// Standard normal random vector.
pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut *rng))
}
