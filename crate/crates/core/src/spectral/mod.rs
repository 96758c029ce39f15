//! Periodic-torus discretization: grids, Fourier-coefficient fields, the
//! Leray projector and the linear operator symbols.
//!
//! Every operator here is an exact diagonal (or 3×3 block-diagonal) symbol
//! in Fourier space. The Stokes operator `A = -νPΔ` has symbol `ν|k|²`, the
//! 2-D fractional family uses `(ν|k|²)^{1+α}` and the 3-D strengthened
//! diffusion uses `ν|k|² + εν|k|^{2s}`.

mod field;
mod grid;
mod transform;

use rustfft::num_complex::Complex64;
use thiserror::Error;

pub use field::{SpectralField, DIVERGENCE_TOL};
pub use grid::TorusGrid;
pub use transform::{transform_to_physical, transform_to_spectral, FftPlan, PhysicalField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("structural error: {0}")]
    Structure(String),
}

/// How the nonlinear term of the momentum equation is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvectiveForm {
    /// `Σᵢ uᵢ ∂ᵢ uⱼ`.
    Advective,
    /// `Σᵢ ∂ᵢ(uᵢ uⱼ)`, equal to the advective form when `div u = 0`.
    Divergence,
}

/// The evolution system being integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowSystem {
    /// Projected momentum equation with the fractional/hyperviscous symbol.
    NavierStokes(ConvectiveForm),
    /// `U_t = νΔU - (U·∇)U` with the projector bypassed.
    Burgers,
    /// Linear problem: the nonlinear term is switched off.
    Linear,
}

/// Time step selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtPolicy {
    Fixed(f64),
    Cfl {
        courant: f64,
        dt_min: f64,
        dt_max: f64,
        u_floor: f64,
    },
}

impl DtPolicy {
    pub const DT_MIN: f64 = 1e-8;
    pub const DT_MAX: f64 = 1e-2;
    pub const U_FLOOR: f64 = 1e-6;
    pub const COURANT: f64 = 0.5;

    pub fn cfl(courant: f64) -> Self {
        DtPolicy::Cfl {
            courant,
            dt_min: Self::DT_MIN,
            dt_max: Self::DT_MAX,
            u_floor: Self::U_FLOOR,
        }
    }
}

/// Everything that determines a run.
///
/// `alpha` only affects 2-D runs; `epsilon` and `s` only affect 3-D runs.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    pub nu: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub s: f64,
    pub forcing: SpectralField,
    pub dt_policy: DtPolicy,
    pub t_end: f64,
    pub system: FlowSystem,
}

impl SolverParams {
    /// Unforced Navier–Stokes parameters in divergence form.
    pub fn unforced(grid: TorusGrid, nu: f64, dt_policy: DtPolicy, t_end: f64) -> Self {
        Self {
            nu,
            alpha: 0.0,
            epsilon: 0.0,
            s: 2.0,
            forcing: SpectralField::zero_vector(grid),
            dt_policy,
            t_end,
            system: FlowSystem::NavierStokes(ConvectiveForm::Divergence),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        self.forcing.grid()
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_regularization(mut self, epsilon: f64, s: f64) -> Self {
        self.epsilon = epsilon;
        self.s = s;
        self
    }

    pub fn with_forcing(mut self, forcing: SpectralField) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn with_system(mut self, system: FlowSystem) -> Self {
        self.system = system;
        self
    }

    /// Checks ranges and the forcing invariants.
    pub fn validate(&self) -> Result<(), SpectralError> {
        let bad = |msg: String| Err(SpectralError::Config(msg));
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        if !(0.0..=0.5).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1/2], got {}", self.alpha));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if !(self.s.is_finite() && self.s > 1.0) {
            return bad(format!("s must exceed 1, got {}", self.s));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad(format!("t_end must be >= 0, got {}", self.t_end));
        }
        match self.dt_policy {
            DtPolicy::Fixed(dt) if !(dt.is_finite() && dt > 0.0) => {
                return bad(format!("fixed dt must be positive, got {dt}"));
            }
            DtPolicy::Cfl {
                courant,
                dt_min,
                dt_max,
                u_floor,
            } if !(courant > 0.0 && dt_min > 0.0 && dt_max >= dt_min && u_floor > 0.0) => {
                return bad("cfl policy needs courant, dt_min, u_floor > 0 and dt_max >= dt_min".into());
            }
            _ => {}
        }
        if self.forcing.ncomp() != self.grid().dim() {
            return Err(SpectralError::Structure(format!(
                "forcing has {} components on a {}-D grid",
                self.forcing.ncomp(),
                self.grid().dim()
            )));
        }
        if !self.forcing.mean_is_zero() {
            return bad("forcing must be mean-zero".into());
        }
        if self.system != FlowSystem::Burgers
            && self.forcing.divergence_defect() > DIVERGENCE_TOL
        {
            return bad("forcing must be divergence-free".into());
        }
        Ok(())
    }

    /// Symbol of the linear operator at `|k|²`; see [`linear_symbol`].
    pub fn symbol(&self, k_sq: f64) -> f64 {
        if k_sq == 0.0 {
            return 0.0;
        }
        let stokes = self.nu * k_sq;
        match (self.system, self.grid().dim()) {
            (FlowSystem::Burgers, _) => stokes,
            (_, 2) => {
                if self.alpha == 0.0 {
                    stokes
                } else {
                    stokes.powf(1.0 + self.alpha)
                }
            }
            _ => {
                if self.epsilon == 0.0 {
                    stokes
                } else {
                    stokes + self.epsilon / self.nu.powf(self.s - 1.0) * stokes.powf(self.s)
                }
            }
        }
    }
}

/// Linear operator symbol at wavevector `k`.
///
/// 2-D: `(ν|k|²)^{1+α}`. 3-D: `ν|k|² + (ε/ν^{s-1})(ν|k|²)^s`. Zero at `k = 0`.
pub fn linear_symbol(params: &SolverParams, k: [f64; 3]) -> f64 {
    params.symbol(k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
}

/// Precomputed per-mode tables for a grid: FFT plans, differentiation
/// wavevectors, `|k|²` and the 2/3-rule mask.
#[derive(Clone, Debug)]
pub struct SpectralContext {
    plan: FftPlan,
    kd: [Vec<f64>; 3],
    k_sq: Vec<f64>,
    resolved: Vec<bool>,
}

impl SpectralContext {
    pub fn new(grid: TorusGrid) -> Self {
        let len = grid.len();
        let mut kd = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        let mut k_sq = vec![0.0; len];
        let mut resolved = vec![false; len];
        for idx in 0..len {
            let d = grid.derivative_wavevector(idx);
            for axis in 0..3 {
                kd[axis][idx] = d[axis];
            }
            k_sq[idx] = grid.k_sq(idx);
            resolved[idx] = grid.is_resolved(idx);
        }
        Self {
            plan: FftPlan::new(grid),
            kd,
            k_sq,
            resolved,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        self.plan.grid()
    }

    pub fn plan(&self) -> &FftPlan {
        &self.plan
    }

    /// Differentiation wavevector component along `axis`.
    pub fn kd(&self, axis: usize) -> &[f64] {
        &self.kd[axis]
    }

    pub fn k_sq(&self) -> &[f64] {
        &self.k_sq
    }

    pub fn resolved(&self) -> &[bool] {
        &self.resolved
    }

    pub fn dealias(&self, coeffs: &mut [Complex64]) {
        for (z, &keep) in coeffs.iter_mut().zip(&self.resolved) {
            if !keep {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Applies `P̂(k) = I - k kᵀ/|k|²` in place; the zero map where `k = 0`.
    pub fn project_in_place(&self, comps: &mut [Vec<Complex64>]) {
        let dim = self.grid().dim();
        let len = self.grid().len();
        for idx in 0..len {
            let k = [self.kd[0][idx], self.kd[1][idx], self.kd[2][idx]];
            let kk: f64 = k[..dim].iter().map(|x| x * x).sum();
            if kk == 0.0 {
                for c in comps.iter_mut() {
                    c[idx] = Complex64::new(0.0, 0.0);
                }
                continue;
            }
            let mut dot = Complex64::new(0.0, 0.0);
            for axis in 0..dim {
                dot += comps[axis][idx] * k[axis];
            }
            let dot = dot / kk;
            for axis in 0..dim {
                comps[axis][idx] -= dot * k[axis];
            }
        }
    }

    /// Leray projection of `v`; see [`leray_project`].
    pub fn leray_project(&self, v: &SpectralField) -> Result<SpectralField, SpectralError> {
        if v.grid() != self.grid() {
            return Err(SpectralError::Structure(
                "field grid differs from the context grid".into(),
            ));
        }
        if v.ncomp() != self.grid().dim() {
            return Err(SpectralError::Structure(format!(
                "vector field has {} components on a {}-D grid",
                v.ncomp(),
                self.grid().dim()
            )));
        }
        let mut out = v.clone();
        self.project_in_place(out.comps_mut());
        out.set_solenoidal(true);
        Ok(out)
    }
}

/// Orthogonal projection onto divergence-free fields.
///
/// Idempotent, self-adjoint, annihilates gradients. Builds the mode tables
/// on every call; hot loops should hold a [`SpectralContext`].
pub fn leray_project(v: &SpectralField) -> Result<SpectralField, SpectralError> {
    let grid = *v.grid();
    if v.ncomp() != grid.dim() {
        return Err(SpectralError::Structure(format!(
            "vector field has {} components on a {}-D grid",
            v.ncomp(),
            grid.dim()
        )));
    }
    let mut out = v.clone();
    let dim = grid.dim();
    let comps = out.comps_mut();
    for idx in 0..grid.len() {
        let k = grid.derivative_wavevector(idx);
        let kk: f64 = k[..dim].iter().map(|x| x * x).sum();
        if kk == 0.0 {
            for c in comps.iter_mut() {
                c[idx] = Complex64::new(0.0, 0.0);
            }
            continue;
        }
        let mut dot = Complex64::new(0.0, 0.0);
        for axis in 0..dim {
            dot += comps[axis][idx] * k[axis];
        }
        let dot = dot / kk;
        for axis in 0..dim {
            comps[axis][idx] -= dot * k[axis];
        }
    }
    out.set_solenoidal(true);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params2(nu: f64, alpha: f64) -> SolverParams {
        let g = TorusGrid::standard(2, 8).unwrap();
        SolverParams::unforced(g, nu, DtPolicy::Fixed(1e-3), 1.0).with_alpha(alpha)
    }

    #[test]
    fn symbol_examples() {
        assert_eq!(params2(1.0, 0.0).symbol(2.0), 2.0);
        let v = params2(0.1, 0.5).symbol(2.0);
        assert!((v - 0.2f64.powf(1.5)).abs() < 1e-16);
        assert!((v - 0.089_442_719_099_991_6).abs() < 1e-15);
        let g3 = TorusGrid::standard(3, 8).unwrap();
        let p3 = SolverParams::unforced(g3, 1.0, DtPolicy::Fixed(1e-3), 1.0)
            .with_regularization(0.01, 2.0);
        assert!((p3.symbol(4.0) - 4.16).abs() < 1e-14);
        assert_eq!(p3.symbol(0.0), 0.0);
        assert_eq!(linear_symbol(&p3, [0.0, 0.0, 0.0]), 0.0);
        assert!((linear_symbol(&p3, [2.0, 0.0, 0.0]) - 4.16).abs() < 1e-14);
    }

    #[test]
    fn sreg_coefficient_matches_general_form() {
        // s = 2: (ε/ν)(ν|k|²)² = εν|k|⁴.
        let g3 = TorusGrid::standard(3, 8).unwrap();
        let p = SolverParams::unforced(g3, 0.3, DtPolicy::Fixed(1e-3), 1.0)
            .with_regularization(0.05, 2.0);
        for k2 in [1.0, 2.0, 9.0, 50.0] {
            let want = 0.3 * k2 + 0.05 * 0.3 * k2 * k2;
            assert!((p.symbol(k2) - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn projection_dimension_mismatch() {
        let g = TorusGrid::standard(2, 8).unwrap();
        let f = SpectralField::zeros(g, 3);
        assert!(matches!(leray_project(&f), Err(SpectralError::Structure(_))));
        let ctx = SpectralContext::new(g);
        assert!(ctx.leray_project(&f).is_err());
    }

    #[test]
    fn gradient_is_annihilated() {
        // v = ∇ sin(x1) = (cos x1, 0).
        let g = TorusGrid::standard(2, 16).unwrap();
        let mut v = SpectralField::zero_vector(g);
        v.component_mut(0)[g.index_of([1, 0, 0])] = Complex64::new(0.5, 0.0);
        v.component_mut(0)[g.index_of([-1, 0, 0])] = Complex64::new(0.5, 0.0);
        let p = leray_project(&v).unwrap();
        assert_eq!(p.coefficient_norm(), 0.0);
    }

    #[test]
    fn validate_rejects_ranges() {
        assert!(params2(0.1, 0.25).validate().is_ok());
        assert!(params2(0.1, 0.75).validate().is_err());
        assert!(params2(-1.0, 0.0).validate().is_err());
    }
}
