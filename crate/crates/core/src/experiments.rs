//! Scripted studies: the α → 0⁺ and ε → 0⁺ limits, the small-data bound,
//! the super-critical probe and the Burgers maximum principle.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::diagnostics::{
    check_l2_bound_against, check_time_integrated_bounds, l2_bound_rhs, sobolev_norm_sq,
    trapezoid, BoundReport, DiagnosticsRecord,
};
use crate::integrator::{Driver, IntegratorError, Observer, RunResult, RunState, RunStatus, Solver};
use crate::spectral::{
    transform_to_physical, ConvectiveForm, DtPolicy, FlowSystem, SolverParams, SpectralContext,
    SpectralError, SpectralField, TorusGrid,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("member run with {name} = {value} blew up at t = {t}")]
    MemberBlowUp { name: &'static str, value: f64, t: f64 },
}

/// Recipe for an initial velocity or a forcing field.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSpec {
    Zero,
    /// 2-D `(cos x₁ sin x₂, -sin x₁ cos x₂)`; 3-D
    /// `(sin x₁ cos x₂ cos x₃, -cos x₁ sin x₂ cos x₃, 0)`, scaled.
    TaylorGreen { amplitude: f64 },
    /// 3-D `(sin x₃ + cos x₂, sin x₁ + cos x₃, sin x₂ + cos x₁)`, scaled.
    Abc { amplitude: f64 },
    /// `amplitude·sin(x_c)` in component `c`, zero elsewhere.
    SingleSine { component: usize, amplitude: f64 },
    /// `|û(k)| ∝ |k|^{-decay}` with seeded uniform phases on the resolved
    /// modes with `|m| ≤ kmax`, then normalized to the given RMS value.
    RandomSpectrum {
        seed: u64,
        decay: f64,
        amplitude: f64,
        kmax: f64,
    },
}

impl FieldSpec {
    pub fn random(seed: u64, decay: f64, amplitude: f64) -> Self {
        FieldSpec::RandomSpectrum {
            seed,
            decay,
            amplitude,
            kmax: f64::INFINITY,
        }
    }

    /// Builds the field; `solenoidal` applies the Leray projector.
    pub fn materialize(&self, grid: TorusGrid, solenoidal: bool) -> Result<SpectralField, ExperimentError> {
        let dim = grid.dim();
        let mut u = SpectralField::zero_vector(grid);
        let half = 0.5;
        match *self {
            FieldSpec::Zero => {}
            FieldSpec::TaylorGreen { amplitude } => {
                if dim == 2 {
                    for (s1, s2) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
                        let idx = grid.index_of([s1, s2, 0]);
                        u.component_mut(0)[idx] = Complex64::new(0.0, -0.25 * s2 as f64 * amplitude);
                        u.component_mut(1)[idx] = Complex64::new(0.0, 0.25 * s1 as f64 * amplitude);
                    }
                } else {
                    for s1 in [1i64, -1] {
                        for s2 in [1i64, -1] {
                            for s3 in [1i64, -1] {
                                let idx = grid.index_of([s1, s2, s3]);
                                // sin x₁ cos x₂ cos x₃ and -cos x₁ sin x₂ cos x₃
                                u.component_mut(0)[idx] =
                                    Complex64::new(0.0, -0.125 * s1 as f64 * amplitude);
                                u.component_mut(1)[idx] =
                                    Complex64::new(0.0, 0.125 * s2 as f64 * amplitude);
                            }
                        }
                    }
                }
            }
            FieldSpec::Abc { amplitude } => {
                if dim != 3 {
                    return Err(ExperimentError::Usage("ABC flow needs dim = 3".into()));
                }
                let a = amplitude;
                let mut sin = |comp: usize, axis: usize| {
                    let mut m = [0i64; 3];
                    m[axis] = 1;
                    u.component_mut(comp)[grid.index_of(m)] += Complex64::new(0.0, -half * a);
                    m[axis] = -1;
                    u.component_mut(comp)[grid.index_of(m)] += Complex64::new(0.0, half * a);
                };
                sin(0, 2);
                sin(1, 0);
                sin(2, 1);
                let mut cos = |comp: usize, axis: usize| {
                    let mut m = [0i64; 3];
                    m[axis] = 1;
                    u.component_mut(comp)[grid.index_of(m)] += Complex64::new(half * a, 0.0);
                    m[axis] = -1;
                    u.component_mut(comp)[grid.index_of(m)] += Complex64::new(half * a, 0.0);
                };
                cos(0, 1);
                cos(1, 2);
                cos(2, 0);
            }
            FieldSpec::SingleSine {
                component,
                amplitude,
            } => {
                if component >= dim {
                    return Err(ExperimentError::Usage(format!(
                        "component {component} out of range for dim = {dim}"
                    )));
                }
                let mut m = [0i64; 3];
                m[component] = 1;
                u.component_mut(component)[grid.index_of(m)] = Complex64::new(0.0, -half * amplitude);
                m[component] = -1;
                u.component_mut(component)[grid.index_of(m)] = Complex64::new(0.0, half * amplitude);
            }
            FieldSpec::RandomSpectrum {
                seed,
                decay,
                amplitude,
                kmax,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for idx in 1..grid.len() {
                    let c = grid.conjugate_index(idx);
                    if c <= idx || !grid.is_resolved(idx) {
                        continue;
                    }
                    let m = grid.mode(idx);
                    let mag_m = ((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64).sqrt();
                    if mag_m > kmax {
                        continue;
                    }
                    let mag = mag_m.powf(-decay);
                    for comp in 0..dim {
                        let phase = rng.random::<f64>() * std::f64::consts::TAU;
                        let z = Complex64::from_polar(mag, phase);
                        u.component_mut(comp)[idx] = z;
                        u.component_mut(comp)[c] = z.conj();
                    }
                }
                if solenoidal {
                    u = crate::spectral::leray_project(&u)?;
                }
                let rms = (u.l2_norm_sq() / grid.volume()).sqrt();
                if rms > 0.0 {
                    u.scale(amplitude / rms);
                }
            }
        }
        if solenoidal {
            u = crate::spectral::leray_project(&u)?;
        }
        Ok(u)
    }
}

/// Kind of a scripted study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    AlphaSweep,
    EpsilonSweep,
    Smallness,
    SupercriticalProbe,
    Burgers,
}

impl SweepKind {
    pub fn name(&self) -> &'static str {
        match self {
            SweepKind::AlphaSweep => "alpha_sweep",
            SweepKind::EpsilonSweep => "epsilon_sweep",
            SweepKind::Smallness => "smallness",
            SweepKind::SupercriticalProbe => "supercritical_probe",
            SweepKind::Burgers => "burgers",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "alpha_sweep" => SweepKind::AlphaSweep,
            "epsilon_sweep" => SweepKind::EpsilonSweep,
            "smallness" => SweepKind::Smallness,
            "supercritical_probe" => SweepKind::SupercriticalProbe,
            "burgers" => SweepKind::Burgers,
            _ => return None,
        })
    }
}

/// A study: its parameter ladder, base parameters and initial data.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub kind: SweepKind,
    pub values: Vec<f64>,
    pub base: SolverParams,
    pub u0: FieldSpec,
    pub t_end: f64,
}

fn check_decreasing(values: &[f64], what: &str) -> Result<(), ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::Usage(format!("{what} ladder is empty")));
    }
    if values.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(ExperimentError::Usage(format!(
            "{what} ladder must be strictly decreasing"
        )));
    }
    Ok(())
}

/// Runs `f` over `items` on up to `workers` threads, keeping input order.
pub fn map_ordered<T, R, F>(workers: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    pool.install(|| items.par_iter().map(f).collect())
}

fn blow_up_time(r: &RunResult) -> Option<f64> {
    match r.status {
        RunStatus::BlowUp { t, .. } => Some(t),
        RunStatus::Completed => None,
    }
}

/// Simple text table used for summary CSV output.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

fn g(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------- α sweep

#[derive(Clone, Debug)]
pub struct AlphaRow {
    pub alpha: f64,
    /// `‖u^α(T) - u⁰(T)‖_{L²}`.
    pub error_l2: f64,
    /// The same difference in the `H^{0.9}` norm.
    pub error_h1minus: f64,
    pub l2_report: BoundReport,
    pub run: RunResult,
}

#[derive(Clone, Debug)]
pub struct AlphaSweepReport {
    pub rows: Vec<AlphaRow>,
    pub reference: RunResult,
    pub shared_rhs: f64,
    pub reference_report: BoundReport,
}

impl AlphaSweepReport {
    pub fn errors_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error_l2 < w[0].error_l2)
    }

    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.l2_report.violated).count()
            + usize::from(self.reference_report.violated)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["alpha", "error_l2", "error_h1minus", "l2_lhs", "shared_rhs", "violated"]);
        for r in &self.rows {
            t.rows.push(vec![
                g(r.alpha),
                g(r.error_l2),
                g(r.error_h1minus),
                g(r.l2_report.lhs),
                g(self.shared_rhs),
                r.l2_report.violated.to_string(),
            ]);
        }
        t
    }
}

/// Order of the intermediate norm in the α-sweep error table.
pub const H1_MINUS_ORDER: f64 = 0.9;

/// α → 0⁺ study against an `α = 0` reference with identical data and step.
pub fn run_alpha_sweep(plan: &SweepPlan, workers: usize) -> Result<AlphaSweepReport, ExperimentError> {
    let grid = *plan.base.grid();
    if grid.dim() != 2 {
        return Err(ExperimentError::Usage("alpha sweep needs dim = 2".into()));
    }
    check_decreasing(&plan.values, "alpha")?;
    if plan.values.iter().any(|&a| !(a > 0.0 && a <= 0.5)) {
        return Err(ExperimentError::Usage("alpha values must lie in (0, 1/2]".into()));
    }
    let u0 = plan.u0.materialize(grid, true)?;
    let ctx = Arc::new(SpectralContext::new(grid));
    let e0 = u0.l2_norm_sq();
    let mut alphas = vec![0.0];
    alphas.extend(plan.values.iter().copied());
    let shared_rhs = alphas
        .iter()
        .map(|&a| l2_bound_rhs(&plan.base.clone().with_alpha(a), e0))
        .fold(0.0, f64::max);
    let runs = map_ordered(workers, &alphas, |&a| -> Result<RunResult, ExperimentError> {
        let mut p = plan.base.clone().with_alpha(a);
        p.t_end = plan.t_end;
        let solver = Solver::with_context(ctx.clone(), p)?;
        let mut driver = Driver::new(&solver, RunState::initial(u0.clone()))?;
        driver.set_l2_rhs(shared_rhs);
        while driver.advance(&mut [])? {}
        Ok(driver.finish())
    });
    let mut runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    for (r, &a) in runs.iter().zip(&alphas) {
        if let Some(t) = blow_up_time(r) {
            return Err(ExperimentError::MemberBlowUp {
                name: "alpha",
                value: a,
                t,
            });
        }
    }
    let reference = runs.remove(0);
    let reference_report = check_l2_bound_against(&reference.series, shared_rhs);
    let u_ref = &reference.final_state.u;
    let rows = runs
        .into_iter()
        .zip(&plan.values)
        .map(|(run, &alpha)| {
            let d = run.final_state.u.difference(u_ref);
            AlphaRow {
                alpha,
                error_l2: d.l2_norm_sq().sqrt(),
                error_h1minus: sobolev_norm_sq(&d, H1_MINUS_ORDER).sqrt(),
                l2_report: check_l2_bound_against(&run.series, shared_rhs),
                run,
            }
        })
        .collect();
    Ok(AlphaSweepReport {
        rows,
        reference,
        shared_rhs,
        reference_report,
    })
}

// ---------------------------------------------------------------- ε sweep

#[derive(Clone, Debug)]
pub struct EpsilonRow {
    pub epsilon: f64,
    /// `ε ∫₀ᵀ ‖u‖²_{H²}`.
    pub h2_integral: f64,
    /// `ε ‖A u‖_{L²(0,T;L²)}` with `A = -νΔ`.
    pub extra_term: f64,
    /// `‖u^ε - u^{ε'}‖_{L²(0,T;L²)}` to the next ladder value.
    pub cauchy_next: Option<f64>,
    pub reports: Vec<BoundReport>,
    pub status: RunStatus,
    pub series: Vec<DiagnosticsRecord>,
}

#[derive(Clone, Debug)]
pub struct EpsilonSweepReport {
    pub rows: Vec<EpsilonRow>,
}

impl EpsilonSweepReport {
    pub fn violations(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|r| &r.reports)
            .filter(|b| b.violated)
            .count()
    }

    pub fn extra_term_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].extra_term < w[0].extra_term)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "epsilon",
            "h2_integral",
            "extra_term",
            "cauchy_next",
            "h2e_rhs",
            "h2e_literal_rhs",
            "violated",
            "status",
        ]);
        for r in &self.rows {
            let rhs = |n: &str| {
                r.reports
                    .iter()
                    .find(|b| b.bound_name == n)
                    .map_or("".into(), |b| g(b.rhs))
            };
            t.rows.push(vec![
                g(r.epsilon),
                g(r.h2_integral),
                g(r.extra_term),
                r.cauchy_next.map_or("".into(), g),
                rhs("h2e"),
                rhs("h2e_literal"),
                r.reports.iter().any(|b| b.violated).to_string(),
                status_name(&r.status).into(),
            ]);
        }
        t
    }
}

pub fn status_name(s: &RunStatus) -> &'static str {
    match s {
        RunStatus::Completed => "completed",
        RunStatus::BlowUp { .. } => "blow-up",
    }
}

/// ε → 0⁺ study in 3-D with `s = 2`. Members advance in lockstep under a
/// fixed step so trajectory differences are formed at common times.
pub fn run_epsilon_sweep(plan: &SweepPlan, workers: usize) -> Result<EpsilonSweepReport, ExperimentError> {
    let grid = *plan.base.grid();
    if grid.dim() != 3 {
        return Err(ExperimentError::Usage("epsilon sweep needs dim = 3".into()));
    }
    if plan.base.s != 2.0 {
        return Err(ExperimentError::Usage("epsilon sweep needs s = 2".into()));
    }
    if !matches!(plan.base.dt_policy, DtPolicy::Fixed(_)) {
        return Err(ExperimentError::Usage(
            "epsilon sweep needs a fixed time step".into(),
        ));
    }
    check_decreasing(&plan.values, "epsilon")?;
    if plan.values.iter().any(|&e| !(e > 0.0)) {
        return Err(ExperimentError::Usage("epsilon values must be positive".into()));
    }
    let u0 = plan.u0.materialize(grid, true)?;
    let ctx = Arc::new(SpectralContext::new(grid));
    let solvers = plan
        .values
        .iter()
        .map(|&e| {
            let mut p = plan.base.clone().with_regularization(e, 2.0);
            p.t_end = plan.t_end;
            Solver::with_context(ctx.clone(), p)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut drivers = solvers
        .iter()
        .map(|s| Driver::new(s, RunState::initial(u0.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let n = drivers.len();
    let mut cauchy_sq = vec![0.0; n.saturating_sub(1)];
    let mut prev_diff: Option<(f64, Vec<f64>)> = None;
    let pool = (workers > 1).then(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool")
    });
    let mut alive = vec![true; n];
    loop {
        let diffs: Vec<f64> = (0..n.saturating_sub(1))
            .map(|i| {
                if alive[i] && alive[i + 1] {
                    drivers[i].state().u.difference(&drivers[i + 1].state().u).l2_norm_sq()
                } else {
                    f64::NAN
                }
            })
            .collect();
        let t = drivers[0].state().t;
        if let Some((t_prev, d_prev)) = &prev_diff {
            for i in 0..diffs.len() {
                cauchy_sq[i] += 0.5 * (t - t_prev) * (d_prev[i] + diffs[i]);
            }
        }
        prev_diff = Some((t, diffs));
        let step = |d: &mut Driver<'_>| d.advance(&mut []);
        let moved: Vec<Result<bool, IntegratorError>> = match &pool {
            Some(p) => p.install(|| drivers.par_iter_mut().map(step).collect()),
            None => drivers.iter_mut().map(step).collect(),
        };
        let mut any = false;
        for (i, m) in moved.into_iter().enumerate() {
            let m = m?;
            any |= m;
            if !m && drivers[i].state().t < plan.t_end {
                alive[i] = false;
            }
        }
        if !any {
            break;
        }
    }
    let results: Vec<RunResult> = drivers.into_iter().map(|d| d.finish()).collect();
    let rows = results
        .into_iter()
        .zip(&solvers)
        .enumerate()
        .map(|(i, (r, s))| {
            let p = s.params();
            let h2_integral = p.epsilon * trapezoid(&r.series, |x| x.h2_sq);
            let extra_term =
                p.epsilon * trapezoid(&r.series, |x| p.nu * p.nu * x.h2_sq).sqrt();
            EpsilonRow {
                epsilon: p.epsilon,
                h2_integral,
                extra_term,
                cauchy_next: cauchy_sq.get(i).map(|c| c.sqrt()),
                reports: check_time_integrated_bounds(&r.series, p),
                status: r.status,
                series: r.series,
            }
        })
        .collect();
    Ok(EpsilonSweepReport { rows })
}

// ---------------------------------------------------------------- smallness

/// Torus constants of the small-data `H¹` bound.
///
/// With `X = ‖∇u‖`, `Y = ‖Δu‖` and band-limited fields,
/// `‖u‖_∞ ≤ Σ|û| ≤ κ^{-1}S₂^{1/2}L^{-3/2}X ≤ c₁X^{3/4}Y^{1/4}` where
/// `S₂ = Σ|m|^{-2}` over the resolved nonzero lattice and `X ≤ Y/κ`. Young's
/// inequality then gives `½y' ≤ -(c'ν/2)y + C_ν(y^{7/3} + ‖Pf‖²)` for
/// `y = X²`, `c' = λ₁`, `C_ν = max(C_a, 1/ν)` and
/// `C_a = (3/8)(2ν/5)^{-5/3}c₁^{8/3}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallnessConfig {
    pub nu: f64,
    pub c_prime: f64,
    pub c_nu: f64,
    pub c1: f64,
    pub lattice_sum: f64,
    pub z_min: f64,
    pub f_threshold: f64,
}

impl SmallnessConfig {
    pub fn torus(grid: &TorusGrid, nu: f64) -> Self {
        let kappa = grid.kappa();
        let cut = grid.dealias_cutoff();
        let mut s2 = 0.0;
        for m0 in -cut..=cut {
            for m1 in -cut..=cut {
                for m2 in -cut..=cut {
                    let q = m0 * m0 + m1 * m1 + m2 * m2;
                    if q != 0 {
                        s2 += 1.0 / q as f64;
                    }
                }
            }
        }
        let c1 = kappa.powf(-1.25) * s2.sqrt() * grid.length().powf(-1.5);
        let c_a = 0.375 * (0.4 * nu).powf(-5.0 / 3.0) * c1.powf(8.0 / 3.0);
        Self::from_constants(nu, grid.lambda1(), c_a.max(1.0 / nu), c1, s2)
    }

    /// Derives `z_min` and the forcing threshold from `c'` and `C_ν`.
    pub fn from_constants(nu: f64, c_prime: f64, c_nu: f64, c1: f64, lattice_sum: f64) -> Self {
        let z_min = (3.0 * c_prime * nu / (14.0 * c_nu)).powf(0.75);
        Self {
            nu,
            c_prime,
            c_nu,
            c1,
            lattice_sum,
            z_min,
            f_threshold: 2.0 * c_prime * nu * z_min / (7.0 * c_nu),
        }
    }

    /// `g(z) = -(c'ν/2)z + C_ν z^{7/3} + C_ν‖Pf‖²`.
    pub fn g(&self, z: f64, f_sq: f64) -> f64 {
        -0.5 * self.c_prime * self.nu * z + self.c_nu * z.powf(7.0 / 3.0) + self.c_nu * f_sq
    }

    /// Right side of the comparison equation `y' = 2g(y)`.
    pub fn ode_rhs(&self, y: f64, f_sq: f64) -> f64 {
        2.0 * self.g(y.max(0.0), f_sq)
    }

    /// RK4 integration of the comparison equation over `[0, h]` in `substeps`.
    pub fn ode_advance(&self, y: f64, f_sq: f64, h: f64, substeps: usize) -> f64 {
        let dt = h / substeps as f64;
        let mut y = y;
        for _ in 0..substeps {
            let k1 = self.ode_rhs(y, f_sq);
            let k2 = self.ode_rhs(y + 0.5 * dt * k1, f_sq);
            let k3 = self.ode_rhs(y + 0.5 * dt * k2, f_sq);
            let k4 = self.ode_rhs(y + dt * k3, f_sq);
            y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        y
    }

    pub fn describe(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("c_prime", self.c_prime),
            ("C_nu", self.c_nu),
            ("c1", self.c1),
            ("lattice_sum", self.lattice_sum),
            ("z_min", self.z_min),
            ("f_threshold", self.f_threshold),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct SmallnessVerdict {
    pub confirmed: bool,
    pub sup_h1: f64,
    pub z_min: f64,
    pub ode_majorizes: bool,
    /// Smallest `y_ode - y_pde` over the run.
    pub ode_gap: f64,
    pub h1_monotone: bool,
    pub config: SmallnessConfig,
    pub run: RunResult,
    pub ode: Vec<f64>,
}

/// Relative slack in the `H¹ ≤ z_min` verdict.
pub const SMALLNESS_SLACK: f64 = 1e-6;

/// Small-data `H¹` bound on `[0, 50/ν]` with the comparison ODE alongside.
pub fn run_smallness(
    config: &SmallnessConfig,
    base: &SolverParams,
    u0: &SpectralField,
) -> Result<SmallnessVerdict, ExperimentError> {
    let grid = *base.grid();
    if grid.dim() != 3 {
        return Err(ExperimentError::Usage("smallness experiment needs dim = 3".into()));
    }
    let y0 = sobolev_norm_sq(u0, 1.0);
    if y0 > config.z_min {
        return Err(ExperimentError::Usage(format!(
            "initial data too large: ‖u₀‖²_H¹ = {y0:e} exceeds z_min = {:e}",
            config.z_min
        )));
    }
    let f_sq = base.forcing.l2_norm_sq();
    if !(f_sq < config.f_threshold) {
        return Err(ExperimentError::Usage(format!(
            "forcing too large: ‖Pf‖² = {f_sq:e} is not below 2c'ν·z_min/(7C_ν) = {:e}",
            config.f_threshold
        )));
    }
    let mut p = base.clone();
    p.t_end = 50.0 / base.nu;
    let solver = Solver::new(p)?;
    let mut ode = Vec::new();
    let mut y = y0;
    let mut t_prev = 0.0;
    let mut gap = f64::INFINITY;
    let mut obs = |s: &RunState, r: &DiagnosticsRecord| {
        if s.step_index > 0 {
            y = config.ode_advance(y, f_sq, r.t - t_prev, 16);
        }
        t_prev = r.t;
        ode.push(y);
        gap = gap.min(y - r.h1_sq);
    };
    let run = solver.run(u0.clone(), &mut [&mut obs as &mut dyn Observer])?;
    let sup_h1 = run.series.iter().map(|r| r.h1_sq).fold(0.0, f64::max);
    let ode_majorizes = run
        .series
        .iter()
        .zip(&ode)
        .all(|(r, &yo)| r.h1_sq <= yo * (1.0 + SMALLNESS_SLACK) + 1e-300);
    let h1_monotone = run
        .series
        .windows(2)
        .all(|w| w[1].h1_sq <= w[0].h1_sq * (1.0 + 1e-12));
    Ok(SmallnessVerdict {
        confirmed: run.completed() && sup_h1 <= config.z_min * (1.0 + SMALLNESS_SLACK),
        sup_h1,
        z_min: config.z_min,
        ode_majorizes,
        ode_gap: gap,
        h1_monotone,
        config: *config,
        run,
        ode,
    })
}

// ---------------------------------------------------------------- probe

#[derive(Clone, Debug)]
pub struct ProbeRow {
    pub amplitude: f64,
    pub max_ratio: f64,
    pub max_h1: f64,
    pub status: RunStatus,
    pub series: Vec<DiagnosticsRecord>,
}

#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
}

impl ProbeReport {
    pub const NOTE: &'static str =
        "exploratory: a finite resolution cannot witness a true singularity";

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["amplitude", "max_ratio", "max_h1", "status"]);
        for r in &self.rows {
            t.rows.push(vec![
                g(r.amplitude),
                g(r.max_ratio),
                g(r.max_h1),
                status_name(&r.status).into(),
            ]);
        }
        t
    }
}

/// `‖F(u)‖_{H^{-1/4}} / (‖u‖^{9/7}_{H^{7/4}} ‖u‖^{5/7}_{L²})`, zero for `u = 0`.
pub fn supercritical_ratio(ctx: &SpectralContext, u: &SpectralField) -> Result<f64, ExperimentError> {
    let f = crate::nonlinear::convective_term(ctx, u, ConvectiveForm::Divergence)
        .map_err(IntegratorError::from)?;
    let num = sobolev_norm_sq(&f, -0.25).sqrt();
    if num == 0.0 {
        return Ok(0.0);
    }
    let den = sobolev_norm_sq(u, 1.75).sqrt().powf(9.0 / 7.0) * u.l2_norm_sq().sqrt().powf(5.0 / 7.0);
    Ok(num / den)
}

/// Amplitude ladder for the unregularized 3-D problem.
pub fn run_supercritical_probe(
    base: &SolverParams,
    u0_shape: &FieldSpec,
    amplitudes: &[f64],
    workers: usize,
) -> Result<ProbeReport, ExperimentError> {
    let grid = *base.grid();
    if grid.dim() != 3 || base.epsilon != 0.0 {
        return Err(ExperimentError::Usage(
            "supercritical probe needs dim = 3 and epsilon = 0".into(),
        ));
    }
    let shape = u0_shape.materialize(grid, true)?;
    let norm = (shape.l2_norm_sq() / grid.volume()).sqrt();
    let ctx = Arc::new(SpectralContext::new(grid));
    let rows = map_ordered(workers, amplitudes, |&a| -> Result<ProbeRow, ExperimentError> {
        let u0 = if norm > 0.0 { shape.scaled(a / norm) } else { shape.clone() };
        let solver = Solver::with_context(ctx.clone(), base.clone())?;
        let mut max_ratio: f64 = 0.0;
        let mut err = None;
        let mut obs = |s: &RunState, _: &DiagnosticsRecord| match supercritical_ratio(&ctx, &s.u) {
            Ok(r) => max_ratio = max_ratio.max(r),
            Err(e) => err = Some(e),
        };
        let run = solver.run(u0, &mut [&mut obs as &mut dyn Observer])?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(ProbeRow {
            amplitude: a,
            max_ratio,
            max_h1: run.series.iter().map(|r| r.h1_sq).fold(0.0, f64::max),
            status: run.status,
            series: run.series,
        })
    });
    Ok(ProbeReport {
        rows: rows.into_iter().collect::<Result<_, _>>()?,
    })
}

// ---------------------------------------------------------------- Burgers

#[derive(Clone, Debug)]
pub struct BurgersReport {
    pub initial_sup: Vec<f64>,
    /// Largest `max_c (sup U_c(t)/sup U_c(0) - 1)` over all steps.
    pub max_excess: f64,
    pub violating_steps: usize,
    pub max_subcritical_ratio: f64,
    pub status: RunStatus,
    pub series: Vec<DiagnosticsRecord>,
}

/// Relative slack in the maximum-principle check.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-6;

/// Floor on a component's reference sup-norm, relative to the largest one.
pub const ROUNDING_FLOOR: f64 = 1e-12;

impl BurgersReport {
    pub fn holds(&self) -> bool {
        self.violating_steps == 0
    }
}

/// `‖(U·∇)U‖_{H^{-1/4}} / (‖U₀‖^{5/4}_∞ ‖U‖^{3/4}_{H¹})`.
fn burgers_ratio(f: &SpectralField, u: &SpectralField, u0_sup: f64) -> f64 {
    let num = sobolev_norm_sq(f, -0.25).sqrt();
    if num == 0.0 {
        return 0.0;
    }
    num / (u0_sup.powf(1.25) * sobolev_norm_sq(u, 1.0).sqrt().powf(0.75))
}

/// Burgers system with the projector bypassed; monitors every component's
/// grid sup-norm against its initial value.
pub fn run_burgers(base: &SolverParams, u0: &SpectralField) -> Result<BurgersReport, ExperimentError> {
    let grid = *base.grid();
    if grid.dim() != 3 {
        return Err(ExperimentError::Usage("Burgers experiment needs dim = 3".into()));
    }
    let params = base.clone().with_system(FlowSystem::Burgers);
    let solver = Solver::new(params)?;
    let ctx = solver.context().clone();
    let sup = |u: &SpectralField| transform_to_physical(ctx.plan(), u).component_max_abs();
    let initial_sup = sup(u0);
    let u0_sup = initial_sup.iter().cloned().fold(0.0, f64::max);
    let mut max_excess = f64::NEG_INFINITY;
    let mut violating = 0usize;
    let mut max_ratio: f64 = 0.0;
    let mut inspect = |u: &SpectralField, f: &SpectralField| {
        let now = sup(u);
        let mut step_bad = false;
        for (&a, &b) in now.iter().zip(&initial_sup) {
            // Components that vanish up to rounding are measured against the field's scale.
            let b = b.max(ROUNDING_FLOOR * u0_sup);
            let excess = if b > 0.0 { a / b - 1.0 } else if a > 0.0 { f64::INFINITY } else { 0.0 };
            max_excess = max_excess.max(excess);
            if excess > MAX_PRINCIPLE_SLACK {
                step_bad = true;
            }
        }
        violating += usize::from(step_bad);
        max_ratio = max_ratio.max(burgers_ratio(f, u, u0_sup));
    };
    let mut driver = Driver::new(&solver, RunState::initial(u0.clone()))?;
    let mut seen = None;
    loop {
        let more = driver.advance(&mut [])?;
        let s = driver.state();
        if seen != Some(s.step_index) {
            seen = Some(s.step_index);
            inspect(&s.u, driver.transport_term());
        }
        if !more {
            break;
        }
    }
    let run = driver.finish();
    Ok(BurgersReport {
        initial_sup,
        max_excess,
        violating_steps: violating,
        max_subcritical_ratio: max_ratio,
        status: run.status,
        series: run.series,
    })
}
