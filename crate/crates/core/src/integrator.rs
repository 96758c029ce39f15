//! Integrating-factor RK4 time stepping.
//!
//! The linear part is applied exactly through `e^{-σ(k)h}`; the transport
//! term and the forcing are advanced explicitly with the classical RK4
//! tableau in the transformed variable (Lawson's scheme). Every stage is
//! re-projected onto divergence-free fields.

use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::diagnostics::{
    energy_identity_residual, energy_sample, l2_bound_rhs, weighted_norm_sq, DiagnosticsRecord,
    EnergySample, NormWeights, BOUND_SLACK,
};
use crate::nonlinear::{burgers_term, convective_term, orthogonality_of, NonlinearError};
use crate::spectral::{
    transform_to_physical, DtPolicy, FlowSystem, SolverParams, SpectralContext, SpectralError,
    SpectralField,
};

/// `‖u‖_{H¹}` above which a state counts as blown up.
pub const BLOWUP_H1: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Nonlinear(#[from] NonlinearError),
    #[error("blow-up at t = {t} (last finite ‖u‖² = {last_l2_sq:e}, ‖∇u‖² = {last_h1_sq:e})")]
    BlowUp {
        t: f64,
        last_l2_sq: f64,
        last_h1_sq: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunState {
    pub t: f64,
    pub u: SpectralField,
    pub step_index: u64,
}

impl RunState {
    pub fn initial(u: SpectralField) -> Self {
        Self {
            t: 0.0,
            u,
            step_index: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RunStatus {
    Completed,
    BlowUp {
        t: f64,
        last_l2_sq: f64,
        last_h1_sq: f64,
    },
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub status: RunStatus,
    pub final_state: RunState,
    pub series: Vec<DiagnosticsRecord>,
    /// Energy budget of every recorded state, aligned with `series`.
    pub budgets: Vec<EnergySample>,
}

impl RunResult {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }
}

/// Callback invoked with every recorded state.
pub trait Observer {
    fn observe(&mut self, state: &RunState, record: &DiagnosticsRecord);
}

impl<F: FnMut(&RunState, &DiagnosticsRecord)> Observer for F {
    fn observe(&mut self, state: &RunState, record: &DiagnosticsRecord) {
        self(state, record)
    }
}

/// Number of fixed steps of size `dt` covering `[0, t_end]`.
pub fn fixed_step_count(t_end: f64, dt: f64) -> u64 {
    let r = t_end / dt;
    let near = r.round();
    if (r - near).abs() <= 1e-9 * near.max(1.0) {
        near as u64
    } else {
        r.ceil() as u64
    }
}

type Table = Arc<(f64, Vec<f64>, Vec<f64>)>;

/// A configured integrator for one parameter set.
pub struct Solver {
    ctx: Arc<SpectralContext>,
    params: SolverParams,
    weights: NormWeights,
    exp_cache: Mutex<Option<Table>>,
}

impl Solver {
    pub fn new(params: SolverParams) -> Result<Self, IntegratorError> {
        let ctx = Arc::new(SpectralContext::new(*params.grid()));
        Self::with_context(ctx, params)
    }

    /// Shares precomputed transform tables between runs on one grid.
    pub fn with_context(
        ctx: Arc<SpectralContext>,
        params: SolverParams,
    ) -> Result<Self, IntegratorError> {
        params.validate()?;
        if ctx.grid() != params.grid() {
            return Err(SpectralError::Structure("context grid differs from forcing grid".into()).into());
        }
        let weights = NormWeights::new(&ctx, &params);
        Ok(Self {
            ctx,
            params,
            weights,
            exp_cache: Mutex::new(None),
        })
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn context(&self) -> &Arc<SpectralContext> {
        &self.ctx
    }

    pub fn weights(&self) -> &NormWeights {
        &self.weights
    }

    fn check_field(&self, u: &SpectralField) -> Result<(), IntegratorError> {
        if u.grid() != self.ctx.grid() || u.ncomp() != self.ctx.grid().dim() {
            return Err(SpectralError::Structure(
                "initial field does not match the solver grid".into(),
            )
            .into());
        }
        Ok(())
    }

    /// Transport term of the configured system, without the forcing.
    pub fn transport(&self, u: &SpectralField) -> Result<SpectralField, IntegratorError> {
        Ok(match self.params.system {
            FlowSystem::NavierStokes(form) => convective_term(&self.ctx, u, form)?,
            FlowSystem::Burgers => burgers_term(&self.ctx, u)?,
            FlowSystem::Linear => SpectralField::zero_vector(*u.grid()),
        })
    }

    fn rhs(&self, u: &SpectralField) -> Result<Vec<Vec<Complex64>>, IntegratorError> {
        let mut n = self.transport(u)?.into_components();
        add_forcing(&mut n, &self.params.forcing);
        Ok(n)
    }

    fn exp_tables(&self, h: f64) -> Table {
        let mut cache = self.exp_cache.lock().expect("cache lock");
        match &*cache {
            Some(t) if t.0 == h => t.clone(),
            _ => {
                let full = self.weights.sigma.iter().map(|s| (-s * h).exp()).collect();
                let half = self.weights.sigma.iter().map(|s| (-s * 0.5 * h).exp()).collect();
                let t = Arc::new((h, full, half));
                *cache = Some(t.clone());
                t
            }
        }
    }

    fn stage_field(&self, comps: Vec<Vec<Complex64>>) -> SpectralField {
        let mut comps = comps;
        // The projector also pins the mean mode to zero.
        if self.params.system != FlowSystem::Burgers {
            self.ctx.project_in_place(&mut comps);
        }
        let mut f = SpectralField::from_components(*self.ctx.grid(), comps)
            .expect("stage arrays match the grid");
        f.set_solenoidal(self.params.system != FlowSystem::Burgers);
        f
    }

    /// One IF-RK4 step from `u` with `k1 = N(u) + f` already evaluated.
    fn advance(
        &self,
        u: &SpectralField,
        k1: &[Vec<Complex64>],
        h: f64,
    ) -> Result<SpectralField, IntegratorError> {
        let tables = self.exp_tables(h);
        let (_, e, eh) = &*tables;
        let uc = u.components();
        let combine = |f: &dyn Fn(usize, usize) -> Complex64| -> Vec<Vec<Complex64>> {
            (0..uc.len())
                .map(|c| (0..uc[c].len()).map(|i| f(c, i)).collect())
                .collect()
        };
        let a = self.stage_field(combine(&|c, i| eh[i] * (uc[c][i] + 0.5 * h * k1[c][i])));
        let k2 = self.rhs(&a)?;
        let b = self.stage_field(combine(&|c, i| eh[i] * uc[c][i] + 0.5 * h * k2[c][i]));
        let k3 = self.rhs(&b)?;
        let cst = self.stage_field(combine(&|c, i| e[i] * uc[c][i] + h * eh[i] * k3[c][i]));
        let k4 = self.rhs(&cst)?;
        let out = combine(&|c, i| {
            e[i] * uc[c][i]
                + h / 6.0 * (e[i] * k1[c][i] + 2.0 * eh[i] * (k2[c][i] + k3[c][i]) + k4[c][i])
        });
        Ok(self.stage_field(out))
    }

    fn blow_up_check(&self, t: f64, prev: &SpectralField, next: &SpectralField) -> Result<(), IntegratorError> {
        let h1 = weighted_norm_sq(next, &self.weights.k2);
        if !next.is_finite() || !h1.is_finite() || h1.sqrt() > BLOWUP_H1 {
            return Err(IntegratorError::BlowUp {
                t,
                last_l2_sq: prev.l2_norm_sq(),
                last_h1_sq: weighted_norm_sq(prev, &self.weights.k2),
            });
        }
        Ok(())
    }

    /// Advances `state` by `dt`. Non-finite output or `‖u‖_{H¹} > 10¹²`
    /// yields [`IntegratorError::BlowUp`].
    pub fn step(&self, state: &RunState, dt: f64) -> Result<RunState, IntegratorError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SpectralError::Config(format!("dt must be positive, got {dt}")).into());
        }
        self.check_field(&state.u)?;
        let k1 = self.rhs(&state.u)?;
        let u = self.advance(&state.u, &k1, dt)?;
        self.blow_up_check(state.t + dt, &state.u, &u)?;
        Ok(RunState {
            t: state.t + dt,
            u,
            step_index: state.step_index + 1,
        })
    }

    /// Step size proposed by the configured policy for `state`.
    pub fn choose_dt(&self, state: &RunState) -> f64 {
        choose_dt(&self.ctx, state, &self.params)
    }

    /// Integrates `u0` from `t = 0` to `t_end`.
    pub fn run(
        &self,
        u0: SpectralField,
        observers: &mut [&mut dyn Observer],
    ) -> Result<RunResult, IntegratorError> {
        self.run_from(RunState::initial(u0), observers)
    }

    /// Continues from a saved state. Under a fixed step the time grid is
    /// `t_i = i·dt` for the global step index `i`, so resuming is bitwise
    /// identical to an uninterrupted run.
    pub fn run_from(
        &self,
        state: RunState,
        observers: &mut [&mut dyn Observer],
    ) -> Result<RunResult, IntegratorError> {
        let mut driver = Driver::new(self, state)?;
        while driver.advance(observers)? {}
        Ok(driver.finish())
    }
}

fn add_forcing(n: &mut [Vec<Complex64>], forcing: &SpectralField) {
    for (nc, fc) in n.iter_mut().zip(forcing.components()) {
        for (a, b) in nc.iter_mut().zip(fc) {
            *a += b;
        }
    }
}

/// CFL step `C·Δx / max(max|u|, u_floor)` clamped to `[dt_min, dt_max]`;
/// the fixed step otherwise.
pub fn choose_dt(ctx: &SpectralContext, state: &RunState, params: &SolverParams) -> f64 {
    match params.dt_policy {
        DtPolicy::Fixed(dt) => dt,
        DtPolicy::Cfl {
            courant,
            dt_min,
            dt_max,
            u_floor,
        } => {
            let umax = transform_to_physical(ctx.plan(), &state.u).max_magnitude();
            let dx = ctx.grid().spacing();
            (courant * dx / umax.max(u_floor)).clamp(dt_min, dt_max)
        }
    }
}

/// Incremental run driver. Holds the current state together with its
/// transport term so every step reuses the first RK stage for diagnostics.
pub struct Driver<'a> {
    solver: &'a Solver,
    state: RunState,
    conv: SpectralField,
    sample: EnergySample,
    series: Vec<DiagnosticsRecord>,
    budgets: Vec<EnergySample>,
    l2_rhs: f64,
    status: Option<RunStatus>,
    started: bool,
}

impl<'a> Driver<'a> {
    pub fn new(solver: &'a Solver, state: RunState) -> Result<Self, IntegratorError> {
        solver.check_field(&state.u)?;
        let conv = solver.transport(&state.u)?;
        let sample = energy_sample(
            state.t,
            &state.u,
            &conv,
            &solver.params.forcing,
            &solver.weights.sigma,
        );
        let l2_rhs = l2_bound_rhs(&solver.params, state.u.l2_norm_sq());
        let done = state.t >= solver.params.t_end;
        Ok(Self {
            solver,
            state,
            conv,
            sample,
            series: Vec::new(),
            budgets: Vec::new(),
            l2_rhs,
            status: done.then_some(RunStatus::Completed),
            started: false,
        })
    }

    /// Overrides the right side used for the per-record `L²` flag.
    pub fn set_l2_rhs(&mut self, rhs: f64) {
        self.l2_rhs = rhs;
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    /// Transport term `F(u)` at the current state.
    pub fn transport_term(&self) -> &SpectralField {
        &self.conv
    }

    pub fn is_done(&self) -> bool {
        self.status.is_some()
    }

    fn record(&self, dt: f64, residual: f64) -> DiagnosticsRecord {
        let w = &self.solver.weights;
        let u = &self.state.u;
        let l2_sq = u.l2_norm_sq();
        DiagnosticsRecord {
            t: self.state.t,
            dt,
            l2_sq,
            h1_sq: weighted_norm_sq(u, &w.k2),
            h1a_sq: weighted_norm_sq(u, &w.k2_order_1a),
            h2_sq: weighted_norm_sq(u, &w.k4),
            energy_residual: residual,
            orth_residual: orthogonality_of(&self.conv, u),
            bound_1_9_ok: l2_sq <= self.l2_rhs * (1.0 + BOUND_SLACK),
        }
    }

    fn emit(&mut self, rec: DiagnosticsRecord, observers: &mut [&mut dyn Observer]) {
        for o in observers.iter_mut() {
            o.observe(&self.state, &rec);
        }
        self.series.push(rec);
        self.budgets.push(self.sample);
    }

    fn next_step(&self) -> (f64, f64) {
        let p = &self.solver.params;
        let t_end = p.t_end;
        match p.dt_policy {
            DtPolicy::Fixed(dt) => {
                let total = fixed_step_count(t_end, dt);
                let i = self.state.step_index;
                if i + 1 >= total {
                    let h = t_end - i as f64 * dt;
                    let h = if (h - dt).abs() <= 1e-9 * dt { dt } else { h };
                    (h, t_end)
                } else {
                    (dt, (i + 1) as f64 * dt)
                }
            }
            DtPolicy::Cfl { .. } => {
                let h = self.solver.choose_dt(&self.state);
                let t = self.state.t;
                if t + h >= t_end * (1.0 - 1e-14) {
                    (t_end - t, t_end)
                } else {
                    (h, t + h)
                }
            }
        }
    }

    /// Takes one step; returns `Ok(false)` once the run has terminated.
    pub fn advance(&mut self, observers: &mut [&mut dyn Observer]) -> Result<bool, IntegratorError> {
        if !self.started && self.status.is_none() {
            self.started = true;
            let rec = self.record(0.0, 0.0);
            self.emit(rec, observers);
        }
        if self.status.is_some() {
            return Ok(false);
        }
        let (h, t_next) = self.next_step();
        let mut k1 = self.conv.clone().into_components();
        add_forcing(&mut k1, &self.solver.params.forcing);
        let u = self.solver.advance(&self.state.u, &k1, h)?;
        if let Err(IntegratorError::BlowUp {
            t,
            last_l2_sq,
            last_h1_sq,
        }) = self.solver.blow_up_check(t_next, &self.state.u, &u)
        {
            self.status = Some(RunStatus::BlowUp {
                t,
                last_l2_sq,
                last_h1_sq,
            });
            return Ok(false);
        }
        self.state = RunState {
            t: t_next,
            u,
            step_index: self.state.step_index + 1,
        };
        self.conv = self.solver.transport(&self.state.u)?;
        let prev = self.sample;
        self.sample = energy_sample(
            t_next,
            &self.state.u,
            &self.conv,
            &self.solver.params.forcing,
            &self.solver.weights.sigma,
        );
        let rec = self.record(h, energy_identity_residual(&prev, &self.sample));
        self.emit(rec, observers);
        if t_next >= self.solver.params.t_end {
            self.status = Some(RunStatus::Completed);
            return Ok(false);
        }
        Ok(true)
    }

    pub fn finish(self) -> RunResult {
        RunResult {
            status: self.status.unwrap_or(RunStatus::Completed),
            final_state: self.state,
            series: self.series,
            budgets: self.budgets,
        }
    }
}
