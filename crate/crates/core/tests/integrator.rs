mod common;

use common::{random_field, random_solenoidal, rel_diff, taylor_green_2d};
use fracns::diagnostics::energy_identity_residual;
use fracns::integrator::{RunState, Solver};
use fracns::nonlinear::convective_term;
use fracns::spectral::{
    leray_project, ConvectiveForm, DtPolicy, FlowSystem, SolverParams, SpectralContext,
    SpectralField, TorusGrid,
};
use proptest::prelude::*;

fn tg_params(nu: f64, alpha: f64, dt: f64, t_end: f64) -> SolverParams {
    let grid = TorusGrid::standard(2, 32).unwrap();
    SolverParams::unforced(grid, nu, DtPolicy::Fixed(dt), t_end).with_alpha(alpha)
}

#[test]
fn taylor_green_decays_at_the_fractional_rate() {
    for (alpha, expected) in [(0.5, 0.914_440_6f64), (0.0, 0.818_730_8)] {
        let p = tg_params(0.1, alpha, 0.01, 1.0);
        let u0 = taylor_green_2d(*p.grid(), 1.0);
        let r = Solver::new(p).unwrap().run(u0.clone(), &mut []).unwrap();
        let ratio = (r.final_state.u.l2_norm_sq() / u0.l2_norm_sq()).sqrt();
        let oracle = (-(0.2f64).powf(1.0 + alpha)).exp();
        assert!((ratio - oracle).abs() <= 1e-6 * oracle);
        assert!((oracle - expected).abs() < 1e-6);
        assert!((r.final_state.t - 1.0).abs() < 1e-15);
    }
}

#[test]
fn zero_state_and_empty_interval() {
    let p = tg_params(0.1, 0.25, 0.05, 1.0);
    let zero = SpectralField::zero_vector(*p.grid());
    let r = Solver::new(p.clone()).unwrap().run(zero.clone(), &mut []).unwrap();
    assert_eq!(r.final_state.u, zero);
    assert!(r.series.iter().all(|x| x.l2_sq == 0.0 && x.energy_residual == 0.0));
    let mut p0 = p;
    p0.t_end = 0.0;
    let u0 = taylor_green_2d(*p0.grid(), 1.0);
    let r = Solver::new(p0).unwrap().run(u0.clone(), &mut []).unwrap();
    assert!(r.series.is_empty() && r.completed());
    assert_eq!(r.final_state.u, u0);
}

/// Lawson RK4 written out independently for the classical equations.
fn reference_step(ctx: &SpectralContext, nu: f64, u: &SpectralField, h: f64) -> SpectralField {
    let grid = *ctx.grid();
    let decay = |u: &SpectralField, tau: f64| {
        let mut out = u.clone();
        for c in 0..grid.dim() {
            for (i, z) in out.component_mut(c).iter_mut().enumerate() {
                *z *= (-nu * grid.k_sq(i) * tau).exp();
            }
        }
        out
    };
    let n = |v: &SpectralField| convective_term(ctx, v, ConvectiveForm::Divergence).unwrap();
    let proj = |v: SpectralField| leray_project(&v).unwrap();
    let k1 = n(u);
    let mut a = u.clone();
    a.axpy(0.5 * h, &k1);
    let a = proj(decay(&a, 0.5 * h));
    let k2 = n(&a);
    let mut b = decay(u, 0.5 * h);
    b.axpy(0.5 * h, &k2);
    let b = proj(b);
    let k3 = n(&b);
    let mut c = decay(u, h);
    c.axpy(h, &decay(&k3, 0.5 * h));
    let c = proj(c);
    let k4 = n(&c);
    let mut out = decay(u, h);
    out.axpy(h / 6.0, &decay(&k1, h));
    out.axpy(h / 3.0, &decay(&k2, 0.5 * h));
    out.axpy(h / 3.0, &decay(&k3, 0.5 * h));
    out.axpy(h / 6.0, &k4);
    proj(out)
}

#[test]
fn classical_limit_matches_reference_step() {
    let grid = TorusGrid::standard(2, 32).unwrap();
    let ctx = SpectralContext::new(grid);
    let u = random_solenoidal(grid, 9).scaled(4.0);
    let p = SolverParams::unforced(grid, 0.05, DtPolicy::Fixed(0.02), 1.0).with_alpha(0.0);
    let solver = Solver::new(p).unwrap();
    let ours = solver.step(&RunState::initial(u.clone()), 0.02).unwrap();
    let theirs = reference_step(&ctx, 0.05, &u, 0.02);
    assert!(rel_diff(&ours.u, &theirs) <= 1e-13);
}

#[test]
fn identical_inputs_give_identical_trajectories() {
    let grid = TorusGrid::standard(2, 32).unwrap();
    let u0 = random_solenoidal(grid, 4).scaled(3.0);
    let p = SolverParams::unforced(grid, 0.02, DtPolicy::cfl(0.5), 0.5).with_alpha(0.3);
    let a = Solver::new(p.clone()).unwrap().run(u0.clone(), &mut []).unwrap();
    let b = Solver::new(p).unwrap().run(u0, &mut []).unwrap();
    assert_eq!(a.series, b.series);
    assert_eq!(a.final_state.u, b.final_state.u);
}

/// Forced linear problem `û' = -σû + f̂` with exact solution
/// `f̂/σ + (û₀ - f̂/σ)e^{-σt}`.
fn linear_error(dt: f64) -> f64 {
    let grid = TorusGrid::standard(2, 16).unwrap();
    let f = random_solenoidal(grid, 21);
    let u0 = random_solenoidal(grid, 22);
    let t = 1.0;
    let p = SolverParams::unforced(grid, 0.1, DtPolicy::Fixed(dt), t)
        .with_alpha(0.25)
        .with_forcing(f.clone())
        .with_system(FlowSystem::Linear);
    let r = Solver::new(p.clone()).unwrap().run(u0.clone(), &mut []).unwrap();
    let mut exact = SpectralField::zero_vector(grid);
    for c in 0..2 {
        for i in 0..grid.len() {
            let s = p.symbol(grid.k_sq(i));
            if s == 0.0 {
                continue;
            }
            let fs = f.component(c)[i] / s;
            exact.component_mut(c)[i] = fs + (u0.component(c)[i] - fs) * (-s * t).exp();
        }
    }
    rel_diff(&r.final_state.u, &exact)
}

#[test]
fn forced_linear_problem_is_fourth_order() {
    let errs: Vec<f64> = [0.2, 0.1, 0.05, 0.025].iter().map(|&dt| linear_error(dt)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 3.9, "errors {errs:?}");
    }
}

#[test]
fn energy_residual_taylor_green() {
    let p = tg_params(0.1, 0.25, 1e-3, 0.1);
    let u0 = taylor_green_2d(*p.grid(), 1.0);
    let r = Solver::new(p).unwrap().run(u0, &mut []).unwrap();
    let worst = r.series.iter().map(|x| x.energy_residual).fold(0.0, f64::max);
    assert!(worst <= 1e-8, "{worst:e}");
}

#[test]
fn energy_residual_shrinks_sixteenfold() {
    let grid = TorusGrid::standard(2, 32).unwrap();
    let u0 = random_solenoidal(grid, 8).scaled(2.0);
    let forcing = random_solenoidal(grid, 13).scaled(0.5);
    let run = |dt: f64| {
        let p = SolverParams::unforced(grid, 0.05, DtPolicy::Fixed(dt), 0.4)
            .with_alpha(0.25)
            .with_forcing(forcing.clone());
        let r = Solver::new(p).unwrap().run(u0.clone(), &mut []).unwrap();
        // Residual of the first interval, recomputed from the budgets.
        energy_identity_residual(&r.budgets[0], &r.budgets[1])
    };
    let (a, b) = (run(0.04), run(0.02));
    let ratio = a / b;
    assert!((12.0..=20.0).contains(&ratio), "{a:e} / {b:e} = {ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn unforced_energy_never_grows(seed in any::<u64>(), amp in 0.1f64..4.0, three in any::<bool>()) {
        let (grid, p) = if three {
            let g = TorusGrid::standard(3, 8).unwrap();
            (g, SolverParams::unforced(g, 0.05, DtPolicy::cfl(0.5), 0.3).with_regularization(0.01, 2.0))
        } else {
            let g = TorusGrid::standard(2, 16).unwrap();
            (g, SolverParams::unforced(g, 0.02, DtPolicy::cfl(0.5), 0.3).with_alpha(0.2))
        };
        let u0 = leray_project(&random_field(grid, seed)).unwrap().scaled(amp);
        let r = Solver::new(p).unwrap().run(u0, &mut []).unwrap();
        prop_assert!(r.completed());
        for w in r.series.windows(2) {
            prop_assert!(w[1].l2_sq <= w[0].l2_sq * (1.0 + 1e-10));
            prop_assert!(w[1].t > w[0].t);
        }
        prop_assert!(r.final_state.u.divergence_defect() <= 1e-12);
    }
}
