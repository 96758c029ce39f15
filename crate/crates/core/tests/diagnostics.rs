mod common;

use common::{random_field, random_solenoidal, taylor_green_2d};
use fracns::diagnostics::{
    check_l2_bound, check_l2_bound_against, check_time_integrated_bounds, criticality_exponent,
    l2_bound_rhs, sobolev_norm_sq, subordination_margin, subordination_theta, Rational, SCENARIOS,
};
use fracns::experiments::FieldSpec;
use fracns::integrator::Solver;
use fracns::spectral::{
    leray_project, DtPolicy, SolverParams, SpectralContext, SpectralField, TorusGrid,
};
use proptest::prelude::*;
use rustfft::num_complex::Complex64;

#[test]
fn sobolev_examples() {
    let grid = TorusGrid::standard(2, 32).unwrap();
    assert_eq!(sobolev_norm_sq(&SpectralField::zero_vector(grid), 1.0), 0.0);

    // (0, cos x₁) has |k| = 1, so every order gives the same value.
    let mut u = SpectralField::zero_vector(grid);
    u.component_mut(1)[grid.index_of([1, 0, 0])] = Complex64::new(0.5, 0.0);
    u.component_mut(1)[grid.index_of([-1, 0, 0])] = Complex64::new(0.5, 0.0);
    let e = sobolev_norm_sq(&u, 0.0);
    // ∫ cos² x₁ over (2π)² is 2π².
    assert!((e - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
    assert!((sobolev_norm_sq(&u, 1.0) - e).abs() < 1e-12);

    // Taylor–Green lives on |k|² = 2.
    let tg = taylor_green_2d(grid, 1.0);
    let l2 = sobolev_norm_sq(&tg, 0.0);
    assert!((sobolev_norm_sq(&tg, 1.0) - 2.0 * l2).abs() < 1e-12 * l2);
    assert!((sobolev_norm_sq(&tg, 2.0) - 4.0 * l2).abs() < 1e-12 * l2);
    assert!((l2 - tg.l2_norm_sq()).abs() < 1e-12 * l2);
}

#[test]
fn forced_taylor_green_respects_l2_bound() {
    let grid = TorusGrid::standard(2, 32).unwrap();
    let f = taylor_green_2d(grid, 0.2);
    let u0 = taylor_green_2d(grid, 1.0);
    let p = SolverParams::unforced(grid, 0.1, DtPolicy::Fixed(0.02), 4.0)
        .with_alpha(0.25)
        .with_forcing(f);
    let r = Solver::new(p.clone()).unwrap().run(u0, &mut []).unwrap();
    let report = check_l2_bound(&r.series, &p);
    assert!(!report.violated, "{report:?}");
    assert!(report.margin > 0.0);
    for b in check_time_integrated_bounds(&r.series, &p) {
        assert!(!b.violated, "{b:?}");
    }

    // Inflating one record above the bound must be caught.
    let mut bad = r.series.clone();
    let rhs = l2_bound_rhs(&p, bad[0].l2_sq);
    bad[10].l2_sq = 1.01 * rhs;
    assert!(check_l2_bound(&bad, &p).violated);
    bad[10].l2_sq = f64::NAN;
    assert!(check_l2_bound_against(&bad, rhs).violated);
}

#[test]
fn regularized_3d_bounds_hold() {
    let grid = TorusGrid::standard(3, 16).unwrap();
    let f = random_solenoidal(grid, 31).scaled(0.05);
    // Smooth data: the trapezoid over the series must resolve the decay of ‖Δu‖².
    let u0 = FieldSpec::random(32, 3.0, 1.0).materialize(grid, true).unwrap();
    let p = SolverParams::unforced(grid, 0.2, DtPolicy::Fixed(0.02), 1.0)
        .with_regularization(0.05, 2.0)
        .with_forcing(f);
    let r = Solver::new(p.clone()).unwrap().run(u0, &mut []).unwrap();
    assert!(!check_l2_bound(&r.series, &p).violated);
    let reports = check_time_integrated_bounds(&r.series, &p);
    let names: Vec<&str> = reports.iter().map(|b| b.bound_name.as_str()).collect();
    assert_eq!(names, ["h1es", "h2e", "h2e_literal"]);
    for b in &reports {
        assert!(!b.violated, "{b:?}");
    }
}

#[test]
fn dissipation_integral_matches_closed_form() {
    // Unforced classical Taylor–Green: ‖∇u(t)‖² = ‖∇u₀‖² e^{-2σt}, σ = 2ν.
    let grid = TorusGrid::standard(2, 32).unwrap();
    let (nu, t_end) = (0.1, 2.0);
    let p = SolverParams::unforced(grid, nu, DtPolicy::Fixed(0.005), t_end).with_alpha(0.0);
    let u0 = taylor_green_2d(grid, 1.0);
    let g0 = sobolev_norm_sq(&u0, 1.0);
    let r = Solver::new(p.clone()).unwrap().run(u0, &mut []).unwrap();
    let h1es = check_time_integrated_bounds(&r.series, &p).remove(0);
    let sigma = 2.0 * nu;
    let exact = g0 * (1.0 - (-2.0 * sigma * t_end).exp()) / (2.0 * sigma);
    assert!((h1es.lhs - exact).abs() <= 1e-4 * exact, "{} vs {exact}", h1es.lhs);
    assert!(!h1es.violated);
}

#[test]
fn exponent_table_values() {
    let th = |d, s| criticality_exponent(d, s).unwrap().theta;
    assert_eq!(th(3, "3d_X78"), Rational::new(9, 7));
    assert_eq!(th(3, "3d_theta0"), Rational::new(3, 2));
    let c = criticality_exponent(3, "3d_critical_s").unwrap();
    assert_eq!(c.critical_s, Some(Rational::new(5, 4)));
    for s in ["2d_X12", "2d_X34", "2d_X1"] {
        assert_eq!(th(2, s), Rational::from_integer(1));
    }
    assert_eq!(SCENARIOS.len(), 6);
    assert!(criticality_exponent(3, "2d_X1").is_err());
}

#[test]
fn subordination_exponent_and_margin() {
    // θ(s) = 2/(2s - 1/2) written out for the listed cases.
    assert!((subordination_theta(2.0) - 4.0 / 7.0).abs() < 1e-15);
    assert!((subordination_theta(1.25) - 1.0).abs() < 1e-15);
    assert!((subordination_theta(1.3) - 2.0 / 2.1).abs() < 1e-15);

    let grid = TorusGrid::standard(3, 16).unwrap();
    let ctx = SpectralContext::new(grid);
    let u = random_solenoidal(grid, 40);
    let base = SolverParams::unforced(grid, 0.1, DtPolicy::Fixed(0.01), 1.0);
    let critical = subordination_margin(&ctx, &u, &base.clone().with_regularization(0.1, 1.25)).unwrap();
    assert!(critical.ratio.is_none() && critical.warning.is_some());
    let sub = subordination_margin(&ctx, &u, &base.with_regularization(0.1, 2.0)).unwrap();
    assert!(sub.warning.is_none());
    let ratio = sub.ratio.unwrap();
    assert!(ratio.is_finite() && ratio > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sobolev_norm_is_monotone_in_order(seed in any::<u64>(), a in -1.0f64..3.0, d in 0.0f64..2.0) {
        let grid = TorusGrid::standard(2, 16).unwrap();
        let u = random_field(grid, seed);
        prop_assert!(sobolev_norm_sq(&u, a) <= sobolev_norm_sq(&u, a + d) * (1.0 + 1e-14));
    }

    #[test]
    fn interpolation_inequality(seed in any::<u64>(), a in -0.5f64..1.0, d in 0.1f64..2.0,
                                theta in 0.0f64..1.0, three in any::<bool>()) {
        let grid = if three { TorusGrid::standard(3, 8) } else { TorusGrid::standard(2, 16) }.unwrap();
        let u = leray_project(&random_field(grid, seed)).unwrap();
        let b = a + d;
        let s = (1.0 - theta) * a + theta * b;
        let lhs = sobolev_norm_sq(&u, s);
        let rhs = sobolev_norm_sq(&u, a).powf(1.0 - theta) * sobolev_norm_sq(&u, b).powf(theta);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }
}
