mod common;

use std::f64::consts::PI;

use common::{random_field, rel_diff, taylor_green_2d};
use fracns::fracpow::{frac_power_1plus, OperatorSpec, QuadratureConfig};
use fracns::spectral::{
    leray_project, linear_symbol, transform_to_physical, transform_to_spectral, DtPolicy, FftPlan,
    PhysicalField, SolverParams, SpectralField, TorusGrid,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rustfft::num_complex::Complex64;

/// Physical-space matrix of the projector built from its kernel
/// `N⁻¹ Σ_k e^{ik·(x-y)} (δ_ab - k_a k_b/|k|²)`, with the Nyquist component
/// of `k` dropped and the zero map where the remaining `k` vanishes.
fn kernel_matrix(n: usize) -> DMatrix<f64> {
    let total = n * n;
    let half = -(n as i64) / 2;
    let signed = |j: usize| if j < n / 2 { j as i64 } else { j as i64 - n as i64 };
    let mut p = DMatrix::zeros(2 * total, 2 * total);
    let h = 2.0 * PI / n as f64;
    for mx in 0..n {
        for my in 0..n {
            let m = [signed(mx), signed(my)];
            let k: Vec<f64> = m.iter().map(|&c| if c == half { 0.0 } else { c as f64 }).collect();
            let kk = k[0] * k[0] + k[1] * k[1];
            if kk == 0.0 {
                continue;
            }
            let s = |a: usize, b: usize| f64::from(u8::from(a == b)) - k[a] * k[b] / kk;
            for x in 0..total {
                for y in 0..total {
                    let dx = (x / n) as f64 - (y / n) as f64;
                    let dy = (x % n) as f64 - (y % n) as f64;
                    let phase = h * (m[0] as f64 * dx + m[1] as f64 * dy);
                    let c = phase.cos() / total as f64;
                    for a in 0..2 {
                        for b in 0..2 {
                            p[(a * total + x, b * total + y)] += c * s(a, b);
                        }
                    }
                }
            }
        }
    }
    p
}

/// The library projector applied column by column in physical space.
fn library_matrix(grid: TorusGrid) -> DMatrix<f64> {
    let total = grid.len();
    let plan = FftPlan::new(grid);
    let mut p = DMatrix::zeros(2 * total, 2 * total);
    for col in 0..2 * total {
        let mut comps = vec![vec![0.0; total]; 2];
        comps[col / total][col % total] = 1.0;
        let v = transform_to_spectral(&plan, &PhysicalField { grid, comps }).unwrap();
        let out = transform_to_physical(&plan, &leray_project(&v).unwrap());
        for a in 0..2 {
            for x in 0..total {
                p[(a * total + x, col)] = out.comps[a][x];
            }
        }
    }
    p
}

#[test]
fn projector_matches_dense_kernel_on_8x8() {
    let grid = TorusGrid::standard(2, 8).unwrap();
    let lib = library_matrix(grid);
    let oracle = kernel_matrix(8);
    assert!((&lib - &oracle).amax() < 1e-14, "max deviation {}", (&lib - &oracle).amax());
    assert!((&lib - lib.transpose()).amax() < 1e-14);
    assert!((&lib * &lib - &lib).amax() < 1e-13);
}

#[test]
fn gradient_is_annihilated() {
    // v = ∇ sin x₁ = (cos x₁, 0)
    let grid = TorusGrid::standard(2, 16).unwrap();
    let mut v = SpectralField::zero_vector(grid);
    v.component_mut(0)[grid.index_of([1, 0, 0])] = Complex64::new(0.5, 0.0);
    v.component_mut(0)[grid.index_of([-1, 0, 0])] = Complex64::new(0.5, 0.0);
    assert_eq!(leray_project(&v).unwrap().coefficient_norm(), 0.0);
}

#[test]
fn divergence_free_input_is_unchanged() {
    let grid = TorusGrid::standard(2, 32).unwrap();
    let u = taylor_green_2d(grid, 1.0);
    assert!(rel_diff(&leray_project(&u).unwrap(), &u) <= 1e-14);
}

#[test]
fn random_field_projection_on_16x16() {
    let grid = TorusGrid::standard(2, 16).unwrap();
    let v = random_field(grid, 5);
    let pv = leray_project(&v).unwrap();
    let plan = FftPlan::new(grid);
    // Physical divergence through spectral differentiation.
    let mut div = SpectralField::zeros(grid, 1);
    for idx in 0..grid.len() {
        let k = grid.derivative_wavevector(idx);
        div.component_mut(0)[idx] =
            Complex64::new(0.0, 1.0) * (pv.component(0)[idx] * k[0] + pv.component(1)[idx] * k[1]);
    }
    let div_inf = transform_to_physical(&plan, &div).comps[0]
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(div_inf / pv.l2_norm_sq().sqrt() <= 1e-12);
    assert!(rel_diff(&leray_project(&pv).unwrap(), &pv) <= 1e-14);
    assert!(pv.is_solenoidal());
}

#[test]
fn single_mode_synthesizes_cosine() {
    let grid = TorusGrid::standard(2, 16).unwrap();
    let plan = FftPlan::new(grid);
    let mut u = SpectralField::zeros(grid, 1);
    u.component_mut(0)[grid.index_of([1, 0, 0])] = Complex64::new(0.5, 0.0);
    u.component_mut(0)[grid.index_of([-1, 0, 0])] = Complex64::new(0.5, 0.0);
    let p = transform_to_physical(&plan, &u);
    let h = grid.spacing();
    for (j, &val) in p.comps[0].iter().enumerate() {
        let x1 = (j / 16) as f64 * h;
        assert!((val - x1.cos()).abs() < 1e-15);
    }
    let zero = transform_to_physical(&plan, &SpectralField::zeros(grid, 1));
    assert!(zero.comps[0].iter().all(|&x| x == 0.0));
}

#[test]
fn symbol_examples() {
    let g2 = TorusGrid::standard(2, 16).unwrap();
    let g3 = TorusGrid::standard(3, 8).unwrap();
    let p = SolverParams::unforced(g2, 1.0, DtPolicy::Fixed(0.1), 1.0);
    assert_eq!(linear_symbol(&p, [1.0, 1.0, 0.0]), 2.0);
    let p = SolverParams::unforced(g2, 0.1, DtPolicy::Fixed(0.1), 1.0).with_alpha(0.5);
    assert!((linear_symbol(&p, [1.0, 1.0, 0.0]) - 0.2f64.powf(1.5)).abs() < 1e-15);
    assert!((linear_symbol(&p, [1.0, 1.0, 0.0]) - 0.0894427190999916).abs() < 1e-15);
    let p = SolverParams::unforced(g3, 1.0, DtPolicy::Fixed(0.1), 1.0).with_regularization(0.01, 2.0);
    assert!((linear_symbol(&p, [2.0, 0.0, 0.0]) - 4.16).abs() < 1e-14);
}

#[test]
fn symbol_agrees_with_balakrishnan_power_of_diagonal_stokes() {
    let grid = TorusGrid::standard(2, 16).unwrap();
    let nu = 0.1;
    let shells: Vec<f64> = (1..=12).map(f64::from).collect();
    let a = OperatorSpec::diagonal(&shells.iter().map(|k2| nu * k2).collect::<Vec<_>>()).unwrap();
    let q = QuadratureConfig::default_for(&a);
    let ones = DVector::from_element(shells.len(), 1.0);
    for alpha in [0.1, 0.25, 0.5] {
        let p = SolverParams::unforced(grid, nu, DtPolicy::Fixed(0.1), 1.0).with_alpha(alpha);
        let r = frac_power_1plus(&a, alpha, &q, &ones).unwrap();
        for (i, &k2) in shells.iter().enumerate() {
            let sym = p.symbol(k2);
            assert!((r.value[i] - sym).abs() <= 1e-6 * sym, "alpha {alpha} |k|² {k2}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval_holds(seed in any::<u64>(), three in any::<bool>()) {
        let grid = if three { TorusGrid::standard(3, 8) } else { TorusGrid::standard(2, 16) }.unwrap();
        let u = random_field(grid, seed);
        let phys = transform_to_physical(&FftPlan::new(grid), &u);
        let (a, b) = (u.l2_norm_sq(), phys.l2_norm_sq());
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn round_trip_is_exact(seed in any::<u64>()) {
        let grid = TorusGrid::standard(2, 32).unwrap();
        let u = random_field(grid, seed);
        let plan = FftPlan::new(grid);
        let phys = transform_to_physical(&plan, &u);
        let back = transform_to_physical(&plan, &transform_to_spectral(&plan, &phys).unwrap());
        let amp = phys.comps.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        let err = phys.comps.iter().flatten().zip(back.comps.iter().flatten())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(err <= 1e-13 * amp);
    }

    #[test]
    fn projector_is_idempotent_and_self_adjoint(s1 in any::<u64>(), s2 in any::<u64>(), three in any::<bool>()) {
        let grid = if three { TorusGrid::standard(3, 8) } else { TorusGrid::standard(2, 16) }.unwrap();
        let v = random_field(grid, s1);
        let w = random_field(grid, s2);
        let pv = leray_project(&v).unwrap();
        let pw = leray_project(&w).unwrap();
        prop_assert!(rel_diff(&leray_project(&pv).unwrap(), &pv) <= 1e-14);
        prop_assert!(pv.hermitian_defect() <= 1e-15 && pv.mean_is_zero());
        let (a, b) = (pv.coefficient_inner(&w), v.coefficient_inner(&pw));
        prop_assert!((a - b).abs() <= 1e-12 * v.coefficient_norm() * w.coefficient_norm());
    }

    #[test]
    fn symbol_is_monotone(k2 in 0.0f64..400.0, dk in 0.0f64..50.0, nu in 0.01f64..2.0,
                          alpha in 0.0f64..0.5, da in 0.0f64..0.5, eps in 0.0f64..1.0, de in 0.0f64..1.0,
                          s in 1.1f64..3.0) {
        let g2 = TorusGrid::standard(2, 8).unwrap();
        let g3 = TorusGrid::standard(3, 8).unwrap();
        let p2 = SolverParams::unforced(g2, nu, DtPolicy::Fixed(0.1), 1.0).with_alpha(alpha);
        prop_assert!(p2.symbol(k2 + dk) >= p2.symbol(k2));
        let p3 = SolverParams::unforced(g3, nu, DtPolicy::Fixed(0.1), 1.0).with_regularization(eps, s);
        prop_assert!(p3.symbol(k2 + dk) >= p3.symbol(k2));
        let p3b = p3.clone().with_regularization(eps + de, s);
        prop_assert!(p3b.symbol(k2) >= p3.symbol(k2));
        if nu * k2 >= 1.0 {
            let a2 = (alpha + da).min(0.5);
            let p2b = p2.clone().with_alpha(a2);
            prop_assert!(p2b.symbol(k2) >= p2.symbol(k2) * (1.0 - 1e-15));
        }
    }
}
