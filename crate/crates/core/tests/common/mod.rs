#![allow(dead_code)]

use fracns::spectral::{
    leray_project, transform_to_spectral, FftPlan, PhysicalField, SpectralField, TorusGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

/// White-noise real vector field with the mean removed.
pub fn random_field(grid: TorusGrid, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = (0..grid.dim())
        .map(|_| (0..grid.len()).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();
    let plan = FftPlan::new(grid);
    let mut u = transform_to_spectral(&plan, &PhysicalField { grid, comps }).unwrap();
    u.enforce_symmetry();
    u
}

/// Dealiased, divergence-free random field.
pub fn random_solenoidal(grid: TorusGrid, seed: u64) -> SpectralField {
    let mut u = random_field(grid, seed);
    u.dealias();
    leray_project(&u).unwrap()
}

/// `(cos x₁ sin x₂, -sin x₁ cos x₂)` times `a`.
pub fn taylor_green_2d(grid: TorusGrid, a: f64) -> SpectralField {
    let mut u = SpectralField::zero_vector(grid);
    for (s1, s2) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
        let idx = grid.index_of([s1, s2, 0]);
        u.component_mut(0)[idx] = Complex64::new(0.0, -0.25 * s2 as f64 * a);
        u.component_mut(1)[idx] = Complex64::new(0.0, 0.25 * s1 as f64 * a);
    }
    leray_project(&u).unwrap()
}

pub fn rel_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    let scale = a.coefficient_norm().max(b.coefficient_norm());
    if scale == 0.0 {
        0.0
    } else {
        a.difference(b).coefficient_norm() / scale
    }
}
