//! Dealiased pseudo-spectral evaluation of the convective term
//! `F(u) = -P(u·∇)u`.
//!
//! Products are formed on the physical grid, derivatives in Fourier space.
//! Inputs and outputs are truncated with the 2/3 rule, which keeps the
//! discrete trilinear form exact and `⟨F(u), u⟩ = 0` up to rounding.

use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::spectral::{ConvectiveForm, SpectralContext, SpectralField};

/// Relative divergence defect above which `convective_term` refuses input.
pub const CONTRACT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearError {
    #[error("input is not divergence-free (relative defect {defect:.3e})")]
    NotSolenoidal { defect: f64 },
    #[error("structural error: {0}")]
    Structure(String),
}

fn check_shape(ctx: &SpectralContext, u: &SpectralField) -> Result<(), NonlinearError> {
    if u.grid() != ctx.grid() || u.ncomp() != ctx.grid().dim() {
        return Err(NonlinearError::Structure(format!(
            "expected a {}-component field on the context grid",
            ctx.grid().dim()
        )));
    }
    Ok(())
}

fn to_physical_all(ctx: &SpectralContext, comps: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
    let plan = ctx.plan();
    let mut out = Vec::with_capacity(comps.len());
    for pair in comps.chunks(2) {
        if pair.len() == 2 {
            let (a, b) = plan.to_physical_pair(&pair[0], &pair[1]);
            out.push(a);
            out.push(b);
        } else {
            out.push(plan.to_physical(&pair[0]));
        }
    }
    out
}

fn to_spectral_all(ctx: &SpectralContext, reals: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    let plan = ctx.plan();
    let mut out = Vec::with_capacity(reals.len());
    for pair in reals.chunks(2) {
        if pair.len() == 2 {
            let (a, b) = plan.to_spectral_pair(&pair[0], &pair[1]);
            out.push(a);
            out.push(b);
        } else {
            out.push(plan.to_spectral(&pair[0]));
        }
    }
    out
}

fn dealiased(ctx: &SpectralContext, f: &SpectralField) -> Vec<Vec<Complex64>> {
    f.components()
        .iter()
        .map(|c| {
            let mut c = c.clone();
            ctx.dealias(&mut c);
            c
        })
        .collect()
}

/// `T[(u·∇)v]` in Fourier space, where `T` is the 2/3 truncation.
fn transport(
    ctx: &SpectralContext,
    u: &SpectralField,
    v: &SpectralField,
    form: ConvectiveForm,
) -> Vec<Vec<Complex64>> {
    let dim = ctx.grid().dim();
    let len = ctx.grid().len();
    let same = std::ptr::eq(u, v);
    let uc = dealiased(ctx, u);
    let up = to_physical_all(ctx, &uc);
    let i = Complex64::new(0.0, 1.0);

    let mut out = match form {
        ConvectiveForm::Divergence => {
            let vp = if same {
                up.clone()
            } else {
                to_physical_all(ctx, &dealiased(ctx, v))
            };
            // Products u_a v_b; symmetric when u and v coincide.
            let mut pairs = Vec::new();
            for a in 0..dim {
                for b in 0..dim {
                    if !same || a <= b {
                        pairs.push((a, b));
                    }
                }
            }
            let products: Vec<Vec<f64>> = pairs
                .iter()
                .map(|&(a, b)| up[a].iter().zip(&vp[b]).map(|(x, y)| x * y).collect())
                .collect();
            let spec = to_spectral_all(ctx, &products);
            let lookup = |a: usize, b: usize| -> &Vec<Complex64> {
                let key = if same && a > b { (b, a) } else { (a, b) };
                let pos = pairs.iter().position(|&p| p == key).expect("product table");
                &spec[pos]
            };
            let mut out = vec![vec![Complex64::new(0.0, 0.0); len]; dim];
            for (b, ob) in out.iter_mut().enumerate() {
                for a in 0..dim {
                    let kd = ctx.kd(a);
                    let p = lookup(a, b);
                    for idx in 0..len {
                        ob[idx] += i * kd[idx] * p[idx];
                    }
                }
            }
            out
        }
        ConvectiveForm::Advective => {
            let vc = if same { uc.clone() } else { dealiased(ctx, v) };
            // Gradient entries ∂_a v_b, synthesized two at a time and
            // accumulated into u_a ∂_a v_b without storing the full table.
            let entries: Vec<(usize, usize)> = (0..dim).flat_map(|a| (0..dim).map(move |b| (a, b))).collect();
            let grad = |(a, b): (usize, usize), idx: usize| i * ctx.kd(a)[idx] * vc[b][idx];
            let mut prods = vec![vec![0.0; len]; dim];
            let mut accumulate = |(a, b): (usize, usize), g: &[f64]| {
                for (p, (x, y)) in prods[b].iter_mut().zip(up[a].iter().zip(g)) {
                    *p += x * y;
                }
            };
            for pair in entries.chunks(2) {
                if let [e0, e1] = *pair {
                    let packed: Vec<Complex64> = (0..len).map(|idx| grad(e0, idx) + i * grad(e1, idx)).collect();
                    let (g0, g1) = ctx.plan().synthesize_packed(packed);
                    accumulate(e0, &g0);
                    accumulate(e1, &g1);
                } else {
                    let e0 = pair[0];
                    let g0 = ctx.plan().to_physical(&(0..len).map(|idx| grad(e0, idx)).collect::<Vec<_>>());
                    accumulate(e0, &g0);
                }
            }
            to_spectral_all(ctx, &prods)
        }
    };
    for c in out.iter_mut() {
        ctx.dealias(c);
    }
    out
}

fn finish(ctx: &SpectralContext, mut comps: Vec<Vec<Complex64>>, project: bool) -> SpectralField {
    if project {
        ctx.project_in_place(&mut comps);
    }
    for c in comps.iter_mut() {
        for z in c.iter_mut() {
            *z = -*z;
        }
    }
    let mut f = SpectralField::from_components(*ctx.grid(), comps)
        .expect("transport output matches the grid");
    f.set_solenoidal(project);
    f
}

/// `F(u) = -P(u·∇)u`, dealiased, in the requested form.
pub fn convective_term(
    ctx: &SpectralContext,
    u: &SpectralField,
    form: ConvectiveForm,
) -> Result<SpectralField, NonlinearError> {
    check_shape(ctx, u)?;
    let defect = u.divergence_defect();
    if defect > CONTRACT_TOL {
        return Err(NonlinearError::NotSolenoidal { defect });
    }
    Ok(finish(ctx, transport(ctx, u, u, form), true))
}

/// Bilinear transport `B(u, v) = -P(u·∇)v`. In divergence form this is
/// `-P Σᵢ ∂ᵢ(uᵢ v)`, matching the advective form whenever `div u = 0`.
pub fn bilinear_term(
    ctx: &SpectralContext,
    u: &SpectralField,
    v: &SpectralField,
    form: ConvectiveForm,
) -> Result<SpectralField, NonlinearError> {
    check_shape(ctx, u)?;
    check_shape(ctx, v)?;
    Ok(finish(ctx, transport(ctx, u, v, form), true))
}

/// Burgers nonlinearity `-(U·∇)U` with the projector bypassed. The mean
/// mode is kept: without the projector `(U·∇)U` need not average to zero.
pub fn burgers_term(
    ctx: &SpectralContext,
    u: &SpectralField,
) -> Result<SpectralField, NonlinearError> {
    check_shape(ctx, u)?;
    Ok(finish(
        ctx,
        transport(ctx, u, u, ConvectiveForm::Advective),
        false,
    ))
}

/// `|Re⟨F(u), u⟩| / (‖F(u)‖‖u‖)`, zero when either factor vanishes.
pub fn orthogonality_residual(
    ctx: &SpectralContext,
    u: &SpectralField,
) -> Result<f64, NonlinearError> {
    let f = convective_term(ctx, u, ConvectiveForm::Divergence)?;
    Ok(orthogonality_of(&f, u))
}

/// `‖F(u)‖` below this multiple of `k_max·‖û‖²` is rounding noise and
/// counts as an exactly vanishing transport term.
pub const TRANSPORT_ZERO_TOL: f64 = 1e-13;

/// The same ratio for an already evaluated `F(u)`.
pub fn orthogonality_of(f: &SpectralField, u: &SpectralField) -> f64 {
    let (fn_, un) = (f.coefficient_norm(), u.coefficient_norm());
    if fn_ == 0.0 || un == 0.0 || fn_ <= TRANSPORT_ZERO_TOL * u.grid().k_max() * un * un {
        0.0
    } else {
        f.coefficient_inner(u).abs() / (fn_ * un)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TorusGrid;

    fn taylor_green(grid: TorusGrid) -> SpectralField {
        // u = (cos x1 sin x2, -sin x1 cos x2)
        let mut u = SpectralField::zero_vector(grid);
        for (s1, s2) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
            let idx = grid.index_of([s1, s2, 0]);
            // cos x1 sin x2 = Σ (1/2)(1/2i) s2 e^{i(s1 x1 + s2 x2)}
            u.component_mut(0)[idx] = Complex64::new(0.0, -0.25 * s2 as f64);
            u.component_mut(1)[idx] = Complex64::new(0.0, 0.25 * s1 as f64);
        }
        u
    }

    #[test]
    fn zero_field_gives_zero() {
        let g = TorusGrid::standard(2, 16).unwrap();
        let ctx = SpectralContext::new(g);
        let u = SpectralField::zero_vector(g);
        let f = convective_term(&ctx, &u, ConvectiveForm::Divergence).unwrap();
        assert_eq!(f.coefficient_norm(), 0.0);
        assert_eq!(orthogonality_residual(&ctx, &u).unwrap(), 0.0);
    }

    #[test]
    fn taylor_green_nonlinearity_vanishes() {
        let g = TorusGrid::standard(2, 32).unwrap();
        let ctx = SpectralContext::new(g);
        let u = taylor_green(g);
        assert!(u.divergence_defect() < 1e-15);
        for form in [ConvectiveForm::Divergence, ConvectiveForm::Advective] {
            let f = convective_term(&ctx, &u, form).unwrap();
            assert!(f.coefficient_norm() <= 1e-12 * u.coefficient_norm());
        }
        let r = orthogonality_residual(&ctx, &u).unwrap();
        assert!(r <= 1e-12);
    }

    #[test]
    fn rejects_compressible_input() {
        let g = TorusGrid::standard(2, 16).unwrap();
        let ctx = SpectralContext::new(g);
        let mut v = SpectralField::zero_vector(g);
        v.component_mut(0)[g.index_of([1, 0, 0])] = Complex64::new(0.5, 0.0);
        v.component_mut(0)[g.index_of([-1, 0, 0])] = Complex64::new(0.5, 0.0);
        assert!(matches!(
            convective_term(&ctx, &v, ConvectiveForm::Divergence),
            Err(NonlinearError::NotSolenoidal { .. })
        ));
        // Burgers bypasses the contract.
        assert!(burgers_term(&ctx, &v).is_ok());
    }
}
