//! Norms, energy budgets, a priori bound checks and the criticality
//! exponent calculator.

use num_rational::Ratio;
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::nonlinear::convective_term;
use crate::spectral::{ConvectiveForm, SolverParams, SpectralContext, SpectralField};

/// Relative slack used by every bound comparison.
pub const BOUND_SLACK: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("unknown scenario `{0}`; expected one of {SCENARIO_LIST}")]
    UnknownScenario(String),
    #[error("scenario `{scenario}` is posed in {expected}-D, not {got}-D")]
    WrongDimension {
        scenario: String,
        expected: usize,
        got: usize,
    },
    #[error("{0}")]
    Usage(String),
}

/// One row of a run's time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Step that produced this state; zero for the initial record.
    pub dt: f64,
    pub l2_sq: f64,
    pub h1_sq: f64,
    /// `‖u‖²` of order `1+α` in 2-D and of order 1 in 3-D.
    pub h1a_sq: f64,
    pub h2_sq: f64,
    pub energy_residual: f64,
    pub orth_residual: f64,
    pub bound_1_9_ok: bool,
}

/// Outcome of comparing one side of an estimate against the other.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub bound_name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
    pub margin: f64,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            bound_name: name.into(),
            lhs,
            rhs,
            violated: !(lhs <= rhs * (1.0 + BOUND_SLACK)),
            margin: rhs - lhs,
        }
    }
}

/// Per-mode weight tables for the norms a run records.
#[derive(Clone, Debug)]
pub struct NormWeights {
    pub k2: Vec<f64>,
    pub k2_order_1a: Vec<f64>,
    pub k4: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl NormWeights {
    pub fn new(ctx: &SpectralContext, params: &SolverParams) -> Self {
        let order = if params.grid().dim() == 2 {
            1.0 + params.alpha
        } else {
            1.0
        };
        let k2 = ctx.k_sq().to_vec();
        let k2_order_1a = k2
            .iter()
            .map(|&q| if q == 0.0 { 0.0 } else { q.powf(order) })
            .collect();
        let k4 = k2.iter().map(|q| q * q).collect();
        let sigma = k2.iter().map(|&q| params.symbol(q)).collect();
        Self {
            k2,
            k2_order_1a,
            k4,
            sigma,
        }
    }
}

/// `length^dim · Σ_k w(k) |û(k)|²`, accumulated in storage order.
pub fn weighted_norm_sq(u: &SpectralField, weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    for comp in u.components() {
        for (z, w) in comp.iter().zip(weights) {
            acc += w * z.norm_sqr();
        }
    }
    u.grid().volume() * acc
}

/// `length^dim · Σ_{k≠0} |k|^{2·order} |û(k)|²`; order 0 is `‖u‖²_{L²}`.
pub fn sobolev_norm_sq(u: &SpectralField, order: f64) -> f64 {
    let grid = u.grid();
    let weights: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let q = grid.k_sq(idx);
            if q == 0.0 {
                0.0
            } else {
                q.powf(order)
            }
        })
        .collect();
    weighted_norm_sq(u, &weights)
}

/// Viscosity in the Poincaré step of the energy estimate. In 2-D the
/// dissipation `(ν|k|²)^{1+α}` dominates `ν·min(1, (νλ₁)^α)·|k|²`.
pub fn effective_viscosity(params: &SolverParams) -> f64 {
    let grid = params.grid();
    if grid.dim() == 2 && params.alpha > 0.0 {
        params.nu * (params.nu * grid.lambda1()).powf(params.alpha).min(1.0)
    } else {
        params.nu
    }
}

/// Right side of the global `L²` estimate,
/// `max(‖u₀‖², 2 c_ν c_P ‖f‖²/ν)` with `c_P = 1/λ₁` and `c_ν = c_P/ν`.
pub fn l2_bound_rhs(params: &SolverParams, e0: f64) -> f64 {
    let c_p = params.grid().poincare_constant();
    let nu = effective_viscosity(params);
    let c_nu = c_p / nu;
    let f_sq = params.forcing.l2_norm_sq();
    e0.max(2.0 * c_nu * c_p * f_sq / nu)
}

/// Pointwise `‖u(t)‖² ≤ rhs` over a series, reporting the worst entry.
pub fn check_l2_bound_against(series: &[DiagnosticsRecord], rhs: f64) -> BoundReport {
    let worst = series.iter().map(|r| r.l2_sq).fold(0.0, f64::max);
    let worst = if series.iter().any(|r| r.l2_sq.is_nan()) {
        f64::NAN
    } else {
        worst
    };
    BoundReport::new("l2_global", worst, rhs)
}

/// Global `L²` estimate with `‖u₀‖²` taken from the first record.
pub fn check_l2_bound(series: &[DiagnosticsRecord], params: &SolverParams) -> BoundReport {
    let e0 = series.first().map_or(0.0, |r| r.l2_sq);
    check_l2_bound_against(series, l2_bound_rhs(params, e0))
}

/// Trapezoidal integral of `f(record)` over the series times.
pub fn trapezoid(series: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    series
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (f(&w[0]) + f(&w[1])))
        .sum()
}

/// Time-integrated dissipation bounds over `[0, T]`.
///
/// From the energy identity, `∫₀ᵀ⟨σ u, u⟩ ≤ ½‖u₀‖² + T‖f‖ sup‖u‖` and the
/// supremum is controlled by the global `L²` bound, giving the common right
/// side `(‖u₀‖² + 2T‖f‖√R)/(2ν)`. Reports:
/// * `h1es`: `ν^α ∫‖u‖²_{H^{1+α}}` (2-D) or `∫‖∇u‖²` (3-D);
/// * `h2e` (3-D, `s = 2`): `ε ∫‖u‖²_{H²}` against the same side;
/// * `h2e_literal` (3-D, `s = 2`): the same lhs against `(c_ν T‖f‖² + ‖u₀‖²)/2`.
pub fn check_time_integrated_bounds(
    series: &[DiagnosticsRecord],
    params: &SolverParams,
) -> Vec<BoundReport> {
    let grid = params.grid();
    let e0 = series.first().map_or(0.0, |r| r.l2_sq);
    let t_total = match (series.first(), series.last()) {
        (Some(a), Some(b)) => b.t - a.t,
        _ => 0.0,
    };
    let f_norm = params.forcing.l2_norm_sq().sqrt();
    let sup_sq = l2_bound_rhs(params, e0);
    let common = (e0 + 2.0 * t_total * f_norm * sup_sq.sqrt()) / (2.0 * params.nu);
    let mut out = Vec::new();
    if grid.dim() == 2 {
        let lhs = params.nu.powf(params.alpha) * trapezoid(series, |r| r.h1a_sq);
        out.push(BoundReport::new("h1es", lhs, common));
    } else {
        out.push(BoundReport::new("h1es", trapezoid(series, |r| r.h1_sq), common));
        if params.s == 2.0 {
            let lhs = params.epsilon * trapezoid(series, |r| r.h2_sq);
            out.push(BoundReport::new("h2e", lhs, common));
            let c_nu = grid.poincare_constant() / params.nu;
            let literal = (c_nu * t_total * f_norm * f_norm + e0) / 2.0;
            out.push(BoundReport::new("h2e_literal", lhs, literal));
        }
    }
    out
}

/// Energy budget terms of one state: `E = ½‖u‖²`, dissipation
/// `D = ⟨σu, u⟩`, work `W = ⟨f, u⟩` and their time derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub work: f64,
    pub d_dissipation: f64,
    pub d_work: f64,
}

/// Budget of `u` given the transport term `conv = F(u)` and forcing `f`.
pub fn energy_sample(
    t: f64,
    u: &SpectralField,
    conv: &SpectralField,
    forcing: &SpectralField,
    sigma: &[f64],
) -> EnergySample {
    let vol = u.grid().volume();
    let (mut e, mut d, mut w, mut dd, mut dw) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for c in 0..u.ncomp() {
        let (uc, nc, fc) = (u.component(c), conv.component(c), forcing.component(c));
        for idx in 0..uc.len() {
            let s = sigma[idx];
            let z = uc[idx];
            let ut: Complex64 = -s * z + nc[idx] + fc[idx];
            e += z.norm_sqr();
            d += s * z.norm_sqr();
            w += (fc[idx].conj() * z).re;
            dd += 2.0 * s * (z.conj() * ut).re;
            dw += (fc[idx].conj() * ut).re;
        }
    }
    EnergySample {
        t,
        energy: 0.5 * vol * e,
        dissipation: vol * d,
        work: vol * w,
        d_dissipation: vol * dd,
        d_work: vol * dw,
    }
}

/// Residual of `d/dt ½‖u‖² = -D + W` between two samples.
///
/// The right side is integrated with the Hermite-corrected trapezoid rule,
/// which is fourth-order, and the result is normalized by `Δt` times the
/// mean dissipation-plus-work scale. `0/0` is reported as 0.
pub fn energy_identity_residual(a: &EnergySample, b: &EnergySample) -> f64 {
    let h = b.t - a.t;
    if h <= 0.0 {
        return 0.0;
    }
    let g0 = -a.dissipation + a.work;
    let g1 = -b.dissipation + b.work;
    let dg0 = -a.d_dissipation + a.d_work;
    let dg1 = -b.d_dissipation + b.d_work;
    let integral = 0.5 * h * (g0 + g1) + h * h / 12.0 * (dg0 - dg1);
    let num = (b.energy - a.energy - integral).abs();
    let scale = h * 0.5 * (a.dissipation + b.dissipation + a.work.abs() + b.work.abs());
    if num == 0.0 {
        0.0
    } else if scale == 0.0 {
        num
    } else {
        num / scale
    }
}

pub type Rational = Ratio<i64>;

/// Exact criticality exponent of one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Criticality {
    pub scenario: &'static str,
    pub theta: Rational,
    /// Value of `s` solving the criticality condition, when the scenario
    /// asks for one.
    pub critical_s: Option<Rational>,
    pub label: &'static str,
}

pub const SCENARIOS: [&str; 6] = [
    "3d_X78",
    "3d_theta0",
    "3d_critical_s",
    "2d_X12",
    "2d_X34",
    "2d_X1",
];
const SCENARIO_LIST: &str = "3d_X78, 3d_theta0, 3d_critical_s, 2d_X12, 2d_X34, 2d_X1";

/// Factor `‖∇^j u‖^power_{L^p}` in a product estimate.
struct Factor {
    power: Rational,
    j: i64,
    p: Rational,
}

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

/// Exponent `a` in `‖∇^j φ‖_{L^p} ≤ c‖φ‖^a_{H^m}‖φ‖^{1-a}_{L²}` in `N` dimensions.
fn nirenberg_gagliardo(dim: i64, j: i64, p: Rational, m: Rational) -> Rational {
    let n = Rational::from_integer(dim);
    (Rational::from_integer(j) / n + r(1, 2) - p.recip()) / (m / n)
}

fn product_exponent(dim: i64, m: Rational, factors: &[Factor]) -> Rational {
    factors
        .iter()
        .map(|f| f.power * nirenberg_gagliardo(dim, f.j, f.p, m))
        .fold(Rational::from_integer(0), |a, b| a + b)
}

/// Exponent on the strong norm when the convective term is bounded through
/// Nirenberg–Gagliardo interpolation against the `L²` estimate.
pub fn criticality_exponent(dim: usize, scenario: &str) -> Result<Criticality, DiagnosticsError> {
    let expected = match scenario {
        s if s.starts_with("3d_") && SCENARIOS.contains(&s) => 3,
        s if s.starts_with("2d_") && SCENARIOS.contains(&s) => 2,
        _ => return Err(DiagnosticsError::UnknownScenario(scenario.to_string())),
    };
    if dim != expected {
        return Err(DiagnosticsError::WrongDimension {
            scenario: scenario.to_string(),
            expected,
            got: dim,
        });
    }
    let f = |power: Rational, j: i64, p: i64| Factor {
        power,
        j,
        p: Rational::from_integer(p),
    };
    let one = Rational::from_integer(1);
    let (scenario, theta, critical_s, label) = match scenario {
        "3d_X78" => (
            "3d_X78",
            product_exponent(3, r(7, 4), &[f(one, 0, 6), f(r(1, 4), 0, 3), f(r(3, 4), 1, 3)]),
            None,
            "3-D, X^{7/8} to X^{-1/8}: ‖u‖_L6 ‖u‖^{1/4}_L3 ‖∇u‖^{3/4}_L3 against H^{7/4}",
        ),
        "3d_theta0" => (
            "3d_theta0",
            product_exponent(3, one, &[f(r(2, 1), 0, 4)]),
            None,
            "3-D threshold θ₀: ‖u‖²_L4 against H¹",
        ),
        "3d_critical_s" => {
            // θ(s) = 2·a(L⁴, H^{2s-1}) = 3/(2(2s-1)); θ = 1 is linear in 1/(2s-1).
            let at = |s: Rational| product_exponent(3, s * 2 - one, &[f(r(2, 1), 0, 4)]);
            let probe = Rational::from_integer(2);
            let c = at(probe) * (probe * 2 - one);
            let s_crit = (c + one) / 2;
            (
                "3d_critical_s",
                at(s_crit),
                Some(s_crit),
                "3-D strengthened diffusion: ‖u‖²_L4 against H^{2s-1}, critical s",
            )
        }
        "2d_X12" => (
            "2d_X12",
            product_exponent(2, one, &[f(r(2, 1), 0, 4)]),
            None,
            "2-D, X^{1/2} to X^{-1/2}: ‖u‖²_L4 against H¹",
        ),
        "2d_X34" => (
            "2d_X34",
            product_exponent(2, r(3, 2), &[f(r(3, 2), 0, 4), f(r(1, 2), 1, 4)]),
            None,
            "2-D, X^{3/4} to X^{-1/4}: ‖u‖^{3/2}_L4 ‖∇u‖^{1/2}_L4 against H^{3/2}",
        ),
        _ => (
            "2d_X1",
            product_exponent(2, r(2, 1), &[f(one, 0, 4), f(one, 1, 4)]),
            None,
            "2-D, X^1 to X_2: ‖u‖_L4 ‖∇u‖_L4 against H²",
        ),
    };
    Ok(Criticality {
        scenario,
        theta,
        critical_s,
        label,
    })
}

/// Subordination exponent `θ = 2/(2s - 1/2)` of the strengthened problem.
pub fn subordination_theta(s: f64) -> f64 {
    2.0 / (2.0 * s - 0.5)
}

/// Monitored subordination quantity for one state.
#[derive(Clone, Debug, PartialEq)]
pub struct SubordinationReport {
    pub theta: f64,
    /// `‖F(u)‖_{H^{-1/2}} / ‖u‖^θ_{H^{2s-1/2}}`; absent at or below the
    /// critical exponent.
    pub ratio: Option<f64>,
    pub warning: Option<String>,
}

/// Evaluates `θ` and, for `s > 5/4`, the empirical subordination ratio.
pub fn subordination_margin(
    ctx: &SpectralContext,
    u: &SpectralField,
    params: &SolverParams,
) -> Result<SubordinationReport, DiagnosticsError> {
    if ctx.grid().dim() != 3 {
        return Err(DiagnosticsError::Usage(
            "subordination is defined for 3-D runs".into(),
        ));
    }
    let theta = subordination_theta(params.s);
    if params.s <= 1.25 {
        return Ok(SubordinationReport {
            theta,
            ratio: None,
            warning: Some(format!(
                "s = {} is not above 5/4: θ = {theta} ≥ 1, the problem is not sub-critical",
                params.s
            )),
        });
    }
    let conv = convective_term(ctx, u, ConvectiveForm::Divergence)
        .map_err(|e| DiagnosticsError::Usage(e.to_string()))?;
    let num = sobolev_norm_sq(&conv, -0.5).sqrt();
    let den = sobolev_norm_sq(u, 2.0 * params.s - 0.5).sqrt().powf(theta);
    let ratio = if num == 0.0 { 0.0 } else { num / den };
    Ok(SubordinationReport {
        theta,
        ratio: Some(ratio),
        warning: None,
    })
}
