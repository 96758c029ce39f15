use rustfft::num_complex::Complex64;

use super::{SpectralError, TorusGrid};

/// Vector field stored as Fourier coefficients, one array per component.
///
/// The coefficient of mode `k` is the continuous Fourier coefficient, so
/// `u(x) = Σ_k û(k) e^{ik·x}` and `‖u‖²_{L²} = length^dim · Σ_k |û(k)|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    comps: Vec<Vec<Complex64>>,
    solenoidal: bool,
}

/// Relative tolerance behind the divergence-free flag.
pub const DIVERGENCE_TOL: f64 = 1e-12;

impl SpectralField {
    pub fn zeros(grid: TorusGrid, ncomp: usize) -> Self {
        Self {
            grid,
            comps: vec![vec![Complex64::new(0.0, 0.0); grid.len()]; ncomp],
            solenoidal: true,
        }
    }

    /// Field with `grid.dim()` zero components.
    pub fn zero_vector(grid: TorusGrid) -> Self {
        Self::zeros(grid, grid.dim())
    }

    /// Wraps raw coefficient arrays. Symmetry is not enforced here; call
    /// [`SpectralField::enforce_symmetry`] when the input is not known to be
    /// Hermitian and mean-zero.
    pub fn from_components(
        grid: TorusGrid,
        comps: Vec<Vec<Complex64>>,
    ) -> Result<Self, SpectralError> {
        if comps.is_empty() {
            return Err(SpectralError::Structure("field has no components".into()));
        }
        if let Some(bad) = comps.iter().position(|c| c.len() != grid.len()) {
            return Err(SpectralError::Structure(format!(
                "component {bad} has {} coefficients, grid needs {}",
                comps[bad].len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            comps,
            solenoidal: false,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, i: usize) -> &[Complex64] {
        &self.comps[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [Complex64] {
        self.solenoidal = false;
        &mut self.comps[i]
    }

    pub fn components(&self) -> &[Vec<Complex64>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Vec<Complex64>> {
        self.comps
    }

    /// Whether the field was produced by the Leray projector (or otherwise
    /// verified divergence-free) and has not been mutated since.
    pub fn is_solenoidal(&self) -> bool {
        self.solenoidal
    }

    pub(crate) fn set_solenoidal(&mut self, flag: bool) {
        self.solenoidal = flag;
    }

    /// Symmetrizes `û(-k) = conj(û(k))` and pins the mean to zero.
    pub fn enforce_symmetry(&mut self) {
        let grid = self.grid;
        for comp in &mut self.comps {
            for idx in 0..grid.len() {
                let c = grid.conjugate_index(idx);
                if c < idx {
                    continue;
                }
                if c == idx {
                    comp[idx] = Complex64::new(comp[idx].re, 0.0);
                } else {
                    let avg = 0.5 * (comp[idx] + comp[c].conj());
                    comp[idx] = avg;
                    comp[c] = avg.conj();
                }
            }
            comp[0] = Complex64::new(0.0, 0.0);
        }
    }

    /// Largest violation of Hermitian symmetry, relative to the coefficient norm.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.coefficient_norm();
        if scale == 0.0 {
            return 0.0;
        }
        let grid = &self.grid;
        let mut worst: f64 = 0.0;
        for comp in &self.comps {
            for idx in 0..grid.len() {
                let c = grid.conjugate_index(idx);
                worst = worst.max((comp[idx] - comp[c].conj()).norm());
            }
        }
        worst / scale
    }

    pub fn mean_is_zero(&self) -> bool {
        self.comps.iter().all(|c| c[0] == Complex64::new(0.0, 0.0))
    }

    /// `sqrt(Σ_k |û(k)|²)` over all components.
    pub fn coefficient_norm(&self) -> f64 {
        self.coefficient_norm_sq().sqrt()
    }

    pub fn coefficient_norm_sq(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// `‖u‖²_{L²}` by Parseval.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.volume() * self.coefficient_norm_sq()
    }

    /// Real part of the `L²` inner product, `length^dim · Re Σ conj(û) v̂`.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        self.grid.volume() * self.coefficient_inner(other)
    }

    /// `Re Σ_k conj(û(k))·v̂(k)` without the volume factor.
    pub fn coefficient_inner(&self, other: &SpectralField) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .flat_map(|(a, b)| a.iter().zip(b))
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// `max_k |k·û(k)|` using the differentiation wavevector.
    pub fn divergence_max(&self) -> f64 {
        let grid = &self.grid;
        let mut worst: f64 = 0.0;
        for idx in 0..grid.len() {
            let k = grid.derivative_wavevector(idx);
            let mut div = Complex64::new(0.0, 0.0);
            for (axis, comp) in self.comps.iter().enumerate().take(grid.dim()) {
                div += comp[idx] * k[axis];
            }
            worst = worst.max(div.norm());
        }
        worst
    }

    /// `max_k |k·û(k)| / ‖û‖`, zero for the zero field.
    pub fn divergence_defect(&self) -> f64 {
        let scale = self.coefficient_norm();
        if scale == 0.0 {
            0.0
        } else {
            self.divergence_max() / scale
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for comp in &mut self.comps {
            for z in comp.iter_mut() {
                *z *= factor;
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// `self += factor · other`.
    pub fn axpy(&mut self, factor: f64, other: &SpectralField) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y * factor;
            }
        }
        self.solenoidal = self.solenoidal && other.solenoidal;
    }

    pub fn difference(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Zeroes every mode the 2/3 rule discards.
    pub fn dealias(&mut self) {
        let grid = self.grid;
        for comp in &mut self.comps {
            for (idx, z) in comp.iter_mut().enumerate() {
                if !grid.is_resolved(idx) {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    pub(crate) fn comps_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.comps
    }
}
