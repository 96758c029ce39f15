use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{SpectralError, SpectralField, TorusGrid};

/// Real-valued field sampled on the physical grid, one array per component.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    pub grid: TorusGrid,
    pub comps: Vec<Vec<f64>>,
}

impl PhysicalField {
    /// Discrete `L²` norm squared, `h^dim · Σ |u(x_j)|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        let cell = self.grid.spacing().powi(self.grid.dim() as i32);
        cell * self
            .comps
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v * v)
            .sum::<f64>()
    }

    /// Largest pointwise Euclidean magnitude.
    pub fn max_magnitude(&self) -> f64 {
        let len = self.grid.len();
        (0..len)
            .map(|i| self.comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Sup-norm of each component.
    pub fn component_max_abs(&self) -> Vec<f64> {
        self.comps
            .iter()
            .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect()
    }
}

/// Cached multi-dimensional FFT plans for one grid.
///
/// Forward (physical → spectral) carries the `1/n^dim` factor; the inverse is
/// unnormalized, so coefficients are continuous Fourier coefficients.
#[derive(Clone)]
pub struct FftPlan {
    grid: TorusGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    conj: Arc<Vec<u32>>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("grid", &self.grid).finish()
    }
}

/// Transforms each length-`n` line of `data`, skipping lines that are
/// identically zero (their transform is zero).
fn process_nonzero_lines(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], n: usize, scratch: &mut [Complex64]) {
    let zero = Complex64::new(0.0, 0.0);
    for line in data.chunks_exact_mut(n) {
        if line.iter().any(|z| *z != zero) {
            fft.process_with_scratch(line, scratch);
        }
    }
}

thread_local! {
    static TRANSPOSE_BUF: std::cell::RefCell<Vec<Complex64>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// Writes the `rows × cols` row-major matrix `src` transposed into `dst`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const TILE: usize = 16;
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

impl FftPlan {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n());
        let inverse = planner.plan_fft_inverse(grid.n());
        let conj = (0..grid.len())
            .map(|i| grid.conjugate_index(i) as u32)
            .collect();
        Self {
            grid,
            forward,
            inverse,
            conj: Arc::new(conj),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Storage index of `-k` for every `k`.
    pub fn conjugate_map(&self) -> &[u32] {
        &self.conj
    }

    fn transform_all_axes(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let dim = self.grid.dim();
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let n = self.grid.n();
        // Last axis is contiguous.
        process_nonzero_lines(fft, data, n, &mut scratch);
        if dim == 1 {
            return;
        }
        TRANSPOSE_BUF.with_borrow_mut(|buf| {
            buf.resize(data.len(), Complex64::new(0.0, 0.0));
            self.transform_leading_axes(data, buf, fft, &mut scratch);
        });
    }

    fn transform_leading_axes(
        &self,
        data: &mut [Complex64],
        buf: &mut [Complex64],
        fft: &Arc<dyn Fft<f64>>,
        scratch: &mut [Complex64],
    ) {
        let n = self.grid.n();
        let dim = self.grid.dim();
        for axis in 0..dim - 1 {
            let stride = n.pow((dim - 1 - axis) as u32);
            let outer = n.pow(axis as u32);
            for o in 0..outer {
                let base = o * n * stride;
                transpose(&data[base..base + n * stride], &mut buf[base..base + n * stride], n, stride);
            }
            process_nonzero_lines(fft, buf, n, scratch);
            for o in 0..outer {
                let base = o * n * stride;
                transpose(&buf[base..base + n * stride], &mut data[base..base + n * stride], stride, n);
            }
        }
    }

    /// Physical → spectral in place, including the `1/n^dim` factor.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.transform_all_axes(data, &self.forward);
        let norm = 1.0 / self.grid.len() as f64;
        for z in data.iter_mut() {
            *z *= norm;
        }
    }

    /// Spectral → physical in place (synthesis `Σ û e^{ik·x}`).
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform_all_axes(data, &self.inverse);
    }

    /// Synthesizes one Hermitian coefficient array into real samples.
    pub fn to_physical(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse_in_place(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Synthesizes two Hermitian arrays with one complex transform.
    pub fn to_physical_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::new(0.0, 1.0);
        self.synthesize_packed(a.iter().zip(b).map(|(x, y)| x + i * y).collect())
    }

    /// Synthesizes `a + i·b` for Hermitian `a`, `b`; returns the real samples of each.
    pub fn synthesize_packed(&self, mut packed: Vec<Complex64>) -> (Vec<f64>, Vec<f64>) {
        self.inverse_in_place(&mut packed);
        packed.into_iter().map(|z| (z.re, z.im)).unzip()
    }

    /// Analyzes real samples into Hermitian coefficients.
    pub fn to_spectral(&self, real: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = real.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        buf
    }

    /// Analyzes two real arrays with one complex transform.
    pub fn to_spectral_pair(&self, x: &[f64], y: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut buf: Vec<Complex64> = x
            .iter()
            .zip(y)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        self.forward_in_place(&mut buf);
        let mut xs = vec![Complex64::new(0.0, 0.0); buf.len()];
        let mut ys = vec![Complex64::new(0.0, 0.0); buf.len()];
        let half_i = Complex64::new(0.0, -0.5);
        for (idx, z) in buf.iter().enumerate() {
            let zc = buf[self.conj[idx] as usize].conj();
            xs[idx] = 0.5 * (z + zc);
            ys[idx] = half_i * (z - zc);
        }
        (xs, ys)
    }
}

/// Synthesizes every component of `f` on the physical grid.
pub fn transform_to_physical(plan: &FftPlan, f: &SpectralField) -> PhysicalField {
    let comps = f.components();
    let mut out = Vec::with_capacity(comps.len());
    let mut chunks = comps.chunks(2);
    for pair in &mut chunks {
        if pair.len() == 2 {
            let (a, b) = plan.to_physical_pair(&pair[0], &pair[1]);
            out.push(a);
            out.push(b);
        } else {
            out.push(plan.to_physical(&pair[0]));
        }
    }
    PhysicalField {
        grid: *f.grid(),
        comps: out,
    }
}

/// Analyzes a real physical field; the result is Hermitian by construction.
/// The mean is kept, so callers that need the mean-zero gauge must pin it.
pub fn transform_to_spectral(
    plan: &FftPlan,
    p: &PhysicalField,
) -> Result<SpectralField, SpectralError> {
    if p.grid != *plan.grid() {
        return Err(SpectralError::Structure(
            "physical field grid differs from the transform grid".into(),
        ));
    }
    let mut out = Vec::with_capacity(p.comps.len());
    for pair in p.comps.chunks(2) {
        if pair.len() == 2 {
            let (a, b) = plan.to_spectral_pair(&pair[0], &pair[1]);
            out.push(a);
            out.push(b);
        } else {
            out.push(plan.to_spectral(&pair[0]));
        }
    }
    SpectralField::from_components(p.grid, out)
}
