use std::f64::consts::PI;

use super::SpectralError;

/// Uniform discretization of the periodic box `[0, length)^dim`.
///
/// Coefficients are stored in the standard FFT layout: along every axis the
/// storage index `j` holds the integer mode `m = j` for `j < n/2` and
/// `m = j - n` otherwise, so multi-indices cover `[-n/2, n/2)`. Storage is
/// row-major with the last axis contiguous.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    length: f64,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self, SpectralError> {
        if dim != 2 && dim != 3 {
            return Err(SpectralError::Config(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(SpectralError::Config(format!(
                "resolution must be a power of two >= 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SpectralError::Config(format!(
                "domain length must be positive and finite, got {length}"
            )));
        }
        Ok(Self { dim, n, length })
    }

    /// Grid on the standard `2π` box.
    pub fn standard(dim: usize, n: usize) -> Result<Self, SpectralError> {
        Self::new(dim, n, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of lattice points, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `length^dim`, the factor in the Parseval identity.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Lattice unit `2π / length`.
    pub fn kappa(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Smallest nonzero eigenvalue of `-Δ` on mean-zero fields.
    pub fn lambda1(&self) -> f64 {
        self.kappa().powi(2)
    }

    /// Poincaré constant `1/λ₁` of the mean-zero torus.
    pub fn poincare_constant(&self) -> f64 {
        1.0 / self.lambda1()
    }

    fn signed(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    fn unsigned(&self, m: i64) -> usize {
        m.rem_euclid(self.n as i64) as usize
    }

    /// Integer multi-index of storage position `idx`; unused axes are zero.
    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let n = self.n;
        let mut out = [0i64; 3];
        let mut rest = idx;
        for axis in (0..self.dim).rev() {
            out[axis] = self.signed(rest % n);
            rest /= n;
        }
        out
    }

    /// Storage position of the integer multi-index `m` (taken modulo `n`).
    pub fn index_of(&self, m: [i64; 3]) -> usize {
        let mut idx = 0;
        for &mi in m.iter().take(self.dim) {
            idx = idx * self.n + self.unsigned(mi);
        }
        idx
    }

    /// Storage position of the mode `-m`.
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let m = self.mode(idx);
        self.index_of([-m[0], -m[1], -m[2]])
    }

    /// True when some component of the mode sits on the Nyquist line `-n/2`.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = -(self.n as i64) / 2;
        self.mode(idx)[..self.dim].iter().any(|&m| m == half)
    }

    /// Physical wavevector `(2π/length)·m`.
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let m = self.mode(idx);
        let kappa = self.kappa();
        [m[0] as f64 * kappa, m[1] as f64 * kappa, m[2] as f64 * kappa]
    }

    /// Wavevector used for spectral differentiation: the Nyquist component
    /// is set to zero so derivatives of real fields stay real.
    pub fn derivative_wavevector(&self, idx: usize) -> [f64; 3] {
        let m = self.mode(idx);
        let half = -(self.n as i64) / 2;
        let kappa = self.kappa();
        let mut k = [0.0; 3];
        for axis in 0..self.dim {
            if m[axis] != half {
                k[axis] = m[axis] as f64 * kappa;
            }
        }
        k
    }

    /// `|k|²` of the full lattice wavevector.
    pub fn k_sq(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }

    /// Largest integer mode magnitude kept by the 2/3 rule along each axis.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n as i64 - 1) / 3
    }

    /// 2/3-rule mask: every component satisfies `3|m_i| < n`.
    pub fn is_resolved(&self, idx: usize) -> bool {
        let cut = self.dealias_cutoff();
        self.mode(idx)[..self.dim].iter().all(|m| m.abs() <= cut)
    }

    /// Largest `|k|` on the lattice, used to normalize divergence defects.
    pub fn k_max(&self) -> f64 {
        self.kappa() * (self.n as f64 / 2.0) * (self.dim as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_resolution() {
        assert!(TorusGrid::standard(2, 12).is_err());
        assert!(TorusGrid::standard(2, 4).is_err());
        assert!(TorusGrid::standard(4, 16).is_err());
        assert!(TorusGrid::new(2, 16, -1.0).is_err());
        assert!(TorusGrid::standard(3, 16).is_ok());
    }

    #[test]
    fn mode_index_round_trip() {
        let g = TorusGrid::standard(3, 8).unwrap();
        for idx in 0..g.len() {
            let m = g.mode(idx);
            assert!(m.iter().all(|&c| (-4..4).contains(&c)));
            assert_eq!(g.index_of(m), idx);
            let c = g.conjugate_index(idx);
            assert_eq!(g.conjugate_index(c), idx);
        }
    }

    #[test]
    fn lambda1_and_poincare() {
        let g = TorusGrid::new(2, 16, 4.0 * PI).unwrap();
        assert!((g.lambda1() - 0.25).abs() < 1e-15);
        assert!((g.poincare_constant() - 4.0).abs() < 1e-14);
        let min_nonzero = (1..g.len())
            .map(|i| g.k_sq(i))
            .fold(f64::INFINITY, f64::min);
        assert!((min_nonzero - g.lambda1()).abs() < 1e-15);
    }

    #[test]
    fn dealias_cutoff_values() {
        assert_eq!(TorusGrid::standard(2, 64).unwrap().dealias_cutoff(), 21);
        assert_eq!(TorusGrid::standard(2, 128).unwrap().dealias_cutoff(), 42);
        assert_eq!(TorusGrid::standard(2, 8).unwrap().dealias_cutoff(), 2);
    }
}
