use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    pad_fwd: Arc<dyn Fft<f64>>,
    pad_inv: Arc<dyn Fft<f64>>,
}

/// Periodic collocation grid on the torus `[0, L)^dim`.
///
/// Nodes are `x_j = j L / N` per direction. Flat indices put axis 0 slowest.
#[derive(Clone)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    plans: Arc<Plans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.length == other.length
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidInput(format!(
                "horizontal dimension {dim} not in {{1, 2}}"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "N = {n} must be a power of two >= 8"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "period L = {length} must be positive"
            )));
        }
        let mut planner = FftPlanner::new();
        let m = 3 * n / 2;
        let plans = Plans {
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            pad_fwd: planner.plan_fft_forward(m),
            pad_inv: planner.plan_fft_inverse(m),
        };
        Ok(Grid {
            dim,
            n,
            length,
            plans: Arc::new(plans),
        })
    }

    /// One-dimensional grid of period 2π.
    pub fn periodic_1d(n: usize) -> Result<Self> {
        Self::new(1, n, 2.0 * PI)
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

    pub fn npoints(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Measure of the horizontal domain, `L^dim`.
    pub fn measure(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Same geometry with `factor` times as many points per direction.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.dim, self.n * factor, self.length)
    }

    /// Per-axis integer indices of a flat node index.
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat / self.n, flat % self.n],
        }
    }

    /// Coordinates of node `flat` (unused axes are zero).
    pub fn node(&self, flat: usize) -> [f64; 2] {
        let mi = self.multi_index(flat);
        let h = self.dx();
        match self.dim {
            1 => [mi[0] as f64 * h, 0.0],
            _ => [mi[0] as f64 * h, mi[1] as f64 * h],
        }
    }

    /// Signed integer mode of FFT index `j`, in `-N/2+1 ..= N/2`.
    pub fn mode(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Angular wavenumber of FFT index `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        self.mode(j) as f64 * 2.0 * PI / self.length
    }

    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// Wavenumber vector of a flat spectral index.
    pub fn wavevector(&self, flat: usize) -> [f64; 2] {
        let mi = self.multi_index(flat);
        match self.dim {
            1 => [self.wavenumber(mi[0]), 0.0],
            _ => [self.wavenumber(mi[0]), self.wavenumber(mi[1])],
        }
    }

    /// Forward transform normalised so that coefficient 0 is the mean.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, self.n, &self.plans.fwd);
        let scale = 1.0 / self.npoints() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Inverse of [`Grid::forward`], real part.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.transform(&mut buf, self.n, &self.plans.inv);
        buf.iter().map(|c| c.re).collect()
    }

    fn transform(&self, buf: &mut [Complex64], n: usize, plan: &Arc<dyn Fft<f64>>) {
        match self.dim {
            1 => plan.process(buf),
            _ => {
                for row in buf.chunks_mut(n) {
                    plan.process(row);
                }
                let mut col = vec![Complex64::new(0.0, 0.0); n];
                for j in 0..n {
                    for i in 0..n {
                        col[i] = buf[i * n + j];
                    }
                    plan.process(&mut col);
                    for i in 0..n {
                        buf[i * n + j] = col[i];
                    }
                }
            }
        }
    }

    /// Product of two fields without aliasing error on the retained modes:
    /// both factors are zero-padded to 3N/2 points, multiplied, and truncated.
    pub fn dealiased_product(&self, a: &[Complex64], b: &[Complex64]) -> Vec<f64> {
        let n = self.n;
        let m = 3 * n / 2;
        let pa = self.pad(a, m);
        let pb = self.pad(b, m);
        let mut va = pa;
        let mut vb = pb;
        self.transform(&mut va, m, &self.plans.pad_inv);
        self.transform(&mut vb, m, &self.plans.pad_inv);
        let mut prod: Vec<Complex64> = va
            .iter()
            .zip(&vb)
            .map(|(x, y)| Complex64::new(x.re * y.re, 0.0))
            .collect();
        self.transform(&mut prod, m, &self.plans.pad_fwd);
        let total = m.pow(self.dim as u32) as f64;
        prod.iter_mut().for_each(|c| *c /= total);
        let trunc = self.truncate(&prod, m);
        self.inverse(&trunc)
    }

    fn padded_index(&self, j: usize, m: usize) -> Option<usize> {
        if self.is_nyquist(j) {
            return None;
        }
        let k = self.mode(j);
        Some(if k >= 0 {
            k as usize
        } else {
            (m as i64 + k) as usize
        })
    }

    fn pad(&self, c: &[Complex64], m: usize) -> Vec<Complex64> {
        let n = self.n;
        let zero = Complex64::new(0.0, 0.0);
        match self.dim {
            1 => {
                let mut out = vec![zero; m];
                for j in 0..n {
                    if let Some(p) = self.padded_index(j, m) {
                        out[p] = c[j];
                    }
                }
                out
            }
            _ => {
                let mut out = vec![zero; m * m];
                for i in 0..n {
                    for j in 0..n {
                        if let (Some(pi), Some(pj)) =
                            (self.padded_index(i, m), self.padded_index(j, m))
                        {
                            out[pi * m + pj] = c[i * n + j];
                        }
                    }
                }
                out
            }
        }
    }

    fn truncate(&self, c: &[Complex64], m: usize) -> Vec<Complex64> {
        let n = self.n;
        let zero = Complex64::new(0.0, 0.0);
        match self.dim {
            1 => (0..n)
                .map(|j| self.padded_index(j, m).map_or(zero, |p| c[p]))
                .collect(),
            _ => {
                let mut out = vec![zero; n * n];
                for i in 0..n {
                    for j in 0..n {
                        if let (Some(pi), Some(pj)) =
                            (self.padded_index(i, m), self.padded_index(j, m))
                        {
                            out[i * n + j] = c[pi * m + pj];
                        }
                    }
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(1, 6, 1.0).is_err());
        assert!(Grid::new(1, 4, 1.0).is_err());
        assert!(Grid::new(3, 8, 1.0).is_err());
        assert!(Grid::new(1, 8, -1.0).is_err());
    }

    #[test]
    fn wavenumbers_cover_the_symmetric_band() {
        let g = Grid::periodic_1d(8).unwrap();
        let modes: Vec<i64> = (0..8).map(|j| g.mode(j)).collect();
        assert_eq!(modes, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }

    #[test]
    fn transform_round_trip_2d() {
        let g = Grid::new(2, 8, 3.0).unwrap();
        let v: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let back = g.inverse(&g.forward(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
