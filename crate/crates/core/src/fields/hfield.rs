use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use rustfft::num_complex::Complex64;

use super::grid::Grid;
use super::NormKind;
use crate::error::{Error, Result};

/// Highest derivative order supported by [`HField::derivative`].
pub const MAX_DERIVATIVE_ORDER: usize = 4;

/// Real scalar field sampled on a periodic grid, with a lazily computed
/// spectral representation.
#[derive(Debug, Clone)]
pub struct HField {
    grid: Grid,
    values: Vec<f64>,
    spectral: OnceLock<Vec<Complex64>>,
}

impl PartialEq for HField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl HField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.npoints() {
            return Err(Error::InvalidInput(format!(
                "field has {} samples, grid has {}",
                values.len(),
                grid.npoints()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field samples"));
        }
        Ok(HField {
            grid: grid.clone(),
            values,
            spectral: OnceLock::new(),
        })
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.npoints()).map(|j| f(grid.node(j))).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        HField {
            grid: grid.clone(),
            values: vec![c; grid.npoints()],
            spectral: OnceLock::new(),
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Builds the field whose forward transform is `coeffs` (real part kept).
    pub fn from_spectral(grid: &Grid, coeffs: &[Complex64]) -> Result<Self> {
        if coeffs.len() != grid.npoints() {
            return Err(Error::InvalidInput(
                "spectral length does not match grid".into(),
            ));
        }
        Self::new(grid, grid.inverse(coeffs))
    }

    pub(crate) fn from_values_unchecked(grid: &Grid, values: Vec<f64>) -> Self {
        HField {
            grid: grid.clone(),
            values,
            spectral: OnceLock::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Spectral coefficients, normalised so that index 0 is the mean.
    pub fn spectral(&self) -> &[Complex64] {
        self.spectral
            .get_or_init(|| self.grid.forward(&self.values))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<HField> {
        HField::new(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &HField, f: impl Fn(f64, f64) -> f64) -> HField {
        self.check_grid(other);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        HField::from_values_unchecked(&self.grid, values)
    }

    fn check_grid(&self, other: &HField) {
        assert!(self.grid == other.grid, "fields live on different grids");
    }

    /// Spectral derivative `∂^alpha` with `alpha` the per-axis orders.
    pub fn derivative(&self, alpha: [usize; 2]) -> Result<HField> {
        let order = alpha[0] + alpha[1];
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::Unsupported(format!(
                "derivative of order {order} (max {MAX_DERIVATIVE_ORDER})"
            )));
        }
        if self.grid.dim() == 1 && alpha[1] > 0 {
            return Err(Error::InvalidInput(
                "derivative along a missing axis".into(),
            ));
        }
        if order == 0 {
            return Ok(self.clone());
        }
        let g = &self.grid;
        let n = g.n();
        let coeffs: Vec<Complex64> = self
            .spectral()
            .iter()
            .enumerate()
            .map(|(flat, &c)| {
                let mi = g.multi_index(flat);
                let mut factor = Complex64::new(1.0, 0.0);
                for axis in 0..g.dim() {
                    let a = alpha[axis];
                    if a == 0 {
                        continue;
                    }
                    let j = mi[axis] % n;
                    if g.is_nyquist(j) && a % 2 == 1 {
                        return Complex64::new(0.0, 0.0);
                    }
                    factor *= Complex64::new(0.0, g.wavenumber(j)).powu(a as u32);
                }
                c * factor
            })
            .collect();
        Ok(HField::from_values_unchecked(g, g.inverse(&coeffs)))
    }

    /// First derivative along `axis`.
    pub fn d(&self, axis: usize) -> HField {
        let mut alpha = [0, 0];
        alpha[axis] = 1;
        self.derivative(alpha)
            .expect("first derivative along an existing axis")
    }

    /// Product with the aliasing error removed from every retained mode.
    pub fn mul_dealiased(&self, other: &HField) -> HField {
        self.check_grid(other);
        let v = self
            .grid
            .dealiased_product(self.spectral(), other.spectral());
        HField::from_values_unchecked(&self.grid, v)
    }

    /// Nodewise product.
    pub fn mul_nodes(&self, other: &HField) -> HField {
        self.zip_map(other, |a, b| a * b)
    }

    /// Nodewise quotient; the divisor must not vanish at any node.
    pub fn div_nodes(&self, other: &HField) -> Result<HField> {
        if other.values.contains(&0.0) {
            return Err(Error::InvalidInput(
                "division by a field with a zero sample".into(),
            ));
        }
        Ok(self.zip_map(other, |a, b| a / b))
    }

    pub fn scale(&self, s: f64) -> HField {
        HField::from_values_unchecked(&self.grid, self.values.iter().map(|v| v * s).collect())
    }

    pub fn mean(&self) -> f64 {
        self.spectral()[0].re
    }

    /// Trapezoid integral over the torus (exact for resolved trigonometric data).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx().powi(self.grid.dim() as i32)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trigonometric interpolant evaluated at an arbitrary point.
    pub fn eval_at(&self, p: [f64; 2]) -> f64 {
        let g = &self.grid;
        let c = self.spectral();
        let mut acc = 0.0;
        for (flat, coeff) in c.iter().enumerate() {
            let k = g.wavevector(flat);
            let phase = k[0] * p[0] + k[1] * p[1];
            acc += coeff.re * phase.cos() - coeff.im * phase.sin();
        }
        acc
    }

    /// Sum over retained modes of `|f̂|² w(κ)`, times the domain measure.
    pub(crate) fn weighted_energy(&self, w: impl Fn([f64; 2]) -> f64) -> f64 {
        let g = &self.grid;
        let s: f64 = self
            .spectral()
            .iter()
            .enumerate()
            .map(|(flat, c)| c.norm_sqr() * w(g.wavevector(flat)))
            .sum();
        s * g.measure()
    }

    /// Fraction of spectral energy in the top third of the resolved band.
    pub fn spectral_tail_fraction(&self) -> f64 {
        let g = &self.grid;
        let cutoff = g.n() as f64 / 3.0;
        let mut total = 0.0;
        let mut tail = 0.0;
        for (flat, c) in self.spectral().iter().enumerate() {
            let mi = g.multi_index(flat);
            let kmax = (0..g.dim())
                .map(|a| g.mode(mi[a]).unsigned_abs())
                .max()
                .unwrap_or(0);
            let e = c.norm_sqr();
            total += e;
            if kmax as f64 > cutoff {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    pub fn norm(&self, kind: NormKind) -> Result<f64> {
        let dim = self.grid.dim();
        match kind {
            NormKind::L2 => Ok(self.weighted_energy(|_| 1.0).sqrt()),
            NormKind::H(k) => {
                kind.validate()?;
                let weight = move |kv: [f64; 2]| sobolev_weight(kv, k, dim);
                Ok(self.weighted_energy(weight).sqrt())
            }
            NormKind::L6 => {
                let cell = self.grid.dx().powi(dim as i32);
                Ok((self.values.iter().map(|v| v.powi(6)).sum::<f64>() * cell).powf(1.0 / 6.0))
            }
            NormKind::Linf => Ok(self.sup()),
            NormKind::BoundaryH(s) => {
                kind.validate()?;
                let weight = move |kv: [f64; 2]| (1.0 + kv[0] * kv[0] + kv[1] * kv[1]).powf(s);
                Ok(self.weighted_energy(weight).sqrt())
            }
        }
    }
}

/// `Σ_{|α| ≤ k} |κ^α|²` over distinct multi-indices.
pub(crate) fn sobolev_weight(k: [f64; 2], order: usize, dim: usize) -> f64 {
    let (a, b) = (k[0] * k[0], k[1] * k[1]);
    let mut w = 0.0;
    for j in 0..=order {
        if dim == 1 {
            w += a.powi(j as i32);
        } else {
            for i in 0..=j {
                w += a.powi(i as i32) * b.powi((j - i) as i32);
            }
        }
    }
    w
}

impl Add for &HField {
    type Output = HField;
    fn add(self, rhs: &HField) -> HField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &HField {
    type Output = HField;
    fn sub(self, rhs: &HField) -> HField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &HField {
    type Output = HField;
    fn mul(self, s: f64) -> HField {
        self.scale(s)
    }
}

impl Neg for &HField {
    type Output = HField;
    fn neg(self) -> HField {
        self.scale(-1.0)
    }
}

/// Gradient of a scalar field, one component per horizontal axis.
pub fn grad(f: &HField) -> Vec<HField> {
    (0..f.grid().dim()).map(|a| f.d(a)).collect()
}

/// Divergence of a horizontal vector field.
pub fn div(u: &[HField]) -> HField {
    let mut acc = u[0].d(0);
    for (axis, comp) in u.iter().enumerate().skip(1) {
        acc = &acc + &comp.d(axis);
    }
    acc
}

/// Horizontal Jacobian `J[i][j] = ∂_j u_i`.
pub fn jacobian(u: &[HField]) -> Vec<Vec<HField>> {
    u.iter()
        .map(|ui| (0..ui.grid().dim()).map(|j| ui.d(j)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn g1(n: usize) -> Grid {
        Grid::periodic_1d(n).unwrap()
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let g = g1(32);
        let f = HField::from_fn(&g, |p| p[0].sin()).unwrap();
        let df = f.d(0);
        for j in 0..g.npoints() {
            assert!((df.values()[j] - g.node(j)[0].cos()).abs() <= 1e-12);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = g1(16);
        let f = HField::constant(&g, 3.7);
        for alpha in [[1, 0], [2, 0], [4, 0]] {
            assert!(f
                .derivative(alpha)
                .unwrap()
                .values()
                .iter()
                .all(|&v| v == 0.0));
        }
    }

    #[test]
    fn high_order_derivative_rejected() {
        let g = g1(16);
        let f = HField::constant(&g, 1.0);
        assert!(matches!(f.derivative([5, 0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn nan_rejected() {
        let g = g1(8);
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(HField::new(&g, v), Err(Error::NonFinite(_))));
    }

    #[test]
    fn l2_of_sine_and_constant() {
        let g = g1(32);
        let f = HField::from_fn(&g, |p| p[0].sin()).unwrap();
        assert!((f.norm(NormKind::L2).unwrap() - PI.sqrt()).abs() < 1e-13);
        let c = HField::constant(&g, -2.0);
        assert!((c.norm(NormKind::L2).unwrap() - 2.0 * (2.0 * PI).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn sobolev_norm_of_a_single_mode() {
        let g = g1(32);
        let f = HField::from_fn(&g, |p| (3.0 * p[0]).cos()).unwrap();
        // ‖f‖² + ‖f'‖² = π (1 + 9)
        let h1 = f.norm(NormKind::H(1)).unwrap();
        assert!((h1 * h1 - 10.0 * PI).abs() < 1e-11);
    }

    #[test]
    fn interpolation_matches_closed_form_off_grid() {
        let g = g1(32);
        let f = HField::from_fn(&g, |p| (2.0 * p[0]).sin() + 0.3 * p[0].cos()).unwrap();
        let x = 0.123_456;
        assert!((f.eval_at([x, 0.0]) - ((2.0 * x).sin() + 0.3 * x.cos())).abs() < 1e-13);
    }

    #[test]
    fn divergence_of_2d_field() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let u = vec![
            HField::from_fn(&g, |p| p[0].sin() * p[1].cos()).unwrap(),
            HField::from_fn(&g, |p| (2.0 * p[1]).sin()).unwrap(),
        ];
        let d = div(&u);
        for j in 0..g.npoints() {
            let p = g.node(j);
            let exact = p[0].cos() * p[1].cos() + 2.0 * (2.0 * p[1]).cos();
            assert!((d.values()[j] - exact).abs() < 1e-12);
        }
    }
}
