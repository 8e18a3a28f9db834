use std::sync::Arc;

use nalgebra::DMatrix;

use super::cheb::{bary_eval, cgl_nodes, cgl_weights, clenshaw_curtis, diff_matrix};
use super::grid::Grid;
use super::hfield::HField;
use super::NormKind;
use crate::error::{Error, Result};

/// Chebyshev–Gauss–Lobatto collocation data on the scaled coordinate ζ ∈ [0, 1].
#[derive(Debug)]
pub struct Vertical {
    pub nodes: Vec<f64>,
    pub bary: Vec<f64>,
    pub quad: Vec<f64>,
    pub diff: DMatrix<f64>,
}

impl Vertical {
    pub fn new(nz: usize) -> Result<Arc<Self>> {
        if nz < 4 {
            return Err(Error::InvalidInput(format!("nz = {nz} must be at least 4")));
        }
        let nodes = cgl_nodes(nz);
        let bary = cgl_weights(nz);
        let diff = diff_matrix(&nodes, &bary);
        Ok(Arc::new(Vertical {
            quad: clenshaw_curtis(nz),
            nodes,
            bary,
            diff,
        }))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `D_ζ` applied to one column.
    pub fn apply_diff(&self, col: &[f64]) -> Vec<f64> {
        let n = col.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.diff[(i, j)] * col[j]).sum())
            .collect()
    }
}

/// Samples on the curved layer `0 ≤ z ≤ ε h(x)` at `z = ζ_m ε h(x_j)`.
///
/// Values are column-major in the vertical: index `j * nz + m`.
#[derive(Debug, Clone)]
pub struct ThinField {
    thickness: HField,
    eps: f64,
    vert: Arc<Vertical>,
    values: Vec<f64>,
}

impl ThinField {
    pub fn new(
        thickness: &HField,
        eps: f64,
        vert: &Arc<Vertical>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
        }
        if thickness.min() <= 0.0 {
            return Err(Error::InvalidInput(
                "layer thickness must be positive".into(),
            ));
        }
        if values.len() != thickness.len() * vert.len() {
            return Err(Error::InvalidInput(
                "thin field sample count mismatch".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("thin field samples"));
        }
        Ok(ThinField {
            thickness: thickness.clone(),
            eps,
            vert: vert.clone(),
            values,
        })
    }

    /// Samples `f(node, x, z)` on the layer.
    pub fn from_fn(
        thickness: &HField,
        eps: f64,
        vert: &Arc<Vertical>,
        f: impl Fn(usize, [f64; 2], f64) -> f64,
    ) -> Result<Self> {
        let g = thickness.grid();
        let nz = vert.len();
        let mut values = Vec::with_capacity(g.npoints() * nz);
        for j in 0..g.npoints() {
            let x = g.node(j);
            let top = eps * thickness.values()[j];
            for &zeta in &vert.nodes {
                values.push(f(j, x, zeta * top));
            }
        }
        Self::new(thickness, eps, vert, values)
    }

    /// Flat strip `X × (0, ε)`.
    pub fn flat(
        grid: &Grid,
        eps: f64,
        vert: &Arc<Vertical>,
        f: impl Fn([f64; 2], f64) -> f64,
    ) -> Result<Self> {
        let one = HField::constant(grid, 1.0);
        Self::from_fn(&one, eps, vert, |_, x, z| f(x, z))
    }

    pub fn grid(&self) -> &Grid {
        self.thickness.grid()
    }

    pub fn thickness(&self) -> &HField {
        &self.thickness
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn nz(&self) -> usize {
        self.vert.len()
    }

    pub fn vertical(&self) -> &Arc<Vertical> {
        &self.vert
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let nz = self.nz();
        &self.values[j * nz..(j + 1) * nz]
    }

    /// Physical height of sample `(j, m)`.
    pub fn z(&self, j: usize, m: usize) -> f64 {
        self.vert.nodes[m] * self.eps * self.thickness.values()[j]
    }

    fn with_values(&self, values: Vec<f64>) -> ThinField {
        ThinField {
            thickness: self.thickness.clone(),
            eps: self.eps,
            vert: self.vert.clone(),
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ThinField {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ThinField, f: impl Fn(f64, f64) -> f64) -> ThinField {
        assert_eq!(
            self.values.len(),
            other.values.len(),
            "thin fields on different layers"
        );
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// Samples at level `m` as a horizontal field.
    pub fn level(&self, m: usize) -> HField {
        let nz = self.nz();
        let v = (0..self.thickness.len())
            .map(|j| self.values[j * nz + m])
            .collect();
        HField::from_values_unchecked(self.grid(), v)
    }

    pub fn bottom_trace(&self) -> HField {
        self.level(0)
    }

    pub fn top_trace(&self) -> HField {
        self.level(self.nz() - 1)
    }

    fn d_zeta(&self) -> Vec<f64> {
        let nz = self.nz();
        let mut out = Vec::with_capacity(self.values.len());
        for j in 0..self.thickness.len() {
            out.extend(self.vert.apply_diff(&self.values[j * nz..(j + 1) * nz]));
        }
        out
    }

    /// `∂_z` in physical height.
    pub fn dz(&self) -> ThinField {
        let nz = self.nz();
        let mut v = self.d_zeta();
        for (j, chunk) in v.chunks_mut(nz).enumerate() {
            let scale = 1.0 / (self.eps * self.thickness.values()[j]);
            chunk.iter_mut().for_each(|c| *c *= scale);
        }
        self.with_values(v)
    }

    /// Horizontal derivative at fixed physical height:
    /// `∂_x f|_z = ∂_x f|_ζ − ζ (∂_x h / h) ∂_ζ f`.
    pub fn dx(&self, axis: usize) -> ThinField {
        let nz = self.nz();
        let npts = self.thickness.len();
        let dh = self.thickness.d(axis);
        let dzeta = self.d_zeta();
        let mut out = vec![0.0; self.values.len()];
        for m in 0..nz {
            let lev = self.level(m).d(axis);
            let zeta = self.vert.nodes[m];
            for j in 0..npts {
                let slope = dh.values()[j] / self.thickness.values()[j];
                out[j * nz + m] = lev.values()[j] - zeta * slope * dzeta[j * nz + m];
            }
        }
        self.with_values(out)
    }

    /// Interpolated value at physical height `z` above node `j`.
    pub fn vertical_eval(&self, j: usize, z: f64) -> Result<f64> {
        let top = self.eps * self.thickness.values()[j];
        if !(z >= 0.0 && z <= top * (1.0 + 1e-14)) {
            return Err(Error::InvalidInput(format!(
                "z = {z} outside layer [0, {top}]"
            )));
        }
        let zeta = (z / top).min(1.0);
        Ok(bary_eval(
            &self.vert.nodes,
            &self.vert.bary,
            self.column(j),
            zeta,
        ))
    }

    /// Integral over the layer: trapezoid in x, Clenshaw–Curtis in ζ, Jacobian ε h.
    pub fn integral(&self) -> f64 {
        let nz = self.nz();
        let cell = self.grid().dx().powi(self.grid().dim() as i32);
        let mut acc = 0.0;
        for j in 0..self.thickness.len() {
            let col: f64 = (0..nz)
                .map(|m| self.vert.quad[m] * self.values[j * nz + m])
                .sum();
            acc += col * self.eps * self.thickness.values()[j];
        }
        acc * cell
    }

    fn sq_l2(&self) -> f64 {
        self.map(|v| v * v).integral()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// All partial derivatives of exact order `k` over distinct multi-indices
    /// in (x₁, …, z).
    fn derivatives_of_order(&self, k: usize) -> Vec<ThinField> {
        let dim = self.grid().dim();
        let mut layer = vec![(self.clone(), 0usize)];
        for _ in 0..k {
            let mut next = Vec::new();
            for (f, last) in &layer {
                // non-decreasing axis sequence; axis `dim` is z
                for axis in *last..=dim {
                    let d = if axis == dim { f.dz() } else { f.dx(axis) };
                    next.push((d, axis));
                }
            }
            layer = next;
        }
        layer.into_iter().map(|(f, _)| f).collect()
    }

    pub fn norm(&self, kind: NormKind) -> Result<f64> {
        kind.validate()?;
        match kind {
            NormKind::L2 => Ok(self.sq_l2().sqrt()),
            NormKind::H(k) => {
                let mut acc = 0.0;
                for order in 0..=k {
                    acc += self
                        .derivatives_of_order(order)
                        .iter()
                        .map(|f| f.sq_l2())
                        .sum::<f64>();
                }
                Ok(acc.sqrt())
            }
            NormKind::L6 => Ok(self.map(|v| v.powi(6)).integral().powf(1.0 / 6.0)),
            NormKind::Linf => Ok(self.sup()),
            NormKind::BoundaryH(_) => Err(Error::InvalidInput(
                "boundary norms apply to traces; take top_trace or bottom_trace first".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn layer(n: usize, nz: usize, eps: f64) -> (HField, Arc<Vertical>, f64) {
        let g = Grid::periodic_1d(n).unwrap();
        let h = HField::from_fn(&g, |p| 1.0 + 0.2 * p[0].cos()).unwrap();
        (h, Vertical::new(nz).unwrap(), eps)
    }

    #[test]
    fn vertical_eval_is_exact_for_low_degree() {
        let (h, v, eps) = layer(16, 8, 0.1);
        let f = ThinField::from_fn(&h, eps, &v, |j, _, z| {
            let zeta = z / (eps * h.values()[j]);
            zeta * zeta
        })
        .unwrap();
        let top = eps * h.values()[3];
        let got = f.vertical_eval(3, 0.37 * top).unwrap();
        assert!((got - 0.37f64.powi(2)).abs() < 1e-14);
        assert_eq!(f.vertical_eval(3, 0.0).unwrap(), f.column(3)[0]);
        assert!(f.vertical_eval(3, 1.5 * top).is_err());
    }

    #[test]
    fn chain_rule_derivatives() {
        let (h, v, eps) = layer(32, 10, 0.3);
        let f = ThinField::from_fn(&h, eps, &v, |_, x, z| x[0].sin() * z * z + z.powi(3)).unwrap();
        let fx = f.dx(0);
        let fz = f.dz();
        for j in 0..32 {
            for m in 0..10 {
                let x = h.grid().node(j)[0];
                let z = f.z(j, m);
                assert!((fx.column(j)[m] - x.cos() * z * z).abs() < 1e-11);
                assert!((fz.column(j)[m] - (2.0 * x.sin() * z + 3.0 * z * z)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn layer_integral_of_a_constant_is_the_volume() {
        let (h, v, eps) = layer(16, 6, 0.05);
        let f = ThinField::from_fn(&h, eps, &v, |_, _, _| 1.0).unwrap();
        assert!((f.integral() - eps * 2.0 * PI).abs() < 1e-13);
    }
}
