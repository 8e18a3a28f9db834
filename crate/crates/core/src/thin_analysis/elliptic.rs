//! One-dimensional vertical problems for the Fourier modes of thin-strip
//! elliptic equations, solved by Chebyshev collocation in `ζ = z/ε`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{HField, NormKind, ThinField, Vertical};

const RESIDUAL_TOL: f64 = 1e-10;

fn check_mode(k: f64, eps: f64, nz: usize) -> Result<()> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidInput(format!(
            "wavenumber {k} must be positive"
        )));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    if nz < 8 {
        return Err(Error::InvalidInput(format!("nz = {nz} must be at least 8")));
    }
    Ok(())
}

fn solve_checked(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = a.clone().lu().solve(b).ok_or(Error::SolverResidual {
        residual: f64::INFINITY,
    })?;
    let scale = a.abs().row_sum().max() * x.amax() + b.amax();
    let residual = (a * &x - b).amax() / scale.max(f64::MIN_POSITIVE);
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::SolverResidual { residual });
    }
    Ok(x)
}

/// `(−∂_ζζ + (kε)²)` with boundary rows replaced by the caller.
fn helmholtz(v: &Vertical, k_eps: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = v.diff.clone();
    let d2 = &d * &d;
    let n = v.len();
    let a = DMatrix::from_fn(n, n, |i, j| {
        -d2[(i, j)] + if i == j { k_eps * k_eps } else { 0.0 }
    });
    (a, d)
}

/// Solution of one vertical mode problem against its closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSolution {
    pub k: f64,
    pub eps: f64,
    /// Physical heights of the collocation nodes.
    pub z: Vec<f64>,
    pub numeric: Vec<f64>,
    pub analytic: Vec<f64>,
    pub sup_error: f64,
    /// Normalized energy `∫(p′² + k²p²) dz` divided by the boundary scale.
    pub ratio: f64,
    pub ratio_analytic: f64,
}

fn energy(v: &Vertical, d: &DMatrix<f64>, p: &DVector<f64>, k: f64, eps: f64) -> f64 {
    let dp = d * p;
    (0..v.len())
        .map(|m| v.quad[m] * (dp[m] * dp[m] / eps + eps * k * k * p[m] * p[m]))
        .sum()
}

/// `−p″ + k²p = 0` on `(0, ε)`, `p′(0) = 0`, `p(ε) = h_k`.
///
/// The ratio is the energy over `k h_k²`, equal to `tanh(kε)`.
pub fn mode_pressure_dirichlet_top(k: f64, eps: f64, h_k: f64, nz: usize) -> Result<ModeSolution> {
    check_mode(k, eps, nz)?;
    if !(h_k.is_finite() && h_k != 0.0) {
        return Err(Error::InvalidInput(format!(
            "boundary value {h_k} must be finite and nonzero"
        )));
    }
    let v = Vertical::new(nz)?;
    let (mut a, d) = helmholtz(&v, k * eps);
    let mut b = DVector::zeros(nz);
    for j in 0..nz {
        a[(0, j)] = d[(0, j)];
        a[(nz - 1, j)] = if j == nz - 1 { 1.0 } else { 0.0 };
    }
    b[nz - 1] = h_k;
    let p = solve_checked(&a, &b)?;
    let z: Vec<f64> = v.nodes.iter().map(|s| s * eps).collect();
    let analytic: Vec<f64> = z
        .iter()
        .map(|&z| h_k * (k * z).cosh() / (k * eps).cosh())
        .collect();
    let sup_error = p
        .iter()
        .zip(&analytic)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let ratio = energy(&v, &d, &p, k, eps) / (k * h_k * h_k);
    Ok(ModeSolution {
        k,
        eps,
        z,
        numeric: p.iter().copied().collect(),
        analytic,
        sup_error,
        ratio,
        ratio_analytic: (k * eps).tanh(),
    })
}

/// `−p″ + k²p = 0` on `(0, ε)`, `p′(0) = g_k`, `p(ε) = 0`.
///
/// The ratio is the energy over `ε g_k²`, equal to `tanh(kε)/(kε)`.
pub fn mode_pressure_neumann_bottom(k: f64, eps: f64, g_k: f64, nz: usize) -> Result<ModeSolution> {
    check_mode(k, eps, nz)?;
    if !(g_k.is_finite() && g_k != 0.0) {
        return Err(Error::InvalidInput(format!(
            "boundary flux {g_k} must be finite and nonzero"
        )));
    }
    let v = Vertical::new(nz)?;
    let (mut a, d) = helmholtz(&v, k * eps);
    let mut b = DVector::zeros(nz);
    for j in 0..nz {
        a[(0, j)] = d[(0, j)];
        a[(nz - 1, j)] = if j == nz - 1 { 1.0 } else { 0.0 };
    }
    b[0] = eps * g_k;
    let p = solve_checked(&a, &b)?;
    let z: Vec<f64> = v.nodes.iter().map(|s| s * eps).collect();
    let analytic: Vec<f64> = z
        .iter()
        .map(|&z| -g_k * (k * (eps - z)).sinh() / (k * (k * eps).cosh()))
        .collect();
    let sup_error = p
        .iter()
        .zip(&analytic)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let ratio = energy(&v, &d, &p, k, eps) / (eps * g_k * g_k);
    Ok(ModeSolution {
        k,
        eps,
        z,
        numeric: p.iter().copied().collect(),
        analytic,
        sup_error,
        ratio,
        ratio_analytic: (k * eps).tanh() / (k * eps),
    })
}

/// Solution of `Δφ = h` on the flat strip with `∂_z φ = 0` top and bottom.
#[derive(Debug, Clone)]
pub struct DivergenceLift {
    pub phi: ThinField,
    /// Constant removed from the horizontal mean to make the data compatible.
    pub compat: f64,
    /// `‖∇φ‖ / ‖h‖`.
    pub gradient_ratio: f64,
    /// `‖φ‖_{H²} / ‖h‖`.
    pub h2_ratio: f64,
}

/// Neumann Poisson solve on `X × (0, ε)`, mode by mode. The mean mode is a
/// bordered system fixing the vertical mean of `φ` to zero.
pub fn divergence_lift(h: &ThinField) -> Result<DivergenceLift> {
    let th = h.thickness();
    if th.values().iter().any(|&t| t != 1.0) {
        return Err(Error::InvalidInput(
            "divergence lift needs a flat strip (thickness 1)".into(),
        ));
    }
    let eps = h.eps();
    let v = h.vertical().clone();
    let nz = v.len();
    if nz < 8 {
        return Err(Error::InvalidInput(format!("nz = {nz} must be at least 8")));
    }
    let grid = th.grid().clone();
    let np = grid.npoints();
    let levels: Vec<Vec<Complex64>> = (0..nz).map(|m| grid.forward(h.level(m).values())).collect();
    let d = v.diff.clone();
    let d2 = &d * &d;

    let mut out_levels = vec![vec![Complex64::new(0.0, 0.0); np]; nz];
    let mut compat = 0.0;
    let mut factors: HashMap<u64, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> = HashMap::new();
    for flat in 0..np {
        let kv = grid.wavevector(flat);
        let k2 = kv[0] * kv[0] + kv[1] * kv[1];
        let rhs_c: Vec<Complex64> = (0..nz).map(|m| levels[m][flat]).collect();
        if k2 == 0.0 {
            let n = nz + 1;
            let mut a = DMatrix::zeros(n, n);
            for i in 0..nz {
                for j in 0..nz {
                    a[(i, j)] = d2[(i, j)] / (eps * eps);
                }
                a[(i, nz)] = 1.0;
            }
            for j in 0..nz {
                a[(0, j)] = d[(0, j)];
                a[(nz - 1, j)] = d[(nz - 1, j)];
                a[(nz, j)] = v.quad[j];
            }
            a[(0, nz)] = 0.0;
            a[(nz - 1, nz)] = 0.0;
            for part in 0..2 {
                let mut b = DVector::zeros(n);
                for m in 1..nz - 1 {
                    b[m] = if part == 0 { rhs_c[m].re } else { rhs_c[m].im };
                }
                let x = solve_checked(&a, &b)?;
                for m in 0..nz {
                    if part == 0 {
                        out_levels[m][flat].re = x[m];
                    } else {
                        out_levels[m][flat].im = x[m];
                    }
                }
                if part == 0 {
                    compat = x[nz];
                }
            }
            continue;
        }
        let key = k2.to_bits();
        let mut a = DMatrix::from_fn(nz, nz, |i, j| {
            d2[(i, j)] / (eps * eps) - if i == j { k2 } else { 0.0 }
        });
        for j in 0..nz {
            a[(0, j)] = d[(0, j)];
            a[(nz - 1, j)] = d[(nz - 1, j)];
        }
        let lu = factors.entry(key).or_insert_with(|| a.clone().lu());
        for part in 0..2 {
            let mut b = DVector::zeros(nz);
            for m in 1..nz - 1 {
                b[m] = if part == 0 { rhs_c[m].re } else { rhs_c[m].im };
            }
            let x = lu.solve(&b).ok_or(Error::SolverResidual {
                residual: f64::INFINITY,
            })?;
            let scale = a.abs().row_sum().max() * x.amax() + b.amax();
            let residual = (&a * &x - &b).amax() / scale.max(f64::MIN_POSITIVE);
            if !(residual <= RESIDUAL_TOL) {
                return Err(Error::SolverResidual { residual });
            }
            for m in 0..nz {
                if part == 0 {
                    out_levels[m][flat].re = x[m];
                } else {
                    out_levels[m][flat].im = x[m];
                }
            }
        }
    }
    let mut values = vec![0.0; np * nz];
    for (m, lvl) in out_levels.iter().enumerate() {
        let real = HField::from_spectral(&grid, lvl)?;
        for (j, &val) in real.values().iter().enumerate() {
            values[j * nz + m] = val;
        }
    }
    let phi = ThinField::new(th, eps, &v, values)?;
    let hn = h.norm(NormKind::L2)?;
    if !(hn > 0.0) {
        return Err(Error::InvalidInput(
            "zero data for the divergence lift".into(),
        ));
    }
    let mut grad2 = phi.dz().norm(NormKind::L2)?.powi(2);
    for axis in 0..grid.dim() {
        grad2 += phi.dx(axis).norm(NormKind::L2)?.powi(2);
    }
    Ok(DivergenceLift {
        gradient_ratio: grad2.sqrt() / hn,
        h2_ratio: phi.norm(NormKind::H(2))? / hn,
        phi,
        compat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;

    #[test]
    fn dirichlet_top_matches_closed_form() {
        for &eps in &[0.1, 0.01, 0.001] {
            let s = mode_pressure_dirichlet_top(8.0, eps, 1.0, 24).unwrap();
            assert!(s.sup_error < 1e-10, "eps {eps}: {}", s.sup_error);
            assert!((s.ratio - s.ratio_analytic).abs() < 1e-10);
        }
    }

    #[test]
    fn neumann_bottom_ratio_is_bounded() {
        for &eps in &[0.1, 0.01, 0.001] {
            let s = mode_pressure_neumann_bottom(8.0, eps, 1.0, 24).unwrap();
            assert!(s.sup_error < 1e-10 * eps.max(1e-3) * 10.0);
            assert!((s.ratio - s.ratio_analytic).abs() < 1e-9);
            assert!(s.ratio <= 1.0);
        }
    }

    #[test]
    fn lift_of_a_single_mode() {
        let g = Grid::periodic_1d(16).unwrap();
        let v = Vertical::new(10).unwrap();
        let h = ThinField::flat(&g, 0.05, &v, |x, _| x[0].cos()).unwrap();
        let lift = divergence_lift(&h).unwrap();
        let expect = ThinField::flat(&g, 0.05, &v, |x, _| -x[0].cos()).unwrap();
        let err = lift
            .phi
            .values()
            .iter()
            .zip(expect.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        assert!(lift.compat.abs() < 1e-14);
    }
}
