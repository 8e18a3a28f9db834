//! Zeroth-order Lagrangian chart driven by the shallow-water velocity and the
//! matrix algebra of the Lagrangian formulation.
//!
//! The chart solves `dX/dt = u₀(t, X)`, `dZ/dt = −Z div u₀(t, X)` from
//! `(x₀, z₀)`. `Z` is linear in `z₀`, so only the stretch `s = Z/z₀` is
//! integrated.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::cheb::{cgl_nodes, cgl_weights, diff_matrix};
use crate::fields::{div, Grid, HField};
use crate::shallow_water::SWTrajectory;

/// Condition number above which [`transformed_deformation`] flags a node.
pub const ILL_CONDITIONED: f64 = 1e8;

/// Material grid with positions and vertical stretch at every trajectory time.
#[derive(Debug, Clone)]
pub struct Chart {
    grid: Grid,
    eps: f64,
    /// Material heights on `[0, ε]`, Lobatto-distributed, ascending.
    pub levels: Vec<f64>,
    pub times: Vec<f64>,
    pub dt: f64,
    /// `positions[n][j]`: unwrapped `X₀` of material node `j` at time `n`.
    pub positions: Vec<Vec<[f64; 2]>>,
    /// `stretch[n][j] = Z₀ / z₀`.
    pub stretch: Vec<Vec<f64>>,
}

/// Velocity, divergence and their time derivatives at one stored time.
struct Snapshot {
    u: Vec<HField>,
    du: Vec<HField>,
    divu: HField,
    ddivu: HField,
}

fn snapshots(traj: &SWTrajectory) -> Vec<Snapshot> {
    traj.states
        .iter()
        .zip(&traj.rates)
        .map(|(s, r)| Snapshot {
            u: s.u0.clone(),
            du: r.du.clone(),
            divu: div(&s.u0),
            ddivu: div(&r.du),
        })
        .collect()
}

/// Cubic Hermite interpolation on `[0, dt]` at fraction `theta`.
pub fn hermite(f0: f64, d0: f64, f1: f64, d1: f64, dt: f64, theta: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * f0 + h10 * dt * d0 + h01 * f1 + h11 * dt * d1
}

/// Right-hand side of the chart ODE at fraction `theta` of step `[a, b]`.
fn chart_rhs(
    a: &Snapshot,
    b: &Snapshot,
    dt: f64,
    theta: f64,
    x: [f64; 2],
    s: f64,
) -> ([f64; 2], f64) {
    let interp = |fa: &HField, da: &HField, fb: &HField, db: &HField| {
        hermite(
            fa.eval_at(x),
            da.eval_at(x),
            fb.eval_at(x),
            db.eval_at(x),
            dt,
            theta,
        )
    };
    let mut v = [0.0; 2];
    for (i, vi) in v.iter_mut().enumerate().take(a.u.len()) {
        *vi = interp(&a.u[i], &a.du[i], &b.u[i], &b.du[i]);
    }
    let dv = interp(&a.divu, &a.ddivu, &b.divu, &b.ddivu);
    (v, -s * dv)
}

fn rk4_chart(a: &Snapshot, b: &Snapshot, dt: f64, x: [f64; 2], s: f64) -> ([f64; 2], f64) {
    let add = |x: [f64; 2], k: [f64; 2], h: f64| [x[0] + h * k[0], x[1] + h * k[1]];
    let (k1x, k1s) = chart_rhs(a, b, dt, 0.0, x, s);
    let (k2x, k2s) = chart_rhs(a, b, dt, 0.5, add(x, k1x, 0.5 * dt), s + 0.5 * dt * k1s);
    let (k3x, k3s) = chart_rhs(a, b, dt, 0.5, add(x, k2x, 0.5 * dt), s + 0.5 * dt * k2s);
    let (k4x, k4s) = chart_rhs(a, b, dt, 1.0, add(x, k3x, dt), s + dt * k3s);
    let w = dt / 6.0;
    let xn = [
        x[0] + w * (k1x[0] + 2.0 * k2x[0] + 2.0 * k3x[0] + k4x[0]),
        x[1] + w * (k1x[1] + 2.0 * k2x[1] + 2.0 * k3x[1] + k4x[1]),
    ];
    (xn, s + w * (k1s + 2.0 * k2s + 2.0 * k3s + k4s))
}

/// Integrates the chart over the whole trajectory, one RK4 step per stored
/// step, starting from the identity map.
pub fn integrate_chart(traj: &SWTrajectory, eps: f64, nlevels: usize) -> Result<Chart> {
    let g = traj.states[0].grid().clone();
    let start: Vec<[f64; 2]> = (0..g.npoints()).map(|j| g.node(j)).collect();
    let stretch = vec![1.0; g.npoints()];
    integrate_chart_from(traj, eps, nlevels, 0, traj.states.len() - 1, start, stretch)
}

/// Integrates from stored step `n0` to `n1` starting at the given positions
/// and stretches.
pub fn integrate_chart_from(
    traj: &SWTrajectory,
    eps: f64,
    nlevels: usize,
    n0: usize,
    n1: usize,
    start: Vec<[f64; 2]>,
    stretch0: Vec<f64>,
) -> Result<Chart> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    if nlevels < 2 {
        return Err(Error::InvalidInput(
            "need at least two material levels".into(),
        ));
    }
    if n0 > n1 || n1 >= traj.states.len() {
        return Err(Error::InvalidInput(format!(
            "step range {n0}..{n1} outside trajectory"
        )));
    }
    let g = traj.states[0].grid().clone();
    if start.len() != g.npoints() || stretch0.len() != g.npoints() {
        return Err(Error::InvalidInput(
            "initial chart data does not match grid".into(),
        ));
    }
    let snaps = snapshots(traj);
    let dt = traj.dt;
    let mut positions = vec![start];
    let mut stretch = vec![stretch0];
    for n in n0..n1 {
        let (a, b) = (&snaps[n], &snaps[n + 1]);
        let prev_x = positions.last().expect("non-empty");
        let prev_s = stretch.last().expect("non-empty");
        let next: Vec<([f64; 2], f64)> = prev_x
            .par_iter()
            .zip(prev_s.par_iter())
            .map(|(&x, &s)| rk4_chart(a, b, dt, x, s))
            .collect();
        let t = traj.states[n + 1].t;
        if next
            .iter()
            .any(|(x, s)| !(x[0].is_finite() && x[1].is_finite() && s.is_finite()))
        {
            return Err(Error::Blowup {
                t,
                detail: "non-finite chart position".into(),
            });
        }
        positions.push(next.iter().map(|p| p.0).collect());
        stretch.push(next.iter().map(|p| p.1).collect());
    }
    let levels = cgl_nodes(nlevels).into_iter().map(|z| z * eps).collect();
    let times = traj.states[n0..=n1].iter().map(|s| s.t).collect();
    Ok(Chart {
        grid: g,
        eps,
        levels,
        times,
        dt,
        positions,
        stretch,
    })
}

impl Chart {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * self.dt.max(1e-300))
            .ok_or_else(|| Error::InvalidInput(format!("t = {t} is not a chart time")))
    }

    /// `Z₀` at time index `n`, node `j`, level `m`.
    pub fn height(&self, n: usize, j: usize, m: usize) -> f64 {
        self.levels[m] * self.stretch[n][j]
    }

    /// Displacement `X₀ − x₀` along `axis` at time index `n`.
    pub fn displacement(&self, n: usize, axis: usize) -> HField {
        let v = (0..self.grid.npoints())
            .map(|j| self.positions[n][j][axis] - self.grid.node(j)[axis])
            .collect();
        HField::new(&self.grid, v).expect("finite chart")
    }

    /// `∂X₀/∂x₀` per node, from spectral differentiation of the displacement.
    pub fn deformation_gradient(&self, n: usize) -> Vec<DMatrix<f64>> {
        let d = self.grid.dim();
        let grads: Vec<Vec<HField>> = (0..d)
            .map(|i| (0..d).map(|k| self.displacement(n, i).d(k)).collect())
            .collect();
        (0..self.grid.npoints())
            .map(|j| {
                DMatrix::from_fn(d, d, |i, k| {
                    grads[i][k].values()[j] + if i == k { 1.0 } else { 0.0 }
                })
            })
            .collect()
    }

    fn stretch_field(&self, n: usize) -> HField {
        HField::new(&self.grid, self.stretch[n].clone()).expect("finite chart")
    }
}

/// Sup residuals of the two closed-form chart identities over all stored
/// times. With non-uniform initial thickness they read
/// `det(∂X₀/∂x₀) h₀(t,X₀) = h₀(0,x₀)` and `Z₀ = z₀ h₀(t,X₀)/h₀(0,x₀)`,
/// which reduce to the unit-thickness forms when `h₀(0) ≡ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub volume: f64,
    pub height: f64,
}

pub fn chart_identities(c: &Chart, traj: &SWTrajectory) -> Result<IdentityReport> {
    let first = traj
        .states
        .iter()
        .position(|s| (s.t - c.times[0]).abs() <= 1e-9 * c.dt)
        .ok_or_else(|| Error::InvalidInput("chart and trajectory share no start time".into()))?;
    if first + c.times.len() > traj.states.len() {
        return Err(Error::InvalidInput(
            "chart extends beyond trajectory".into(),
        ));
    }
    let g = &c.grid;
    let h_init: Vec<f64> = (0..g.npoints())
        .map(|j| traj.states[first].h0.eval_at(c.positions[0][j]))
        .collect();
    let det0: Vec<f64> = c
        .deformation_gradient(0)
        .iter()
        .map(|a| a.determinant())
        .collect();
    let top = *c.levels.last().expect("levels");
    let mut volume = 0.0f64;
    let mut height = 0.0f64;
    for n in 0..c.times.len() {
        let h = &traj.states[first + n].h0;
        let jac = c.deformation_gradient(n);
        for j in 0..g.npoints() {
            let hx = h.eval_at(c.positions[n][j]);
            let ratio = hx / h_init[j];
            volume = volume.max((jac[j].determinant() / det0[j] * ratio - 1.0).abs());
            let s0 = c.stretch[0][j];
            height = height.max(top * (c.stretch[n][j] - s0 * ratio).abs());
        }
    }
    Ok(IdentityReport { volume, height })
}

/// Per node and level Jacobians `A` of the map `(x₀, z₀) ↦ (X₀, Z₀)`,
/// indexed `j * levels + m`.
#[derive(Debug, Clone)]
pub struct JacobianField {
    pub levels: usize,
    pub mats: Vec<DMatrix<f64>>,
    pub dets: Vec<f64>,
}

pub fn jacobian(c: &Chart, t: f64) -> Result<JacobianField> {
    let n = c.time_index(t)?;
    let d = c.grid.dim();
    let dx = c.deformation_gradient(n);
    let s = c.stretch_field(n);
    let ds: Vec<HField> = (0..d).map(|k| s.d(k)).collect();
    let nl = c.levels.len();
    let mut mats = Vec::with_capacity(dx.len() * nl);
    let mut dets = Vec::with_capacity(dx.len() * nl);
    for (j, dxj) in dx.iter().enumerate() {
        for m in 0..nl {
            let z0 = c.levels[m];
            let a = DMatrix::from_fn(d + 1, d + 1, |r, k| match (r < d, k < d) {
                (true, true) => dxj[(r, k)],
                (true, false) => 0.0,
                (false, true) => z0 * ds[k].values()[j],
                (false, false) => s.values()[j],
            });
            let det = a.determinant();
            if !(det > 0.0) {
                return Err(Error::DegenerateChart {
                    node: j * nl + m,
                    det,
                });
            }
            mats.push(a);
            dets.push(det);
        }
    }
    Ok(JacobianField {
        levels: nl,
        mats,
        dets,
    })
}

/// Inverse by the adjugate formula for 2×2 and 3×3 matrices.
pub fn direct_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let det = a.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::DegenerateChart { node: 0, det });
    }
    let inv = match n {
        2 => DMatrix::from_row_slice(2, 2, &[a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]]) / det,
        3 => {
            let c = |r0: usize, r1: usize, c0: usize, c1: usize| {
                a[(r0, c0)] * a[(r1, c1)] - a[(r0, c1)] * a[(r1, c0)]
            };
            let adj = DMatrix::from_row_slice(
                3,
                3,
                &[
                    c(1, 2, 1, 2),
                    -c(0, 2, 1, 2),
                    c(0, 1, 1, 2),
                    -c(1, 2, 0, 2),
                    c(0, 2, 0, 2),
                    -c(0, 1, 0, 2),
                    c(1, 2, 0, 1),
                    -c(0, 2, 0, 1),
                    c(0, 1, 0, 1),
                ],
            );
            adj / det
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "direct inverse of a {n}×{n} matrix"
            )))
        }
    };
    Ok(inv)
}

/// `𝒫` at one node together with an ill-conditioning flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation {
    pub p: DMatrix<f64>,
    pub ill_conditioned: bool,
}

/// `𝒫 = (∇ū) A⁻¹A⁻ᵀ + A⁻ᵀ(∇ū)ᵀA⁻ᵀ` per node.
pub fn transformed_deformation(
    grad_u: &[DMatrix<f64>],
    a: &[DMatrix<f64>],
) -> Result<Vec<Deformation>> {
    if grad_u.len() != a.len() {
        return Err(Error::InvalidInput(
            "gradient and Jacobian counts differ".into(),
        ));
    }
    grad_u
        .iter()
        .zip(a)
        .enumerate()
        .map(|(node, (g, a))| {
            let det = a.determinant();
            if !(det > 0.0) {
                return Err(Error::DegenerateChart { node, det });
            }
            let ai = direct_inverse(a)?;
            let ait = ai.transpose();
            let p = g * &ai * &ait + &ait * g.transpose() * &ait;
            let cond = a.norm() * ai.norm();
            Ok(Deformation {
                p,
                ill_conditioned: cond > ILL_CONDITIONED,
            })
        })
        .collect()
}

/// Closed-form test function of `(x, z)` with its gradient.
pub trait SmoothField: Sync {
    fn value(&self, x: [f64; 2], z: f64) -> f64;
    /// `(∂_{x₁}, …, ∂_z)`, length `dim + 1`.
    fn gradient(&self, x: [f64; 2], z: f64, dim: usize) -> Vec<f64>;
}

/// `sin(k·x + φ) · P(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    pub k: [f64; 2],
    pub phase: f64,
    pub poly: Vec<f64>,
}

impl TrigPoly {
    fn p(&self, z: f64) -> (f64, f64) {
        let v = self.poly.iter().rev().fold(0.0, |acc, &c| acc * z + c);
        let dv = self
            .poly
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * z + k as f64 * c);
        (v, dv)
    }
}

impl SmoothField for TrigPoly {
    fn value(&self, x: [f64; 2], z: f64) -> f64 {
        (self.k[0] * x[0] + self.k[1] * x[1] + self.phase).sin() * self.p(z).0
    }

    fn gradient(&self, x: [f64; 2], z: f64, dim: usize) -> Vec<f64> {
        let arg = self.k[0] * x[0] + self.k[1] * x[1] + self.phase;
        let (pv, pd) = self.p(z);
        let mut g: Vec<f64> = (0..dim).map(|i| self.k[i] * arg.cos() * pv).collect();
        g.push(arg.sin() * pd);
        g
    }
}

/// Chebyshev differentiation on the material levels `[0, ε]`.
fn level_diff(c: &Chart) -> DMatrix<f64> {
    let n = c.levels.len();
    let nodes = cgl_nodes(n);
    diff_matrix(&nodes, &cgl_weights(n)) / c.eps
}

/// Sup over nodes and levels of `|(∇_{x₀}, ∂_{z₀})(f∘Φ) − Aᵀ (∇f)∘Φ|`.
pub fn chain_rule_check(c: &Chart, t: f64, f: &dyn SmoothField) -> Result<f64> {
    let n = c.time_index(t)?;
    let a = jacobian(c, t)?;
    let d = c.grid.dim();
    let nl = c.levels.len();
    let npts = c.grid.npoints();
    let comp: Vec<Vec<f64>> = (0..nl)
        .map(|m| {
            (0..npts)
                .map(|j| f.value(c.positions[n][j], c.height(n, j, m)))
                .collect()
        })
        .collect();
    let horiz: Vec<Vec<HField>> = comp
        .iter()
        .map(|v| {
            let h = HField::new(&c.grid, v.clone())?;
            Ok((0..d).map(|k| h.d(k)).collect())
        })
        .collect::<Result<_>>()?;
    let dz = level_diff(c);
    let mut worst = 0.0f64;
    for j in 0..npts {
        for m in 0..nl {
            let x = c.positions[n][j];
            let grad = f.gradient(x, c.height(n, j, m), d);
            let at = a.mats[j * nl + m].transpose();
            for r in 0..=d {
                let rhs: f64 = (0..=d).map(|k| at[(r, k)] * grad[k]).sum();
                let lhs = if r < d {
                    horiz[m][r].values()[j]
                } else {
                    (0..nl).map(|q| dz[(m, q)] * comp[q][j]).sum()
                };
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Lagrangian bottom slip residual
/// `det(∂X/∂x₀) ∂_{z₀}ū_H|_{z₀=0} − εγ̄ ū_H|_{z₀=0}`, one field per
/// horizontal component. `ubar[i]` is sampled on the chart's material levels.
pub fn lagrangian_slip_residual(
    c: &Chart,
    t: f64,
    ubar: &[Vec<Vec<f64>>],
    gamma: f64,
) -> Result<Vec<HField>> {
    let n = c.time_index(t)?;
    let dets: Vec<f64> = c
        .deformation_gradient(n)
        .iter()
        .map(|a| a.determinant())
        .collect();
    let dz = level_diff(c);
    let nl = c.levels.len();
    ubar.iter()
        .map(|comp| {
            if comp.len() != nl {
                return Err(Error::InvalidInput(
                    "velocity samples do not match levels".into(),
                ));
            }
            let v = (0..c.grid.npoints())
                .map(|j| {
                    let dzu: f64 = (0..nl).map(|q| dz[(0, q)] * comp[q][j]).sum();
                    dets[j] * dzu - gamma * comp[0][j]
                })
                .collect();
            HField::new(&c.grid, v)
        })
        .collect()
}

/// Lagrangian surface stress `(𝒫 − p I) n` with
/// `n = (−(∂X/∂x₀)⁻ᵀ ∇_{x₀}Z, 1)`, at one node. `a` is the full Jacobian at
/// the top level.
pub fn lagrangian_traction(
    p_mat: &DMatrix<f64>,
    pressure: f64,
    a: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let d = a.nrows() - 1;
    let dx = a.view((0, 0), (d, d)).into_owned();
    let grad_z = a.view((d, 0), (1, d)).transpose();
    let inv = if d == 1 {
        DMatrix::from_element(1, 1, 1.0 / dx[(0, 0)])
    } else {
        direct_inverse(&dx)?
    };
    let tan = inv.transpose() * grad_z;
    let mut nvec: Vec<f64> = tan.iter().map(|v| -v).collect();
    nvec.push(1.0);
    Ok((0..=d)
        .map(|r| {
            (0..=d)
                .map(|k| (p_mat[(r, k)] - if r == k { pressure } else { 0.0 }) * nvec[k])
                .sum()
        })
        .collect())
}
