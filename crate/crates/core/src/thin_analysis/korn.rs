//! Per-mode Korn constant: the generalized eigenproblem `det(q₂ − X q₁) = 0`
//! on the six-dimensional space of extremals with `U(0) = 0`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::cheb::composite_gauss;

/// Which pair of directions multiplies the two triples of scalar profiles.
///
/// With `σ = (c, s)`, the ODE system for extremals yields `(−s, c)` for
/// `{z, sinh z, cosh z − 1}` and `(c, s)` for `{sinh z, z sinh z, z cosh z}`.
/// `AsDisplayed` uses `(−c, s)` and `(s, c)` instead. Its pencil keeps the
/// eigenvalues 1 and 2 but its smallest eigenvalue lies above the true
/// minimum over all profiles with `U(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BasisConvention {
    #[default]
    Derived,
    AsDisplayed,
}

impl BasisConvention {
    fn directions(self, c: f64, s: f64) -> ([f64; 2], [f64; 2]) {
        match self {
            BasisConvention::Derived => ([-s, c], [c, s]),
            BasisConvention::AsDisplayed => ([-c, s], [s, c]),
        }
    }
}

/// Value and first two derivatives of a vector profile.
pub type Jet = ([f64; 2], [f64; 2], [f64; 2]);

/// Scalar profile and its first two derivatives.
type Jet1 = (f64, f64, f64);

fn raw_profiles(z: f64) -> [Jet1; 6] {
    let (sh, ch) = (z.sinh(), z.cosh());
    [
        (z, 1.0, 0.0),
        (sh, ch, sh),
        (ch - 1.0, sh, ch),
        (sh, ch, sh),
        (z * sh, sh + z * ch, 2.0 * ch + z * sh),
        (z * ch, ch + z * sh, 2.0 * sh + z * ch),
    ]
}

/// `Ũ(z)` for coordinates `(a₁, b₁, c₁, a₂, b₂, c₂)`.
pub fn korn_basis_eval(
    m: f64,
    sigma: (f64, f64),
    coeffs: &[f64; 6],
    z: f64,
    convention: BasisConvention,
) -> Result<Jet> {
    if !(z >= 0.0 && z <= m) {
        return Err(Error::InvalidInput(format!("z = {z} outside [0, {m}]")));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("basis coefficients"));
    }
    let (d1, d2) = convention.directions(sigma.0, sigma.1);
    let prof = raw_profiles(z);
    let mut out = ([0.0; 2], [0.0; 2], [0.0; 2]);
    for (i, (p, coeff)) in prof.iter().zip(coeffs).enumerate() {
        let d = if i < 3 { d1 } else { d2 };
        for k in 0..2 {
            out.0[k] += coeff * p.0 * d[k];
            out.1[k] += coeff * p.1 * d[k];
            out.2[k] += coeff * p.2 * d[k];
        }
    }
    Ok(out)
}

/// `sinh z − z` without cancellation.
fn sinh_minus_id(z: f64) -> f64 {
    if z.abs() < 0.5 {
        let z2 = z * z;
        z * z2
            * (1.0 / 6.0
                + z2 * (1.0 / 120.0
                    + z2 * (1.0 / 5040.0
                        + z2 * (1.0 / 362_880.0
                            + z2 * (1.0 / 39_916_800.0
                                + z2 * (1.0 / 6_227_020_800.0 + z2 / 1_307_674_368_000.0))))))
    } else {
        z.sinh() - z
    }
}

/// `z cosh z − sinh z` without cancellation.
fn zcosh_minus_sinh(z: f64) -> f64 {
    if z.abs() < 0.5 {
        let z2 = z * z;
        z * z2
            * (1.0 / 3.0
                + z2 * (1.0 / 30.0
                    + z2 * (1.0 / 840.0
                        + z2 * (1.0 / 45_360.0
                            + z2 * (1.0 / 3_991_680.0
                                + z2 * (1.0 / 518_918_400.0 + z2 / 93_405_312_000.0))))))
    } else {
        z * z.cosh() - z.sinh()
    }
}

/// Profiles spanning the same space as [`raw_profiles`] but well conditioned:
/// cancellation-free combinations for `M ≤ 1`, exponentials scaled by `e^{−M}`
/// otherwise.
fn conditioned_profiles(z: f64, m: f64) -> [Jet1; 6] {
    if m <= 1.0 {
        let (sh, ch) = (z.sinh(), z.cosh());
        let half = (0.5 * z).sinh();
        [
            (z, 1.0, 0.0),
            (2.0 * half * half, sh, ch),
            (sinh_minus_id(z), ch - 1.0, sh),
            (sh, ch, sh),
            (z * sh, sh + z * ch, 2.0 * ch + z * sh),
            (zcosh_minus_sinh(z), z * sh, sh + z * ch),
        ]
    } else {
        let big = (z - m).exp();
        let small = (-z).exp();
        let em = (-m).exp();
        [
            (z / m, 1.0 / m, 0.0),
            (big - em, big, big),
            (1.0 - small, small, -small),
            (big - small * em, big + small * em, big - small * em),
            (z * big / m, (big + z * big) / m, (2.0 * big + z * big) / m),
            (z * small, small - z * small, -2.0 * small + z * small),
        ]
    }
}

/// Integrand vectors whose squared norms are the densities of `Q₁` and `Q₂`.
fn form_vectors(u: Jet, c: f64, s: f64) -> ([f64; 6], [f64; 6]) {
    let (v, d, dd) = u;
    let su = c * v[0] + s * v[1];
    let sd = c * d[0] + s * d[1];
    let r2 = std::f64::consts::SQRT_2;
    let q1 = [d[0], d[1], sd, dd[0], dd[1], su];
    let q2 = [
        r2 * c * d[0],
        r2 * s * d[1],
        r2 * sd,
        s * d[0] + c * d[1],
        dd[0] + c * su,
        dd[1] + s * su,
    ];
    (q1, q2)
}

fn basis_jets(z: f64, m: f64, d1: [f64; 2], d2: [f64; 2]) -> [Jet; 6] {
    let prof = conditioned_profiles(z, m);
    let mut out = [([0.0; 2], [0.0; 2], [0.0; 2]); 6];
    for (i, p) in prof.iter().enumerate() {
        let d = if i < 3 { d1 } else { d2 };
        out[i] = (
            [p.0 * d[0], p.0 * d[1]],
            [p.1 * d[0], p.1 * d[1]],
            [p.2 * d[0], p.2 * d[1]],
        );
    }
    out
}

fn assemble(
    m: f64,
    c: f64,
    s: f64,
    order: usize,
    conv: BasisConvention,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (d1, d2) = conv.directions(c, s);
    let (xs, ws) = composite_gauss(0.0, m, order, 1.0);
    let mut q1 = DMatrix::zeros(6, 6);
    let mut q2 = DMatrix::zeros(6, 6);
    for (&z, &w) in xs.iter().zip(&ws) {
        let jets = basis_jets(z, m, d1, d2);
        let forms: Vec<([f64; 6], [f64; 6])> =
            jets.iter().map(|&u| form_vectors(u, c, s)).collect();
        for i in 0..6 {
            for j in 0..6 {
                let a: f64 = (0..6).map(|k| forms[i].0[k] * forms[j].0[k]).sum();
                let b: f64 = (0..6).map(|k| forms[i].1[k] * forms[j].1[k]).sum();
                q1[(i, j)] += w * a;
                q2[(i, j)] += w * b;
            }
        }
    }
    (q1, q2)
}

fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / a.abs().max().max(f64::MIN_POSITIVE)
}

/// Gram matrices of `Q₁`, `Q₂` for one `(M, σ)`, expressed in the
/// conditioned basis of the extremal space.
#[derive(Debug, Clone, PartialEq)]
pub struct KornPencil {
    pub m: f64,
    pub sigma: (f64, f64),
    pub convention: BasisConvention,
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    /// Largest relative asymmetry before symmetrization.
    pub asymmetry: f64,
    /// Relative change of the Gram matrices under node doubling.
    pub quadrature_change: f64,
}

/// Gram matrices by composite Gauss–Legendre quadrature (panels of width at
/// most one, `quad_nodes` nodes each) with a node-doubling check.
pub fn korn_gram(
    m: f64,
    sigma: (f64, f64),
    quad_nodes: usize,
    convention: BasisConvention,
) -> Result<KornPencil> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::InvalidInput(format!("M = {m} must be positive")));
    }
    let (c, s) = sigma;
    if ((c * c + s * s) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "sigma = ({c}, {s}) is not a unit vector"
        )));
    }
    if quad_nodes < 64 {
        return Err(Error::InvalidInput(format!(
            "quad_nodes = {quad_nodes} below 64"
        )));
    }
    let (q1, q2) = assemble(m, c, s, quad_nodes, convention);
    let (r1, r2) = assemble(m, c, s, 2 * quad_nodes, convention);
    let change = rel_diff(&r1, &q1).max(rel_diff(&r2, &q2));
    if change > 1e-10 {
        return Err(Error::Precision { rel: change });
    }
    let asym = rel_diff(&q1, &q1.transpose()).max(rel_diff(&q2, &q2.transpose()));
    let sym = |a: &DMatrix<f64>| (a + a.transpose()) * 0.5;
    Ok(KornPencil {
        m,
        sigma,
        convention,
        q1: sym(&q1),
        q2: sym(&q2),
        asymmetry: asym,
        quadrature_change: change,
    })
}

/// Linear forms `v₁ = (σ·U)(M)` and `v₂ = (σ·U′)(M)` on the same basis,
/// so that `q₂ − q₁ = v₁v₂ᵀ + v₂v₁ᵀ`.
pub fn korn_boundary_forms(
    m: f64,
    sigma: (f64, f64),
    convention: BasisConvention,
) -> ([f64; 6], [f64; 6]) {
    let (c, s) = sigma;
    let (d1, d2) = convention.directions(c, s);
    let jets = basis_jets(m, m, d1, d2);
    let mut v1 = [0.0; 6];
    let mut v2 = [0.0; 6];
    for (i, (u, du, _)) in jets.iter().enumerate() {
        v1[i] = c * u[0] + s * u[1];
        v2[i] = c * du[0] + s * du[1];
    }
    (v1, v2)
}

/// Eigenvalues of a pencil with clustering for multiplicity reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KornSpectrum {
    pub eigenvalues: [f64; 6],
    pub lambda: f64,
}

impl KornSpectrum {
    /// Groups ascending eigenvalues whose relative gap is below `tol`.
    pub fn clusters(&self, tol: f64) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize, f64)> = Vec::new();
        for &e in &self.eigenvalues {
            match out.last_mut() {
                Some((_, n, sum)) if (e - *sum / *n as f64).abs() <= tol * e.abs().max(1e-300) => {
                    *n += 1;
                    *sum += e;
                }
                _ => out.push((e, 1, e)),
            }
        }
        out.into_iter()
            .map(|(_, n, sum)| (sum / n as f64, n))
            .collect()
    }

    /// Multiplicity of the cluster containing `value`, zero if absent.
    pub fn multiplicity_of(&self, value: f64, tol: f64) -> usize {
        self.clusters(tol)
            .iter()
            .find(|(v, _)| (v - value).abs() <= tol * value.abs())
            .map_or(0, |c| c.1)
    }
}

/// Solves the symmetric-definite pencil after diagonal scaling and a
/// two-pass modified Gram–Schmidt in the `q₁` inner product.
pub fn korn_spectrum(p: &KornPencil) -> Result<KornSpectrum> {
    let fail = || Error::Conditioning {
        m: p.m,
        c: p.sigma.0,
        s: p.sigma.1,
    };
    let n = 6;
    let diag: Vec<f64> = (0..n).map(|i| p.q1[(i, i)]).collect();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(fail());
    }
    let scale: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let q1 = DMatrix::from_fn(n, n, |i, j| p.q1[(i, j)] * scale[i] * scale[j]);
    let q2 = DMatrix::from_fn(n, n, |i, j| p.q2[(i, j)] * scale[i] * scale[j]);
    let mut v = DMatrix::<f64>::identity(n, n);
    for _pass in 0..2 {
        for i in 0..n {
            for j in 0..i {
                let proj = (v.column(j).transpose() * &q1 * v.column(i))[(0, 0)];
                let cj = v.column(j).into_owned();
                let mut ci = v.column_mut(i);
                ci -= cj * proj;
            }
            let nrm2 = (v.column(i).transpose() * &q1 * v.column(i))[(0, 0)];
            if !(nrm2 > 1e-15) {
                return Err(fail());
            }
            let mut ci = v.column_mut(i);
            ci /= nrm2.sqrt();
        }
    }
    let reduced = v.transpose() * &q2 * &v;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if ev.iter().any(|e| !e.is_finite()) {
        return Err(fail());
    }
    ev.sort_by(|a, b| a.total_cmp(b));
    let eigenvalues = [ev[0], ev[1], ev[2], ev[3], ev[4], ev[5]];
    Ok(KornSpectrum {
        eigenvalues,
        lambda: ev[0],
    })
}

/// `Λ(M, σ)` in one call.
pub fn korn_lambda(
    m: f64,
    sigma: (f64, f64),
    quad_nodes: usize,
    convention: BasisConvention,
) -> Result<f64> {
    korn_spectrum(&korn_gram(m, sigma, quad_nodes, convention)?).map(|s| s.lambda)
}

/// `count` log-spaced values on `[min, max]`.
pub fn log_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![min];
    }
    let (a, b) = (min.ln(), max.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Directions on the unit circle: `(±1, 0)` in one horizontal dimension,
/// `count` equally spaced angles otherwise.
pub fn sigma_grid(dim: usize, count: usize) -> Vec<(f64, f64)> {
    if dim == 1 {
        return vec![(1.0, 0.0), (-1.0, 0.0)];
    }
    (0..count)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
            (th.cos(), th.sin())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KornCell {
    pub m: f64,
    pub c: f64,
    pub s: f64,
    pub spectrum: Option<KornSpectrum>,
    /// Failure description when the cell could not be solved.
    pub cond_flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KornSweep {
    pub cells: Vec<KornCell>,
    pub infimum: f64,
    pub argmin: (f64, f64, f64),
    /// Largest |ΔΛ| between neighbouring M values at fixed σ.
    pub max_jump: f64,
}

pub fn korn_sweep(
    m_grid: &[f64],
    sigmas: &[(f64, f64)],
    quad_nodes: usize,
    convention: BasisConvention,
) -> Result<KornSweep> {
    if m_grid.is_empty() || sigmas.is_empty() {
        return Err(Error::InvalidInput("empty sweep grid".into()));
    }
    let jobs: Vec<(f64, (f64, f64))> = sigmas
        .iter()
        .flat_map(|&sg| m_grid.iter().map(move |&m| (m, sg)))
        .collect();
    let cells: Vec<KornCell> = jobs
        .par_iter()
        .map(|&(m, (c, s))| {
            match korn_gram(m, (c, s), quad_nodes, convention).and_then(|p| korn_spectrum(&p)) {
                Ok(sp) => KornCell {
                    m,
                    c,
                    s,
                    spectrum: Some(sp),
                    cond_flag: None,
                },
                Err(e) => KornCell {
                    m,
                    c,
                    s,
                    spectrum: None,
                    cond_flag: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut infimum = f64::INFINITY;
    let mut argmin = (f64::NAN, f64::NAN, f64::NAN);
    for cell in &cells {
        if let Some(sp) = &cell.spectrum {
            if sp.lambda < infimum {
                infimum = sp.lambda;
                argmin = (cell.m, cell.c, cell.s);
            }
        }
    }
    let mut max_jump = 0.0f64;
    for chunk in cells.chunks(m_grid.len()) {
        for w in chunk.windows(2) {
            if let (Some(a), Some(b)) = (&w[0].spectrum, &w[1].spectrum) {
                max_jump = max_jump.max((a.lambda - b.lambda).abs());
            }
        }
    }
    Ok(KornSweep {
        cells,
        infimum,
        argmin,
        max_jump,
    })
}
