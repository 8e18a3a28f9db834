//! Residuals of the free-surface Navier–Stokes system evaluated at the ansatz.
//!
//! Every residual is assembled per node as an exact polynomial in `z`, then
//! sampled on the Lobatto levels `z = ζ ε h₀`. Grouping the polynomial by
//! physical origin and by power of `z` gives the term breakdown used to
//! explain fitted orders.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{ansatz_rate, build_ansatz, AnsatzFields, AnsatzRate};
use crate::error::{Error, Result};
use crate::fields::{HField, NormKind, ThinField, Vertical};
use crate::shallow_water::{stable_dt, sw_solve, Params, SWState};
use crate::zpoly::ZPoly;

/// Norms below this value are treated as roundoff and excluded from fits.
pub const NORM_FLOOR: f64 = 1e-13;
/// Order claimed for the interior and surface residuals.
pub const CLAIMED_ORDER: f64 = 3.0;
/// Accepted band around the claimed order.
pub const CLAIM_BAND: (f64, f64) = (2.5, 3.5);

/// How the hydrostatic pair `∂_z p/(εF²) + 1/(εF²)` is evaluated in the
/// vertical momentum residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HydrostaticMode {
    /// Cancelled analytically before sampling.
    Combined,
    /// Pressure sampled and differentiated with the Chebyshev matrix.
    Discrete,
}

/// Physical origin of a residual term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermGroup {
    Time,
    Advection,
    Pressure,
    Viscous,
    VerticalVelocity,
    Total,
}

impl TermGroup {
    pub fn name(self) -> &'static str {
        match self {
            TermGroup::Time => "time",
            TermGroup::Advection => "advection",
            TermGroup::Pressure => "pressure",
            TermGroup::Viscous => "viscous",
            TermGroup::VerticalVelocity => "vertical_velocity",
            TermGroup::Total => "total",
        }
    }
}

const GROUPS: [TermGroup; 4] = [
    TermGroup::Time,
    TermGroup::Advection,
    TermGroup::Pressure,
    TermGroup::Viscous,
];

/// Component label: horizontal axes then the vertical.
pub fn component_name(alpha: usize, dim: usize) -> &'static str {
    if alpha == dim {
        "z"
    } else if alpha == 0 {
        "x"
    } else {
        "y"
    }
}

/// A z-polynomial coefficient field with its weight and power.
struct Term {
    power: usize,
    weight: f64,
    value: HField,
    dx: Vec<HField>,
    dxx: Vec<Vec<HField>>,
}

impl Term {
    fn new(power: usize, weight: f64, f: &HField) -> Self {
        let dim = f.grid().dim();
        let dx: Vec<HField> = (0..dim).map(|k| f.d(k)).collect();
        let dxx = dx
            .iter()
            .map(|fk| (0..dim).map(|l| fk.d(l)).collect())
            .collect();
        Term {
            power,
            weight,
            value: f.clone(),
            dx,
            dxx,
        }
    }

    fn rate(power: usize, weight: f64, f: &HField) -> Self {
        Term {
            power,
            weight,
            value: f.clone(),
            dx: Vec::new(),
            dxx: Vec::new(),
        }
    }
}

fn poly_of(terms: &[Term], pick: impl Fn(&Term) -> f64) -> ZPoly {
    let deg = terms.iter().map(|t| t.power).max().unwrap_or(0);
    let mut c = vec![0.0; deg + 1];
    for t in terms {
        c[t.power] += t.weight * pick(t);
    }
    ZPoly(c)
}

/// Polynomial data for every velocity component.
struct Prepared {
    dim: usize,
    /// Per component α: spatial terms.
    comps: Vec<Vec<Term>>,
    /// Per component α: time-derivative terms.
    rates: Vec<Vec<Term>>,
    p0: Term,
    inv_eps_f2: f64,
    inv_re: f64,
}

fn velocity_terms(
    u0: &HField,
    u1: &HField,
    u2: &HField,
    make: fn(usize, f64, &HField) -> Term,
) -> Vec<Term> {
    vec![make(0, 1.0, u0), make(1, 1.0, u1), make(2, 0.5, u2)]
}

fn vertical_terms(
    w1: &HField,
    w2: &HField,
    w3: &HField,
    make: fn(usize, f64, &HField) -> Term,
) -> Vec<Term> {
    vec![make(1, 1.0, w1), make(2, 0.5, w2), make(3, 1.0 / 6.0, w3)]
}

impl Prepared {
    fn new(a: &AnsatzFields, r: Option<&AnsatzRate>) -> Self {
        let dim = a.dim();
        let mut comps: Vec<Vec<Term>> = (0..dim)
            .map(|i| velocity_terms(&a.u0[i], &a.u1[i], &a.u2[i], Term::new))
            .collect();
        comps.push(vertical_terms(&a.w1, &a.w2, &a.w3, Term::new));
        let rates = match r {
            Some(r) => {
                let mut v: Vec<Vec<Term>> = (0..dim)
                    .map(|i| velocity_terms(&r.u0[i], &r.u1[i], &r.u2[i], Term::rate))
                    .collect();
                v.push(vertical_terms(&r.w1, &r.w2, &r.w3, Term::rate));
                v
            }
            None => Vec::new(),
        };
        let p = &a.params;
        Prepared {
            dim,
            comps,
            rates,
            p0: Term::new(0, 1.0, &a.p0),
            inv_eps_f2: 1.0 / (p.eps * p.froude * p.froude),
            inv_re: 1.0 / p.reynolds,
        }
    }
}

/// Node-local polynomials of the velocity and its derivatives.
struct NodePolys {
    val: Vec<ZPoly>,
    dx: Vec<Vec<ZPoly>>,
    dxx: Vec<Vec<Vec<ZPoly>>>,
    dt: Vec<ZPoly>,
    p: ZPoly,
    dp: Vec<f64>,
}

impl NodePolys {
    fn at(pr: &Prepared, j: usize) -> Self {
        let d = pr.dim;
        let val = pr
            .comps
            .iter()
            .map(|c| poly_of(c, |t| t.value.values()[j]))
            .collect();
        let dx = pr
            .comps
            .iter()
            .map(|c| {
                (0..d)
                    .map(|k| poly_of(c, |t| t.dx[k].values()[j]))
                    .collect()
            })
            .collect();
        let dxx = pr
            .comps
            .iter()
            .map(|c| {
                (0..d)
                    .map(|k| {
                        (0..d)
                            .map(|l| poly_of(c, |t| t.dxx[k][l].values()[j]))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let dt = pr
            .rates
            .iter()
            .map(|c| poly_of(c, |t| t.value.values()[j]))
            .collect();
        let p = ZPoly(vec![pr.p0.value.values()[j], -1.0]);
        let dp = (0..d).map(|k| pr.p0.dx[k].values()[j]).collect();
        NodePolys {
            val,
            dx,
            dxx,
            dt,
            p,
            dp,
        }
    }

    /// `∂_a u_γ` with `a = dim` meaning `z`.
    fn d1(&self, gamma: usize, a: usize) -> ZPoly {
        if a == self.val.len() - 1 {
            self.val[gamma].deriv()
        } else {
            self.dx[gamma][a].clone()
        }
    }

    /// `∂_a ∂_b u_γ`.
    fn d2(&self, gamma: usize, a: usize, b: usize) -> ZPoly {
        let zi = self.val.len() - 1;
        match (a == zi, b == zi) {
            (false, false) => self.dxx[gamma][a][b].clone(),
            (true, true) => self.val[gamma].deriv().deriv(),
            (true, false) => self.dx[gamma][b].deriv(),
            (false, true) => self.dx[gamma][a].deriv(),
        }
    }

    /// Momentum residual of component α split by group.
    fn momentum(&self, pr: &Prepared, alpha: usize) -> [ZPoly; 4] {
        let d = pr.dim;
        let time = self.dt[alpha].clone();
        let mut adv = ZPoly::zero();
        for beta in 0..=d {
            adv = &adv + &(&self.val[beta] * &self.d1(alpha, beta));
        }
        let pressure = if alpha < d {
            ZPoly::constant(self.dp[alpha] * pr.inv_eps_f2)
        } else {
            ZPoly::zero()
        };
        let mut visc = ZPoly::zero();
        for a in 0..=d {
            visc = &visc + &self.d2(alpha, a, a);
            visc = &visc + &self.d2(a, a, alpha);
        }
        [time, adv, pressure, visc.scale(-pr.inv_re)]
    }

    fn divergence(&self) -> ZPoly {
        let d = self.val.len() - 1;
        let mut acc = self.val[d].deriv();
        for k in 0..d {
            acc = &acc + &self.dx[k][k];
        }
        acc
    }

    /// Full deformation tensor `D = ∇u + ∇uᵀ` at height `z`.
    fn deformation(&self, z: f64) -> Vec<Vec<f64>> {
        let n = self.val.len();
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| self.d1(a, b).eval(z) + self.d1(b, a).eval(z))
                    .collect()
            })
            .collect()
    }
}

fn layer(_a: &AnsatzFields, nz: usize) -> Result<Arc<Vertical>> {
    Vertical::new(nz).map_err(|_| Error::InvalidInput(format!("nz = {nz} must be at least 4")))
}

fn sample(a: &AnsatzFields, vert: &Arc<Vertical>, polys: &[ZPoly]) -> Result<ThinField> {
    ThinField::from_fn(&a.base.h0, a.eps(), vert, |j, _, z| polys[j].eval(z))
}

/// Interior momentum residual, one thin field per component (horizontal
/// components first, vertical last).
pub fn interior_residual(a: &AnsatzFields, r: &AnsatzRate, nz: usize) -> Result<Vec<ThinField>> {
    interior_residual_with(a, r, nz, HydrostaticMode::Combined)
}

pub fn interior_residual_with(
    a: &AnsatzFields,
    r: &AnsatzRate,
    nz: usize,
    mode: HydrostaticMode,
) -> Result<Vec<ThinField>> {
    a.check_rate(r)?;
    let vert = layer(a, nz)?;
    let pr = Prepared::new(a, Some(r));
    let npts = a.base.h0.len();
    let d = pr.dim;
    let totals: Vec<Vec<ZPoly>> = (0..npts)
        .map(|j| {
            let np = NodePolys::at(&pr, j);
            (0..=d)
                .map(|alpha| {
                    let g = np.momentum(&pr, alpha);
                    g.iter().fold(ZPoly::zero(), |acc, t| &acc + t)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(d + 1);
    for alpha in 0..=d {
        let polys: Vec<ZPoly> = totals.iter().map(|t| t[alpha].clone()).collect();
        let mut f = sample(a, &vert, &polys)?;
        if alpha == d && mode == HydrostaticMode::Discrete {
            let p = ThinField::from_fn(&a.base.h0, a.eps(), &vert, |j, _, z| a.p0.values()[j] - z)?;
            let dpz = p.dz();
            let s = pr.inv_eps_f2;
            f = f.zip_map(&dpz, |v, dp| v + (dp * s + s));
        }
        out.push(f);
    }
    Ok(out)
}

/// `div_x u_H + ∂_z u_V` on the layer.
pub fn divergence_residual(a: &AnsatzFields, nz: usize) -> Result<ThinField> {
    let vert = layer(a, nz)?;
    let pr = Prepared::new(a, None);
    let polys: Vec<ZPoly> = (0..a.base.h0.len())
        .map(|j| NodePolys::at(&pr, j).divergence())
        .collect();
    sample(a, &vert, &polys)
}

/// Kinematic condition at the surface, split as
/// `[ε∂ₜh₀, u_H·ε∇h₀, −u_V]` per node.
fn kinematic_parts(a: &AnsatzFields, r: &AnsatzRate) -> Result<Vec<[f64; 3]>> {
    a.check_rate(r)?;
    let eps = a.eps();
    let g = a.base.grid();
    let grad_h: Vec<HField> = (0..g.dim()).map(|k| a.base.h0.d(k)).collect();
    let pr = Prepared::new(a, None);
    Ok((0..g.npoints())
        .map(|j| {
            let np = NodePolys::at(&pr, j);
            let top = a.top(j);
            let adv: f64 = (0..g.dim())
                .map(|k| np.val[k].eval(top) * eps * grad_h[k].values()[j])
                .sum();
            [eps * r.dh0.values()[j], adv, -np.val[g.dim()].eval(top)]
        })
        .collect())
}

pub fn kinematic_residual(a: &AnsatzFields, r: &AnsatzRate) -> Result<HField> {
    let parts = kinematic_parts(a, r)?;
    HField::new(
        a.base.grid(),
        parts.iter().map(|p| p[0] + p[1] + p[2]).collect(),
    )
}

/// Surface stress split into viscous and pressure parts, times the
/// unnormalised normal `(−ε∇h₀, 1)`.
fn traction_parts(a: &AnsatzFields) -> Vec<Vec<[f64; 2]>> {
    let g = a.base.grid();
    let d = g.dim();
    let eps = a.eps();
    let p = &a.params;
    let inv_re = 1.0 / p.reynolds;
    let inv_ef2 = 1.0 / (eps * p.froude * p.froude);
    let grad_h: Vec<HField> = (0..d).map(|k| a.base.h0.d(k)).collect();
    let pr = Prepared::new(a, None);
    (0..g.npoints())
        .map(|j| {
            let np = NodePolys::at(&pr, j);
            let top = a.top(j);
            let dm = np.deformation(top);
            let pres = np.p.eval(top) * inv_ef2;
            let mut n: Vec<f64> = (0..d).map(|k| -eps * grad_h[k].values()[j]).collect();
            n.push(1.0);
            (0..=d)
                .map(|alpha| {
                    let visc: f64 = (0..=d).map(|b| dm[alpha][b] * n[b]).sum::<f64>() * inv_re;
                    [visc, -pres * n[alpha]]
                })
                .collect()
        })
        .collect()
}

/// `(D(u_a)/Re − p_a/(εF²) I) n` at `z = ε h₀`, one field per component.
pub fn traction_residual(a: &AnsatzFields) -> Result<Vec<HField>> {
    let parts = traction_parts(a);
    let d = a.dim();
    (0..=d)
        .map(|alpha| {
            HField::new(
                a.base.grid(),
                parts.iter().map(|p| p[alpha][0] + p[alpha][1]).collect(),
            )
        })
        .collect()
}

/// `(u_V(·,0), ∂_z u_H(·,0) − εγ̄ u_H(·,0))`.
pub fn bottom_residual(a: &AnsatzFields) -> Result<(HField, Vec<HField>)> {
    let pr = Prepared::new(a, None);
    let d = a.dim();
    let npts = a.base.h0.len();
    let normal: Vec<f64> = (0..npts)
        .map(|j| NodePolys::at(&pr, j).val[d].eval(0.0))
        .collect();
    let slip = (0..d)
        .map(|i| a.u1[i].zip_map(&a.u0[i], |u1, u0| u1 - a.gamma * u0))
        .collect();
    Ok((HField::new(a.base.grid(), normal)?, slip))
}

/// Sup and L² norm of one residual component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentNorm {
    pub component: String,
    pub sup: f64,
    pub l2: f64,
}

/// One entry of the residual term breakdown. `power` is the exponent of `z`
/// for interior terms and absent for surface terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    pub kind: String,
    pub component: String,
    pub group: TermGroup,
    pub power: Option<u32>,
    /// `max_x |c_k(x)| (ε h₀(x))^k` for interior terms, `max_x |term|` otherwise.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub eps: f64,
    pub interior: Vec<ComponentNorm>,
    pub divergence_sup: f64,
    pub divergence_l2: f64,
    pub kinematic: ComponentNorm,
    pub traction: Vec<ComponentNorm>,
    pub bottom_normal_sup: f64,
    pub bottom_slip_sup: f64,
    pub term_breakdown: Vec<TermEntry>,
}

impl ResidualReport {
    pub fn interior_sup(&self) -> f64 {
        self.interior.iter().map(|c| c.sup).fold(0.0, f64::max)
    }

    pub fn traction_sup(&self) -> f64 {
        self.traction.iter().map(|c| c.sup).fold(0.0, f64::max)
    }

    /// Every norm in the report, for blanket checks.
    pub fn all_norms(&self) -> Vec<f64> {
        let mut v = vec![
            self.divergence_sup,
            self.divergence_l2,
            self.kinematic.sup,
            self.kinematic.l2,
        ];
        v.extend(self.interior.iter().flat_map(|c| [c.sup, c.l2]));
        v.extend(self.traction.iter().flat_map(|c| [c.sup, c.l2]));
        v.push(self.bottom_normal_sup);
        v.push(self.bottom_slip_sup);
        v
    }
}

fn interior_breakdown(a: &AnsatzFields, r: &AnsatzRate) -> Vec<TermEntry> {
    let pr = Prepared::new(a, Some(r));
    let d = pr.dim;
    let npts = a.base.h0.len();
    // mags[alpha][group 0..5][power]
    let mut mags = vec![vec![vec![0.0f64; 8]; 5]; d + 1];
    for j in 0..npts {
        let np = NodePolys::at(&pr, j);
        let top = a.top(j);
        for (alpha, comp) in mags.iter_mut().enumerate() {
            let groups = np.momentum(&pr, alpha);
            let total = groups.iter().fold(ZPoly::zero(), |acc, t| &acc + t);
            for (gi, poly) in groups.iter().chain(std::iter::once(&total)).enumerate() {
                for k in 0..poly.degree_bound().min(8) {
                    let m = (poly.coeff(k) * top.powi(k as i32)).abs();
                    comp[gi][k] = comp[gi][k].max(m);
                }
            }
        }
    }
    let mut out = Vec::new();
    for (alpha, comp) in mags.iter().enumerate() {
        for (gi, row) in comp.iter().enumerate() {
            let group = if gi < 4 { GROUPS[gi] } else { TermGroup::Total };
            let last = row.iter().rposition(|&m| m > 0.0).map_or(0, |p| p + 1);
            for (k, &m) in row.iter().enumerate().take(last.max(1)) {
                out.push(TermEntry {
                    kind: "interior_momentum".into(),
                    component: component_name(alpha, d).into(),
                    group,
                    power: Some(k as u32),
                    magnitude: m,
                });
            }
        }
    }
    out
}

fn surface_breakdown(a: &AnsatzFields, r: &AnsatzRate) -> Result<Vec<TermEntry>> {
    let d = a.dim();
    let mut out = Vec::new();
    let kin = kinematic_parts(a, r)?;
    let kin_groups = [
        TermGroup::Time,
        TermGroup::Advection,
        TermGroup::VerticalVelocity,
    ];
    for (gi, group) in kin_groups.into_iter().enumerate() {
        out.push(TermEntry {
            kind: "kinematic".into(),
            component: String::new(),
            group,
            power: None,
            magnitude: kin.iter().map(|p| p[gi].abs()).fold(0.0, f64::max),
        });
    }
    out.push(TermEntry {
        kind: "kinematic".into(),
        component: String::new(),
        group: TermGroup::Total,
        power: None,
        magnitude: kin
            .iter()
            .map(|p| (p[0] + p[1] + p[2]).abs())
            .fold(0.0, f64::max),
    });
    let tr = traction_parts(a);
    for alpha in 0..=d {
        let name = component_name(alpha, d);
        let groups = [(TermGroup::Viscous, 0usize), (TermGroup::Pressure, 1usize)];
        for (group, gi) in groups {
            out.push(TermEntry {
                kind: "traction".into(),
                component: name.into(),
                group,
                power: None,
                magnitude: tr.iter().map(|p| p[alpha][gi].abs()).fold(0.0, f64::max),
            });
        }
        out.push(TermEntry {
            kind: "traction".into(),
            component: name.into(),
            group: TermGroup::Total,
            power: None,
            magnitude: tr
                .iter()
                .map(|p| (p[alpha][0] + p[alpha][1]).abs())
                .fold(0.0, f64::max),
        });
    }
    Ok(out)
}

/// Evaluates every residual of a matched ansatz/rate pair.
pub fn residual_report(a: &AnsatzFields, r: &AnsatzRate, nz: usize) -> Result<ResidualReport> {
    a.check_rate(r)?;
    let d = a.dim();
    let interior = interior_residual(a, r, nz)?
        .iter()
        .enumerate()
        .map(|(alpha, f)| {
            Ok(ComponentNorm {
                component: component_name(alpha, d).into(),
                sup: f.sup(),
                l2: f.norm(NormKind::L2)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let div = divergence_residual(a, nz)?;
    let kin = kinematic_residual(a, r)?;
    let traction = traction_residual(a)?
        .iter()
        .enumerate()
        .map(|(alpha, f)| {
            Ok(ComponentNorm {
                component: component_name(alpha, d).into(),
                sup: f.sup(),
                l2: f.norm(NormKind::L2)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (normal, slip) = bottom_residual(a)?;
    let mut term_breakdown = interior_breakdown(a, r);
    term_breakdown.extend(surface_breakdown(a, r)?);
    Ok(ResidualReport {
        eps: a.eps(),
        interior,
        divergence_sup: div.sup(),
        divergence_l2: div.norm(NormKind::L2)?,
        kinematic: ComponentNorm {
            component: String::new(),
            sup: kin.sup(),
            l2: kin.norm(NormKind::L2)?,
        },
        traction,
        bottom_normal_sup: normal.sup(),
        bottom_slip_sup: slip.iter().map(|f| f.sup()).fold(0.0, f64::max),
        term_breakdown,
    })
}

/// Least-squares line through `(log ε, log norm)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Fits the points whose norm exceeds [`NORM_FLOOR`]. Returns `None` when
/// fewer than three such points remain.
pub fn fit_loglog(eps: &[f64], norms: &[f64]) -> Option<LogLogFit> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(norms)
        .filter(|(_, &n)| n.is_finite() && n > NORM_FLOOR)
        .map(|(&e, &n)| (e.ln(), n.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some(LogLogFit {
        slope,
        intercept,
        r2,
        points: pts.len(),
    })
}

/// Norm sequence of one residual kind across the ε list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSeries {
    pub kind: String,
    pub norms: Vec<f64>,
    pub fit: Option<LogLogFit>,
}

impl KindSeries {
    pub fn degenerate(&self) -> bool {
        self.fit.is_none()
    }
}

/// Sub-claim term that dominates a residual kind whose slope is below the band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantTerm {
    pub component: String,
    pub power: Option<u32>,
    pub slope: f64,
    pub magnitude_at_smallest_eps: f64,
    /// Group magnitudes of the same (component, power) at the smallest ε.
    pub contributions: Vec<(TermGroup, f64)>,
}

/// Verdict on one claimed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimCheck {
    pub kind: String,
    pub slope: Option<f64>,
    pub r2: Option<f64>,
    pub within_band: bool,
    pub dominant: Option<DominantTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub eps_list: Vec<f64>,
    pub t_eval: f64,
    pub n: usize,
    pub nz: usize,
    pub dt: f64,
    pub series: Vec<KindSeries>,
    pub reports: Vec<ResidualReport>,
    pub flags: Vec<String>,
}

/// Kinds whose orders are checked against the claim.
pub const CLAIMED_KINDS: [&str; 3] = ["interior_momentum", "kinematic", "traction"];

impl StudyReport {
    pub fn series(&self, kind: &str) -> Option<&KindSeries> {
        self.series.iter().find(|s| s.kind == kind)
    }

    pub fn slope(&self, kind: &str) -> Option<f64> {
        self.series(kind).and_then(|s| s.fit.map(|f| f.slope))
    }

    /// Compares each claimed kind against the band and, below it, isolates
    /// the dominant term of the breakdown.
    pub fn claim_checks(&self) -> Vec<ClaimCheck> {
        CLAIMED_KINDS
            .iter()
            .map(|&kind| {
                let fit = self.series(kind).and_then(|s| s.fit);
                let within =
                    fit.is_some_and(|f| f.slope >= CLAIM_BAND.0 && f.slope <= CLAIM_BAND.1);
                let below = fit.is_some_and(|f| f.slope < CLAIM_BAND.0);
                ClaimCheck {
                    kind: kind.into(),
                    slope: fit.map(|f| f.slope),
                    r2: fit.map(|f| f.r2),
                    within_band: within,
                    dominant: if below {
                        self.dominant_term(kind)
                    } else {
                        None
                    },
                }
            })
            .collect()
    }

    /// Among the total entries of `kind` whose own slope is below the band,
    /// the one largest at the smallest ε.
    pub fn dominant_term(&self, kind: &str) -> Option<DominantTerm> {
        let last = self.reports.last()?;
        let eps: Vec<f64> = self.reports.iter().map(|r| r.eps).collect();
        let totals: Vec<&TermEntry> = last
            .term_breakdown
            .iter()
            .filter(|t| t.kind == kind && t.group == TermGroup::Total)
            .collect();
        let mut best: Option<DominantTerm> = None;
        for entry in totals {
            let series: Vec<f64> = self
                .reports
                .iter()
                .map(|r| {
                    r.term_breakdown
                        .iter()
                        .find(|t| {
                            t.kind == kind
                                && t.group == TermGroup::Total
                                && t.component == entry.component
                                && t.power == entry.power
                        })
                        .map_or(0.0, |t| t.magnitude)
                })
                .collect();
            let Some(fit) = fit_loglog(&eps, &series) else {
                continue;
            };
            if fit.slope >= CLAIM_BAND.0 {
                continue;
            }
            if best
                .as_ref()
                .is_some_and(|b| b.magnitude_at_smallest_eps >= entry.magnitude)
            {
                continue;
            }
            let contributions = last
                .term_breakdown
                .iter()
                .filter(|t| {
                    t.kind == kind
                        && t.group != TermGroup::Total
                        && t.component == entry.component
                        && t.power == entry.power
                })
                .map(|t| (t.group, t.magnitude))
                .collect();
            best = Some(DominantTerm {
                component: entry.component.clone(),
                power: entry.power,
                slope: fit.slope,
                magnitude_at_smallest_eps: entry.magnitude,
                contributions,
            });
        }
        best
    }
}

fn series_from(kind: &str, eps: &[f64], norms: Vec<f64>) -> KindSeries {
    KindSeries {
        kind: kind.into(),
        fit: fit_loglog(eps, &norms),
        norms,
    }
}

/// Largest stable step not exceeding `dt_max` that divides `t_final`.
pub fn auto_dt(init: &SWState, p: &Params, t_final: f64, dt_max: f64) -> f64 {
    if t_final <= 0.0 {
        return dt_max;
    }
    let limit = dt_max.min(0.8 * stable_dt(init, p));
    t_final / (t_final / limit).ceil()
}

/// Residual norms of the ansatz built on the shallow-water solution at
/// `t_eval`, for every ε in `eps_list`. The shallow-water solution does not
/// depend on ε, so it is computed once.
pub fn convergence_study(
    init: &SWState,
    p: &Params,
    eps_list: &[f64],
    t_eval: f64,
    nz: usize,
    dt_max: f64,
) -> Result<StudyReport> {
    if eps_list.len() < 4 {
        return Err(Error::InvalidInput(
            "eps_list needs at least four values".into(),
        ));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput(
            "eps_list must be strictly decreasing".into(),
        ));
    }
    let dt = auto_dt(init, p, t_eval, dt_max);
    let state = if t_eval > 0.0 {
        sw_solve(init, p, t_eval, dt)?.last().clone()
    } else {
        init.clone()
    };
    let reports = eps_list
        .par_iter()
        .map(|&eps| {
            let pe = p.with_eps(eps)?;
            let a = build_ansatz(&state, &pe)?;
            let r = ansatz_rate(&state, &pe)?;
            residual_report(&a, &r, nz)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_study(
        eps_list,
        t_eval,
        state.grid().n(),
        nz,
        dt,
        reports,
    ))
}

/// Builds the fitted series from per-ε reports.
pub fn assemble_study(
    eps_list: &[f64],
    t_eval: f64,
    n: usize,
    nz: usize,
    dt: f64,
    reports: Vec<ResidualReport>,
) -> StudyReport {
    let e = eps_list;
    let col = |f: &dyn Fn(&ResidualReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    let mut series = vec![
        series_from("interior_momentum", e, col(&|r| r.interior_sup())),
        series_from("kinematic", e, col(&|r| r.kinematic.sup)),
        series_from("traction", e, col(&|r| r.traction_sup())),
        series_from("divergence", e, col(&|r| r.divergence_sup)),
        series_from("bottom_normal", e, col(&|r| r.bottom_normal_sup)),
        series_from("bottom_slip", e, col(&|r| r.bottom_slip_sup)),
    ];
    if let Some(first) = reports.first() {
        for (ci, c) in first.interior.iter().enumerate() {
            let kind = format!("interior_momentum_{}", c.component);
            series.push(series_from(&kind, e, col(&|r| r.interior[ci].sup)));
        }
        for (ci, c) in first.traction.iter().enumerate() {
            let kind = format!("traction_{}", c.component);
            series.push(series_from(&kind, e, col(&|r| r.traction[ci].sup)));
        }
    }
    let flags = series
        .iter()
        .filter(|s| s.degenerate())
        .map(|s| format!("degenerate fit: {}", s.kind))
        .collect();
    StudyReport {
        eps_list: e.to_vec(),
        t_eval,
        n,
        nz,
        dt,
        series,
        reports,
        flags,
    }
}

/// Spectral resampling of a state onto a grid `factor` times finer.
pub fn refine_state(s: &SWState, factor: usize) -> Result<SWState> {
    let fine = s.grid().refined(factor)?;
    let resample = |f: &HField| HField::from_fn(&fine, |x| f.eval_at(x));
    let u0 = s.u0.iter().map(resample).collect::<Result<Vec<_>>>()?;
    SWState::new(s.t, resample(&s.h0)?, u0)
}

/// Slopes of the claimed kinds on the base grid and on the grid with both
/// `N` and `nz` doubled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementCheck {
    pub kinds: Vec<String>,
    pub coarse: Vec<Option<f64>>,
    pub fine: Vec<Option<f64>>,
}

impl RefinementCheck {
    pub fn max_change(&self) -> Option<f64> {
        self.coarse
            .iter()
            .zip(&self.fine)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some((a - b).abs()),
                _ => None,
            })
            .try_fold(0.0f64, |m, d| d.map(|d| m.max(d)))
    }
}

pub fn refinement_check(
    coarse: &StudyReport,
    init: &SWState,
    p: &Params,
    dt_max: f64,
) -> Result<RefinementCheck> {
    let fine_init = refine_state(init, 2)?;
    let fine = convergence_study(
        &fine_init,
        p,
        &coarse.eps_list,
        coarse.t_eval,
        2 * coarse.nz,
        dt_max,
    )?;
    let kinds: Vec<String> = CLAIMED_KINDS.iter().map(|s| s.to_string()).collect();
    Ok(RefinementCheck {
        coarse: kinds.iter().map(|k| coarse.slope(k)).collect(),
        fine: kinds.iter().map(|k| fine.slope(k)).collect(),
        kinds,
    })
}

/// Denominator used when solving the surface stress condition for the pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolvedFormVariant {
    /// `1 − |∇h|²`.
    Minus,
    /// `1 + |∇h|²`.
    Plus,
}

/// Surface data entering the stress condition at one point: horizontal
/// deformation block, `∂_z u_V`, and `∇h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceData {
    pub d_hh: Vec<Vec<f64>>,
    pub dz_uv: f64,
    pub grad_h: Vec<f64>,
}

/// Pressure (over `F₀²`) and mixed block `∂_z u_H + ∇_x u_V` from the solved form.
pub fn solved_form(data: &SurfaceData, re: f64, variant: SolvedFormVariant) -> (f64, Vec<f64>) {
    let g = &data.grad_h;
    let d = g.len();
    let g2: f64 = g.iter().map(|v| v * v).sum();
    let dg: Vec<f64> = (0..d)
        .map(|i| (0..d).map(|j| data.d_hh[i][j] * g[j]).sum())
        .collect();
    let gdg: f64 = (0..d).map(|i| g[i] * dg[i]).sum();
    let denom = match variant {
        SolvedFormVariant::Minus => 1.0 - g2,
        SolvedFormVariant::Plus => 1.0 + g2,
    };
    let frac = (2.0 * data.dz_uv - gdg) / denom;
    let pressure = frac / re;
    let mixed = (0..d).map(|i| dg[i] - frac * g[i]).collect();
    (pressure, mixed)
}

/// `(D/Re − P I) n` with `n = (−∇h, 1)`, for the given pressure `P = p/F₀²`
/// and mixed block.
pub fn primitive_traction(data: &SurfaceData, mixed: &[f64], pressure: f64, re: f64) -> Vec<f64> {
    let g = &data.grad_h;
    let d = g.len();
    let mut out = Vec::with_capacity(d + 1);
    for i in 0..d {
        let dn: f64 = (0..d).map(|j| -data.d_hh[i][j] * g[j]).sum::<f64>() + mixed[i];
        out.push(dn / re + pressure * g[i]);
    }
    let vn: f64 = (0..d).map(|j| -mixed[j] * g[j]).sum::<f64>() + 2.0 * data.dz_uv;
    out.push(vn / re - pressure);
    out
}

/// Size of the primitive stress residual after substituting the solved form.
pub fn solved_form_crosscheck(data: &SurfaceData, re: f64, variant: SolvedFormVariant) -> f64 {
    let (p, m) = solved_form(data, re, variant);
    primitive_traction(data, &m, p, re)
        .iter()
        .fold(0.0, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use crate::shallow_water::InitialCondition;

    fn params() -> Params {
        Params::new(1.0, 1.0, 1.0, 0.1).unwrap()
    }

    #[test]
    fn synthetic_cubic_law_fits_slope_three() {
        let eps = [0.1, 0.05, 0.025, 0.0125];
        let norms: Vec<f64> = eps.iter().map(|e| 7.0 * e * e * e).collect();
        let f = fit_loglog(&eps, &norms).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn floor_filtered_fit_is_degenerate() {
        let eps = [0.1, 0.05, 0.025, 0.0125];
        assert!(fit_loglog(&eps, &[1e-3, 1e-14, 0.0, 1e-15]).is_none());
    }

    #[test]
    fn equilibrium_residuals_vanish() {
        let g = Grid::periodic_1d(16).unwrap();
        let s = SWState::equilibrium(&g);
        let p = params();
        let a = build_ansatz(&s, &p).unwrap();
        let r = ansatz_rate(&s, &p).unwrap();
        let rep = residual_report(&a, &r, 8).unwrap();
        assert!(rep.all_norms().iter().all(|&n| n <= 1e-12));
    }

    #[test]
    fn uniform_flow_matches_symbolic_residual() {
        // R_H = (γ̄² c / Re)(z²/2 − ε z); R_V = 0
        let g = Grid::periodic_1d(16).unwrap();
        let c = 0.3;
        let s = SWState::new(
            0.0,
            HField::constant(&g, 1.0),
            vec![HField::constant(&g, c)],
        )
        .unwrap();
        let p = params();
        let a = build_ansatz(&s, &p).unwrap();
        let r = ansatz_rate(&s, &p).unwrap();
        let res = interior_residual(&a, &r, 8).unwrap();
        for j in 0..16 {
            for m in 0..8 {
                let z = res[0].z(j, m);
                let oracle = c * (z * z / 2.0 - 0.1 * z);
                assert!((res[0].column(j)[m] - oracle).abs() < 1e-15);
                assert_eq!(res[1].column(j)[m], 0.0);
            }
        }
        let top = res[0].column(0)[7];
        assert!((top + 0.0015).abs() < 1e-15);
        assert!(kinematic_residual(&a, &r).unwrap().sup() <= 1e-12);
        assert!(traction_residual(&a)
            .unwrap()
            .iter()
            .all(|f| f.sup() <= 1e-12));
    }

    #[test]
    fn tampered_w3_is_detected_by_divergence() {
        let g = Grid::periodic_1d(32).unwrap();
        let s = InitialCondition::default().state(&g).unwrap();
        let mut a = build_ansatz(&s, &params()).unwrap();
        assert!(divergence_residual(&a, 8).unwrap().sup() <= 1e-11);
        a.w3 = a.w3.map(|v| v + 1.0).unwrap();
        let sup = divergence_residual(&a, 8).unwrap().sup();
        let expect = (0..32).map(|j| a.top(j).powi(2) / 2.0).fold(0.0, f64::max);
        assert!((sup - expect).abs() < 1e-10);
    }

    #[test]
    fn tampered_u1_shows_in_slip_residual() {
        let g = Grid::periodic_1d(16).unwrap();
        let ic = InitialCondition {
            amplitude: 0.1,
            wavenumber: 1,
            velocity_amplitude: 0.2,
        };
        let s = ic.state(&g).unwrap();
        let mut a = build_ansatz(&s, &params()).unwrap();
        let (n, slip) = bottom_residual(&a).unwrap();
        assert_eq!(n.sup(), 0.0);
        assert_eq!(slip[0].sup(), 0.0);
        let delta = 1e-3;
        a.u1[0] = a.u1[0].map(|v| v + delta).unwrap();
        let (_, slip) = bottom_residual(&a).unwrap();
        assert!(slip[0].values().iter().all(|&v| (v - delta).abs() < 1e-15));
    }

    #[test]
    fn solved_form_minus_sign_is_consistent() {
        let data = SurfaceData {
            d_hh: vec![vec![0.7, -0.2], vec![-0.2, 0.4]],
            dz_uv: -0.3,
            grad_h: vec![0.25, -0.1],
        };
        assert!(solved_form_crosscheck(&data, 2.0, SolvedFormVariant::Minus) < 1e-15);
        assert!(solved_form_crosscheck(&data, 2.0, SolvedFormVariant::Plus) > 1e-3);
    }
}
