//! Second-order polynomial-in-z approximation built from a shallow-water state.
//!
//! ```text
//! u_H = u0 + u1 z + u2 z²/2
//! u_V = w1 z + w2 z²/2 + w3 z³/6
//! p   = ε h0 − z − c div u0,   c = (2εF²/Re)(1 + ε² γ̄)
//! ```

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::fields::{div, HField};
use crate::shallow_water::{sw_rhs, Params, SWRate, SWState};

/// Identifies the state a construction was seeded from.
pub fn state_fingerprint(s: &SWState) -> u64 {
    let mut h = DefaultHasher::new();
    s.t.to_bits().hash(&mut h);
    for v in
        s.h0.values()
            .iter()
            .chain(s.u0.iter().flat_map(|u| u.values()))
    {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Coefficient fields of the ansatz. Fields are public so detectors can be
/// calibrated against deliberately corrupted copies.
#[derive(Debug, Clone)]
pub struct AnsatzFields {
    pub base: SWState,
    pub params: Params,
    /// `ε γ̄`, the bottom slip coefficient.
    pub gamma: f64,
    pub u0: Vec<HField>,
    pub u1: Vec<HField>,
    pub u2: Vec<HField>,
    pub w1: HField,
    pub w2: HField,
    pub w3: HField,
    /// z-independent part of the pressure, `ε h0 − c div u0`.
    pub p0: HField,
    /// Coefficient `c` multiplying `div u0` in the pressure.
    pub pressure_visc: f64,
    fingerprint: u64,
}

/// Exact time derivatives of every coefficient.
#[derive(Debug, Clone)]
pub struct AnsatzRate {
    pub dh0: HField,
    pub u0: Vec<HField>,
    pub u1: Vec<HField>,
    pub u2: Vec<HField>,
    pub w1: HField,
    pub w2: HField,
    pub w3: HField,
    pub p0: HField,
    fingerprint: u64,
}

impl AnsatzRate {
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Coefficients of the three polynomials at a single node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCoefficients {
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub p0: f64,
}

/// Evaluated ansatz at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzPoint {
    pub u_h: Vec<f64>,
    pub u_v: f64,
    pub pressure: f64,
}

fn pressure_coefficient(p: &Params) -> f64 {
    2.0 * p.eps * p.froude * p.froude / p.reynolds * (1.0 + p.eps * p.eps * p.gamma_bar)
}

/// `u2 = −∇w1 + (D_x u0 + 2 div u0 I) ∇h/h − γ̄ u0/h`.
fn second_coefficient(h: &HField, u0: &[HField], gamma_bar: f64) -> Result<Vec<HField>> {
    let dim = h.grid().dim();
    let divu = div(u0);
    let w1 = -&divu;
    let g: Vec<HField> = (0..dim)
        .map(|j| h.d(j).div_nodes(h))
        .collect::<Result<_>>()?;
    let grad_u: Vec<Vec<HField>> = u0
        .iter()
        .map(|ui| (0..dim).map(|j| ui.d(j)).collect())
        .collect();
    let mut out = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut acc = -&w1.d(i);
        for j in 0..dim {
            let mut dij = &grad_u[i][j] + &grad_u[j][i];
            if i == j {
                dij = &dij + &divu.scale(2.0);
            }
            acc = &acc + &dij.mul_nodes(&g[j]);
        }
        let fric = u0[i].div_nodes(h)?.scale(gamma_bar);
        out.push(&acc - &fric);
    }
    Ok(out)
}

/// Tangent of [`second_coefficient`] along `(ḣ, u̇)`.
fn second_coefficient_rate(
    h: &HField,
    u0: &[HField],
    rate: &SWRate,
    gamma_bar: f64,
) -> Result<Vec<HField>> {
    let dim = h.grid().dim();
    let hd = &rate.dh;
    let ud = &rate.du;
    let divu = div(u0);
    let divud = div(ud);
    let g: Vec<HField> = (0..dim)
        .map(|j| h.d(j).div_nodes(h))
        .collect::<Result<_>>()?;
    // ġ_j = ∂_j ḣ / h − ∂_j h ḣ / h²
    let gd: Vec<HField> = (0..dim)
        .map(|j| {
            let a = hd.d(j).div_nodes(h)?;
            let b = g[j].mul_nodes(hd).div_nodes(h)?;
            Ok(&a - &b)
        })
        .collect::<Result<_>>()?;
    let grad_u: Vec<Vec<HField>> = u0
        .iter()
        .map(|ui| (0..dim).map(|j| ui.d(j)).collect())
        .collect();
    let grad_ud: Vec<Vec<HField>> = ud
        .iter()
        .map(|ui| (0..dim).map(|j| ui.d(j)).collect())
        .collect();
    let mut out = Vec::with_capacity(dim);
    for i in 0..dim {
        // −∂_i ẇ1 with ẇ1 = −div u̇
        let mut acc = divud.d(i);
        for j in 0..dim {
            let mut dij = &grad_u[i][j] + &grad_u[j][i];
            let mut dij_dot = &grad_ud[i][j] + &grad_ud[j][i];
            if i == j {
                dij = &dij + &divu.scale(2.0);
                dij_dot = &dij_dot + &divud.scale(2.0);
            }
            acc = &acc + &dij_dot.mul_nodes(&g[j]);
            acc = &acc + &dij.mul_nodes(&gd[j]);
        }
        let a = ud[i].div_nodes(h)?;
        let b = u0[i].mul_nodes(hd).div_nodes(h)?.div_nodes(h)?;
        let fric = (&a - &b).scale(gamma_bar);
        out.push(&acc - &fric);
    }
    Ok(out)
}

/// Builds every coefficient field from `(h₀, u₀)`.
pub fn build_ansatz(s: &SWState, p: &Params) -> Result<AnsatzFields> {
    p.validate()?;
    let h = &s.h0;
    let min_h = h.min();
    if min_h <= 0.0 {
        return Err(Error::Vacuum { t: s.t, min_h });
    }
    let gamma = p.gamma();
    let u0 = s.u0.clone();
    let u1: Vec<HField> = u0.iter().map(|u| u.scale(gamma)).collect();
    let u2 = second_coefficient(h, &u0, p.gamma_bar)?;
    let divu = div(&u0);
    let w1 = -&divu;
    let w2 = -&div(&u1);
    let w3 = -&div(&u2);
    let c = pressure_coefficient(p);
    let p0 = &h.scale(p.eps) - &divu.scale(c);
    Ok(AnsatzFields {
        base: s.clone(),
        params: *p,
        gamma,
        u0,
        u1,
        u2,
        w1,
        w2,
        w3,
        p0,
        pressure_visc: c,
        fingerprint: state_fingerprint(s),
    })
}

/// Time derivatives of the coefficients by the chain rule through the
/// shallow-water right-hand side.
pub fn ansatz_rate(s: &SWState, p: &Params) -> Result<AnsatzRate> {
    let rate = sw_rhs(s, p)?;
    let h = &s.h0;
    let gamma = p.gamma();
    let u0 = rate.du.clone();
    let u1: Vec<HField> = u0.iter().map(|u| u.scale(gamma)).collect();
    let u2 = second_coefficient_rate(h, &s.u0, &rate, p.gamma_bar)?;
    let w1 = -&div(&u0);
    let w2 = -&div(&u1);
    let w3 = -&div(&u2);
    let c = pressure_coefficient(p);
    let p0 = &rate.dh.scale(p.eps) - &div(&u0).scale(c);
    Ok(AnsatzRate {
        dh0: rate.dh,
        u0,
        u1,
        u2,
        w1,
        w2,
        w3,
        p0,
        fingerprint: state_fingerprint(s),
    })
}

impl AnsatzFields {
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn eps(&self) -> f64 {
        self.params.eps
    }

    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    /// Layer thickness `ε h₀` at node `j`.
    pub fn top(&self, j: usize) -> f64 {
        self.params.eps * self.base.h0.values()[j]
    }

    pub fn check_rate(&self, r: &AnsatzRate) -> Result<()> {
        if self.fingerprint != r.fingerprint {
            return Err(Error::MismatchedState);
        }
        Ok(())
    }

    pub fn node(&self, j: usize) -> NodeCoefficients {
        let pick = |v: &[HField]| v.iter().map(|f| f.values()[j]).collect::<Vec<_>>();
        NodeCoefficients {
            u0: pick(&self.u0),
            u1: pick(&self.u1),
            u2: pick(&self.u2),
            w1: self.w1.values()[j],
            w2: self.w2.values()[j],
            w3: self.w3.values()[j],
            p0: self.p0.values()[j],
        }
    }
}

/// Horner evaluation at height `z` above node `j`. Heights up to `1.01 ε h₀`
/// are accepted so surface nodes can be probed slightly outside the layer.
pub fn eval_ansatz(a: &AnsatzFields, j: usize, z: f64) -> Result<AnsatzPoint> {
    if j >= a.base.h0.len() {
        return Err(Error::InvalidInput(format!("node {j} out of range")));
    }
    let top = a.top(j);
    if !(z >= 0.0 && z <= 1.01 * top) {
        return Err(Error::InvalidInput(format!(
            "z = {z} outside [0, 1.01 * {top}]"
        )));
    }
    let c = a.node(j);
    let u_h = (0..a.dim())
        .map(|i| c.u0[i] + z * (c.u1[i] + z * 0.5 * c.u2[i]))
        .collect();
    let u_v = z * (c.w1 + z * (0.5 * c.w2 + z * c.w3 / 6.0));
    Ok(AnsatzPoint {
        u_h,
        u_v,
        pressure: c.p0 - z,
    })
}
