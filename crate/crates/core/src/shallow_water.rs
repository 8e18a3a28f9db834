//! Pseudospectral solver for the viscous shallow-water system in velocity form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{div, Grid, HField};

/// Advective CFL constant.
pub const C_ADV: f64 = 0.5;
/// Viscous step constant, `dt ≤ C_VISC · Re · Δx²`.
pub const C_VISC: f64 = 0.03;
/// Steps that leave `min h₀` at or below this value are rejected.
pub const VACUUM_GUARD: f64 = 0.1;
/// Threshold on the top-third spectral energy fraction.
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// Dimensionless parameters. `eps` is only used by the thin-layer layers on
/// top of the solver; the shallow-water system itself does not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub froude: f64,
    pub reynolds: f64,
    pub gamma_bar: f64,
    pub eps: f64,
}

impl Params {
    pub fn new(froude: f64, reynolds: f64, gamma_bar: f64, eps: f64) -> Result<Self> {
        let p = Params {
            froude,
            reynolds,
            gamma_bar,
            eps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite();
        if !(ok(self.froude) && self.froude > 0.0) {
            return Err(Error::InvalidInput(format!(
                "F = {} must be positive",
                self.froude
            )));
        }
        if !(ok(self.reynolds) && self.reynolds > 0.0) {
            return Err(Error::InvalidInput(format!(
                "Re = {} must be positive",
                self.reynolds
            )));
        }
        if !(ok(self.gamma_bar) && self.gamma_bar >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "gamma_bar = {} must be >= 0",
                self.gamma_bar
            )));
        }
        if !(ok(self.eps) && self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidInput(format!(
                "eps = {} must lie in (0, 1)",
                self.eps
            )));
        }
        Ok(())
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.froude, self.reynolds, self.gamma_bar, eps)
    }

    /// Friction coefficient in the bottom slip condition, `γ = ε γ̄`.
    pub fn gamma(&self) -> f64 {
        self.eps * self.gamma_bar
    }

    /// Unscaled squared Froude number `F₀² = ε F²`.
    pub fn froude0_sq(&self) -> f64 {
        self.eps * self.froude * self.froude
    }
}

/// Layer thickness and depth-independent velocity at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SWState {
    pub t: f64,
    pub h0: HField,
    pub u0: Vec<HField>,
    mass: f64,
}

impl SWState {
    pub fn new(t: f64, h0: HField, u0: Vec<HField>) -> Result<Self> {
        if u0.len() != h0.grid().dim() {
            return Err(Error::InvalidInput(format!(
                "velocity has {} components on a {}-dimensional grid",
                u0.len(),
                h0.grid().dim()
            )));
        }
        if u0.iter().any(|u| u.grid() != h0.grid()) {
            return Err(Error::InvalidInput(
                "h0 and u0 live on different grids".into(),
            ));
        }
        let min_h = h0.min();
        if min_h <= 0.0 {
            return Err(Error::Vacuum { t, min_h });
        }
        let mass = h0.integral();
        Ok(SWState { t, h0, u0, mass })
    }

    /// `(h₀, u₀) = (1, 0)`.
    pub fn equilibrium(grid: &Grid) -> Self {
        let u0 = (0..grid.dim()).map(|_| HField::zeros(grid)).collect();
        Self::new(0.0, HField::constant(grid, 1.0), u0).expect("equilibrium is valid")
    }

    pub fn grid(&self) -> &Grid {
        self.h0.grid()
    }

    /// `∫ h₀` recorded at construction.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn max_speed(&self) -> f64 {
        let n = self.grid().npoints();
        (0..n)
            .map(|j| {
                self.u0
                    .iter()
                    .map(|u| u.values()[j].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Same fields shifted by an integer number of grid cells along axis 0.
    pub fn shifted(&self, cells: usize) -> Result<SWState> {
        let g = self.grid();
        let shift = |f: &HField| {
            let v = (0..g.npoints())
                .map(|flat| {
                    let mi = g.multi_index(flat);
                    let src = (mi[0] + cells) % g.n();
                    let idx = if g.dim() == 1 {
                        src
                    } else {
                        src * g.n() + mi[1]
                    };
                    f.values()[idx]
                })
                .collect();
            HField::new(g, v)
        };
        let u0 = self.u0.iter().map(shift).collect::<Result<Vec<_>>>()?;
        SWState::new(self.t, shift(&self.h0)?, u0)
    }
}

/// Single-mode initial data `h₀ = 1 + a cos κx`, `u₀ = b sin κx`.
///
/// `wavenumber` counts periods per domain length. In two dimensions the
/// thickness is `1 + a cos κx₁ cos κx₂` and each velocity component is
/// `b sin κxᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub amplitude: f64,
    pub wavenumber: u32,
    pub velocity_amplitude: f64,
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition {
            amplitude: 0.05,
            wavenumber: 1,
            velocity_amplitude: 0.0,
        }
    }
}

impl InitialCondition {
    pub fn state(&self, grid: &Grid) -> Result<SWState> {
        let k = 2.0 * PI * self.wavenumber as f64 / grid.length();
        let (a, b) = (self.amplitude, self.velocity_amplitude);
        let h0 = match grid.dim() {
            1 => HField::from_fn(grid, |x| 1.0 + a * (k * x[0]).cos())?,
            _ => HField::from_fn(grid, |x| 1.0 + a * (k * x[0]).cos() * (k * x[1]).cos())?,
        };
        let u0 = (0..grid.dim())
            .map(|i| HField::from_fn(grid, |x| b * (k * x[i]).sin()))
            .collect::<Result<Vec<_>>>()?;
        SWState::new(0.0, h0, u0)
    }
}

/// Time derivative of the state, `(∂ₜh₀, ∂ₜu₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SWRate {
    pub dh: HField,
    pub du: Vec<HField>,
}

/// Right-hand side of the shallow-water system with the momentum equation
/// divided by `h₀`. Quadratic products are dealiased.
pub fn sw_rhs(s: &SWState, p: &Params) -> Result<SWRate> {
    let min_h = s.h0.min();
    if min_h <= 0.0 {
        return Err(Error::Vacuum { t: s.t, min_h });
    }
    let dim = s.grid().dim();
    let h = &s.h0;
    let u = &s.u0;
    let flux: Vec<HField> = u.iter().map(|ui| h.mul_dealiased(ui)).collect();
    let dh = -&div(&flux);

    let grad_u: Vec<Vec<HField>> = u
        .iter()
        .map(|ui| (0..dim).map(|j| ui.d(j)).collect())
        .collect();
    let divu = div(u);
    let h_divu = h.mul_dealiased(&divu);
    let f2 = p.froude * p.froude;
    let mut du = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut adv = HField::zeros(s.grid());
        for j in 0..dim {
            adv = &adv + &u[j].mul_dealiased(&grad_u[i][j]);
        }
        let mut visc = h_divu.d(i).scale(2.0);
        for j in 0..dim {
            let dij = &grad_u[i][j] + &grad_u[j][i];
            visc = &visc + &h.mul_dealiased(&dij).d(j);
        }
        visc = &visc - &u[i].scale(p.gamma_bar);
        let visc = visc.div_nodes(h)?.scale(1.0 / p.reynolds);
        let rhs = &(&visc - &adv) - &h.d(i).scale(1.0 / f2);
        du.push(rhs);
    }
    Ok(SWRate { dh, du })
}

/// Largest step allowed by the advective and viscous limits.
///
/// The advective speed includes the gravity-wave speed `√h/F`, so the bound
/// stays finite at rest.
pub fn stable_dt(s: &SWState, p: &Params) -> f64 {
    let dx = s.grid().dx();
    let wave = (s.h0.max().max(0.0)).sqrt() / p.froude;
    let adv = C_ADV * dx / (s.max_speed() + wave);
    let visc = C_VISC * p.reynolds * dx * dx;
    adv.min(visc)
}

fn combine(s: &SWState, k: &SWRate, a: f64) -> (HField, Vec<HField>) {
    let h = &s.h0 + &k.dh.scale(a);
    let u =
        s.u0.iter()
            .zip(&k.du)
            .map(|(ui, ki)| ui + &ki.scale(a))
            .collect();
    (h, u)
}

fn raw_state(t: f64, h: HField, u: Vec<HField>) -> Result<SWState> {
    SWState::new(t, h, u)
}

/// One classical RK4 step.
pub fn sw_step(s: &SWState, p: &Params, dt: f64) -> Result<SWState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt = {dt} must be positive")));
    }
    let bound = stable_dt(s, p);
    if dt > bound {
        return Err(Error::Stability { dt, bound });
    }
    let k1 = sw_rhs(s, p)?;
    let (h, u) = combine(s, &k1, 0.5 * dt);
    let s2 = raw_state(s.t + 0.5 * dt, h, u)?;
    let k2 = sw_rhs(&s2, p)?;
    let (h, u) = combine(s, &k2, 0.5 * dt);
    let s3 = raw_state(s.t + 0.5 * dt, h, u)?;
    let k3 = sw_rhs(&s3, p)?;
    let (h, u) = combine(s, &k3, dt);
    let s4 = raw_state(s.t + dt, h, u)?;
    let k4 = sw_rhs(&s4, p)?;

    let w = dt / 6.0;
    let t = s.t + dt;
    let h = s.h0.zip_map(&k1.dh, |a, b| a + w * b);
    let h = h.zip_map(&k2.dh, |a, b| a + 2.0 * w * b);
    let h = h.zip_map(&k3.dh, |a, b| a + 2.0 * w * b);
    let h = h.zip_map(&k4.dh, |a, b| a + w * b);
    let mut u = Vec::with_capacity(s.u0.len());
    for i in 0..s.u0.len() {
        let ui = s.u0[i].zip_map(&k1.du[i], |a, b| a + w * b);
        let ui = ui.zip_map(&k2.du[i], |a, b| a + 2.0 * w * b);
        let ui = ui.zip_map(&k3.du[i], |a, b| a + 2.0 * w * b);
        u.push(ui.zip_map(&k4.du[i], |a, b| a + w * b));
    }
    let finite = h
        .values()
        .iter()
        .chain(u.iter().flat_map(|f| f.values()))
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::Blowup {
            t,
            detail: "non-finite sample after RK4 step".into(),
        });
    }
    let min_h = h.min();
    if min_h <= VACUUM_GUARD {
        return Err(Error::Vacuum { t, min_h });
    }
    raw_state(t, h, u)
}

/// `E = ∫ h₀|u₀|²/2 + h₀²/(2F²)`.
pub fn sw_energy(s: &SWState, p: &Params) -> f64 {
    let n = s.grid().npoints();
    let cell = s.grid().dx().powi(s.grid().dim() as i32);
    let f2 = p.froude * p.froude;
    let sum: f64 = (0..n)
        .map(|j| {
            let h = s.h0.values()[j];
            let u2: f64 = s.u0.iter().map(|u| u.values()[j].powi(2)).sum();
            0.5 * h * u2 + h * h / (2.0 * f2)
        })
        .sum();
    sum * cell
}

/// Per-step diagnostics row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub min_h: f64,
    pub max_u: f64,
}

impl Diagnostics {
    pub fn of(s: &SWState, p: &Params) -> Self {
        Diagnostics {
            t: s.t,
            mass: s.h0.integral(),
            energy: sw_energy(s, p),
            min_h: s.h0.min(),
            max_u: s.max_speed(),
        }
    }
}

/// RK4 trajectory on a uniform time grid, with right-hand sides stored for
/// Hermite interpolation in time.
#[derive(Debug, Clone)]
pub struct SWTrajectory {
    pub states: Vec<SWState>,
    pub rates: Vec<SWRate>,
    pub dt: f64,
    pub scheme: &'static str,
    pub diagnostics: Vec<Diagnostics>,
    /// Largest top-third spectral energy fraction seen over the run.
    pub spectral_tail: f64,
}

impl SWTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &SWState {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    /// Whether the resolved spectrum has a non-negligible top third.
    pub fn tail_flagged(&self) -> bool {
        self.spectral_tail > TAIL_TOLERANCE
    }
}

fn tail_of(s: &SWState) -> f64 {
    s.u0.iter()
        .map(|u| u.spectral_tail_fraction())
        .fold(s.h0.spectral_tail_fraction(), f64::max)
}

/// Integrates from `init` to `init.t + T` with `round(T / dt)` RK4 steps.
pub fn sw_solve(init: &SWState, p: &Params, t_final: f64, dt: f64) -> Result<SWTrajectory> {
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::InvalidInput(format!("T = {t_final} must be >= 0")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt = {dt} must be positive")));
    }
    let steps = (t_final / dt).round() as usize;
    if ((steps as f64) * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "T = {t_final} is not a multiple of dt = {dt}"
        )));
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut rates = Vec::with_capacity(steps + 1);
    let mut diagnostics = Vec::with_capacity(steps + 1);
    let mut tail = tail_of(init);
    let t0 = init.t;
    let mut cur = init.clone();
    rates.push(sw_rhs(&cur, p)?);
    diagnostics.push(Diagnostics::of(&cur, p));
    for n in 1..=steps {
        let mut next = sw_step(&cur, p, dt)?;
        // pin the clock to the uniform grid
        next.t = t0 + n as f64 * dt;
        tail = tail.max(tail_of(&next));
        rates.push(sw_rhs(&next, p)?);
        diagnostics.push(Diagnostics::of(&next, p));
        states.push(std::mem::replace(&mut cur, next));
    }
    states.push(cur);
    Ok(SWTrajectory {
        states,
        rates,
        dt,
        scheme: "rk4",
        diagnostics,
        spectral_tail: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Params {
        Params::new(1.0, 1.0, 1.0, 0.1).unwrap()
    }

    #[test]
    fn equilibrium_rhs_vanishes() {
        let g = Grid::periodic_1d(16).unwrap();
        let r = sw_rhs(&SWState::equilibrium(&g), &params()).unwrap();
        assert!(r.dh.sup() == 0.0 && r.du[0].sup() == 0.0);
    }

    #[test]
    fn cosine_thickness_at_rest_accelerates_as_sine() {
        let g = Grid::periodic_1d(32).unwrap();
        let a = 0.05;
        let ic = InitialCondition {
            amplitude: a,
            wavenumber: 1,
            velocity_amplitude: 0.0,
        };
        let p = Params::new(0.7, 1.0, 1.0, 0.1).unwrap();
        let r = sw_rhs(&ic.state(&g).unwrap(), &p).unwrap();
        assert!(r.dh.sup() < 1e-15);
        for j in 0..g.npoints() {
            let x = g.node(j)[0];
            assert!((r.du[0].values()[j] - a / 0.49 * x.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn uniform_flow_only_feels_friction() {
        let g = Grid::periodic_1d(16).unwrap();
        let s = SWState::new(
            0.0,
            HField::constant(&g, 1.0),
            vec![HField::constant(&g, 0.3)],
        )
        .unwrap();
        let p = Params::new(1.0, 2.0, 1.5, 0.1).unwrap();
        let r = sw_rhs(&s, &p).unwrap();
        assert!(r.dh.sup() == 0.0);
        assert!(r.du[0]
            .values()
            .iter()
            .all(|&v| (v + 1.5 * 0.3 / 2.0).abs() < 1e-15));
    }

    #[test]
    fn nonpositive_thickness_is_vacuum() {
        let g = Grid::periodic_1d(8).unwrap();
        let h = HField::from_fn(&g, |x| x[0].cos()).unwrap();
        assert!(matches!(
            SWState::new(0.0, h, vec![HField::zeros(&g)]),
            Err(Error::Vacuum { .. })
        ));
    }

    #[test]
    fn energy_of_rest_and_uniform_states() {
        let g = Grid::periodic_1d(16).unwrap();
        let p = Params::new(2.0, 1.0, 1.0, 0.1).unwrap();
        let e = sw_energy(&SWState::equilibrium(&g), &p);
        assert!((e - 2.0 * PI / 8.0).abs() < 1e-14);
        let s = SWState::new(
            0.0,
            HField::constant(&g, 1.0),
            vec![HField::constant(&g, 0.5)],
        )
        .unwrap();
        assert!((sw_energy(&s, &p) - 2.0 * PI * (0.125 + 0.125)).abs() < 1e-14);
    }

    #[test]
    fn oversized_step_rejected() {
        let g = Grid::periodic_1d(32).unwrap();
        let s = SWState::equilibrium(&g);
        assert!(matches!(
            sw_step(&s, &params(), 0.1),
            Err(Error::Stability { .. })
        ));
    }
}
