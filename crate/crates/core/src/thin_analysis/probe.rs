//! Randomized checks that thin-domain inequalities hold with ε-uniform
//! constants once the ε-scaling is divided out.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::cheb::gauss_legendre;
use crate::fields::{Grid, NormKind, ThinField, Vertical};

const PROBE_N: usize = 32;
const PROBE_NZ: usize = 12;
const MAX_MODE: usize = 3;
/// Allowed spread of the extremal ratio across ε.
pub const UNIFORMITY_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeTag {
    L6,
    Agmon,
    TraceGeneral,
    TraceZero,
    Korn,
}

impl ProbeTag {
    pub const ALL: [ProbeTag; 5] = [
        ProbeTag::L6,
        ProbeTag::Agmon,
        ProbeTag::TraceGeneral,
        ProbeTag::TraceZero,
        ProbeTag::Korn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProbeTag::L6 => "L6",
            ProbeTag::Agmon => "agmon",
            ProbeTag::TraceGeneral => "trace_general",
            ProbeTag::TraceZero => "trace_zero",
            ProbeTag::Korn => "korn",
        }
    }

    fn stream(self) -> u64 {
        match self {
            ProbeTag::L6 => 1,
            ProbeTag::Agmon => 2,
            ProbeTag::TraceGeneral => 3,
            ProbeTag::TraceZero => 4,
            ProbeTag::Korn => 5,
        }
    }

    /// Upper-bound probes track the largest ratio, the Korn probe the smallest.
    pub fn tracks_minimum(self) -> bool {
        self == ProbeTag::Korn
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub eps: f64,
    pub n_samples: usize,
    pub max_ratio: f64,
    pub min_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub tag: ProbeTag,
    pub rows: Vec<ProbeRow>,
    /// Largest over smallest value of the tracked extremum across ε.
    pub variation: f64,
    /// Ratio of the potential-flow sample at each ε (Korn probe only).
    pub potential_ratio: Vec<f64>,
}

impl ProbeReport {
    pub fn uniform(&self) -> bool {
        self.variation.is_finite() && self.variation < UNIFORMITY_FACTOR
    }
}

fn rng_for(seed: u64, tag: ProbeTag, eps_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag.stream() * 1024 + eps_index as u64);
    rng
}

/// Random trigonometric polynomial in `x` times a quadratic profile, either
/// in physical `z` or in `z/ε` depending on `scaled`.
struct Sample {
    cos: [f64; MAX_MODE + 1],
    sin: [f64; MAX_MODE + 1],
    prof: [[f64; 3]; MAX_MODE + 1],
    scaled: bool,
}

impl Sample {
    fn draw(rng: &mut ChaCha8Rng, scaled: bool) -> Self {
        let mut s = Sample {
            cos: [0.0; 4],
            sin: [0.0; 4],
            prof: [[0.0; 3]; 4],
            scaled,
        };
        for k in 0..=MAX_MODE {
            s.cos[k] = rng.random_range(-1.0..1.0);
            s.sin[k] = if k == 0 {
                0.0
            } else {
                rng.random_range(-1.0..1.0)
            };
            for c in s.prof[k].iter_mut() {
                *c = rng.random_range(-1.0..1.0);
            }
        }
        s
    }

    fn eval(&self, x: f64, z: f64, eps: f64) -> f64 {
        let y = if self.scaled { z / eps } else { z };
        (0..=MAX_MODE)
            .map(|k| {
                let kx = k as f64 * x;
                let p = self.prof[k];
                (self.cos[k] * kx.cos() + self.sin[k] * kx.sin()) * (p[0] + y * (p[1] + y * p[2]))
            })
            .sum()
    }
}

fn grid_ratio(tag: ProbeTag, u: &ThinField, eps: f64) -> Result<f64> {
    let h1 = u.norm(NormKind::H(1))?;
    Ok(match tag {
        ProbeTag::L6 => eps.cbrt() * u.norm(NormKind::L6)? / h1,
        ProbeTag::Agmon => eps.sqrt() * u.norm(NormKind::Linf)? / u.norm(NormKind::H(2))?,
        ProbeTag::TraceGeneral => {
            eps.sqrt() * u.bottom_trace().norm(NormKind::BoundaryH(0.5))? / h1
        }
        _ => unreachable!("modal probes are evaluated separately"),
    })
}

/// Top-trace ratio for fields vanishing at the bottom, by modes:
/// `Σ_k (a_k cos kx + b_k sin kx) f_k(z)` with
/// `f_k = sinh(kz)/sinh(kε) + β z/ε` and `k = round(κ/ε)`.
fn trace_zero_sample(rng: &mut ChaCha8Rng, eps: f64, gl: &(Vec<f64>, Vec<f64>)) -> f64 {
    let modes = rng.random_range(1..=3usize);
    let mut ks: Vec<f64> = Vec::new();
    let (mut top, mut bulk) = (0.0, 0.0);
    while ks.len() < modes {
        let kappa: f64 = rng.random_range(0.5..3.0);
        let k = (kappa / eps).round().max(1.0);
        if ks.contains(&k) {
            continue;
        }
        ks.push(k);
        let amp2 = rng.random_range(-1.0f64..1.0).powi(2) + rng.random_range(-1.0f64..1.0).powi(2);
        let beta: f64 = rng.random_range(-0.5..0.5);
        let ke = k * eps;
        let f = |z: f64| (k * z).sinh() / ke.sinh() + beta * z / eps;
        let df = |z: f64| k * (k * z).cosh() / ke.sinh() + beta / eps;
        let mut integral = 0.0;
        for (&t, &w) in gl.0.iter().zip(&gl.1) {
            let z = 0.5 * eps * (t + 1.0);
            integral += 0.5 * eps * w * ((1.0 + k * k) * f(z).powi(2) + df(z).powi(2));
        }
        top += amp2 * (1.0 + k * k).sqrt() * f(eps).powi(2);
        bulk += amp2 * integral;
    }
    (top / bulk).sqrt()
}

fn korn_ratio(u: &ThinField, w: &ThinField, gamma: f64) -> Result<f64> {
    let (ux, uz, wx, wz) = (u.dx(0), u.dz(), w.dx(0), w.dz());
    let d11 = ux.map(|v| 2.0 * v);
    let d22 = wz.map(|v| 2.0 * v);
    let d12 = uz.zip_map(&wx, |a, b| a + b);
    let sym = 0.5
        * (d11.norm(NormKind::L2)?.powi(2)
            + 2.0 * d12.norm(NormKind::L2)?.powi(2)
            + d22.norm(NormKind::L2)?.powi(2));
    let friction = gamma * u.bottom_trace().norm(NormKind::L2)?.powi(2);
    let h1 = u.norm(NormKind::H(1))?.powi(2) + w.norm(NormKind::H(1))?.powi(2);
    Ok((sym + friction) / h1)
}

/// Divergence-free fields with `w(·, 0) = 0` from a stream function
/// `ψ = ε Σ_k (a_k cos kx + b_k sin kx) Φ_k(z/ε)`, `Φ_k(0) = 0`.
fn korn_sample(
    rng: &mut ChaCha8Rng,
    grid: &Grid,
    vert: &std::sync::Arc<Vertical>,
    eps: f64,
) -> Result<(ThinField, ThinField)> {
    let mut a = [0.0; MAX_MODE + 1];
    let mut b = [0.0; MAX_MODE + 1];
    let mut phi = [[0.0; 3]; MAX_MODE + 1];
    for k in 0..=MAX_MODE {
        a[k] = rng.random_range(-1.0..1.0);
        b[k] = if k == 0 {
            0.0
        } else {
            rng.random_range(-1.0..1.0)
        };
        for c in phi[k].iter_mut() {
            *c = rng.random_range(-1.0..1.0);
        }
    }
    let u = ThinField::flat(grid, eps, vert, |x, z| {
        let y = z / eps;
        (0..=MAX_MODE)
            .map(|k| {
                let kx = k as f64 * x[0];
                let p = phi[k];
                (a[k] * kx.cos() + b[k] * kx.sin()) * (p[0] + y * (2.0 * p[1] + 3.0 * y * p[2]))
            })
            .sum()
    })?;
    let w = ThinField::flat(grid, eps, vert, |x, z| {
        let y = z / eps;
        -eps * (0..=MAX_MODE)
            .map(|k| {
                let kf = k as f64;
                let kx = kf * x[0];
                let p = phi[k];
                kf * (-a[k] * kx.sin() + b[k] * kx.cos()) * y * (p[0] + y * (p[1] + y * p[2]))
            })
            .sum::<f64>()
    })?;
    Ok((u, w))
}

fn potential_sample(
    grid: &Grid,
    vert: &std::sync::Arc<Vertical>,
    eps: f64,
) -> Result<(ThinField, ThinField)> {
    let u = ThinField::flat(grid, eps, vert, |x, z| -z.cosh() * x[0].sin())?;
    let w = ThinField::flat(grid, eps, vert, |x, z| z.sinh() * x[0].cos())?;
    Ok((u, w))
}

fn validate(eps_list: &[f64], samples: usize) -> Result<()> {
    if eps_list.is_empty()
        || eps_list
            .iter()
            .any(|e| !(e.is_finite() && *e > 0.0 && *e <= 1.0))
    {
        return Err(Error::InvalidInput(
            "probe eps values must lie in (0, 1]".into(),
        ));
    }
    if samples < 2 {
        return Err(Error::InvalidInput(format!(
            "samples = {samples} must be at least 2"
        )));
    }
    Ok(())
}

fn finish(tag: ProbeTag, rows: Vec<ProbeRow>, potential_ratio: Vec<f64>) -> ProbeReport {
    let tracked: Vec<f64> = rows
        .iter()
        .map(|r| {
            if tag.tracks_minimum() {
                r.min_ratio
            } else {
                r.max_ratio
            }
        })
        .collect();
    let hi = tracked.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = tracked.iter().copied().fold(f64::INFINITY, f64::min);
    let variation = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    ProbeReport {
        tag,
        rows,
        variation,
        potential_ratio,
    }
}

fn row(eps: f64, ratios: &[f64]) -> ProbeRow {
    ProbeRow {
        eps,
        n_samples: ratios.len(),
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Scaled ratios for the upper-bound inequalities on random samples.
pub fn anisotropy_probe(
    tag: ProbeTag,
    eps_list: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ProbeReport> {
    validate(eps_list, samples)?;
    if tag == ProbeTag::Korn {
        return Err(Error::InvalidInput(
            "use korn_probe for the Korn ratio".into(),
        ));
    }
    let grid = Grid::periodic_1d(PROBE_N)?;
    let vert = Vertical::new(PROBE_NZ)?;
    let gl = gauss_legendre(48);
    let rows = eps_list
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| {
            let mut rng = rng_for(seed, tag, i);
            let mut ratios = Vec::with_capacity(samples);
            for n in 0..samples {
                let r = if tag == ProbeTag::TraceZero {
                    trace_zero_sample(&mut rng, eps, &gl)
                } else {
                    let s = Sample::draw(&mut rng, n % 2 == 1);
                    let u = ThinField::flat(&grid, eps, &vert, |x, z| s.eval(x[0], z, eps))?;
                    grid_ratio(tag, &u, eps)?
                };
                if r.is_finite() {
                    ratios.push(r);
                }
            }
            Ok(row(eps, &ratios))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(tag, rows, Vec::new()))
}

/// Korn quotient `(½Σ D_ij² + εγ̄|u(·,0)|²) / ‖u‖²_{H¹}` on random
/// divergence-free fields with no flow through the bottom.
pub fn korn_probe(
    eps_list: &[f64],
    gamma_bar: f64,
    samples: usize,
    seed: u64,
) -> Result<ProbeReport> {
    validate(eps_list, samples)?;
    if !(gamma_bar.is_finite() && gamma_bar > 0.0) {
        return Err(Error::InvalidInput(format!(
            "gamma_bar = {gamma_bar} must be positive"
        )));
    }
    let grid = Grid::periodic_1d(PROBE_N)?;
    let vert = Vertical::new(PROBE_NZ)?;
    let out = eps_list
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| {
            let mut rng = rng_for(seed, ProbeTag::Korn, i);
            let gamma = eps * gamma_bar;
            let mut ratios = Vec::with_capacity(samples);
            for _ in 0..samples {
                let (u, w) = korn_sample(&mut rng, &grid, &vert, eps)?;
                let r = korn_ratio(&u, &w, gamma)?;
                if r.is_finite() {
                    ratios.push(r);
                }
            }
            let (u, w) = potential_sample(&grid, &vert, eps)?;
            Ok((row(eps, &ratios), korn_ratio(&u, &w, gamma)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, potential): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    Ok(finish(ProbeTag::Korn, rows, potential))
}
