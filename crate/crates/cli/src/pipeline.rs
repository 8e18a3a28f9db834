//! One pipeline per subcommand. Each returns its artifacts in a fixed order;
//! nothing here touches the filesystem.

use serde::Serialize;
use thinsw::lagrangian::{chart_identities, integrate_chart};
use thinsw::residual::{
    convergence_study, refinement_check, ClaimCheck, RefinementCheck, ResidualReport, StudyReport,
    CLAIM_BAND,
};
use thinsw::shallow_water::{sw_solve, SWTrajectory};
use thinsw::thin_analysis::{
    anisotropy_probe, divergence_lift, korn_probe, korn_sweep, log_grid,
    mode_pressure_dirichlet_top, mode_pressure_neumann_bottom, sigma_grid, BasisConvention,
    ProbeReport, ProbeTag,
};
use thinsw::{build_ansatz, Grid, InitialCondition, Params, SWState, ThinField, Vertical};

use crate::config::Config;
use crate::emit::{num, Artifact, Table};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Sw,
    Ansatz,
    Residuals,
    Study,
    Korn,
    Laplace,
    Probe,
    Lagrangian,
    All,
}

impl Stage {
    pub const PIPELINES: [Stage; 8] = [
        Stage::Sw,
        Stage::Ansatz,
        Stage::Residuals,
        Stage::Study,
        Stage::Korn,
        Stage::Laplace,
        Stage::Probe,
        Stage::Lagrangian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Sw => "sw",
            Stage::Ansatz => "ansatz",
            Stage::Residuals => "residuals",
            Stage::Study => "study",
            Stage::Korn => "korn",
            Stage::Laplace => "laplace",
            Stage::Probe => "probe",
            Stage::Lagrangian => "lagrangian",
            Stage::All => "all",
        }
    }
}

type Out = Result<Vec<Artifact>, CliError>;

pub fn run_stage(stage: Stage, cfg: &Config) -> Out {
    match stage {
        Stage::Sw => sw(cfg),
        Stage::Ansatz => ansatz(cfg),
        Stage::Residuals => residuals(cfg),
        Stage::Study => study(cfg),
        Stage::Korn => korn(cfg),
        Stage::Laplace => laplace(cfg),
        Stage::Probe => probe(cfg),
        Stage::Lagrangian => lagrangian(cfg),
        Stage::All => {
            let mut all = Vec::new();
            for s in Stage::PIPELINES {
                all.extend(run_stage(s, cfg)?);
            }
            Ok(all)
        }
    }
}

fn grid(cfg: &Config) -> Result<Grid, CliError> {
    Ok(Grid::new(
        cfg.domain.n,
        cfg.domain.big_n,
        cfg.domain.length,
    )?)
}

fn params(cfg: &Config, eps: f64) -> Result<Params, CliError> {
    let p = &cfg.params;
    Ok(Params::new(p.froude, p.reynolds, p.gamma_bar, eps)?)
}

fn initial_state(cfg: &Config) -> Result<SWState, CliError> {
    let i = &cfg.sw.init;
    let ic = InitialCondition {
        amplitude: i.amplitude,
        wavenumber: i.wavenumber,
        velocity_amplitude: i.velocity_amplitude,
    };
    Ok(ic.state(&grid(cfg)?)?)
}

/// Shallow-water dynamics do not depend on ε; the first study value fills the slot.
fn base_params(cfg: &Config) -> Result<Params, CliError> {
    params(cfg, cfg.study.eps_list[0])
}

fn trajectory(cfg: &Config, t_final: f64) -> Result<SWTrajectory, CliError> {
    Ok(sw_solve(
        &initial_state(cfg)?,
        &base_params(cfg)?,
        t_final,
        cfg.sw.dt,
    )?)
}

fn state_at(cfg: &Config, t: f64) -> Result<SWState, CliError> {
    if t > 0.0 {
        Ok(trajectory(cfg, t)?.last().clone())
    } else {
        initial_state(cfg)
    }
}

#[derive(Serialize)]
struct SwSummary {
    scheme: &'static str,
    dim: usize,
    n: usize,
    dt: f64,
    steps: usize,
    t_final: f64,
    mass_initial: f64,
    mass_drift: f64,
    energy_initial: f64,
    energy_final: f64,
    max_energy_increase: f64,
    min_h: f64,
    spectral_tail: f64,
    tail_flagged: bool,
}

fn sw(cfg: &Config) -> Out {
    let traj = trajectory(cfg, cfg.sw.t_final)?;
    let mut t = Table::new(&["t", "mass", "energy", "min_h", "max_u"]);
    for d in &traj.diagnostics {
        t.row([
            num(d.t),
            num(d.mass),
            num(d.energy),
            num(d.min_h),
            num(d.max_u),
        ]);
    }
    let diag = &traj.diagnostics;
    let first = diag.first().expect("initial diagnostics");
    let last = diag.last().expect("final diagnostics");
    let summary = SwSummary {
        scheme: traj.scheme,
        dim: cfg.domain.n,
        n: cfg.domain.big_n,
        dt: traj.dt,
        steps: traj.states.len() - 1,
        t_final: last.t,
        mass_initial: first.mass,
        mass_drift: diag
            .iter()
            .map(|d| (d.mass - first.mass).abs())
            .fold(0.0, f64::max),
        energy_initial: first.energy,
        energy_final: last.energy,
        max_energy_increase: diag
            .windows(2)
            .map(|w| w[1].energy - w[0].energy)
            .fold(0.0, f64::max),
        min_h: diag.iter().map(|d| d.min_h).fold(f64::INFINITY, f64::min),
        spectral_tail: traj.spectral_tail,
        tail_flagged: traj.tail_flagged(),
    };
    Ok(vec![
        Artifact::csv("sw_diagnostics.csv", t),
        Artifact::json("sw_summary.json", &summary)?,
    ])
}

fn ansatz(cfg: &Config) -> Out {
    let state = state_at(cfg, cfg.study.t_eval)?;
    let a = build_ansatz(&state, &base_params(cfg)?)?;
    let g = state.grid();
    let dim = g.dim();
    let axes = ["x", "y"];
    let mut header: Vec<String> = axes[..dim].iter().map(|s| s.to_string()).collect();
    for name in ["u0", "u1", "u2"] {
        if dim == 1 {
            header.push(name.into());
        } else {
            header.extend(axes[..dim].iter().map(|ax| format!("{name}_{ax}")));
        }
    }
    header.extend(["w1", "w2", "w3", "p0"].map(String::from));
    let mut t = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for j in 0..g.npoints() {
        let x = g.node(j);
        let c = a.node(j);
        let mut row: Vec<String> = x[..dim].iter().map(|v| num(*v)).collect();
        for v in [&c.u0, &c.u1, &c.u2] {
            row.extend(v.iter().map(|v| num(*v)));
        }
        row.extend([c.w1, c.w2, c.w3, c.p0].map(num));
        t.row(row);
    }
    Ok(vec![Artifact::csv("ansatz_coefficients.csv", t)])
}

fn run_study(cfg: &Config) -> Result<StudyReport, CliError> {
    let s = &cfg.study;
    Ok(convergence_study(
        &initial_state(cfg)?,
        &base_params(cfg)?,
        &s.eps_list,
        s.t_eval,
        s.nz,
        cfg.sw.dt,
    )?)
}

const RESIDUAL_HEADER: [&str; 5] = ["eps", "kind", "component", "norm_sup", "norm_l2"];

/// Bottom conditions are reported in the sup norm only; their `norm_l2` cell is empty.
fn residual_rows(t: &mut Table, r: &ResidualReport) {
    let e = num(r.eps);
    for c in &r.interior {
        t.row([
            e.clone(),
            "interior_momentum".into(),
            c.component.clone(),
            num(c.sup),
            num(c.l2),
        ]);
    }
    t.row([
        e.clone(),
        "divergence".into(),
        String::new(),
        num(r.divergence_sup),
        num(r.divergence_l2),
    ]);
    t.row([
        e.clone(),
        "kinematic".into(),
        String::new(),
        num(r.kinematic.sup),
        num(r.kinematic.l2),
    ]);
    for c in &r.traction {
        t.row([
            e.clone(),
            "traction".into(),
            c.component.clone(),
            num(c.sup),
            num(c.l2),
        ]);
    }
    t.row([
        e.clone(),
        "bottom_normal".into(),
        String::new(),
        num(r.bottom_normal_sup),
        String::new(),
    ]);
    t.row([
        e,
        "bottom_slip".into(),
        String::new(),
        num(r.bottom_slip_sup),
        String::new(),
    ]);
}

fn residuals(cfg: &Config) -> Out {
    let study = run_study(cfg)?;
    let mut t = Table::new(&RESIDUAL_HEADER);
    for r in &study.reports {
        residual_rows(&mut t, r);
    }
    Ok(vec![Artifact::csv("residuals.csv", t)])
}

#[derive(Serialize)]
struct SlopeEntry {
    kind: String,
    slope: Option<f64>,
    intercept: Option<f64>,
    r2: Option<f64>,
    degenerate: bool,
}

#[derive(Serialize)]
struct StudySummary {
    eps_list: Vec<f64>,
    t_eval: f64,
    n: usize,
    nz: usize,
    dt: f64,
    slopes: Vec<SlopeEntry>,
    flags: Vec<String>,
    claim_band: (f64, f64),
    claims: Vec<ClaimCheck>,
    refinement: Option<RefinementCheck>,
    refinement_max_change: Option<f64>,
    claim_discrepancy: bool,
}

#[derive(Serialize)]
struct ClaimDiscrepancy {
    claim_band: (f64, f64),
    failing: Vec<ClaimCheck>,
    refinement: Option<RefinementCheck>,
}

fn study(cfg: &Config) -> Out {
    let report = run_study(cfg)?;
    let refinement = if cfg.study.refine {
        Some(refinement_check(
            &report,
            &initial_state(cfg)?,
            &base_params(cfg)?,
            cfg.sw.dt,
        )?)
    } else {
        None
    };

    let mut t = Table::new(&RESIDUAL_HEADER);
    for r in &report.reports {
        residual_rows(&mut t, r);
    }
    let mut terms = Table::new(&["eps", "kind", "component", "group", "power", "magnitude"]);
    for r in &report.reports {
        for e in &r.term_breakdown {
            terms.row([
                num(r.eps),
                e.kind.clone(),
                e.component.clone(),
                e.group.name().to_string(),
                e.power.map(|p| p.to_string()).unwrap_or_default(),
                num(e.magnitude),
            ]);
        }
    }

    let claims = report.claim_checks();
    // Degenerate series (residual at round-off for every ε) carry no order claim.
    let failing: Vec<ClaimCheck> = claims
        .iter()
        .filter(|c| !c.within_band && report.series(&c.kind).is_some_and(|s| !s.degenerate()))
        .cloned()
        .collect();
    let summary = StudySummary {
        eps_list: report.eps_list.clone(),
        t_eval: report.t_eval,
        n: report.n,
        nz: report.nz,
        dt: report.dt,
        slopes: report
            .series
            .iter()
            .map(|s| SlopeEntry {
                kind: s.kind.clone(),
                slope: s.fit.map(|f| f.slope),
                intercept: s.fit.map(|f| f.intercept),
                r2: s.fit.map(|f| f.r2),
                degenerate: s.degenerate(),
            })
            .collect(),
        flags: report.flags.clone(),
        claim_band: CLAIM_BAND,
        claims,
        refinement_max_change: refinement.as_ref().and_then(|r| r.max_change()),
        refinement: refinement.clone(),
        claim_discrepancy: !failing.is_empty(),
    };
    let mut out = vec![
        Artifact::csv("study.csv", t),
        Artifact::csv("term_breakdown.csv", terms),
        Artifact::json("study_summary.json", &summary)?,
    ];
    if !failing.is_empty() {
        out.push(Artifact::json(
            "claim_discrepancy.json",
            &ClaimDiscrepancy {
                claim_band: CLAIM_BAND,
                failing,
                refinement,
            },
        )?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct KornSummary {
    basis: BasisConvention,
    cells: usize,
    flagged: usize,
    structured: usize,
    infimum: f64,
    argmin: KornArgmin,
    max_jump: f64,
}

#[derive(Serialize)]
struct KornArgmin {
    #[serde(rename = "M")]
    m: f64,
    c: f64,
    s: f64,
}

/// Relative cluster tolerance; looser below M = 0.1 where the pencil is less well conditioned.
fn cluster_tol(m: f64) -> f64 {
    if m < 0.1 {
        1e-4
    } else {
        1e-6
    }
}

/// Besides Λ (the smallest eigenvalue), the spectrum is 1 four times and 2 once.
/// Λ itself may sit arbitrarily close to 1 at small M.
pub fn has_structure(eigenvalues: &[f64; 6], tol: f64) -> bool {
    let mut e = *eigenvalues;
    e.sort_by(f64::total_cmp);
    e[1..5].iter().all(|x| (x - 1.0).abs() <= tol) && (e[5] - 2.0).abs() <= 2.0 * tol
}

fn korn(cfg: &Config) -> Out {
    let k = &cfg.korn;
    let ms = log_grid(k.m_grid.min, k.m_grid.max, k.m_grid.count);
    let sweep = korn_sweep(
        &ms,
        &sigma_grid(cfg.domain.n, k.sigma_count),
        k.quad_nodes,
        k.basis,
    )?;
    let mut t = Table::new(&[
        "M",
        "c",
        "s",
        "lambda",
        "eig1",
        "eig2",
        "eig3",
        "eig4",
        "eig5",
        "eig6",
        "cond_flag",
    ]);
    let mut structured = 0;
    for cell in &sweep.cells {
        let mut row = vec![num(cell.m), num(cell.c), num(cell.s)];
        match &cell.spectrum {
            Some(sp) => {
                let tol = cluster_tol(cell.m);
                if has_structure(&sp.eigenvalues, tol) {
                    structured += 1;
                }
                row.push(num(sp.lambda));
                row.extend(sp.eigenvalues.iter().map(|e| num(*e)));
            }
            None => row.extend(std::iter::repeat_n("nan".to_string(), 7)),
        }
        row.push(cell.cond_flag.clone().unwrap_or_default());
        t.row(row);
    }
    let (m, c, s) = sweep.argmin;
    let summary = KornSummary {
        basis: k.basis,
        cells: sweep.cells.len(),
        flagged: sweep.cells.iter().filter(|c| c.cond_flag.is_some()).count(),
        structured,
        infimum: sweep.infimum,
        argmin: KornArgmin { m, c, s },
        max_jump: sweep.max_jump,
    };
    Ok(vec![
        Artifact::csv("korn_sweep.csv", t),
        Artifact::json("korn_summary.json", &summary)?,
    ])
}

/// Lift data on the unit strip: smooth in x, quadratic in the scaled height.
fn lift_data(
    grid: &Grid,
    vert: &std::sync::Arc<Vertical>,
    eps: f64,
) -> Result<ThinField, CliError> {
    Ok(ThinField::flat(grid, eps, vert, |x, z| {
        let y = z / eps;
        x[0].sin() * (1.0 + y * y) + 0.3 * (3.0 * x[0]).cos() * y + 0.2
    })?)
}

fn laplace(cfg: &Config) -> Out {
    let l = &cfg.laplace;
    let mut modes = Table::new(&[
        "problem",
        "k",
        "eps",
        "ratio",
        "ratio_analytic",
        "sup_error",
    ]);
    for &eps in &l.eps_list {
        for k in 1..=l.k_max {
            let kf = k as f64;
            let top = mode_pressure_dirichlet_top(kf, eps, 1.0, l.nz)?;
            let bottom = mode_pressure_neumann_bottom(kf, eps, 1.0, l.nz)?;
            for (name, s) in [("dirichlet_top", top), ("neumann_bottom", bottom)] {
                modes.row([
                    name.to_string(),
                    k.to_string(),
                    num(eps),
                    num(s.ratio),
                    num(s.ratio_analytic),
                    num(s.sup_error),
                ]);
            }
        }
    }
    let grid = Grid::periodic_1d(32)?;
    let vert = Vertical::new(l.nz.min(24))?;
    let mut lift = Table::new(&["eps", "compat", "gradient_ratio", "h2_ratio"]);
    for &eps in &l.eps_list {
        let d = divergence_lift(&lift_data(&grid, &vert, eps)?)?;
        lift.row([
            num(eps),
            num(d.compat),
            num(d.gradient_ratio),
            num(d.h2_ratio),
        ]);
    }
    Ok(vec![
        Artifact::csv("laplace_modes.csv", modes),
        Artifact::csv("divergence_lift.csv", lift),
    ])
}

#[derive(Serialize)]
struct ProbeSummaryEntry {
    tag: &'static str,
    tracks: &'static str,
    variation: Option<f64>,
    uniform: Option<bool>,
    potential_ratio: Vec<f64>,
    skipped: Option<&'static str>,
}

#[derive(Serialize)]
struct ProbeSummary {
    seed: u64,
    samples: usize,
    eps_list: Vec<f64>,
    tags: Vec<ProbeSummaryEntry>,
}

fn probe(cfg: &Config) -> Out {
    let p = &cfg.probes;
    let mut reports: Vec<Result<ProbeReport, &'static str>> = Vec::new();
    for tag in ProbeTag::ALL {
        if tag == ProbeTag::Korn {
            if cfg.params.gamma_bar > 0.0 {
                reports.push(Ok(korn_probe(
                    &p.eps_list,
                    cfg.params.gamma_bar,
                    p.samples,
                    p.seed,
                )?));
            } else {
                reports.push(Err("friction coefficient is zero"));
            }
        } else {
            reports.push(Ok(anisotropy_probe(tag, &p.eps_list, p.samples, p.seed)?));
        }
    }
    let mut t = Table::new(&["tag", "eps", "n_samples", "max_ratio", "min_ratio"]);
    let mut tags = Vec::new();
    for (tag, r) in ProbeTag::ALL.iter().zip(&reports) {
        let tracks = if tag.tracks_minimum() { "min" } else { "max" };
        match r {
            Ok(rep) => {
                for row in &rep.rows {
                    t.row([
                        tag.name().to_string(),
                        num(row.eps),
                        row.n_samples.to_string(),
                        num(row.max_ratio),
                        num(row.min_ratio),
                    ]);
                }
                tags.push(ProbeSummaryEntry {
                    tag: tag.name(),
                    tracks,
                    variation: Some(rep.variation),
                    uniform: Some(rep.uniform()),
                    potential_ratio: rep.potential_ratio.clone(),
                    skipped: None,
                });
            }
            Err(why) => tags.push(ProbeSummaryEntry {
                tag: tag.name(),
                tracks,
                variation: None,
                uniform: None,
                potential_ratio: Vec::new(),
                skipped: Some(why),
            }),
        }
    }
    let summary = ProbeSummary {
        seed: p.seed,
        samples: p.samples,
        eps_list: p.eps_list.clone(),
        tags,
    };
    Ok(vec![
        Artifact::csv("probes.csv", t),
        Artifact::json("probes_summary.json", &summary)?,
    ])
}

#[derive(Serialize)]
struct LagrangianSummary {
    eps: f64,
    levels: usize,
    dt: f64,
    t_final: f64,
    volume_residual: f64,
    height_residual: f64,
    min_det: f64,
}

fn lagrangian(cfg: &Config) -> Out {
    let traj = trajectory(cfg, cfg.sw.t_final)?;
    let eps = cfg.study.eps_list[0];
    let chart = integrate_chart(&traj, eps, cfg.lagrangian.levels)?;
    let ids = chart_identities(&chart, &traj)?;
    let g = chart.grid();
    let dim = g.dim();
    let header: Vec<&str> = if dim == 2 {
        vec!["t", "x0", "y0", "X0", "Y0", "Z0_over_z0", "det_h_minus_1"]
    } else {
        vec!["t", "x0", "X0", "Z0_over_z0", "det_h_minus_1"]
    };
    let mut t = Table::new(&header);
    let det0: Vec<f64> = chart
        .deformation_gradient(0)
        .iter()
        .map(|a| a.determinant())
        .collect();
    let h_init: Vec<f64> = (0..g.npoints())
        .map(|j| traj.states[0].h0.eval_at(chart.positions[0][j]))
        .collect();
    let mut min_det = f64::INFINITY;
    for n in 0..chart.times.len() {
        let jac = chart.deformation_gradient(n);
        let h = &traj.states[n].h0;
        let write = n % cfg.lagrangian.output_every == 0 || n + 1 == chart.times.len();
        for j in 0..g.npoints() {
            let det = jac[j].determinant() / det0[j];
            min_det = min_det.min(det);
            if !write {
                continue;
            }
            let pos = chart.positions[n][j];
            let resid = det * h.eval_at(pos) / h_init[j] - 1.0;
            let mut row = vec![num(chart.times[n]), num(chart.positions[0][j][0])];
            if dim == 2 {
                row.push(num(chart.positions[0][j][1]));
            }
            row.push(num(pos[0]));
            if dim == 2 {
                row.push(num(pos[1]));
            }
            row.extend([num(chart.stretch[n][j]), num(resid)]);
            t.row(row);
        }
    }
    let summary = LagrangianSummary {
        eps,
        levels: chart.levels.len(),
        dt: chart.dt,
        t_final: *chart.times.last().expect("chart times"),
        volume_residual: ids.volume,
        height_residual: ids.height,
        min_det,
    };
    Ok(vec![
        Artifact::csv("chart.csv", t),
        Artifact::json("lagrangian_summary.json", &summary)?,
    ])
}
