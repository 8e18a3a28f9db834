use thinsw::shallow_water::{stable_dt, sw_energy, sw_solve, sw_step};
use thinsw::{Grid, HField, InitialCondition, Params, SWState};

fn params(re: f64) -> Params {
    Params::new(1.0, re, 1.0, 0.1).unwrap()
}

/// Large-amplitude regime in which coarse steps stay stable and time errors
/// stay well above roundoff.
fn rough_state(n: usize) -> SWState {
    let ic = InitialCondition {
        amplitude: 0.3,
        wavenumber: 1,
        velocity_amplitude: 0.3,
    };
    ic.state(&Grid::periodic_1d(n).unwrap()).unwrap()
}

fn sup_diff(a: &SWState, b: &SWState) -> f64 {
    let dh = (&a.h0 - &b.h0).sup();
    a.u0.iter()
        .zip(&b.u0)
        .map(|(x, y)| (x - y).sup())
        .fold(dh, f64::max)
}

#[test]
fn mass_is_conserved_over_ten_thousand_steps() {
    let g = Grid::periodic_1d(32).unwrap();
    let s0 = InitialCondition::default().state(&g).unwrap();
    let p = params(1.0);
    let m0 = s0.mass();
    let mut s = s0;
    for _ in 0..10_000 {
        s = sw_step(&s, &p, 1e-3).unwrap();
    }
    assert!(
        (s.mass() - m0).abs() < 1e-11 * m0,
        "drift {}",
        s.mass() - m0
    );
}

#[test]
fn energy_never_increases() {
    let p = params(10.0);
    let traj = sw_solve(&rough_state(32), &p, 2.0, 5e-3).unwrap();
    for w in traj.diagnostics.windows(2) {
        assert!(
            w[1].energy <= w[0].energy + 1e-8,
            "{} -> {}",
            w[0].energy,
            w[1].energy
        );
    }
    let e0 = sw_energy(&traj.states[0], &p);
    assert!(sw_energy(traj.last(), &p) < e0);
}

#[test]
fn uniform_flow_decays_exponentially() {
    let g = Grid::periodic_1d(16).unwrap();
    let c = 0.4;
    let s0 = SWState::new(
        0.0,
        HField::constant(&g, 1.0),
        vec![HField::constant(&g, c)],
    )
    .unwrap();
    let p = params(2.0);
    let traj = sw_solve(&s0, &p, 1.0, 1e-3).unwrap();
    for s in &traj.states {
        let expect = c * (-p.gamma_bar * s.t / p.reynolds).exp();
        assert!((s.u0[0].values()[5] - expect).abs() < 1e-8);
        assert!((s.h0.values()[3] - 1.0).abs() < 1e-14);
    }
}

#[test]
fn rk4_self_convergence() {
    let p = params(10.0);
    let s0 = rough_state(16);
    let reference = sw_solve(&s0, &p, 0.4, 0.0025).unwrap();
    let errs: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&dt| sup_diff(sw_solve(&s0, &p, 0.4, dt).unwrap().last(), reference.last()))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 3.5, "errors {errs:?}");
    }
}

#[test]
fn translation_equivariance() {
    let p = params(10.0);
    let s0 = rough_state(32);
    let shift = 5;
    let a = sw_solve(&s0.shifted(shift).unwrap(), &p, 0.2, 0.01).unwrap();
    let b = sw_solve(&s0, &p, 0.2, 0.01)
        .unwrap()
        .last()
        .shifted(shift)
        .unwrap();
    assert!(sup_diff(a.last(), &b) < 1e-12);
}

#[test]
fn step_bound_scales_with_resolution() {
    let p = params(1.0);
    let coarse = stable_dt(
        &InitialCondition::default()
            .state(&Grid::periodic_1d(32).unwrap())
            .unwrap(),
        &p,
    );
    assert!(coarse > 1e-3);
    let fine = stable_dt(
        &InitialCondition::default()
            .state(&Grid::periodic_1d(64).unwrap())
            .unwrap(),
        &p,
    );
    assert!(fine < coarse);
}

#[test]
fn solve_rejects_incommensurate_horizon() {
    assert!(sw_solve(&rough_state(16), &params(10.0), 0.105, 0.01).is_err());
}

#[test]
fn vacuum_is_reported() {
    let g = Grid::periodic_1d(16).unwrap();
    let h = HField::from_fn(&g, |x| 1.0 + 0.95 * x[0].cos()).unwrap();
    let u = HField::from_fn(&g, |x| -2.0 * x[0].sin()).unwrap();
    let s0 = SWState::new(0.0, h, vec![u]).unwrap();
    let err = sw_solve(&s0, &params(100.0), 2.0, 1e-3).unwrap_err();
    assert!(err.is_numerical(), "{err}");
}
