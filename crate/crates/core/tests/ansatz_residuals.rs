use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thinsw::residual::*;
use thinsw::shallow_water::sw_solve;
use thinsw::{ansatz_rate, build_ansatz, Grid, HField, InitialCondition, Params, SWState};

fn random_state(rng: &mut ChaCha8Rng, grid: &Grid) -> SWState {
    let mut coeffs = [[0.0; 4]; 4];
    for row in coeffs.iter_mut() {
        for c in row.iter_mut() {
            *c = rng.random_range(-0.08..0.08);
        }
    }
    let trig = |x: f64, row: &[f64; 4]| {
        row[0] * x.cos() + row[1] * x.sin() + row[2] * (2.0 * x).cos() + row[3] * (3.0 * x).sin()
    };
    let h = HField::from_fn(grid, |x| {
        1.0 + trig(x[0], &coeffs[0]) + 0.5 * trig(x[0], &coeffs[1])
    })
    .unwrap();
    let u = HField::from_fn(grid, |x| {
        0.2 + 3.0 * trig(x[0], &coeffs[2]) + 2.0 * trig(x[0], &coeffs[3])
    })
    .unwrap();
    SWState::new(0.0, h, vec![u]).unwrap()
}

#[test]
fn bottom_conditions_and_incompressibility_hold_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = Grid::periodic_1d(32).unwrap();
    for _ in 0..20 {
        let s = random_state(&mut rng, &grid);
        let eps = rng.random_range(0.01..0.2);
        let p = Params::new(
            rng.random_range(0.5..2.0),
            rng.random_range(0.5..5.0),
            rng.random_range(0.1..2.0),
            eps,
        )
        .unwrap();
        let a = build_ansatz(&s, &p).unwrap();
        let (normal, slip) = bottom_residual(&a).unwrap();
        assert!(normal.sup() <= 1e-12);
        assert!(slip.iter().all(|f| f.sup() <= 1e-12));
        let div = divergence_residual(&a, 16).unwrap();
        assert!(div.sup() <= 1e-11, "divergence {}", div.sup());
    }
}

#[test]
fn rate_matches_centred_differences_in_time() {
    let grid = Grid::periodic_1d(16).unwrap();
    let ic = InitialCondition {
        amplitude: 0.3,
        wavenumber: 1,
        velocity_amplitude: 0.3,
    };
    let s0 = ic.state(&grid).unwrap();
    let p = Params::new(1.0, 10.0, 1.0, 0.1).unwrap();
    let mut errs = Vec::new();
    for &delta in &[0.02, 0.01, 0.005] {
        let traj = sw_solve(&s0, &p, 2.0 * delta, delta).unwrap();
        let [before, mid, after] = [&traj.states[0], &traj.states[1], &traj.states[2]];
        let (a0, a2) = (
            build_ansatz(before, &p).unwrap(),
            build_ansatz(after, &p).unwrap(),
        );
        let r = ansatz_rate(mid, &p).unwrap();
        let cd = |x: &HField, y: &HField| (y - x).scale(0.5 / delta);
        let mut err = (&cd(&a0.base.h0, &a2.base.h0) - &r.dh0).sup();
        for (fa, fb, fr) in [
            (&a0.w1, &a2.w1, &r.w1),
            (&a0.w2, &a2.w2, &r.w2),
            (&a0.w3, &a2.w3, &r.w3),
            (&a0.p0, &a2.p0, &r.p0),
        ] {
            err = err.max((&cd(fa, fb) - fr).sup());
        }
        for (fa, fb, fr) in [
            (&a0.u0, &a2.u0, &r.u0),
            (&a0.u1, &a2.u1, &r.u1),
            (&a0.u2, &a2.u2, &r.u2),
        ] {
            err = err.max((&cd(&fa[0], &fb[0]) - &fr[0]).sup());
        }
        errs.push(err);
    }
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "errors {errs:?}");
    }
}

#[test]
fn equilibrium_and_uniform_flow_are_exact() {
    let grid = Grid::periodic_1d(16).unwrap();
    let p = Params::new(1.0, 1.0, 1.0, 0.05).unwrap();
    let rest = SWState::equilibrium(&grid);
    let report = residual_report(
        &build_ansatz(&rest, &p).unwrap(),
        &ansatz_rate(&rest, &p).unwrap(),
        12,
    )
    .unwrap();
    assert!(report.all_norms().iter().all(|&v| v <= 1e-12), "{report:?}");

    let flow = SWState::new(
        0.0,
        HField::constant(&grid, 1.0),
        vec![HField::constant(&grid, 0.7)],
    )
    .unwrap();
    let a = build_ansatz(&flow, &p).unwrap();
    let r = ansatz_rate(&flow, &p).unwrap();
    assert!(kinematic_residual(&a, &r).unwrap().sup() <= 1e-12);
    assert!(traction_residual(&a)
        .unwrap()
        .iter()
        .all(|f| f.sup() <= 1e-12));
}

#[test]
fn order_study_on_the_reference_configuration() {
    let grid = Grid::periodic_1d(32).unwrap();
    let s0 = InitialCondition::default().state(&grid).unwrap();
    let p = Params::new(1.0, 1.0, 1.0, 0.1).unwrap();
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let study = convergence_study(&s0, &p, &eps, 1.0, 16, 1e-3).unwrap();
    for kind in CLAIMED_KINDS {
        let fit = study.series(kind).unwrap().fit.expect("non-degenerate");
        assert!(fit.r2 >= 0.98, "{kind}: {fit:?}");
    }
    assert!((study.slope("kinematic").unwrap() - 3.0).abs() < 0.05);
    assert!((study.slope("traction").unwrap() - 2.0).abs() < 0.05);
    assert!((study.slope("interior_momentum").unwrap() - 1.0).abs() < 0.05);
    assert!((study.slope("interior_momentum_x").unwrap() - 2.0).abs() < 0.05);
    assert!(study.series("bottom_slip").unwrap().degenerate());
    assert!(study.series("divergence").unwrap().degenerate());

    let checks = study.claim_checks();
    let interior = checks
        .iter()
        .find(|c| c.kind == "interior_momentum")
        .unwrap();
    assert!(!interior.within_band);
    let dom = interior.dominant.as_ref().expect("dominant term isolated");
    assert_eq!(dom.component, "z");
    assert_eq!(dom.power, Some(1));

    let refine = refinement_check(&study, &s0, &p, 1e-3).unwrap();
    assert!(refine.max_change().unwrap() < 0.05, "{refine:?}");
}

#[test]
fn study_requires_four_decreasing_eps() {
    let grid = Grid::periodic_1d(16).unwrap();
    let s0 = InitialCondition::default().state(&grid).unwrap();
    let p = Params::new(1.0, 1.0, 1.0, 0.1).unwrap();
    assert!(convergence_study(&s0, &p, &[0.1, 0.05, 0.025], 0.1, 8, 1e-2).is_err());
    assert!(convergence_study(&s0, &p, &[0.1, 0.2, 0.025, 0.01], 0.1, 8, 1e-2).is_err());
}
