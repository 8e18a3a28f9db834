#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use thinsw::fields::NormKind;
use thinsw::lagrangian::{hermite, integrate_chart, integrate_chart_from};
use thinsw::residual::*;
use thinsw::shallow_water::{sw_solve, sw_step};
use thinsw::thin_analysis::{korn_gram, BasisConvention};
use thinsw::zpoly::ZPoly;
use thinsw::*;

fn trig(grid: &Grid, cos: &[f64], sin: &[f64]) -> HField {
    HField::from_fn(grid, |x| {
        cos.iter()
            .zip(sin)
            .enumerate()
            .map(|(k, (a, b))| {
                let kx = k as f64 * x[0];
                a * kx.cos() + b * kx.sin()
            })
            .sum()
    })
    .unwrap()
}

fn coeffs(len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-1.0f64..1.0, len),
        prop::collection::vec(-1.0f64..1.0, len),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dealiased_product_equals_truncated_dense_product((a, b) in coeffs(8), (c, d) in coeffs(8)) {
        let g = Grid::periodic_1d(16).unwrap();
        let dense = g.refined(4).unwrap();
        let f = trig(&g, &a, &b);
        let h = trig(&g, &c, &d);
        let got = f.mul_dealiased(&h);
        let exact = trig(&dense, &a, &b).mul_nodes(&trig(&dense, &c, &d));
        let (gs, es) = (got.spectral(), exact.spectral());
        let scale = es.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        for j in 0..g.n() {
            if g.is_nyquist(j) {
                continue;
            }
            let k = g.mode(j);
            let je = if k >= 0 { k as usize } else { (dense.n() as i64 + k) as usize };
            prop_assert!((gs[j] - es[je]).norm() <= 1e-12 * scale, "mode {k}");
        }
    }

    #[test]
    fn sobolev_norms_increase_with_order((a, b) in coeffs(10)) {
        let f = trig(&Grid::periodic_1d(32).unwrap(), &a, &b);
        let n: Vec<f64> = (0..=3).map(|k| f.norm(NormKind::H(k)).unwrap()).collect();
        prop_assert!(n.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-14)));
        prop_assert!((n[0] - f.norm(NormKind::L2).unwrap()).abs() <= 1e-12 * n[0].max(1e-300));
    }

    #[test]
    fn transform_round_trip_and_parseval((a, b) in coeffs(12)) {
        let g = Grid::periodic_1d(32).unwrap();
        let f = trig(&g, &a, &b);
        let back = g.inverse(&g.forward(f.values()));
        let sup = f.sup().max(1e-300);
        prop_assert!(back.iter().zip(f.values()).all(|(x, y)| (x - y).abs() <= 1e-12 * sup));
        let spec = f.spectral();
        for j in 1..g.n() / 2 {
            prop_assert!((spec[j] - spec[g.n() - j].conj()).norm() <= 1e-14 * sup);
        }
        let direct = (f.values().iter().map(|v| v * v).sum::<f64>() * g.dx()).sqrt();
        prop_assert!((direct - f.norm(NormKind::L2).unwrap()).abs() <= 1e-12 * direct.max(1e-300));
    }

    #[test]
    fn second_derivative_once_or_twice((a, b) in coeffs(10)) {
        let f = trig(&Grid::periodic_1d(32).unwrap(), &a, &b);
        let once = f.derivative([2, 0]).unwrap();
        let twice = f.d(0).d(0);
        let scale = once.sup().max(1e-300);
        prop_assert!((&once - &twice).sup() <= 1e-12 * scale);
    }

    #[test]
    fn horner_matches_naive_power_sum(c in prop::collection::vec(-2.0f64..2.0, 1..8), z in -1.5f64..1.5) {
        let p = ZPoly(c.clone());
        let naive: f64 = c.iter().enumerate().map(|(k, a)| a * z.powi(k as i32)).sum();
        let scale: f64 = c.iter().enumerate().map(|(k, a)| (a * z.powi(k as i32)).abs()).sum();
        prop_assert!((p.eval(z) - naive).abs() <= 1e-14 * scale.max(1.0));
    }

    #[test]
    fn hermite_reproduces_cubics(c in prop::collection::vec(-1.0f64..1.0, 4), dt in 0.01f64..2.0, theta in 0.0f64..1.0) {
        let f = |t: f64| c[0] + t * (c[1] + t * (c[2] + t * c[3]));
        let df = |t: f64| c[1] + t * (2.0 * c[2] + 3.0 * t * c[3]);
        let got = hermite(f(0.0), df(0.0), f(dt), df(dt), dt, theta);
        prop_assert!((got - f(theta * dt)).abs() <= 1e-12);
    }

    #[test]
    fn korn_pencil_has_rank_two_difference(m in 0.1f64..10.0, th in 0.0f64..std::f64::consts::TAU) {
        let p = korn_gram(m, (th.cos(), th.sin()), 64, BasisConvention::Derived).unwrap();
        let sv = (&p.q2 - &p.q1).singular_values();
        let mut sv: Vec<f64> = sv.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        prop_assert!(sv[2] <= 1e-10 * sv[0], "{sv:?}");
        prop_assert!(p.q1.clone().cholesky().is_some());
    }
}

#[test]
fn derivative_of_exp_sin_against_eighth_order_differences() {
    let g = Grid::periodic_1d(4096).unwrap();
    let f = HField::from_fn(&g, |x| x[0].sin().exp()).unwrap();
    let spectral = f.d(0);
    let h = g.dx();
    let n = g.n();
    let w = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let v = f.values();
    let mut worst = 0.0f64;
    for j in 0..n {
        let fd: f64 = (1..=4)
            .map(|k| w[k - 1] * (v[(j + k) % n] - v[(j + n - k) % n]))
            .sum::<f64>()
            / h;
        let exact = g.node(j)[0].cos() * g.node(j)[0].sin().exp();
        worst = worst.max((fd - spectral.values()[j]).abs());
        assert!((spectral.values()[j] - exact).abs() < 1e-11);
    }
    assert!(worst <= 1e-8 * spectral.sup(), "{worst}");
}

#[test]
fn thin_norm_of_a_column_constant_field() {
    let g = Grid::periodic_1d(32).unwrap();
    let h = HField::from_fn(&g, |x| 1.0 + 0.3 * x[0].cos()).unwrap();
    let v = Vertical::new(10).unwrap();
    let eps = 0.07;
    let f = ThinField::from_fn(&h, eps, &v, |_, x, _| (2.0 * x[0]).sin() + 0.5).unwrap();
    let direct: f64 = (0..g.n())
        .map(|j| {
            let x = g.node(j)[0];
            eps * h.values()[j] * ((2.0 * x).sin() + 0.5).powi(2)
        })
        .sum::<f64>()
        * g.dx();
    assert!((f.norm(NormKind::L2).unwrap() - direct.sqrt()).abs() < 1e-10);
}

#[test]
fn equilibrium_is_a_fixed_point() {
    let g = Grid::periodic_1d(32).unwrap();
    let p = Params::new(1.0, 1.0, 1.0, 0.1).unwrap();
    let s = sw_step(&SWState::equilibrium(&g), &p, 1e-3).unwrap();
    assert!((&s.h0 - &HField::constant(&g, 1.0)).sup() <= 1e-14);
    assert!(s.u0[0].sup() <= 1e-14);
}

#[test]
fn frictionless_uniform_flow_is_preserved() {
    let g = Grid::periodic_1d(16).unwrap();
    let p = Params::new(1.0, 1.0, 0.0, 0.1).unwrap();
    let s0 = SWState::new(
        0.0,
        HField::constant(&g, 1.0),
        vec![HField::constant(&g, 0.6)],
    )
    .unwrap();
    let traj = sw_solve(&s0, &p, 0.5, 1e-3).unwrap();
    assert!(traj.last().u0[0].values().iter().all(|&u| u == 0.6));
}

#[test]
fn ansatz_coefficient_identities() {
    let g = Grid::periodic_1d(32).unwrap();
    let ic = InitialCondition {
        amplitude: 0.2,
        wavenumber: 2,
        velocity_amplitude: 0.3,
    };
    let s = ic.state(&g).unwrap();
    let p = Params::new(1.3, 2.0, 0.7, 0.05).unwrap();
    let a = build_ansatz(&s, &p).unwrap();
    let div = thinsw::fields::div;
    assert!((&a.w1 + &div(&a.u0)).sup() <= 1e-12);
    assert!((&a.w2 + &div(&a.u1)).sup() <= 1e-12);
    assert!((&a.w3 + &div(&a.u2)).sup() <= 1e-12);
    assert!((&a.u1[0] - &a.u0[0].scale(p.eps * p.gamma_bar)).sup() <= 1e-14);

    let a2 = build_ansatz(&s, &p.with_eps(2.0 * p.eps).unwrap()).unwrap();
    assert!((&a2.u1[0] - &a.u1[0].scale(2.0)).sup() <= 1e-14);
    // non-hydrostatic pressure is linear in ε up to an O(ε³) correction
    let nh = |x: &thinsw::AnsatzFields| {
        (&x.p0 - &x.base.h0.scale(x.params.eps)).scale(1.0 / x.params.eps)
    };
    let gap = (&nh(&a2) - &nh(&a)).sup();
    let size = nh(&a).sup();
    assert!(
        gap <= 10.0 * (2.0 * p.eps).powi(2) * size,
        "{gap} vs {size}"
    );
}

#[test]
fn residuals_are_translation_equivariant() {
    let g = Grid::periodic_1d(32).unwrap();
    let ic = InitialCondition {
        amplitude: 0.1,
        wavenumber: 1,
        velocity_amplitude: 0.2,
    };
    let s = ic.state(&g).unwrap();
    let p = Params::new(1.0, 1.0, 1.0, 0.05).unwrap();
    let shift = 7;
    let t = s.shifted(shift).unwrap();
    let (a, r) = (build_ansatz(&s, &p).unwrap(), ansatz_rate(&s, &p).unwrap());
    let (b, q) = (build_ansatz(&t, &p).unwrap(), ansatz_rate(&t, &p).unwrap());
    let fa = interior_residual(&a, &r, 12).unwrap();
    let fb = interior_residual(&b, &q, 12).unwrap();
    let scale = fa.iter().map(|f| f.sup()).fold(0.0, f64::max);
    let n = g.n();
    // shifted node j carries the original node j + shift
    for (x, y) in fa.iter().zip(&fb) {
        for j in 0..n {
            for m in 0..12 {
                assert!((y.column(j)[m] - x.column((j + shift) % n)[m]).abs() <= 1e-12 * scale);
            }
        }
    }
    let na = residual_report(&a, &r, 12).unwrap().all_norms();
    let nb = residual_report(&b, &q, 12).unwrap().all_norms();
    for (x, y) in na.iter().zip(&nb) {
        assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
    }
}

#[test]
fn bottom_residual_is_the_slip_gap() {
    let g = Grid::periodic_1d(16).unwrap();
    let s = InitialCondition {
        amplitude: 0.1,
        wavenumber: 1,
        velocity_amplitude: 0.2,
    }
    .state(&g)
    .unwrap();
    let p = Params::new(1.0, 1.0, 1.0, 0.1).unwrap();
    let mut a = build_ansatz(&s, &p).unwrap();
    a.u1[0] = &a.u1[0] + &HField::from_fn(&g, |x| 1e-3 * x[0].cos()).unwrap();
    let (normal, slip) = bottom_residual(&a).unwrap();
    assert_eq!(normal.sup(), 0.0);
    let gap = &a.u1[0] - &a.u0[0].scale(a.gamma);
    assert!((&slip[0] - &gap).sup() <= 1e-15);
}

#[test]
fn hydrostatic_guard_removes_roundoff() {
    let g = Grid::periodic_1d(32).unwrap();
    let s = SWState::equilibrium(&g);
    let p = Params::new(1.0, 1.0, 1.0, 1e-3).unwrap();
    let (a, r) = (build_ansatz(&s, &p).unwrap(), ansatz_rate(&s, &p).unwrap());
    let guarded = interior_residual_with(&a, &r, 16, HydrostaticMode::Combined).unwrap()[1].sup();
    let raw = interior_residual_with(&a, &r, 16, HydrostaticMode::Discrete).unwrap()[1].sup();
    assert!(guarded <= 1e-11);
    assert!(
        raw >= 1e3 * guarded.max(1e-16),
        "guarded {guarded} raw {raw}"
    );
}

#[test]
fn chart_group_property() {
    let g = Grid::periodic_1d(32).unwrap();
    let s0 = InitialCondition {
        amplitude: 0.1,
        wavenumber: 1,
        velocity_amplitude: 0.1,
    }
    .state(&g)
    .unwrap();
    let p = Params::new(1.0, 50.0, 1.0, 0.1).unwrap();
    let traj = sw_solve(&s0, &p, 0.4, 0.005).unwrap();
    let whole = integrate_chart(&traj, p.eps, 4).unwrap();
    let half = traj.states.len() / 2;
    let first = integrate_chart_from(
        &traj,
        p.eps,
        4,
        0,
        half,
        (0..g.n()).map(|j| g.node(j)).collect(),
        vec![1.0; g.n()],
    )
    .unwrap();
    let second = integrate_chart_from(
        &traj,
        p.eps,
        4,
        half,
        traj.states.len() - 1,
        first.positions.last().unwrap().clone(),
        first.stretch.last().unwrap().clone(),
    )
    .unwrap();
    let (xa, xb) = (
        whole.positions.last().unwrap(),
        second.positions.last().unwrap(),
    );
    let (sa, sb) = (
        whole.stretch.last().unwrap(),
        second.stretch.last().unwrap(),
    );
    for j in 0..g.n() {
        assert!((xa[j][0] - xb[j][0]).abs() <= 1e-9);
        assert!((sa[j] - sb[j]).abs() <= 1e-9);
    }
}

#[test]
fn identity_chart_keeps_the_eulerian_slip_condition() {
    let g = Grid::periodic_1d(16).unwrap();
    let p = Params::new(1.0, 10.0, 1.0, 0.1).unwrap();
    let traj = sw_solve(&SWState::equilibrium(&g), &p, 0.0, 0.01).unwrap();
    let chart = integrate_chart(&traj, p.eps, 5).unwrap();
    let gamma = p.gamma();
    let ubar: Vec<Vec<f64>> = chart
        .levels
        .iter()
        .map(|&z| {
            (0..g.n())
                .map(|j| (1.0 + gamma * z) * g.node(j)[0].cos())
                .collect()
        })
        .collect();
    let res = thinsw::lagrangian::lagrangian_slip_residual(&chart, 0.0, &[ubar], gamma).unwrap();
    assert!(res[0].sup() <= 1e-13);
}
