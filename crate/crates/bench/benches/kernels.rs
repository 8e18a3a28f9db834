use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use thinsw::residual::residual_report;
use thinsw::shallow_water::{stable_dt, sw_step};
use thinsw::thin_analysis::{
    korn_gram, korn_spectrum, mode_pressure_dirichlet_top, BasisConvention,
};
use thinsw::{ansatz_rate, build_ansatz, Grid, InitialCondition, Params};

fn shallow_water(c: &mut Criterion) {
    let p = Params::new(1.0, 1.0, 1.0, 0.1).unwrap();
    for n in [32, 128] {
        let s = InitialCondition::default()
            .state(&Grid::periodic_1d(n).unwrap())
            .unwrap();
        let dt = 0.5 * stable_dt(&s, &p);
        c.bench_function(&format!("sw_step N={n}"), |b| {
            b.iter(|| sw_step(black_box(&s), &p, dt).unwrap())
        });
    }
    let s2 = InitialCondition::default()
        .state(&Grid::new(2, 32, 2.0 * std::f64::consts::PI).unwrap())
        .unwrap();
    let dt2 = 0.5 * stable_dt(&s2, &p);
    c.bench_function("sw_step 2d N=32", |b| {
        b.iter(|| sw_step(black_box(&s2), &p, dt2).unwrap())
    });
}

fn residuals(c: &mut Criterion) {
    let s = InitialCondition::default()
        .state(&Grid::periodic_1d(32).unwrap())
        .unwrap();
    let p = Params::new(1.0, 1.0, 1.0, 0.05).unwrap();
    c.bench_function("build_ansatz + rate", |b| {
        b.iter(|| {
            (
                build_ansatz(black_box(&s), &p).unwrap(),
                ansatz_rate(&s, &p).unwrap(),
            )
        })
    });
    let a = build_ansatz(&s, &p).unwrap();
    let r = ansatz_rate(&s, &p).unwrap();
    c.bench_function("residual_report nz=16", |b| {
        b.iter(|| residual_report(black_box(&a), &r, 16).unwrap())
    });
}

fn thin_strip(c: &mut Criterion) {
    for m in [0.1, 3.0, 30.0] {
        c.bench_function(&format!("korn gram + spectrum M={m}"), |b| {
            b.iter(|| {
                let g = korn_gram(black_box(m), (0.6, 0.8), 64, BasisConvention::Derived).unwrap();
                korn_spectrum(&g).unwrap()
            })
        });
    }
    c.bench_function("dirichlet mode nz=24", |b| {
        b.iter(|| mode_pressure_dirichlet_top(black_box(4.0), 0.01, 1.0, 24).unwrap())
    });
}

criterion_group!(benches, shallow_water, residuals, thin_strip);
criterion_main!(benches);
