//! One-thread vs default rayon pool on the three heaviest sweeps. Build with
//! `--no-default-features` to time the plain sequential fallback instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fracmax::experiment::{GeneratorKind, SpaceGen};
use fracmax::grid::{build_grid, verify_grid, DEFAULT_D0};
use fracmax::maximal::fractional_maximal;
use fracmax::weights::apq_constant;
use fracmax::{Exponent, Weight};
use std::hint::black_box;

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    let mut v = vec![(
        "1-thread".to_string(),
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap(),
    )];
    if all > 1 {
        v.push((
            format!("{all}-threads"),
            rayon::ThreadPoolBuilder::new()
                .num_threads(all)
                .build()
                .unwrap(),
        ));
    }
    v
}

fn sweeps(c: &mut Criterion) {
    let pools = pools();
    let mut g = c.benchmark_group("sweeps");
    g.sample_size(10);
    for n in [64, 256] {
        let s = SpaceGen::new(GeneratorKind::Line, n, 0).build().unwrap();
        s.balls();
        let f: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64).collect();
        let p = Exponent::log_holder(&s, 2.0, 0.5, 0).unwrap();
        let q = p.shifted(0.2).unwrap();
        let w = Weight::power(&s, 0.25, 0).unwrap();
        let grid = build_grid(&s, DEFAULT_D0, 1).unwrap();
        for (name, pool) in &pools {
            g.bench_with_input(
                BenchmarkId::new(format!("fractional_maximal/{name}"), n),
                &n,
                |b, _| {
                    b.iter(|| pool.install(|| fractional_maximal(&s, 0.2, black_box(&f)).unwrap()))
                },
            );
            g.bench_with_input(
                BenchmarkId::new(format!("apq_constant/{name}"), n),
                &n,
                |b, _| {
                    b.iter(|| {
                        pool.install(|| apq_constant(&s, &p, &q, black_box(&w), 1e-12).unwrap())
                    })
                },
            );
            g.bench_with_input(
                BenchmarkId::new(format!("verify_grid/{name}"), n),
                &n,
                |b, _| b.iter(|| pool.install(|| verify_grid(black_box(&grid), &s))),
            );
        }
    }
    g.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
