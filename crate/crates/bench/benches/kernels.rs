use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use onetprec::linalg::{qr_thin, BandedLu};
use onetprec::rng::initial_guess;
use onetprec_bench::{dense, diffusion_2d};
use std::hint::black_box;

fn spmv(c: &mut Criterion) {
    let mut g = c.benchmark_group("spmv");
    for level in [1, 2, 3] {
        let p = diffusion_2d(level, 0);
        let x = initial_guess(0, p.a.n_rows());
        let mut y = vec![0.0; p.a.n_rows()];
        g.bench_with_input(BenchmarkId::from_parameter(p.a.n_rows()), &p.a, |b, a| {
            b.iter(|| a.spmv_into(black_box(&x), &mut y).unwrap())
        });
    }
    g.finish();
}

fn qr(c: &mut Criterion) {
    let mut g = c.benchmark_group("qr_thin");
    for (rows, cols) in [(1600, 16), (1600, 64), (6400, 64)] {
        let m = dense(rows, cols);
        g.bench_with_input(BenchmarkId::new(format!("{rows}x{cols}"), cols), &m, |b, m| b.iter(|| qr_thin(black_box(m))));
    }
    g.finish();
}

fn banded_lu(c: &mut Criterion) {
    let p = diffusion_2d(1, 0);
    c.bench_function("banded_lu_factor/1600", |b| b.iter(|| BandedLu::factor(black_box(&p.a)).unwrap()));
    let lu = BandedLu::factor(&p.a).unwrap();
    c.bench_function("banded_lu_solve/1600", |b| b.iter(|| lu.solve(black_box(&p.f)).unwrap()));
}

criterion_group!(benches, spmv, qr, banded_lu);
criterion_main!(benches);
