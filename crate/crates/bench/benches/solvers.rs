use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use onetprec::krylov::{fgmres, pcg, FgmresOptions, StopCriteria};
use onetprec::onet::{tb_sparse, CoarseSpace, SineBasis, TbOptions};
use onetprec::precond::{partition_structured, Asm, Composite, Jacobi, SharedPrec};
use onetprec::rng::{initial_guess, stream, Stream};
use onetprec::Preconditioner;
use onetprec_bench::{diffusion_2d, helmholtz_1d};
use std::hint::black_box;

fn pcg_jacobi(c: &mut Criterion) {
    let p = diffusion_2d(1, 0);
    let a = Arc::new(p.a.clone());
    let m = Jacobi::new(a.clone(), 2.0 / 3.0, 1).unwrap();
    let x0 = initial_guess(0, a.n_rows());
    let stop = StopCriteria::default();
    c.bench_function("pcg/jacobi/diff2d_l1", |b| b.iter(|| pcg(&a, &p.f, &m, black_box(&x0), &stop).unwrap()));
}

fn fgmres_jacobi(c: &mut Criterion) {
    let p = helmholtz_1d(384, 0);
    let a = Arc::new(p.a.clone());
    let m = Jacobi::new(a.clone(), 0.5, 2).unwrap();
    let x0 = initial_guess(0, a.n_rows());
    let stop = StopCriteria::for_problem(true);
    let opts = FgmresOptions::default();
    let mut g = c.benchmark_group("fgmres");
    g.sample_size(10);
    g.bench_function("jacobi/helm1d_384", |b| b.iter(|| fgmres(&a, &p.f, &m, black_box(&x0), &stop, &opts).unwrap()));
    g.finish();
}

fn asm(c: &mut Criterion) {
    let p = diffusion_2d(1, 0);
    let a = Arc::new(p.a.clone());
    let mut g = c.benchmark_group("asm");
    for s in [4, 16, 64] {
        let part = partition_structured(&p.mesh, s, 1).unwrap();
        g.bench_function(format!("setup/S={s}"), |b| b.iter(|| Asm::new(&a, black_box(&part)).unwrap()));
        let asm: SharedPrec = Arc::new(Asm::new(&a, &part).unwrap());
        let basis = SineBasis::new(2, 8).unwrap();
        let mut rng = stream(0, Stream::Basis);
        let tb = tb_sparse(&basis, &p.mesh, &part, &TbOptions::new(8), None, &mut rng).unwrap();
        let coarse: SharedPrec = Arc::new(CoarseSpace::new(&a, tb.p, "tb_sparse").unwrap());
        let two_level = Composite::additive(a.clone(), vec![asm.clone(), coarse]).unwrap();
        g.bench_function(format!("apply/S={s}"), |b| b.iter(|| asm.apply(black_box(&p.f)).unwrap()));
        g.bench_function(format!("apply_two_level/S={s}"), |b| b.iter(|| two_level.apply(black_box(&p.f)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, pcg_jacobi, fgmres_jacobi, asm);
criterion_main!(benches);
