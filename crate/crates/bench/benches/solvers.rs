use criterion::{criterion_group, criterion_main, Criterion};
use proxkern::kernels::loss_from_kernel_first_order;
use proxkern::solvers::{solve_gd, solve_heavy_ball};
use proxkern::{add_gaussian_noise, CorpusImage, MapProblem, NoiseSpec, ScalarKernel, ScalarLoss, SolverConfig, Stencil};
use std::hint::black_box;

fn solvers(c: &mut Criterion) {
    let x = add_gaussian_noise(&CorpusImage::Ramp.generate(32, 0), NoiseSpec::new(10.0, 0).unwrap()).unwrap();
    let s = 10.0 / 255.0;
    let huber = MapProblem::pairwise(x.clone(), ScalarLoss::huber(5.0).unwrap(), Stencil::boxed(5), s).unwrap();
    let welsch = loss_from_kernel_first_order(&ScalarKernel::gaussian(20.0).unwrap()).unwrap();
    let welsch = MapProblem::pairwise(x.clone(), welsch, Stencil::gaussian(5, 10.0).unwrap(), s).unwrap();
    let cfg = SolverConfig { momentum: None, objective_log: false, ..SolverConfig::default() };

    c.bench_function("gradient huber 32x32 r5", |b| b.iter(|| huber.gradient(black_box(&x))));
    c.bench_function("objective huber 32x32 r5", |b| b.iter(|| huber.objective(black_box(&x))));
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    g.bench_function("heavy_ball huber 32x32 r5", |b| b.iter(|| solve_heavy_ball(black_box(&huber), &cfg)));
    g.bench_function("gd welsch 32x32 r5", |b| b.iter(|| solve_gd(black_box(&welsch), &cfg)));
    g.finish();
}

criterion_group!(benches, solvers);
criterion_main!(benches);
