use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qnls::evolution::{EvolutionConfig, Stepper};
use qnls::functionals::{conserved, System};
use qnls::linops::BlockOperatorE;
use qnls::modulation::{decompose, ModulationOptions};
use qnls::random::{random_pair, rng};
use qnls::spectrum::{eigenpair_e, SpectrumOptions};
use qnls::{GridSpec, GroundStateBundle};
use std::hint::black_box;

const SIZES: [usize; 3] = [256, 1024, 2048];

fn operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("operators");
    for n in SIZES {
        let g = GridSpec::new(n, 200.0).build().unwrap();
        let b = GroundStateBundle::new(&g, 0.5).unwrap();
        let x = random_pair(&g, 0.5, &mut rng(1));
        let e = BlockOperatorE::new(&g, &b);
        group.bench_with_input(BenchmarkId::new("laplacian", n), &x, |bch, x| bch.iter(|| g.laplacian6(black_box(&x.u))));
        group.bench_with_input(BenchmarkId::new("apply_e", n), &x, |bch, x| bch.iter(|| e.apply(black_box(x))));
        group.bench_with_input(BenchmarkId::new("conserved", n), &x, |bch, x| bch.iter(|| conserved(&g, black_box(x), System::Original)));
    }
    group.finish();
}

fn stepping(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for n in SIZES {
        let g = GridSpec::new(n, 200.0).build().unwrap();
        let b = GroundStateBundle::new(&g, 0.5).unwrap();
        let cfg = EvolutionConfig { dt: 1e-2, ..Default::default() };
        let mut st = Stepper::new(&g, &b, &cfg);
        let x = b.q_vec.scale(1.01);
        group.bench_with_input(BenchmarkId::new("composition4", n), &x, |bch, x| bch.iter(|| st.step(black_box(x), 1e-2).unwrap()));
    }
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solvers");
    group.sample_size(10);
    let g = GridSpec::new(1024, 200.0).build().unwrap();
    group.bench_function("ground_state_1024", |bch| bch.iter(|| GroundStateBundle::new(black_box(&g), 0.5).unwrap()));
    let b = GroundStateBundle::new(&g, 0.5).unwrap();
    group.bench_function("eigenpair_1024", |bch| bch.iter(|| eigenpair_e(&g, &b, &SpectrumOptions::default()).unwrap()));
    let noise = random_pair(&g, 0.5, &mut rng(3));
    let u = b.q_vec.scale(1.01).add(&noise.scale(0.01 * g.h1dot_norm(&b.q_vec) / g.h1dot_norm(&noise)));
    group.bench_function("decompose_1024", |bch| bch.iter(|| decompose(&g, &b, black_box(&u), None, &ModulationOptions::default()).unwrap()));
    group.finish();
}

criterion_group!(benches, operators, stepping, solvers);
criterion_main!(benches);
