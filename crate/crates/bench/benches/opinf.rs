use criterion::{criterion_group, criterion_main, Criterion};
use ttopinf::fullorder;
use ttopinf::harness::{run, Method, Problem, RunConfig};
use ttopinf::integrate::IntegratorConfig;
use ttopinf::pde::{generate_snapshots, PdeProblem};
use ttopinf::rom::Stencil;
use ttopinf::TruncationTol;

fn opinf(c: &mut Criterion) {
    let gen = IntegratorConfig { rtol: 1e-10, atol: 1e-12, ..Default::default() };
    let (p, g) = PdeProblem::heat_benchmark();
    let heat = generate_snapshots(&p, &g, &gen).unwrap();
    let (p, g) = PdeProblem::burgers_benchmark();
    let burgers = generate_snapshots(&p, &g, &gen).unwrap();
    let burgers_train = burgers.up_to(0.05).unwrap();

    let mut group = c.benchmark_group("opinf");
    group.sample_size(10);
    for m in [Method::Rom, Method::TtRom, Method::Tt, Method::Qtt] {
        let cfg = RunConfig::benchmark(Problem::Burgers, m);
        group.bench_function(format!("burgers {m}"), |b| b.iter(|| run(&cfg, &burgers, None).unwrap()));
    }
    let cfg = RunConfig::benchmark(Problem::Heat, Method::Tt);
    group.bench_function("heat tt", |b| b.iter(|| run(&cfg, &heat, None).unwrap()));
    group.bench_function("burgers tt_learn", |b| {
        b.iter(|| fullorder::tt_learn(&burgers_train, TruncationTol { epsilon: 1e-5 }, 0.0, Stencil::Gradient).unwrap())
    });
    group.finish();
}

criterion_group!(benches, opinf);
criterion_main!(benches);
