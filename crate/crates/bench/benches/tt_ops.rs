use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttopinf::cross::{tt_cross, CrossConfig, FnOracle};
use ttopinf::{Core, DenseTensor, TruncationTol, TtTensor};

fn random_tt(rng: &mut ChaCha8Rng, modes: &[usize], rank: usize) -> TtTensor {
    let d = modes.len();
    let cores = (0..d)
        .map(|k| {
            let l = if k == 0 { 1 } else { rank };
            let r = if k == d - 1 { 1 } else { rank };
            Core::new(l, modes[k], r, (0..l * modes[k] * r).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
        })
        .collect();
    TtTensor::from_cores(cores).unwrap()
}

fn tt_ops(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dense = DenseTensor::from_fn(vec![10, 10, 10, 10], |i| {
        (0.3 * i[0] as f64 + 0.2 * i[1] as f64).sin() * (1.0 + i[2] as f64 * i[3] as f64).ln()
    })
    .unwrap();
    let tol = TruncationTol { epsilon: 1e-10 };
    c.bench_function("tt_svd 10^4", |b| b.iter(|| TtTensor::tt_svd(black_box(&dense), tol).unwrap()));

    let a = random_tt(&mut rng, &[8; 6], 6);
    let sum = a.add(&a).unwrap().add(&a).unwrap();
    c.bench_function("round 8^6 rank 18", |b| b.iter(|| black_box(&sum).round(tol).unwrap()));
    c.bench_function("hadamard 8^6 rank 6", |b| b.iter(|| black_box(&a).hadamard(&a).unwrap()));

    let n = 50;
    c.bench_function("cross separable 50^3", |b| {
        b.iter(|| {
            let mut o = FnOracle::new(vec![n, n, n], |i: &[usize]| {
                (1.0 + i[0] as f64).sqrt() * (0.3 * i[1] as f64).cos() * (2.0 + (i[2] as f64 / 7.0).sin())
            });
            tt_cross(&mut o, &CrossConfig { initial_rank: 1, ..Default::default() }).unwrap()
        })
    });
}

criterion_group!(benches, tt_ops);
criterion_main!(benches);
