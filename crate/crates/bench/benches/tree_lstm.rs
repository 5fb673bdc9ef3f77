use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng as _;
use relex::gradcheck::random_topology;
use relex::net::{tree_backward, tree_forward, LstmParams};
use relex::rng;

fn bench_tree_lstm(c: &mut Criterion) {
    let mut group = c.benchmark_group("tree_lstm");
    for &(dim, leaves) in &[(16, 4), (50, 6), (100, 8)] {
        let mut r = rng::seeded(3);
        let p = LstmParams::random(dim, &mut r);
        let topo = random_topology(&mut r, leaves);
        let inputs: Vec<Vec<f64>> = (0..leaves)
            .map(|_| (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect();
        let id = format!("d{dim}_l{leaves}");
        group.bench_with_input(BenchmarkId::new("forward", &id), &(), |b, _| {
            b.iter(|| tree_forward(&p, &topo, black_box(&inputs)).unwrap())
        });
        let fwd = tree_forward(&p, &topo, &inputs).unwrap();
        let upstream = vec![(topo.root(), vec![1.0; dim])];
        group.bench_with_input(BenchmarkId::new("backward", &id), &(), |b, _| {
            b.iter(|| tree_backward(&p, &topo, &fwd, black_box(&upstream)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_tree_lstm);
criterion_main!(benches);
