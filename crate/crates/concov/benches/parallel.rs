//! Criterion comparison of the data-parallel entry points against their
//! sequential twins (batch tracing and fuzz streams). With the `parallel`
//! feature (the default) the undecorated functions fan out over rayon; the
//! `_seq` twins always run on one thread.

use criterion::{criterion_group, criterion_main, Criterion};

fn bench_batch_traces(c: &mut Criterion) {
    let net = concov::model::generate_model(
        "conv:3x3x8,relu,maxpool:2x2,flatten,dense:32,relu,dense:4,softmax",
        &[16, 16, 1],
        7,
    )
    .unwrap();
    let mut rng = concov::rng::Rng::new(11);
    let inputs: Vec<concov::Tensor> = (0..128)
        .map(|_| {
            concov::Tensor::new(vec![16, 16, 1], (0..256).map(|_| rng.uniform()).collect()).unwrap()
        })
        .collect();

    let mut group = c.benchmark_group("batch_forward_traces");
    group.bench_function("sequential", |b| {
        b.iter(|| concov::model::batch_forward_traces_seq(&net, &inputs).unwrap())
    });
    group.bench_function("parallel", |b| {
        b.iter(|| concov::model::batch_forward_traces(&net, &inputs).unwrap())
    });
    group.finish();
}

fn bench_fuzz_streams(c: &mut Criterion) {
    use concov::engines::fuzz::{fuzz, fuzz_seq, FuzzConfig};
    use concov::oracle::{Norm, OracleConfig};

    let net = concov::model::generate_model(
        "dense:64,relu,dense:32,relu,dense:4,softmax",
        &[32],
        3,
    )
    .unwrap();
    let mut rng = concov::rng::Rng::new(5);
    let seeds: Vec<concov::Tensor> = (0..16)
        .map(|_| concov::Tensor::from_vec((0..32).map(|_| rng.uniform()).collect()).unwrap())
        .collect();
    let labels: Vec<usize> = seeds.iter().map(|x| net.forward(x).unwrap().1).collect();
    let bounds = vec![(0.0, 1.0); 32];
    let oracle = OracleConfig::new(Norm::L0, 32);
    let cfg = FuzzConfig {
        n_streams: 8,
        iterations: 250,
        rng_seed: 42,
    };

    let mut group = c.benchmark_group("fuzz_streams");
    group.sample_size(20);
    group.bench_function("sequential", |b| {
        b.iter(|| fuzz_seq(&net, &seeds, &labels, &bounds, &oracle, None, &cfg).unwrap())
    });
    group.bench_function("parallel", |b| {
        b.iter(|| fuzz(&net, &seeds, &labels, &bounds, &oracle, None, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_batch_traces, bench_fuzz_streams);
criterion_main!(benches);
