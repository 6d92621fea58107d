use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dagforecast_core::exec::{with_execution, Execution};
use dagforecast_core::genotype::{build_network, cnn_mlp_seed};
use dagforecast_core::layers::attention::{attention, AttentionParams};
use dagforecast_core::layers::Mode;
use dagforecast_core::tensor::{Padding, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn random(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn kernels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = random(&[256, 256], &mut rng);
    let b = random(&[256, 256], &mut rng);
    let x = random(&[32, 24, 20, 8], &mut rng);
    let k = random(&[3, 3, 8, 16], &mut rng);
    let p = AttentionParams::random(4, 24, 20, 20, &mut rng);
    let xa = random(&[32, 24, 20], &mut rng);

    let mut g = c.benchmark_group("kernels");
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::new("matmul_256", name), |bn| {
            bn.iter(|| with_execution(mode, || black_box(a.matmul(&b).unwrap())))
        });
        g.bench_function(BenchmarkId::new("conv2d_same", name), |bn| {
            bn.iter(|| with_execution(mode, || black_box(x.convolution(&k, 2, Padding::Same).unwrap())))
        });
        g.bench_function(BenchmarkId::new("attention", name), |bn| {
            bn.iter(|| with_execution(mode, || black_box(attention(&p, &xa).unwrap())))
        });
    }
    g.finish();
}

fn training_step(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random(&[32, 24, 20], &mut rng);
    let y = random(&[32, 24], &mut rng);
    let mut net = build_network(&cnn_mlp_seed(24, 20), 20, 0).unwrap();
    let mut g = c.benchmark_group("seed_network_step");
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |bn| {
            bn.iter(|| {
                with_execution(mode, || {
                    let mut tape = Tape::new();
                    let xv = tape.constant(x.clone());
                    let yv = tape.constant(y.clone());
                    let (pred, _) = net.forward(&mut tape, xv, Mode::Train, &mut rng).unwrap();
                    let loss = tape.mse(pred, yv).unwrap();
                    black_box(tape.backward(loss).unwrap())
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, kernels, training_step);
criterion_main!(benches);
