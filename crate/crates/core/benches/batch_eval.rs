use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stochtr::parallel::Execution;
use stochtr::problems::{Batch, ComponentOracle, LogisticProblem, Mlp, MNIST_ARCHITECTURE};
use stochtr::sampling::sample_indices;

fn random_mlp(n: usize) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = MNIST_ARCHITECTURE.inputs;
    // roughly a fifth of the pixels lit, like handwritten digits
    let inputs = (0..n * d).map(|_| if rng.random::<f64>() < 0.2 { rng.random() } else { 0.0 }).collect();
    let labels = (0..n).map(|_| rng.random_range(0..10)).collect();
    Mlp::new(MNIST_ARCHITECTURE, inputs, labels, 1e-3).unwrap()
}

fn bench_problem(c: &mut Criterion, name: &str, p: &dyn ComponentOracle, sizes: &[usize]) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = p.num_components().unwrap();
    let x = DVector::from_fn(p.dim(), |_, _| rng.random_range(-0.05..0.05));
    let mut group = c.benchmark_group(format!("{name}_mean_grad"));
    for &b in sizes {
        let batch = Batch::Indices(sample_indices(n, b, &mut rng).unwrap());
        for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, b), &batch, |bench, batch| {
                bench.iter(|| p.mean_grad(&x, batch, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn batch_eval(c: &mut Criterion) {
    let mlp = random_mlp(2_000);
    bench_problem(c, "mlp", &mlp, &[64, 512, 2_000]);
    let logistic = LogisticProblem::new(LogisticProblem::synthetic_dataset(20_000, 123, 0.1, 3), 1e-4);
    bench_problem(c, "logistic", &logistic, &[128, 2_048, 20_000]);
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = batch_eval
}
criterion_main!(benches);
