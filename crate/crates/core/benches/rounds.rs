use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fairfed::data::{generate_synthetic, partition, Dataset, PartitionOptions, Scheme, SyntheticParams};
use fairfed::eval::cross_validate;
use fairfed::federation::{run_fedavg, run_fedminmax, TrainerConfig};
use fairfed::numerics::Shape;
use fairfed::parallel::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn data(n: usize) -> Dataset {
    generate_synthetic(&SyntheticParams {
        n_samples: n,
        seed: 2022,
        ..SyntheticParams::default()
    })
    .unwrap()
}

fn config(rounds: usize, execution: Execution) -> TrainerConfig {
    let mut c = TrainerConfig::new(Shape::new(vec![1, 32, 32, 2]).unwrap(), 1);
    c.rounds = rounds;
    c.execution = execution;
    c
}

fn fedminmax_rounds(c: &mut Criterion) {
    let d = data(4000);
    let part = partition(&d, &PartitionOptions::new(Scheme::Esg, 40, 1)).unwrap();
    let mut group = c.benchmark_group("fedminmax_10_rounds");
    group.sample_size(10);
    for (name, mode) in MODES {
        let cfg = config(10, mode);
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_fedminmax(&cfg, &part).unwrap()));
    }
    group.finish();
}

fn fedavg_round(c: &mut Criterion) {
    let d = data(4000);
    let part = partition(&d, &PartitionOptions::new(Scheme::Ssg, 40, 1)).unwrap();
    let mut group = c.benchmark_group("fedavg_1_round");
    group.sample_size(10);
    for (name, mode) in MODES {
        let cfg = config(1, mode);
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_fedavg(&cfg, &part).unwrap()));
    }
    group.finish();
}

fn folds(c: &mut Criterion) {
    let d = data(1500);
    let mut group = c.benchmark_group("cross_validate_3_folds");
    group.sample_size(10);
    for (name, mode) in MODES {
        let runner = |train: &Dataset, seed: u64| {
            let p = partition(train, &PartitionOptions::new(Scheme::Esg, 10, seed))?;
            Ok(run_fedminmax(&config(5, Execution::Sequential), &p)?.averaged_params)
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| cross_validate(runner, &d, 3, &[1], mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fedminmax_rounds, fedavg_round, folds);
criterion_main!(benches);
