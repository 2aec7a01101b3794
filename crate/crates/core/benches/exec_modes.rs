use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use permtest::branching::{build_branching_with, BranchingLimits};
use permtest::perm::random_permutation;
use permtest::property::{brute_distance_with, Metric, PropertyOracle};
use permtest::tester::rejection_rate_with;
use permtest::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn tester(c: &mut Criterion) {
    let oracle: PropertyOracle = "av:231".parse().unwrap();
    let pi = random_permutation(200, 7).unwrap();
    let mut group = c.benchmark_group("rejection_rate");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "n200_s8_t20000"), &exec, |b, &exec| {
            b.iter(|| rejection_rate_with(&pi, &oracle, 8, 20_000, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn distance(c: &mut Criterion) {
    let oracle: PropertyOracle = "av:321".parse().unwrap();
    let pi = random_permutation(8, 3).unwrap();
    let mut group = c.benchmark_group("brute_distance");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "n8_kendall"), &exec, |b, &exec| {
            b.iter(|| brute_distance_with(&pi, &oracle, Metric::Kendall, 8, exec).unwrap())
        });
    }
    group.finish();
}

fn branching(c: &mut Criterion) {
    let oracle: PropertyOracle = "av:21".parse().unwrap();
    let mut group = c.benchmark_group("build_branching");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "av21_k2"), &exec, |b, &exec| {
            b.iter(|| build_branching_with(&oracle, 2, BranchingLimits::default(), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, tester, distance, branching);
criterion_main!(benches);
