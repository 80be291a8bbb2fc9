use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use narrow_bench::{evidence, network};
use narrow_core::inference::{bounded_posteriors, mc_posteriors, oracle_posteriors, quickscore_posteriors};
use narrow_core::SampleBudget;

fn quickscore_vs_oracle(c: &mut Criterion) {
    let net = network(12, 24, 4, 1);
    let mut g = c.benchmark_group("exact");
    for present in [2, 4, 6, 8, 10] {
        let ev = evidence(&net, present, 4);
        g.bench_with_input(BenchmarkId::new("quickscore", present), &ev, |b, ev| {
            b.iter(|| quickscore_posteriors(&net, black_box(ev)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("oracle", present), &ev, |b, ev| {
            b.iter(|| oracle_posteriors(&net, black_box(ev)).unwrap())
        });
    }
    g.finish();
}

fn bounds_by_budget(c: &mut Criterion) {
    let net = network(16, 32, 4, 2);
    let ev = evidence(&net, 6, 6);
    let mut g = c.benchmark_group("bounds");
    for budget in [16u64, 256, 4096] {
        g.bench_with_input(BenchmarkId::from_parameter(budget), &budget, |b, &budget| {
            b.iter(|| bounded_posteriors(&net, &ev, black_box(budget)).unwrap())
        });
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let net = network(16, 32, 4, 3);
    let ev = evidence(&net, 6, 6);
    c.bench_function("montecarlo/10000", |b| {
        b.iter(|| mc_posteriors(&net, &ev, SampleBudget { n_samples: 10_000, seed: black_box(5) }).unwrap())
    });
}

criterion_group!(benches, quickscore_vs_oracle, bounds_by_budget, monte_carlo);
criterion_main!(benches);
