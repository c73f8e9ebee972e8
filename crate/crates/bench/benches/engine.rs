use std::collections::BTreeSet;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use liveeval::planner::{plan_reevaluation, PlannerConfig};
use liveeval::rasch::{fit, FitConfig, Observations};
use liveeval::simlab::{generate_world, run_efficient_eval, WorldConfig};
use liveeval::{EvalOutcome, EvalStore};

fn world(samples_per_domain: usize) -> liveeval::SimWorld {
    generate_world(&WorldConfig {
        samples_per_domain,
        seed: 7,
        ..WorldConfig::default()
    })
    .unwrap()
}

fn full_store(world: &liveeval::SimWorld) -> EvalStore {
    let roster: BTreeSet<_> = world.models().iter().cloned().collect();
    let mut store = EvalStore::new();
    store
        .add_version(
            world.samples().to_vec(),
            roster.clone(),
            BTreeSet::new(),
            roster,
        )
        .unwrap();
    let batch: Vec<_> = (0..world.models().len())
        .flat_map(|i| {
            (0..world.samples().len()).map(move |j| {
                EvalOutcome::new(
                    world.models()[i].clone(),
                    world.samples()[j].id.clone(),
                    world.outcome(i, j),
                )
            })
        })
        .collect();
    store.record_outcomes(0, &batch).unwrap();
    store
}

fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("rasch_fit");
    group.sample_size(10);
    for per_domain in [50, 200] {
        let store = full_store(&world(per_domain));
        let obs = Observations::from_store(&store, 0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(obs.len()), &obs, |b, obs| {
            b.iter(|| fit(black_box(obs), &FitConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn bench_plan(c: &mut Criterion) {
    let w = world(100);
    let store = full_store(&w);
    let fitted = fit(
        &Observations::from_store(&store, 0).unwrap(),
        &FitConfig::default(),
    )
    .unwrap();
    let roster: BTreeSet<_> = w.models().iter().cloned().collect();
    c.bench_function("plan_reevaluation", |b| {
        b.iter(|| {
            plan_reevaluation(
                black_box(&store),
                &fitted,
                &PlannerConfig::default(),
                &BTreeSet::new(),
                &roster,
                &[],
            )
            .unwrap()
        })
    });
}

fn bench_experiment(c: &mut Criterion) {
    let w = world(700);
    let mut group = c.benchmark_group("efficient_eval");
    group.sample_size(10);
    group.bench_function("17x7000_budget5", |b| {
        b.iter(|| run_efficient_eval(black_box(&w), 5, 7).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_fit, bench_plan, bench_experiment);
criterion_main!(benches);
