use std::collections::BTreeSet;

use liveeval::planner::{
    fisher_information, percentile_targets, plan_reevaluation, select_anchor_samples, select_models,
};
use liveeval::rng::substream;
use liveeval::simlab::{generate_world, run_experiment, Selection, DEFAULT_TRAIN_FRACTION};
use liveeval::store::EvalOutcome;
use liveeval::{
    AbilityVector, CostHint, DifficultyVector, Error, EvalStore, FitConfig, ModelId, PlannerConfig,
    RaschFit, Sample, SampleId, WorldConfig,
};
use rand::Rng;

fn sid(j: usize) -> SampleId {
    SampleId::new(format!("s{j:03}")).unwrap()
}

fn mid(i: usize) -> ModelId {
    ModelId::new(format!("m{i:02}")).unwrap()
}

fn fit_from(theta: &[f64], beta: &[f64]) -> RaschFit {
    RaschFit {
        abilities: AbilityVector(
            theta
                .iter()
                .enumerate()
                .map(|(i, &t)| (mid(i), t))
                .collect(),
        ),
        difficulties: DifficultyVector(
            beta.iter().enumerate().map(|(j, &b)| (sid(j), b)).collect(),
        ),
        penalized_log_likelihood: 0.0,
        iterations: 0,
        converged: true,
    }
}

/// Percentile of a sample by order statistics: the value at fractional
/// position `q/100 · (n − 1)` between its neighbours.
fn order_statistic_quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let position = q * (sorted.len() - 1) as f64 / 100.0;
    let below = position.floor();
    let k = below as usize;
    if k + 1 >= sorted.len() {
        return sorted[k];
    }
    sorted[k] * (1.0 - (position - below)) + sorted[k + 1] * (position - below)
}

#[test]
fn five_anchors_on_equally_spaced_difficulties() {
    let items: Vec<(SampleId, f64)> = (0..100).map(|j| (sid(j), j as f64 / 100.0)).collect();
    let anchors = select_anchor_samples(&items, 5).unwrap();
    // Targets sit at ranks 4.95, 27.225, 49.5, 71.775 and 94.05; nearest with
    // ties to the lower id.
    let expected: Vec<SampleId> = [5, 27, 49, 72, 94].into_iter().map(sid).collect();
    assert_eq!(anchors, expected);
    assert_eq!(percentile_targets(5), vec![5.0, 27.5, 50.0, 72.5, 95.0]);
}

#[test]
fn three_anchors_match_order_statistic_oracle() {
    for seed in 0..50 {
        let mut rng = substream(seed, "anchor-oracle", 0);
        let n = rng.random_range(3..60);
        let items: Vec<(SampleId, f64)> = (0..n)
            .map(|j| (sid(j), rng.random_range(-3.0..3.0)))
            .collect();
        let values: Vec<f64> = items.iter().map(|x| x.1).collect();
        let anchors = select_anchor_samples(&items, 3).unwrap();

        let mut used: BTreeSet<SampleId> = BTreeSet::new();
        for q in [5.0, 50.0, 95.0] {
            let target = order_statistic_quantile(&values, q);
            let best = items
                .iter()
                .filter(|(s, _)| !used.contains(s))
                .min_by(|a, b| {
                    (a.1 - target)
                        .abs()
                        .total_cmp(&(b.1 - target).abs())
                        .then(a.0.cmp(&b.0))
                })
                .unwrap();
            used.insert(best.0.clone());
        }
        let mut expected: Vec<&(SampleId, f64)> =
            items.iter().filter(|(s, _)| used.contains(s)).collect();
        expected.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let expected: Vec<SampleId> = expected.into_iter().map(|x| x.0.clone()).collect();
        assert_eq!(anchors, expected, "seed {seed}");
    }
}

#[test]
fn fisher_argmax_is_nearest_ability() {
    for seed in 0..100 {
        let mut rng = substream(seed, "fisher-nearest", 0);
        let n = rng.random_range(2..12);
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let beta = rng.random_range(-3.0..3.0);
        let fit = fit_from(&theta, &[beta]);
        let candidates: BTreeSet<ModelId> = (0..n).map(mid).collect();
        // Epsilon 0 disables the cost rule.
        let chosen = select_models(&fit, &[sid(0)], &candidates, &[], 0.0).unwrap();
        let nearest = (0..n)
            .min_by(|&a, &b| (theta[a] - beta).abs().total_cmp(&(theta[b] - beta).abs()))
            .unwrap();
        assert_eq!(chosen, vec![mid(nearest)], "seed {seed}");
    }
}

/// Greedy rule written out with explicit sorting per anchor.
fn greedy_oracle(
    theta: &[f64],
    beta: &[f64],
    anchors: &[usize],
    costs: &[f64],
    eps: f64,
) -> Vec<usize> {
    let mut taken = Vec::new();
    for &a in anchors {
        let mut rows: Vec<(f64, f64, usize)> = (0..theta.len())
            .filter(|i| !taken.contains(i))
            .map(|i| (fisher_information(theta[i], beta[a]).unwrap(), costs[i], i))
            .collect();
        if rows.is_empty() {
            break;
        }
        rows.sort_by(|x, y| {
            y.0.total_cmp(&x.0)
                .then(x.1.total_cmp(&y.1))
                .then(x.2.cmp(&y.2))
        });
        let mut pick = rows[0];
        if rows.len() > 1 && rows[0].0 - rows[1].0 <= eps {
            let second = rows[1];
            if (second.1, -second.0, second.2) < (pick.1, -pick.0, pick.2) {
                pick = second;
            }
        }
        taken.push(pick.2);
    }
    taken
}

#[test]
fn greedy_matches_explicit_oracle() {
    for seed in 0..200 {
        let mut rng = substream(seed, "greedy-oracle", 0);
        let n = rng.random_range(1..8);
        let m = rng.random_range(1..6);
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let beta: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let costs: Vec<f64> = (0..n).map(|_| rng.random_range(1..4) as f64).collect();
        let eps = [0.0, 0.005, 0.05][rng.random_range(0..3)];
        let fit = fit_from(&theta, &beta);
        let hints: Vec<CostHint> = costs
            .iter()
            .enumerate()
            .map(|(i, &c)| CostHint {
                model: mid(i),
                relative_cost: c,
            })
            .collect();
        let anchors: Vec<SampleId> = (0..m).map(sid).collect();
        let candidates: BTreeSet<ModelId> = (0..n).map(mid).collect();
        let chosen = select_models(&fit, &anchors, &candidates, &hints, eps).unwrap();
        let expected: Vec<ModelId> =
            greedy_oracle(&theta, &beta, &(0..m).collect::<Vec<_>>(), &costs, eps)
                .into_iter()
                .map(mid)
                .collect();
        assert_eq!(chosen, expected, "seed {seed}");
    }
}

#[test]
fn cost_breaks_near_ties_only() {
    let fit = fit_from(&[0.0, 0.1, 1.5], &[0.0]);
    let candidates: BTreeSet<ModelId> = (0..3).map(mid).collect();
    let costs = [
        CostHint {
            model: mid(0),
            relative_cost: 5.0,
        },
        CostHint {
            model: mid(1),
            relative_cost: 1.0,
        },
        CostHint {
            model: mid(2),
            relative_cost: 0.1,
        },
    ];
    // Fisher gap between m00 and m01 is about 0.0006.
    assert_eq!(
        select_models(&fit, &[sid(0)], &candidates, &costs, 0.005).unwrap(),
        vec![mid(1)]
    );
    assert_eq!(
        select_models(&fit, &[sid(0)], &candidates, &costs, 0.0).unwrap(),
        vec![mid(0)]
    );
    assert_eq!(
        select_models(&fit, &[sid(0)], &candidates, &[], 0.005).unwrap(),
        vec![mid(0)]
    );
}

fn sealed_single_version(models: usize, samples: usize) -> (EvalStore, RaschFit) {
    let mut store = EvalStore::new();
    store
        .add_version(
            (0..samples).map(|j| Sample::new(sid(j))).collect(),
            (0..models).map(mid).collect(),
            BTreeSet::new(),
            (0..models).map(mid).collect(),
        )
        .unwrap();
    let batch: Vec<EvalOutcome> = (0..models)
        .flat_map(|i| (0..samples).map(move |j| EvalOutcome::new(mid(i), sid(j), (i + j) % 3 != 0)))
        .collect();
    store.record_outcomes(0, &batch).unwrap();
    let theta: Vec<f64> = (0..models).map(|i| i as f64 / 4.0 - 2.0).collect();
    let beta: Vec<f64> = (0..samples).map(|j| j as f64 / 10.0 - 1.0).collect();
    (store, fit_from(&theta, &beta))
}

#[test]
fn plan_counts_and_errors() {
    let (store, fit) = sealed_single_version(17, 20);
    let config = PlannerConfig::default();
    let new: BTreeSet<ModelId> = [ModelId::new("newcomer").unwrap()].into();
    let all: BTreeSet<ModelId> = (0..17).map(mid).collect();
    let plan = plan_reevaluation(&store, &fit, &config, &new, &all, &[]).unwrap();
    assert_eq!(plan.chosen_models.len(), 5);
    assert_eq!(plan.chosen_models.iter().collect::<BTreeSet<_>>().len(), 5);
    assert_eq!(plan.models_to_evaluate().len(), 6);

    let none = plan_reevaluation(&store, &fit, &config, &new, &BTreeSet::new(), &[]);
    assert!(matches!(none, Err(Error::NoCandidates)));
    let zero = PlannerConfig {
        budget: 0,
        ..config
    };
    assert!(matches!(
        plan_reevaluation(&store, &fit, &zero, &new, &all, &[]),
        Err(Error::ZeroBudget)
    ));
}

#[test]
fn fisher_selection_beats_random_choice_on_average() {
    let mut fisher_total = 0.0;
    let mut random_total = 0.0;
    for seed in 1..=20 {
        let world = generate_world(&WorldConfig {
            seed,
            ..WorldConfig::default()
        })
        .unwrap();
        let (train, test) = world.split_indices(DEFAULT_TRAIN_FRACTION).unwrap();
        let run = |selection| {
            run_experiment(
                &world,
                &train,
                &test,
                5,
                selection,
                &FitConfig::default(),
                seed,
            )
            .unwrap()
            .overall_mae_points
        };
        fisher_total += run(Selection::default());
        random_total += run(Selection::UniformRandom { seed });
    }
    assert!(
        fisher_total < random_total,
        "fisher mean {} vs random mean {}",
        fisher_total / 20.0,
        random_total / 20.0
    );
}
