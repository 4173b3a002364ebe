use fairfed::data::{count_table, generate_synthetic, partition, Dataset, Partition, PartitionOptions, Scheme, SyntheticParams};
use fairfed::eval::{group_risks, minimax_oracle};
use fairfed::federation::{run_centralized_minmax, run_fedminmax, TrainerConfig};
use fairfed::numerics::{init_params, weighted_loss, Shape, WeightedSample};
use proptest::prelude::*;

fn synthetic(n: usize, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticParams {
        n_samples: n,
        seed,
        ..SyntheticParams::default()
    })
    .unwrap()
}

/// Every client gets at least one sample; the rest go where `choices` says.
fn assign(n: usize, clients: usize, choices: &[usize]) -> Vec<usize> {
    (0..n).map(|i| if i < clients { i } else { choices[i % choices.len()] % clients }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn federated_and_centralized_trajectories_agree(
        data_seed in 0u64..1000,
        model_seed in 0u64..1000,
        clients in 1usize..8,
        choices in prop::collection::vec(0usize..64, 1..40),
        lr in 0.01f64..0.5,
        adv_lr in 0.0f64..0.5,
    ) {
        let data = synthetic(300, data_seed);
        let part = Partition::from_assignment(&data, &assign(data.len(), clients, &choices), clients).unwrap();
        let mut c = TrainerConfig::new(Shape::new(vec![1, 6, 2]).unwrap(), model_seed);
        c.rounds = 15;
        c.model_lr = lr;
        c.adversary_lr = adv_lr;
        c.trace_params = true;
        let fed = run_fedminmax(&c, &part).unwrap();
        let central = run_centralized_minmax(&c, &part.pooled()).unwrap();
        for (a, b) in fed.param_trace.iter().zip(&central.param_trace) {
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
        for (a, b) in fed.rounds.iter().zip(&central.rounds) {
            for (x, y) in a.mu.as_ref().unwrap().iter().zip(b.mu.as_ref().unwrap()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn weighted_client_risks_sum_to_mixture_of_group_risks(
        data_seed in 0u64..1000,
        model_seed in 0u64..1000,
        clients in 1usize..10,
        choices in prop::collection::vec(0usize..64, 1..40),
        m0 in 0.0f64..=1.0,
    ) {
        let data = synthetic(200, data_seed);
        let part = Partition::from_assignment(&data, &assign(data.len(), clients, &choices), clients).unwrap();
        let theta = init_params(&Shape::new(vec![1, 5, 2]).unwrap(), model_seed);
        let mu = [m0, 1.0 - m0];
        let rho = count_table(&part).group_priors();
        let w: Vec<f64> = mu.iter().zip(&rho).map(|(m, r)| m / r).collect();
        let lhs: f64 = part.clients().iter().map(|c| {
            let samples: Vec<_> = c.samples().iter().map(|s| WeightedSample { x: &s.x, y: s.y, weight: w[s.a] }).collect();
            c.len() as f64 / data.len() as f64 * weighted_loss(&theta, &samples).unwrap()
        }).sum();
        let rhs: f64 = group_risks(&theta, &data).unwrap().iter().zip(&mu).map(|(r, m)| r * m).sum();
        prop_assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn group_weights_stay_feasible(seed in 0u64..500, eps in 0.0f64..0.4, adv_lr in 0.0f64..2.0) {
        let data = synthetic(240, seed);
        let part = partition(&data, &PartitionOptions::new(Scheme::Ssg, 4, seed)).unwrap();
        let mut c = TrainerConfig::new(Shape::new(vec![1, 4, 2]).unwrap(), seed);
        c.rounds = 20;
        c.epsilon = eps;
        c.adversary_lr = adv_lr;
        for r in run_fedminmax(&c, &part).unwrap().rounds {
            let mu = r.mu.unwrap();
            prop_assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(mu.iter().all(|&m| m >= eps - 1e-12));
        }
    }
}

#[test]
fn client_order_does_not_change_the_model() {
    let data = synthetic(400, 3);
    let part = partition(&data, &PartitionOptions::new(Scheme::Ssg, 6, 3)).unwrap();
    let mut reversed: Vec<Dataset> = part.clients().to_vec();
    reversed.reverse();
    let reversed = Partition::from_clients(reversed).unwrap();
    let mut c = TrainerConfig::new(Shape::new(vec![1, 8, 2]).unwrap(), 9);
    c.rounds = 25;
    let a = run_fedminmax(&c, &part).unwrap();
    let b = run_fedminmax(&c, &reversed).unwrap();
    for (x, y) in a.averaged_params.values().iter().zip(b.averaged_params.values()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn minimax_training_moves_toward_the_oracle() {
    // Pooled data so only the adversary separates the groups.
    let data = synthetic(3000, 17);
    let mut c = TrainerConfig::new(Shape::new(vec![1, 16, 16, 2]).unwrap(), 4);
    c.rounds = 600;
    let report = run_centralized_minmax(&c, &data).unwrap();
    let train = group_risks(report.model(), &data).unwrap();
    let oracle = minimax_oracle(&SyntheticParams::default(), 200).unwrap();
    let worst = train.iter().cloned().fold(f64::MIN, f64::max);
    assert!((worst - oracle.risk).abs() < 0.03, "worst {worst}, oracle {}", oracle.risk);
    let mu = report.rounds.last().unwrap().mu.clone().unwrap();
    assert!(mu[0] > 0.9, "adversary should favour group 0, got {mu:?}");
}
