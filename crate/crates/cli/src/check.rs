//! Invariant suites run by `fairfed check`. Each suite is parameterized by
//! its scale so the acceptance target can run the same checks larger.

use fairfed::data::{generate_synthetic, Partition, SyntheticParams};
use fairfed::eval::group_risks;
use fairfed::federation::{run_centralized_minmax, run_fedminmax, TrainerConfig};
use fairfed::numerics::{finite_diff_check, init_params, weighted_loss, ParamVector, Shape, WeightedSample};
use fairfed::simplex::{project_simplex, project_simplex_eps};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Projection,
    Gradient,
    RiskIdentity,
    Equivalence,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Projection, Suite::Gradient, Suite::RiskIdentity, Suite::Equivalence];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Projection => "projection",
            Suite::Gradient => "gradient",
            Suite::RiskIdentity => "risk-identity",
            Suite::Equivalence => "equivalence",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown suite '{s}' (expected projection, gradient, risk-identity, equivalence)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl SuiteOutcome {
    fn new(name: &'static str, failures: Vec<String>, summary: String) -> Self {
        let passed = failures.is_empty();
        let detail = if passed {
            summary
        } else {
            let shown: Vec<_> = failures.iter().take(5).cloned().collect();
            format!("{summary}; {} failure(s): {}", failures.len(), shown.join("; "))
        };
        Self { name, passed, detail }
    }
}

/// Random vector with entries in `[-scale, scale]`, optionally with repeated
/// values to exercise ties.
fn random_vector(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-scale..scale)).collect();
    if dim > 2 && rng.random_bool(0.2) {
        v[1] = v[0];
    }
    v
}

fn on_simplex(u: &[f64], eps: f64) -> bool {
    (u.iter().sum::<f64>() - 1.0).abs() <= 1e-9 && u.iter().all(|&x| x >= eps - 1e-12)
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest point to `v` among the simplex grid points with spacing `1 / res`.
fn grid_nearest(v: &[f64], res: usize) -> Vec<f64> {
    let h = 1.0 / res as f64;
    let mut best = (f64::INFINITY, Vec::new());
    let mut consider = |p: Vec<f64>| {
        let d = dist_sq(v, &p);
        if d < best.0 {
            best = (d, p);
        }
    };
    match v.len() {
        2 => (0..=res).for_each(|i| consider(vec![i as f64 * h, 1.0 - i as f64 * h])),
        3 => {
            for i in 0..=res {
                for j in 0..=res - i {
                    let (a, b) = (i as f64 * h, j as f64 * h);
                    consider(vec![a, b, 1.0 - a - b]);
                }
            }
        }
        d => panic!("grid oracle only covers dims 2 and 3, got {d}"),
    }
    best.1
}

/// Simplex membership, idempotence and order preservation on `vectors`
/// random inputs of dims 2..=10 (plus the epsilon-restricted variant), then a
/// brute-force nearest-point comparison on dims 2 and 3.
pub fn projection_suite(vectors: usize, grid_cases: usize, seed: u64) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for case in 0..vectors {
        let dim = rng.random_range(2..=10);
        let v = random_vector(&mut rng, dim, 3.0);
        let eps = if case % 2 == 0 { 0.0 } else { rng.random_range(0.0..1.0 / dim as f64) };
        let u = match if eps == 0.0 { project_simplex(&v) } else { project_simplex_eps(&v, eps) } {
            Ok(g) => g.into_vec(),
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        if !on_simplex(&u, eps) {
            failures.push(format!("case {case}: {u:?} is not on the simplex"));
        }
        let again = project_simplex_eps(&u, eps).map(|g| g.into_vec()).unwrap_or_default();
        if again.len() != u.len() || u.iter().zip(&again).any(|(a, b)| (a - b).abs() > 1e-12) {
            failures.push(format!("case {case}: projection is not idempotent"));
        }
        for i in 0..dim {
            for j in 0..dim {
                if v[i] > v[j] && u[i] < u[j] - 1e-12 {
                    failures.push(format!("case {case}: order of coordinates {i},{j} reversed"));
                }
            }
        }
    }

    let res = 400;
    let h = 1.0 / res as f64;
    for case in 0..grid_cases {
        let dim = 2 + case % 2;
        let v = random_vector(&mut rng, dim, 1.5);
        let p = project_simplex(&v).expect("finite input").into_vec();
        let g = grid_nearest(&v, res);
        let (dp, dg) = (dist_sq(&v, &p), dist_sq(&v, &g));
        // p is the exact minimizer, so it can never lose to a grid point; the
        // grid minimizer lies within sqrt(2 delta |v - p| + delta^2) of p where
        // delta = sqrt(dim) * h bounds the distance from p to the grid.
        let delta = (dim as f64).sqrt() * h;
        let bound = (2.0 * delta * dp.sqrt() + delta * delta).sqrt();
        if dp > dg + 1e-12 {
            failures.push(format!("grid case {case}: grid point {g:?} beats projection {p:?}"));
        }
        if dist_sq(&p, &g).sqrt() > bound + 1e-12 {
            failures.push(format!("grid case {case}: projection {p:?} is {} from grid optimum {g:?}", dist_sq(&p, &g).sqrt()));
        }
    }
    SuiteOutcome::new(
        "projection",
        failures,
        format!("{vectors} random vectors, {grid_cases} grid comparisons at spacing 1/{res}"),
    )
}

/// Central-difference check of the analytic gradient on `nets` random small
/// networks. Biases are random so no ReLU sits exactly on its kink.
pub fn gradient_suite(nets: usize, tolerance: f64, seed: u64) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut worst = 0.0_f64;
    for net in 0..nets {
        let depth = rng.random_range(0..=2);
        let mut sizes = vec![rng.random_range(1..=4)];
        sizes.extend((0..depth).map(|_| rng.random_range(2..=6)));
        sizes.push(rng.random_range(2..=4));
        let shape = Shape::new(sizes).expect("sizes are valid");
        let values = (0..shape.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let params = ParamVector::from_values(&shape, values).expect("finite values");
        let xs: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..shape.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let samples: Vec<WeightedSample<'_>> = xs
            .iter()
            .map(|x| WeightedSample {
                x,
                y: rng.random_range(0..shape.num_classes()),
                weight: rng.random_range(0.0..2.0),
            })
            .collect();
        match finite_diff_check(&params, &samples, 1e-6) {
            Ok(err) => {
                worst = worst.max(err);
                if !(err < tolerance) {
                    failures.push(format!("net {net} {:?}: relative error {err:.3e}", shape.sizes()));
                }
            }
            Err(e) => failures.push(format!("net {net}: {e}")),
        }
    }
    SuiteOutcome::new(
        "gradient",
        failures,
        format!("{nets} random nets, max relative error {worst:.2e} (tolerance {tolerance:.0e})"),
    )
}

/// Random assignment of `n` samples to `clients`, each client non-empty.
pub fn random_assignment(rng: &mut ChaCha8Rng, n: usize, clients: usize) -> Vec<usize> {
    let mut a: Vec<usize> = (0..n).map(|_| rng.random_range(0..clients)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for (k, &i) in order.iter().take(clients).enumerate() {
        a[i] = k;
    }
    a
}

fn random_simplex_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..dim).map(|_| -rng.random_range(f64::EPSILON..1.0).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// `sum_k (n_k/n) r_k(theta, w)` against `sum_a mu_a r_a(theta)` on random
/// triples. The left side is built from per-client importance-weighted
/// losses, the right side from pooled per-group risks.
pub fn risk_identity_suite(triples: usize, tolerance: f64, seed: u64) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut worst = 0.0_f64;
    for case in 0..triples {
        let n = rng.random_range(60..300);
        let data = generate_synthetic(&SyntheticParams {
            n_samples: n,
            seed: rng.random(),
            ..SyntheticParams::default()
        })
        .expect("valid synthetic parameters");
        let counts = data.group_counts();
        if counts.contains(&0) {
            continue;
        }
        let shape = Shape::new(vec![1, rng.random_range(2..=8), 2]).expect("valid shape");
        let theta = init_params(&shape, rng.random());
        let mu = random_simplex_point(&mut rng, 2);
        let rho: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        let w: Vec<f64> = mu.iter().zip(&rho).map(|(m, r)| m / r).collect();
        let clients = rng.random_range(1..=10);
        let assignment = random_assignment(&mut rng, n, clients);
        let partition = match Partition::from_assignment(&data, &assignment, clients) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let lhs: f64 = partition
            .clients()
            .iter()
            .map(|c| {
                let samples: Vec<_> = c
                    .samples()
                    .iter()
                    .map(|s| WeightedSample {
                        x: &s.x,
                        y: s.y,
                        weight: w[s.a],
                    })
                    .collect();
                c.len() as f64 / n as f64 * weighted_loss(&theta, &samples).expect("non-empty client")
            })
            .sum();
        let rhs: f64 = group_risks(&theta, &data)
            .expect("both groups present")
            .iter()
            .zip(&mu)
            .map(|(r, m)| m * r)
            .sum();
        let diff = (lhs - rhs).abs();
        worst = worst.max(diff);
        if !(diff <= tolerance) {
            failures.push(format!("case {case}: |{lhs} - {rhs}| = {diff:.3e}"));
        }
    }
    SuiteOutcome::new(
        "risk-identity",
        failures,
        format!("{triples} random triples, max deviation {worst:.2e} (tolerance {tolerance:.0e})"),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceSetup {
    pub n_samples: usize,
    pub partitions_per_size: usize,
    pub client_counts: Vec<usize>,
    pub rounds: usize,
    pub shape: Vec<usize>,
    pub tolerance: f64,
    /// Scale the centralized learner's step size; anything but 1 must fail.
    pub lr_mismatch: f64,
    pub seed: u64,
}

impl EquivalenceSetup {
    /// Small instance for the command-line check.
    pub fn quick(seed: u64) -> Self {
        Self {
            n_samples: 400,
            partitions_per_size: 2,
            client_counts: vec![1, 4, 10],
            rounds: 30,
            shape: vec![1, 8, 8, 2],
            tolerance: 1e-6,
            lr_mismatch: 1.0,
            seed,
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Federated and centralized minimax from the same seed must walk the same
/// `theta^t` and `mu^t` for every random partition.
pub fn equivalence_suite(setup: &EquivalenceSetup) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let mut failures = Vec::new();
    let mut worst = 0.0_f64;
    let mut runs = 0;
    let data = generate_synthetic(&SyntheticParams {
        n_samples: setup.n_samples,
        seed: setup.seed,
        ..SyntheticParams::default()
    })
    .expect("valid synthetic parameters");
    let shape = Shape::new(setup.shape.clone()).expect("valid shape");
    for &clients in &setup.client_counts {
        for rep in 0..setup.partitions_per_size {
            let assignment = random_assignment(&mut rng, data.len(), clients);
            let partition = Partition::from_assignment(&data, &assignment, clients).expect("clients are non-empty");
            let mut config = TrainerConfig::new(shape.clone(), rng.random());
            config.rounds = setup.rounds;
            config.model_lr = 0.1;
            config.adversary_lr = 0.1;
            config.trace_params = true;
            let mut central = config.clone();
            central.model_lr *= setup.lr_mismatch;
            let tag = format!("K={clients} #{rep}");
            match compare_trajectories(&config, &central, &partition) {
                Ok(d) => {
                    worst = worst.max(d);
                    if !(d <= setup.tolerance) {
                        failures.push(format!("{tag}: max deviation {d:.3e}"));
                    }
                }
                Err(e) => failures.push(format!("{tag}: {e}")),
            }
            runs += 1;
        }
    }
    SuiteOutcome::new(
        "equivalence",
        failures,
        format!(
            "{runs} partitions of n={} into {:?} clients, T={}, max deviation {worst:.2e} (tolerance {:.0e})",
            setup.n_samples, setup.client_counts, setup.rounds, setup.tolerance
        ),
    )
}

fn compare_trajectories(fed: &TrainerConfig, central: &TrainerConfig, partition: &Partition) -> CliResult<f64> {
    let a = run_fedminmax(fed, partition)?;
    let b = run_centralized_minmax(central, &partition.pooled())?;
    let mut worst = 0.0_f64;
    for (ra, rb) in a.rounds.iter().zip(&b.rounds) {
        let (ma, mb) = (ra.mu.as_deref().unwrap_or(&[]), rb.mu.as_deref().unwrap_or(&[]));
        worst = worst.max(max_abs_diff(ma, mb));
    }
    for (ta, tb) in a.param_trace.iter().zip(&b.param_trace) {
        worst = worst.max(max_abs_diff(ta.values(), tb.values()));
    }
    if a.param_trace.len() != fed.rounds || b.param_trace.len() != central.rounds {
        return Err(CliError::Failure("parameter trace is incomplete".into()));
    }
    Ok(worst)
}

pub fn run_suite(suite: Suite, lr_mismatch: f64) -> SuiteOutcome {
    match suite {
        Suite::Projection => projection_suite(2_000, 40, 1),
        Suite::Gradient => gradient_suite(20, 1e-4, 2),
        Suite::RiskIdentity => risk_identity_suite(100, 1e-9, 3),
        Suite::Equivalence => equivalence_suite(&EquivalenceSetup {
            lr_mismatch,
            ..EquivalenceSetup::quick(4)
        }),
    }
}
