//! Round-based training engines.
//!
//! All trainers share the same skeleton: broadcast the global model, run the
//! clients independently (possibly in parallel), then reduce their reports on
//! the server in ascending client order. The minimax trainers additionally
//! keep an adversary on the simplex and update it by projected gradient ascent
//! on the reported risks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{count_table, CountTable, Dataset, Partition};
use crate::error::{Error, Result};
use crate::numerics::{init_params, Backprop, ParamVector, Shape};
use crate::parallel::{map_indexed, Execution};
use crate::simplex::{project_simplex_eps, GroupWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    FedMinMax,
    Centralized,
    FedAvg,
    Afl,
    QFedAvg,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::FedMinMax,
        Method::Centralized,
        Method::FedAvg,
        Method::Afl,
        Method::QFedAvg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::FedMinMax => "fedminmax",
            Method::Centralized => "centralized",
            Method::FedAvg => "fedavg",
            Method::Afl => "afl",
            Method::QFedAvg => "qfedavg",
        }
    }

    /// Iterate averaging for the adversarial methods, last iterate otherwise.
    pub fn default_output(self) -> OutputMode {
        match self {
            Method::FedMinMax | Method::Centralized | Method::Afl => OutputMode::Average,
            Method::FedAvg | Method::QFedAvg => OutputMode::Final,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    /// Uniform average of the per-round global models.
    Average,
    /// Global model after the last round.
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub rounds: usize,
    pub model_lr: f64,
    /// Step size of the adversary (group weights or client weights).
    pub adversary_lr: f64,
    pub epsilon: f64,
    /// Local epochs for FedAvg and q-FedAvg.
    pub local_epochs: usize,
    /// Mini-batch size for FedAvg and q-FedAvg; `None` is full batch. Larger
    /// values are clamped to the client's sample count.
    pub batch_size: Option<usize>,
    pub q: f64,
    /// q-FedAvg Lipschitz estimate, `1 / model_lr` when unset.
    pub lipschitz: Option<f64>,
    pub shape: Shape,
    pub seed: u64,
    /// `None` picks [`Method::default_output`].
    pub output: Option<OutputMode>,
    /// Keep every global iterate in [`RunReport::param_trace`].
    #[serde(skip)]
    pub trace_params: bool,
    #[serde(skip)]
    pub execution: Execution,
}

impl TrainerConfig {
    pub fn new(shape: Shape, seed: u64) -> Self {
        Self {
            rounds: 100,
            model_lr: 0.1,
            adversary_lr: 0.1,
            epsilon: 0.0,
            local_epochs: 15,
            batch_size: Some(100),
            q: 0.0,
            lipschitz: None,
            shape,
            seed,
            output: None,
            trace_params: false,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.rounds == 0 {
            return bad("rounds must be >= 1".into());
        }
        if !(self.model_lr > 0.0 && self.model_lr.is_finite()) {
            return bad(format!("model_lr must be > 0, got {}", self.model_lr));
        }
        if !(self.adversary_lr >= 0.0 && self.adversary_lr.is_finite()) {
            return bad(format!("adversary_lr must be >= 0, got {}", self.adversary_lr));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if self.local_epochs == 0 {
            return bad("local_epochs must be >= 1".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return bad(format!("q must be >= 0, got {}", self.q));
        }
        if let Some(l) = self.lipschitz {
            if !(l > 0.0 && l.is_finite()) {
                return bad(format!("lipschitz must be > 0, got {l}"));
            }
        }
        Ok(())
    }

    fn check_data(&self, num_classes: usize, feature_dim: usize) -> Result<()> {
        if self.shape.input_dim() != feature_dim || self.shape.num_classes() != num_classes {
            return Err(Error::InvalidShape(format!(
                "model {:?} does not fit data with {feature_dim} features and {num_classes} classes",
                self.shape.sizes()
            )));
        }
        Ok(())
    }
}

/// One client's report for a round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub params: ParamVector,
    /// `r_{a,k}` at the incoming model; `None` where the client holds no samples of `a`.
    pub group_risks: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    /// Group weights after this round's adversary step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    /// Client weights after this round's adversary step (AFL).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// Group risks of the model broadcast at the start of the round.
    pub group_risks: Vec<f64>,
    /// Unweighted local risks of the model broadcast at the start of the round.
    pub client_risks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub method: Method,
    pub config: TrainerConfig,
    pub rounds: Vec<RoundRecord>,
    pub final_params: ParamVector,
    pub averaged_params: ParamVector,
    /// `theta^t` for `t = 1..=T` when `trace_params` is set.
    pub param_trace: Vec<ParamVector>,
}

impl RunReport {
    pub fn output_mode(&self) -> OutputMode {
        self.config.output.unwrap_or(self.method.default_output())
    }

    /// The model selected by the output mode.
    pub fn model(&self) -> &ParamVector {
        match self.output_mode() {
            OutputMode::Average => &self.averaged_params,
            OutputMode::Final => &self.final_params,
        }
    }
}

struct LocalPass {
    grad: ParamVector,
    loss_sums: Vec<f64>,
    counts: Vec<usize>,
}

impl LocalPass {
    fn group_risks(&self) -> Vec<Option<f64>> {
        self.loss_sums
            .iter()
            .zip(&self.counts)
            .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
            .collect()
    }
}

/// Full pass over `data` with per-sample weight `group_weights[a]`; the
/// gradient is normalized by the sample count.
fn local_pass(params: &ParamVector, data: &Dataset, group_weights: &[f64]) -> Result<LocalPass> {
    let mut bp = Backprop::new(params);
    let mut loss_sums = vec![0.0; data.num_groups()];
    let mut counts = vec![0; data.num_groups()];
    for s in data.samples() {
        loss_sums[s.a] += bp.accumulate(&s.x, s.y, group_weights[s.a])?;
        counts[s.a] += 1;
    }
    Ok(LocalPass {
        grad: bp.finish(data.len()),
        loss_sums,
        counts,
    })
}

/// Per-group risks of `params` on `data` without gradients.
fn local_risks(params: &ParamVector, data: &Dataset) -> Result<Vec<Option<f64>>> {
    let mut bp = Backprop::new(params);
    let mut sums = vec![0.0; data.num_groups()];
    let mut counts = vec![0usize; data.num_groups()];
    for s in data.samples() {
        sums[s.a] += bp.loss(&s.x, s.y)?;
        counts[s.a] += 1;
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect())
}

/// One full-batch gradient step on the importance-weighted local risk
/// `sum_a (n_{a,k}/n_k) w_a r_{a,k}`.
pub fn client_step_minmax(params: &ParamVector, weights: &[f64], data: &Dataset, model_lr: f64) -> Result<ClientUpdate> {
    if data.is_empty() {
        return Err(Error::EmptyClient(0));
    }
    if weights.len() != data.num_groups() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidInput(format!("bad importance weights {weights:?}")));
    }
    let pass = local_pass(params, data, weights)?;
    let mut next = params.clone();
    next.add_scaled(-model_lr, &pass.grad)?;
    Ok(ClientUpdate {
        group_risks: pass.group_risks(),
        params: next,
    })
}

fn weighted_sum<'a>(models: impl Iterator<Item = &'a ParamVector>, weights: &[f64], shape: &Shape) -> Result<ParamVector> {
    let mut acc = ParamVector::zeros(shape);
    for (m, &w) in models.zip(weights) {
        acc.add_scaled(w, m)?;
    }
    Ok(acc)
}

/// `sum_k (n_k / n) theta_k`, accumulated in ascending client order.
pub fn aggregate_models(updates: &[ClientUpdate], counts: &CountTable) -> Result<ParamVector> {
    let first = updates.first().ok_or(Error::EmptyBatch)?;
    if updates.len() != counts.per_client.len() {
        return Err(Error::Validation("one update per client required".into()));
    }
    let weights: Vec<f64> = counts.per_client.iter().map(|&nk| nk as f64 / counts.n as f64).collect();
    weighted_sum(updates.iter().map(|u| &u.params), &weights, first.params.shape())
}

/// `r_a = sum_k (n_{a,k} / n_a) r_{a,k}` over the clients holding group `a`.
pub fn aggregate_group_risks(updates: &[ClientUpdate], counts: &CountTable) -> Result<Vec<f64>> {
    (0..counts.per_group.len())
        .map(|a| {
            let na = counts.per_group[a];
            if na == 0 {
                return Err(Error::MissingGroup(a));
            }
            let mut r = 0.0;
            for (k, u) in updates.iter().enumerate() {
                let nak = counts.n_ak(a, k);
                match (nak, u.group_risks.get(a).copied().flatten()) {
                    (0, _) => {}
                    (_, Some(risk)) => r += nak as f64 / na as f64 * risk,
                    (_, None) => {
                        return Err(Error::Validation(format!(
                            "client {k} holds group {a} but reported no risk for it"
                        )))
                    }
                }
            }
            Ok(r)
        })
        .collect()
}

/// Projected gradient ascent on `<mu, risks>`; the gradient in `mu` is the
/// risk vector itself.
pub fn adversary_step(mu: &GroupWeights, risks: &[f64], lr: f64, epsilon: f64) -> Result<GroupWeights> {
    if risks.len() != mu.len() {
        return Err(Error::InvalidInput(format!(
            "{} risks for {} weights",
            risks.len(),
            mu.len()
        )));
    }
    let moved: Vec<f64> = mu.as_slice().iter().zip(risks).map(|(m, r)| m + lr * r).collect();
    project_simplex_eps(&moved, epsilon)
}

/// Unweighted local risk `sum_a (n_{a,k} / n_k) r_{a,k}`.
fn client_risk(group_risks: &[Option<f64>], counts: &CountTable, k: usize) -> f64 {
    let nk = counts.per_client[k] as f64;
    group_risks
        .iter()
        .enumerate()
        .filter_map(|(a, r)| r.map(|r| counts.n_ak(a, k) as f64 / nk * r))
        .sum()
}

fn initial_weights(prior: &[f64], epsilon: f64) -> Result<GroupWeights> {
    if prior.iter().all(|&p| p >= epsilon) {
        GroupWeights::new(prior.to_vec(), epsilon)
    } else {
        project_simplex_eps(prior, epsilon)
    }
}

/// Running bookkeeping shared by every trainer.
struct Trajectory {
    rounds: Vec<RoundRecord>,
    sum: ParamVector,
    trace: Vec<ParamVector>,
    keep_trace: bool,
}

impl Trajectory {
    fn new(config: &TrainerConfig) -> Self {
        Self {
            rounds: Vec::with_capacity(config.rounds),
            sum: ParamVector::zeros(&config.shape),
            trace: Vec::new(),
            keep_trace: config.trace_params,
        }
    }

    fn push(&mut self, record: RoundRecord, params: &ParamVector) -> Result<()> {
        self.rounds.push(record);
        self.sum.add_scaled(1.0, params)?;
        if self.keep_trace {
            self.trace.push(params.clone());
        }
        Ok(())
    }

    fn finish(mut self, method: Method, config: &TrainerConfig, final_params: ParamVector) -> RunReport {
        self.sum.scale(1.0 / self.rounds.len() as f64);
        RunReport {
            method,
            config: config.clone(),
            rounds: self.rounds,
            final_params,
            averaged_params: self.sum,
            param_trace: self.trace,
        }
    }
}

fn prepare(config: &TrainerConfig, partition: &Partition) -> Result<CountTable> {
    config.validate()?;
    config.check_data(partition.num_classes(), partition.clients()[0].feature_dim())?;
    let counts = count_table(partition);
    if let Some(a) = counts.per_group.iter().position(|&n| n == 0) {
        return Err(Error::MissingGroup(a));
    }
    Ok(counts)
}

/// Federated minimax: clients step on importance-weighted risks, the server
/// averages models and moves the group weights toward the worst groups.
pub fn run_fedminmax(config: &TrainerConfig, partition: &Partition) -> Result<RunReport> {
    let counts = prepare(config, partition)?;
    let rho = counts.group_priors();
    let mut mu = initial_weights(&rho, config.epsilon)?;
    let mut theta = init_params(&config.shape, config.seed);
    let mut traj = Trajectory::new(config);

    for t in 1..=config.rounds {
        let w: Vec<f64> = mu.as_slice().iter().zip(&rho).map(|(m, r)| m / r).collect();
        let updates = map_indexed(config.execution, partition.clients(), |_, data| {
            client_step_minmax(&theta, &w, data, config.model_lr)
        })
        .into_iter()
        .enumerate()
        .map(|(k, u)| u.map_err(|e| if e == Error::EmptyClient(0) { Error::EmptyClient(k) } else { e }))
        .collect::<Result<Vec<_>>>()?;

        let next = aggregate_models(&updates, &counts)?;
        let group_risks = aggregate_group_risks(&updates, &counts)?;
        let client_risks = (0..updates.len())
            .map(|k| client_risk(&updates[k].group_risks, &counts, k))
            .collect();
        mu = adversary_step(&mu, &group_risks, config.adversary_lr, config.epsilon)?;
        theta = next;
        traj.push(
            RoundRecord {
                t,
                mu: Some(mu.as_slice().to_vec()),
                lambda: None,
                group_risks,
                client_risks,
            },
            &theta,
        )?;
    }
    Ok(traj.finish(Method::FedMinMax, config, theta))
}

/// Single data holder: gradient step on `sum_a mu_a r_a` over the pooled data,
/// same adversary as the federated version.
pub fn run_centralized_minmax(config: &TrainerConfig, dataset: &Dataset) -> Result<RunReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    config.validate()?;
    config.check_data(dataset.num_classes(), dataset.feature_dim())?;
    let n = dataset.len();
    let per_group = dataset.group_counts();
    if let Some(a) = per_group.iter().position(|&c| c == 0) {
        return Err(Error::MissingGroup(a));
    }
    let rho: Vec<f64> = per_group.iter().map(|&c| c as f64 / n as f64).collect();
    let mut mu = initial_weights(&rho, config.epsilon)?;
    let mut theta = init_params(&config.shape, config.seed);
    let mut traj = Trajectory::new(config);

    for t in 1..=config.rounds {
        // (1/n) sum_i (mu_a / rho_a) l_i == sum_a mu_a r_a
        let w: Vec<f64> = mu.as_slice().iter().zip(&rho).map(|(m, r)| m / r).collect();
        let pass = local_pass(&theta, dataset, &w)?;
        let group_risks: Vec<f64> = pass
            .loss_sums
            .iter()
            .zip(&pass.counts)
            .map(|(&s, &c)| s / c as f64)
            .collect();
        let pooled_risk = pass.loss_sums.iter().sum::<f64>() / n as f64;
        theta.add_scaled(-config.model_lr, &pass.grad)?;
        mu = adversary_step(&mu, &group_risks, config.adversary_lr, config.epsilon)?;
        traj.push(
            RoundRecord {
                t,
                mu: Some(mu.as_slice().to_vec()),
                lambda: None,
                group_risks,
                client_risks: vec![pooled_risk],
            },
            &theta,
        )?;
    }
    Ok(traj.finish(Method::Centralized, config, theta))
}

/// Decorrelated RNG seed for client `k` in round `t`.
fn stream_seed(seed: u64, t: usize, k: usize) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(seed) ^ t as u64) ^ k as u64)
}

/// `local_epochs` of shuffled mini-batch gradient descent on the unweighted
/// local risk, starting from `params`.
fn local_sgd(params: &ParamVector, data: &Dataset, config: &TrainerConfig, rng_seed: u64) -> Result<ParamVector> {
    let n = data.len();
    let batch = config.batch_size.unwrap_or(n).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut theta = params.clone();
    for _ in 0..config.local_epochs {
        // full batch: order only affects rounding, keep sample order
        if batch < n {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let grad = {
                let mut bp = Backprop::new(&theta);
                for &i in chunk {
                    let s = &data.samples()[i];
                    bp.accumulate(&s.x, s.y, 1.0)?;
                }
                bp.finish(chunk.len())
            };
            theta.add_scaled(-config.model_lr, &grad)?;
        }
    }
    Ok(theta)
}

struct LocalTraining {
    params: ParamVector,
    group_risks: Vec<Option<f64>>,
}

fn train_clients(config: &TrainerConfig, partition: &Partition, theta: &ParamVector, t: usize) -> Result<Vec<LocalTraining>> {
    map_indexed(config.execution, partition.clients(), |k, data| {
        Ok(LocalTraining {
            group_risks: local_risks(theta, data)?,
            params: local_sgd(theta, data, config, stream_seed(config.seed, t, k))?,
        })
    })
    .into_iter()
    .collect()
}

fn group_risks_of(local: &[LocalTraining], counts: &CountTable) -> Result<Vec<f64>> {
    let as_updates: Vec<ClientUpdate> = local
        .iter()
        .map(|l| ClientUpdate {
            params: l.params.clone(),
            group_risks: l.group_risks.clone(),
        })
        .collect();
    aggregate_group_risks(&as_updates, counts)
}

/// Federated averaging with local mini-batch epochs.
pub fn run_fedavg(config: &TrainerConfig, partition: &Partition) -> Result<RunReport> {
    let counts = prepare(config, partition)?;
    let weights: Vec<f64> = counts.per_client.iter().map(|&nk| nk as f64 / counts.n as f64).collect();
    let mut theta = init_params(&config.shape, config.seed);
    let mut traj = Trajectory::new(config);

    for t in 1..=config.rounds {
        let local = train_clients(config, partition, &theta, t)?;
        let group_risks = group_risks_of(&local, &counts)?;
        let client_risks = local
            .iter()
            .enumerate()
            .map(|(k, l)| client_risk(&l.group_risks, &counts, k))
            .collect();
        theta = weighted_sum(local.iter().map(|l| &l.params), &weights, &config.shape)?;
        traj.push(
            RoundRecord {
                t,
                mu: None,
                lambda: None,
                group_risks,
                client_risks,
            },
            &theta,
        )?;
    }
    Ok(traj.finish(Method::FedAvg, config, theta))
}

/// Agnostic federated learning over clients: one full-batch local step per
/// round, models averaged with the current client weights, client weights
/// moved by projected gradient ascent on the client risks.
pub fn run_afl(config: &TrainerConfig, partition: &Partition) -> Result<RunReport> {
    let counts = prepare(config, partition)?;
    let client_prior: Vec<f64> = counts.per_client.iter().map(|&nk| nk as f64 / counts.n as f64).collect();
    let mut lambda = initial_weights(&client_prior, config.epsilon)?;
    let ones = vec![1.0; partition.num_groups()];
    let mut theta = init_params(&config.shape, config.seed);
    let mut traj = Trajectory::new(config);

    for t in 1..=config.rounds {
        let updates = map_indexed(config.execution, partition.clients(), |_, data| {
            client_step_minmax(&theta, &ones, data, config.model_lr)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let client_risks: Vec<f64> = (0..updates.len())
            .map(|k| client_risk(&updates[k].group_risks, &counts, k))
            .collect();
        let group_risks = aggregate_group_risks(&updates, &counts)?;
        theta = weighted_sum(updates.iter().map(|u| &u.params), lambda.as_slice(), &config.shape)?;
        lambda = adversary_step(&lambda, &client_risks, config.adversary_lr, config.epsilon)?;
        traj.push(
            RoundRecord {
                t,
                mu: None,
                lambda: Some(lambda.as_slice().to_vec()),
                group_risks,
                client_risks,
            },
            &theta,
        )?;
    }
    Ok(traj.finish(Method::Afl, config, theta))
}

/// Server step of q-FedAvg given the round's starting model, the locally
/// trained client models and their pre-update risks.
pub fn qfedavg_update(theta: &ParamVector, local: &[ParamVector], risks: &[f64], q: f64, lipschitz: f64) -> Result<ParamVector> {
    let mut numer = ParamVector::zeros(theta.shape());
    let mut denom = 0.0;
    for (theta_k, &risk) in local.iter().zip(risks) {
        let f = risk.max(1e-12);
        let mut delta = theta.clone();
        delta.add_scaled(-1.0, theta_k)?;
        delta.scale(lipschitz);
        let fq = f.powf(q);
        denom += q * f.powf(q - 1.0) * delta.norm_sq() + lipschitz * fq;
        numer.add_scaled(fq, &delta)?;
    }
    let mut next = theta.clone();
    next.add_scaled(-1.0 / denom, &numer)?;
    Ok(next)
}

/// q-FedAvg: local epochs as in FedAvg, server update reweighted by the
/// q-th power of each client's risk.
pub fn run_qfedavg(config: &TrainerConfig, partition: &Partition) -> Result<RunReport> {
    let counts = prepare(config, partition)?;
    let lipschitz = config.lipschitz.unwrap_or(1.0 / config.model_lr);
    let mut theta = init_params(&config.shape, config.seed);
    let mut traj = Trajectory::new(config);

    for t in 1..=config.rounds {
        let local = train_clients(config, partition, &theta, t)?;
        let group_risks = group_risks_of(&local, &counts)?;
        let client_risks: Vec<f64> = local
            .iter()
            .enumerate()
            .map(|(k, l)| client_risk(&l.group_risks, &counts, k))
            .collect();
        let models: Vec<ParamVector> = local.into_iter().map(|l| l.params).collect();
        theta = qfedavg_update(&theta, &models, &client_risks, config.q, lipschitz)?;
        traj.push(
            RoundRecord {
                t,
                mu: None,
                lambda: None,
                group_risks,
                client_risks,
            },
            &theta,
        )?;
    }
    Ok(traj.finish(Method::QFedAvg, config, theta))
}

/// Runs `method`; the centralized baseline trains on the pooled partition.
pub fn run_method(method: Method, config: &TrainerConfig, partition: &Partition) -> Result<RunReport> {
    match method {
        Method::FedMinMax => run_fedminmax(config, partition),
        Method::Centralized => run_centralized_minmax(config, &partition.pooled()),
        Method::FedAvg => run_fedavg(config, partition),
        Method::Afl => run_afl(config, partition),
        Method::QFedAvg => run_qfedavg(config, partition),
    }
}
