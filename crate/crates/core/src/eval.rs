//! Group risk and accuracy evaluation, cross-validation, and closed-form
//! risks for the synthetic two-group task.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Partition, SyntheticParams};
use crate::error::{Error, Result};
use crate::numerics::{argmax, Backprop, ParamVector};
use crate::parallel::{map_indexed, Execution};

/// Per-group mean Brier risk and argmax accuracy of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEvaluation {
    pub risks: Vec<f64>,
    pub accuracies: Vec<f64>,
}

pub fn evaluate_groups(model: &ParamVector, dataset: &Dataset) -> Result<GroupEvaluation> {
    let g = dataset.num_groups();
    let mut loss = vec![0.0; g];
    let mut hits = vec![0usize; g];
    let mut counts = vec![0usize; g];
    let mut bp = Backprop::new(model);
    for s in dataset.samples() {
        loss[s.a] += bp.loss(&s.x, s.y)?;
        hits[s.a] += usize::from(argmax(bp.probs()) == s.y);
        counts[s.a] += 1;
    }
    if let Some(a) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingGroup(a));
    }
    Ok(GroupEvaluation {
        risks: loss.iter().zip(&counts).map(|(l, &c)| l / c as f64).collect(),
        accuracies: hits.iter().zip(&counts).map(|(&h, &c)| h as f64 / c as f64).collect(),
    })
}

/// Empirical mean Brier loss per group.
pub fn group_risks(model: &ParamVector, dataset: &Dataset) -> Result<Vec<f64>> {
    let g = dataset.num_groups();
    let mut loss = vec![0.0; g];
    let mut counts = vec![0usize; g];
    let mut bp = Backprop::new(model);
    for s in dataset.samples() {
        loss[s.a] += bp.loss(&s.x, s.y)?;
        counts[s.a] += 1;
    }
    if let Some(a) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingGroup(a));
    }
    Ok(loss.iter().zip(&counts).map(|(l, &c)| l / c as f64).collect())
}

/// Unweighted mean Brier loss on each client's data.
pub fn client_risks(model: &ParamVector, partition: &Partition) -> Result<Vec<f64>> {
    partition
        .clients()
        .iter()
        .map(|c| {
            let mut bp = Backprop::new(model);
            let mut total = 0.0;
            for s in c.samples() {
                total += bp.loss(&s.x, s.y)?;
            }
            Ok(total / c.len() as f64)
        })
        .collect()
}

/// `(argmax, argmin)` of the risks, ties to the lower index.
pub fn worst_and_best(risks: &[f64]) -> (usize, usize) {
    let mut worst = 0;
    let mut best = 0;
    for (i, &r) in risks.iter().enumerate().skip(1) {
        if r > risks[worst] {
            worst = i;
        }
        if r < risks[best] {
            best = i;
        }
    }
    (worst, best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Risk summary across one or more evaluation runs (folds x seeds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub group_risk: Vec<Stat>,
    pub group_accuracy: Vec<Stat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub client_risk: Option<Vec<f64>>,
    /// Group with the highest mean risk.
    pub worst_group: usize,
    /// Per-run maximum group risk.
    pub worst_risk: Stat,
    pub best_group: usize,
    /// Per-run minimum group risk.
    pub best_risk: Stat,
    pub runs: usize,
}

impl RiskTable {
    pub fn from_evaluations(evals: &[GroupEvaluation]) -> Self {
        let g = evals[0].risks.len();
        let column = |f: &dyn Fn(&GroupEvaluation) -> f64| -> Stat { Stat::of(&evals.iter().map(f).collect::<Vec<_>>()) };
        let group_risk: Vec<Stat> = (0..g).map(|a| column(&|e| e.risks[a])).collect();
        let group_accuracy = (0..g).map(|a| column(&|e| e.accuracies[a])).collect();
        let means: Vec<f64> = group_risk.iter().map(|s| s.mean).collect();
        let (worst_group, best_group) = worst_and_best(&means);
        let worst_risk = column(&|e| e.risks.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        let best_risk = column(&|e| e.risks.iter().cloned().fold(f64::INFINITY, f64::min));
        Self {
            group_risk,
            group_accuracy,
            client_risk: None,
            worst_group,
            worst_risk,
            best_group,
            best_risk,
            runs: evals.len(),
        }
    }
}

/// Group-stratified fold assignment: group `a`'s samples are shuffled and
/// dealt round-robin over the folds.
pub fn stratified_folds(dataset: &Dataset, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("folds must be >= 2, got {folds}")));
    }
    let counts = dataset.group_counts();
    if counts.iter().any(|&c| c < folds) {
        return Err(Error::InfeasibleFold {
            fold_size: dataset.len() / folds,
            groups: dataset.num_groups(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for a in 0..dataset.num_groups() {
        let mut idx: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.samples()[i].a == a).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            out[next % folds].push(i);
            next += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// For every seed (in ascending order) and fold: train with
/// `runner(train_split, seed)` and evaluate on the held-out fold.
pub fn cross_validate<F>(runner: F, dataset: &Dataset, folds: usize, seeds: &[u64], execution: Execution) -> Result<RiskTable>
where
    F: Fn(&Dataset, u64) -> Result<ParamVector> + Sync + Send,
{
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    let mut jobs = Vec::new();
    for &seed in &seeds {
        let split = stratified_folds(dataset, folds, seed)?;
        for f in 0..folds {
            let train: Vec<usize> = (0..folds).filter(|&o| o != f).flat_map(|o| split[o].iter().copied()).collect();
            jobs.push((seed, train, split[f].clone()));
        }
    }
    let evals = map_indexed(execution, &jobs, |_, (seed, train, test)| {
        let model = runner(&dataset.select(train), *seed)?;
        evaluate_groups(&model, &dataset.select(test))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(RiskTable::from_evaluations(&evals))
}

/// Expected Brier risk per group of the predictor that outputs class-1
/// probability `q_low` for `x <= 0` and `q_high` for `x > 0`.
pub fn analytic_synthetic_risks(params: &SyntheticParams, q_low: f64, q_high: f64) -> [f64; 2] {
    // a binary predictor q against a Bernoulli(u) target has expected loss 2[(q-u)^2 + u(1-u)]
    let region = |q: f64, u: f64| 2.0 * ((q - u) * (q - u) + u * (1.0 - u));
    let risk = |a: usize| {
        let (low, high) = params.rates(a);
        0.5 * region(q_low, low) + 0.5 * region(q_high, high)
    };
    [risk(0), risk(1)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimaxSolution {
    pub q_low: f64,
    pub q_high: f64,
    pub risk: f64,
}

/// Grid search for the region-constant predictor minimizing the worst group risk.
pub fn minimax_oracle(params: &SyntheticParams, resolution: usize) -> Result<MinimaxSolution> {
    if resolution < 100 {
        return Err(Error::InvalidInput(format!("resolution must be >= 100, got {resolution}")));
    }
    let step = 1.0 / resolution as f64;
    let mut best = MinimaxSolution {
        q_low: 0.0,
        q_high: 0.0,
        risk: f64::INFINITY,
    };
    for i in 0..=resolution {
        for j in 0..=resolution {
            let (ql, qh) = (i as f64 * step, j as f64 * step);
            let [r0, r1] = analytic_synthetic_risks(params, ql, qh);
            let worst = r0.max(r1);
            if worst < best.risk {
                best = MinimaxSolution {
                    q_low: ql,
                    q_high: qh,
                    risk: worst,
                };
            }
        }
    }
    Ok(best)
}

/// Region-constant predictor minimizing the pooled risk (each group weighted 1/2).
pub fn pooled_optimum(params: &SyntheticParams) -> (f64, f64) {
    (
        0.5 * (params.u0_low + params.u1_low),
        0.5 * (params.u0_high + params.u1_high),
    )
}
