//! Euclidean projection onto the probability simplex and onto the subset whose
//! coordinates are all at least `epsilon`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the simplex with every coordinate `>= epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupWeights {
    mu: Vec<f64>,
    epsilon: f64,
}

impl GroupWeights {
    /// Validates an existing weight vector.
    pub fn new(mu: Vec<f64>, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon, mu.len())?;
        let sum: f64 = mu.iter().sum();
        if mu.is_empty() || (sum - 1.0).abs() > 1e-9 || mu.iter().any(|&m| !(m >= epsilon - 1e-12)) {
            return Err(Error::InvalidInput(format!(
                "{mu:?} is not on the simplex restricted to >= {epsilon}"
            )));
        }
        Ok(Self { mu, epsilon })
    }

    pub fn uniform(dim: usize) -> Self {
        Self {
            mu: vec![1.0 / dim as f64; dim],
            epsilon: 0.0,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mu
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.mu
    }
}

fn check_epsilon(epsilon: f64, dim: usize) -> Result<()> {
    if !(epsilon >= 0.0) || epsilon * dim as f64 > 1.0 + 1e-12 {
        return Err(Error::InfeasibleEpsilon { epsilon, dim });
    }
    Ok(())
}

fn check_input(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidInput("cannot project an empty vector".into()));
    }
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite coordinate {bad}")));
    }
    Ok(())
}

/// Sort-and-threshold projection: `argmin_{u in simplex} |u - v|`.
pub fn project_simplex(v: &[f64]) -> Result<GroupWeights> {
    check_input(v)?;
    Ok(GroupWeights {
        mu: project_raw(v),
        epsilon: 0.0,
    })
}

fn project_raw(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    // descending by value, ties by index
    order.sort_by(|&i, &j| v[j].total_cmp(&v[i]).then(i.cmp(&j)));

    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        cumsum += v[i];
        let candidate = (cumsum - 1.0) / (rank + 1) as f64;
        if v[i] - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projection onto `{u in simplex : u_i >= epsilon}` through the affine map
/// `u = epsilon + (1 - d * epsilon) * P((v - epsilon) / (1 - d * epsilon))`.
pub fn project_simplex_eps(v: &[f64], epsilon: f64) -> Result<GroupWeights> {
    check_input(v)?;
    check_epsilon(epsilon, v.len())?;
    if epsilon == 0.0 {
        return project_simplex(v);
    }
    let d = v.len() as f64;
    let scale = 1.0 - d * epsilon;
    if scale <= 0.0 {
        // the feasible set is the single point epsilon * 1
        return Ok(GroupWeights {
            mu: vec![1.0 / d; v.len()],
            epsilon,
        });
    }
    let shifted: Vec<f64> = v.iter().map(|&x| (x - epsilon) / scale).collect();
    let mu = project_raw(&shifted)
        .into_iter()
        .map(|p| epsilon + scale * p)
        .collect();
    Ok(GroupWeights { mu, epsilon })
}
