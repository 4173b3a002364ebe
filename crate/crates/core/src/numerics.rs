//! Dense multilayer perceptron with a softmax head, the Brier score, and
//! exact backpropagation.
//!
//! Parameters live in one flat `Vec<f64>`. Each dense layer is stored as its
//! row-major weight matrix (`fan_out` rows of `fan_in` entries) followed by its
//! `fan_out` biases, layers in input-to-output order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer sizes: input dimension, hidden widths, class count.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    sizes: Vec<usize>,
}

impl Shape {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidShape(format!(
                "need at least an input and an output size, got {sizes:?}"
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidShape(format!("zero-sized layer in {sizes:?}")));
        }
        if *sizes.last().unwrap() < 2 {
            return Err(Error::InvalidShape(format!(
                "class count must be >= 2, got {sizes:?}"
            )));
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// `(fan_in, fan_out)` for each dense layer.
    pub fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.sizes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|(i, o)| (i + 1) * o).sum()
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Shape::new(sizes)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(s: Shape) -> Self {
        s.sizes
    }
}

/// Flat model parameters together with the shape they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    shape: Shape,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(shape: &Shape) -> Self {
        Self {
            values: vec![0.0; shape.param_count()],
            shape: shape.clone(),
        }
    }

    pub fn from_values(shape: &Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.param_count() {
            return Err(Error::InvalidShape(format!(
                "expected {} parameters for {:?}, got {}",
                shape.param_count(),
                shape.sizes(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        Ok(Self {
            shape: shape.clone(),
            values,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn check_same_shape(&self, other: &ParamVector) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::InvalidShape(format!(
                "{:?} vs {:?}",
                self.shape.sizes(),
                other.shape.sizes()
            )));
        }
        Ok(())
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &ParamVector) -> Result<()> {
        self.check_same_shape(other)?;
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += alpha * o;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Little-endian bytes of every value, in storage order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Class probabilities produced by the softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInput(format!("not a probability vector: {probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("probabilities sum to {sum}")));
        }
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// Most probable class; ties go to the lower index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate().skip(1) {
        if p > v[best] {
            best = i;
        }
    }
    best
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(shape: &Shape, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(shape.param_count());
    for (fan_in, fan_out) in shape.layers() {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        values.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)));
        values.extend(std::iter::repeat_n(0.0, fan_out));
    }
    ParamVector {
        shape: shape.clone(),
        values,
    }
}

/// Sum over classes of the squared gap between `p` and the one-hot target.
pub fn brier_loss(p: &ProbVector, y: usize) -> Result<f64> {
    brier(p.probs(), y)
}

fn brier(p: &[f64], y: usize) -> Result<f64> {
    if y >= p.len() {
        return Err(Error::InvalidLabel {
            label: y,
            classes: p.len(),
        });
    }
    Ok(p
        .iter()
        .enumerate()
        .map(|(c, &pc)| {
            let d = pc - if c == y { 1.0 } else { 0.0 };
            d * d
        })
        .sum())
}

pub fn forward(params: &ParamVector, x: &[f64]) -> Result<ProbVector> {
    let mut net = Backprop::new(params);
    net.forward(x)?;
    Ok(ProbVector(net.acts.last().unwrap().clone()))
}

/// One training example with its loss weight.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSample<'a> {
    pub x: &'a [f64],
    pub y: usize,
    pub weight: f64,
}

/// Gradient of `(1/n) * sum_i weight_i * brier(forward(x_i), y_i)`.
pub fn weighted_gradient(params: &ParamVector, samples: &[WeightedSample<'_>]) -> Result<ParamVector> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut bp = Backprop::new(params);
    for s in samples {
        if !s.weight.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite sample weight {}", s.weight)));
        }
        bp.accumulate(s.x, s.y, s.weight)?;
    }
    Ok(bp.finish(samples.len()))
}

/// Weighted mean loss, the objective whose gradient `weighted_gradient` returns.
pub fn weighted_loss(params: &ParamVector, samples: &[WeightedSample<'_>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut bp = Backprop::new(params);
    let mut total = 0.0;
    for s in samples {
        total += s.weight * bp.loss(s.x, s.y)?;
    }
    Ok(total / samples.len() as f64)
}

/// Max over coordinates of `|analytic - numeric| / max(1, |analytic|)` using
/// central differences with step `epsilon`.
pub fn finite_diff_check(params: &ParamVector, samples: &[WeightedSample<'_>], epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let analytic = weighted_gradient(params, samples)?;
    let mut probe = params.clone();
    let mut worst = 0.0_f64;
    for i in 0..params.len() {
        let orig = params.values[i];
        probe.values[i] = orig + epsilon;
        let up = weighted_loss(&probe, samples)?;
        probe.values[i] = orig - epsilon;
        let down = weighted_loss(&probe, samples)?;
        probe.values[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let a = analytic.values[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

/// Reusable forward/backward workspace that accumulates weighted per-sample
/// gradients in call order.
pub struct Backprop<'p> {
    params: &'p ParamVector,
    offsets: Vec<usize>,
    // acts[0] is the input, acts[l + 1] the output of layer l (softmax for the last)
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    grad: Vec<f64>,
}

impl<'p> Backprop<'p> {
    pub fn new(params: &'p ParamVector) -> Self {
        let sizes = params.shape.sizes();
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut off = 0;
        for (i, o) in params.shape.layers() {
            offsets.push(off);
            off += (i + 1) * o;
        }
        let widest = *sizes.iter().max().unwrap();
        Self {
            params,
            offsets,
            acts: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            delta: Vec::with_capacity(widest),
            delta_prev: Vec::with_capacity(widest),
            grad: vec![0.0; params.len()],
        }
    }

    fn forward(&mut self, x: &[f64]) -> Result<()> {
        let shape = &self.params.shape;
        if x.len() != shape.input_dim() {
            return Err(Error::InvalidShape(format!(
                "feature vector has length {}, model expects {}",
                x.len(),
                shape.input_dim()
            )));
        }
        self.acts[0].copy_from_slice(x);
        let n_layers = self.offsets.len();
        let v = &self.params.values;
        for (l, (fan_in, fan_out)) in shape.layers().enumerate() {
            let (head, tail) = self.acts.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            let w = &v[self.offsets[l]..self.offsets[l] + fan_in * fan_out];
            let b = &v[self.offsets[l] + fan_in * fan_out..self.offsets[l] + (fan_in + 1) * fan_out];
            for (o, z) in out.iter_mut().enumerate() {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let mut acc = b[o];
                for (wi, ai) in row.iter().zip(input) {
                    acc += wi * ai;
                }
                *z = if l + 1 < n_layers { acc.max(0.0) } else { acc };
            }
        }
        softmax_in_place(self.acts.last_mut().unwrap());
        Ok(())
    }

    /// Loss of one sample without touching the gradient.
    pub fn loss(&mut self, x: &[f64], y: usize) -> Result<f64> {
        self.forward(x)?;
        brier(self.acts.last().unwrap(), y)
    }

    /// Class probabilities from the most recent forward pass.
    pub fn probs(&self) -> &[f64] {
        self.acts.last().unwrap()
    }

    /// Adds `weight * grad brier(forward(x), y)` to the running sum and
    /// returns the unweighted loss.
    pub fn accumulate(&mut self, x: &[f64], y: usize, weight: f64) -> Result<f64> {
        let loss = self.loss(x, y)?;
        if weight == 0.0 {
            return Ok(loss);
        }
        let p = self.acts.last().unwrap();
        // dL/dp_c = 2 (p_c - t_c); through softmax dL/dz_j = p_j (g_j - <p, g>)
        self.delta.clear();
        self.delta
            .extend(p.iter().enumerate().map(|(c, &pc)| 2.0 * (pc - if c == y { 1.0 } else { 0.0 })));
        let pg: f64 = p.iter().zip(&self.delta).map(|(a, b)| a * b).sum();
        for (d, &pc) in self.delta.iter_mut().zip(p) {
            *d = weight * pc * (*d - pg);
        }

        let v = &self.params.values;
        let layers: Vec<(usize, usize)> = self.params.shape.layers().collect();
        for l in (0..layers.len()).rev() {
            let (fan_in, fan_out) = layers[l];
            let off = self.offsets[l];
            let input = &self.acts[l];
            let (gw, gb) = self.grad[off..off + (fan_in + 1) * fan_out].split_at_mut(fan_in * fan_out);
            for (o, &d) in self.delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (g, &a) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(input) {
                    *g += d * a;
                }
                gb[o] += d;
            }
            if l == 0 {
                break;
            }
            let w = &v[off..off + fan_in * fan_out];
            self.delta_prev.clear();
            self.delta_prev.resize(fan_in, 0.0);
            for (o, &d) in self.delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (dp, &wi) in self.delta_prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                    *dp += wi * d;
                }
            }
            for (dp, &a) in self.delta_prev.iter_mut().zip(input) {
                if a <= 0.0 {
                    *dp = 0.0;
                }
            }
            std::mem::swap(&mut self.delta, &mut self.delta_prev);
        }
        Ok(loss)
    }

    /// Gradient sum divided by `n`.
    pub fn finish(self, n: usize) -> ParamVector {
        let inv = 1.0 / n as f64;
        ParamVector {
            shape: self.params.shape.clone(),
            values: self.grad.into_iter().map(|g| g * inv).collect(),
        }
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn shape(s: &[usize]) -> Shape {
        Shape::new(s.to_vec()).unwrap()
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let s = shape(&[1, 4, 2]);
        let a = init_params(&s, 7);
        assert_eq!(a, init_params(&s, 7));
        assert_ne!(a, init_params(&s, 8));
        // layer 0: 4 weights then 4 biases; layer 1: 8 weights then 2 biases
        assert!(a.values()[4..8].iter().all(|&b| b == 0.0));
        assert!(a.values()[16..18].iter().all(|&b| b == 0.0));
        let bound0 = (6.0f64 / 5.0).sqrt();
        assert!(a.values()[..4].iter().all(|w| w.abs() <= bound0));
    }

    #[test]
    fn param_count_of_wide_mlp() {
        // 2*512 + 3*(513*512) + 513*2
        assert_eq!(shape(&[1, 512, 512, 512, 512, 2]).param_count(), 790_018);
        assert_eq!(init_params(&shape(&[1, 512, 512, 512, 512, 2]), 3).len(), 790_018);
    }

    #[test]
    fn zero_sized_layer_rejected() {
        assert!(matches!(Shape::new(vec![1, 0, 2]), Err(Error::InvalidShape(_))));
        assert!(matches!(Shape::new(vec![3]), Err(Error::InvalidShape(_))));
        assert!(matches!(Shape::new(vec![3, 1]), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn zero_params_give_uniform_output() {
        let s = shape(&[3, 5, 2]);
        let p = forward(&ParamVector::zeros(&s), &[0.3, -2.0, 9.0]).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn forward_matches_hand_computation() {
        // single affine layer 1 -> 2: z = [2x + 0.5, -x], x = 1 -> z = [2.5, -1]
        let s = shape(&[1, 2]);
        let p = ParamVector::from_values(&s, vec![2.0, -1.0, 0.5, 0.0]).unwrap();
        let out = forward(&p, &[1.0]).unwrap();
        let e0 = 2.5f64.exp();
        let e1 = (-1.0f64).exp();
        assert!((out.probs()[0] - e0 / (e0 + e1)).abs() < 1e-15);
        assert!((out.probs()[1] - e1 / (e0 + e1)).abs() < 1e-15);

        // one hidden ReLU unit: h = relu(x - 2) = 0 at x = 1, logits = biases
        let s = shape(&[1, 1, 2]);
        let p = ParamVector::from_values(&s, vec![1.0, -2.0, 3.0, 3.0, 1.0, 0.0]).unwrap();
        let out = forward(&p, &[1.0]).unwrap();
        let e = 1.0f64.exp();
        assert!((out.probs()[0] - e / (e + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        let s = shape(&[2, 2]);
        assert!(matches!(
            forward(&ParamVector::zeros(&s), &[1.0]),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn brier_examples() {
        let onehot = ProbVector::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(brier_loss(&onehot, 1).unwrap(), 0.0);
        let half = ProbVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(brier_loss(&half, 1).unwrap(), 0.5);
        assert!(matches!(
            brier_loss(&half, 2),
            Err(Error::InvalidLabel { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn brier_expectation_for_bernoulli_target() {
        // E[(q - y)^2 + ((1 - q) - (1 - y))^2] = 2[(q - p)^2 + p(1 - p)]
        for &(q, p) in &[(0.3, 0.6), (0.9, 0.1), (0.5, 0.5), (0.0, 1.0)] {
            let pred = ProbVector::new(vec![1.0 - q, q]).unwrap();
            let expected = p * brier_loss(&pred, 1).unwrap() + (1.0 - p) * brier_loss(&pred, 0).unwrap();
            let closed: f64 = 2.0 * ((q - p) * (q - p) + p * (1.0 - p));
            assert!((expected - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_give_zero_gradient() {
        let s = shape(&[2, 3, 2]);
        let p = init_params(&s, 1);
        let xs = [[0.1, 0.2], [-0.5, 1.0]];
        let batch: Vec<_> = xs
            .iter()
            .map(|x| WeightedSample { x, y: 1, weight: 0.0 })
            .collect();
        let g = weighted_gradient(&p, &batch).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        assert_eq!(finite_diff_check(&p, &batch, 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn doubling_the_weight_doubles_the_gradient() {
        let s = shape(&[1, 4, 2]);
        let p = init_params(&s, 5);
        let x = [0.7];
        let g1 = weighted_gradient(&p, &[WeightedSample { x: &x, y: 0, weight: 1.0 }]).unwrap();
        let g2 = weighted_gradient(&p, &[WeightedSample { x: &x, y: 0, weight: 2.0 }]).unwrap();
        for (a, b) in g1.values().iter().zip(g2.values()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        let p = init_params(&shape(&[1, 2]), 0);
        assert_eq!(weighted_gradient(&p, &[]), Err(Error::EmptyBatch));
    }

    #[test]
    fn tiny_net_passes_finite_differences() {
        let s = shape(&[1, 2, 2]);
        let p = init_params(&s, 11);
        let xs = [[-1.0], [-0.2], [0.4], [1.3]];
        let batch: Vec<_> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| WeightedSample { x, y: i % 2, weight: 1.0 })
            .collect();
        let err = finite_diff_check(&p, &batch, 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
        assert_eq!(err, finite_diff_check(&p, &batch, 1e-5).unwrap());
    }

    fn random_batch(rng: &mut ChaCha8Rng, dim: usize, classes: usize, n: usize) -> Vec<(Vec<f64>, usize, f64)> {
        (0..n)
            .map(|_| {
                (
                    (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
                    rng.random_range(0..classes),
                    rng.random_range(0.0..3.0),
                )
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn forward_output_on_simplex(seed in any::<u64>(), x in prop::collection::vec(-50.0f64..50.0, 3)) {
            let p = init_params(&shape(&[3, 6, 4, 5]), seed);
            let out = forward(&p, &x).unwrap();
            let sum: f64 = out.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(out.probs().iter().all(|&v| v >= 0.0));
            let loss = brier_loss(&out, 2).unwrap();
            prop_assert!((0.0..=2.0).contains(&loss));
        }

        #[test]
        fn gradient_is_linear_in_weights(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = init_params(&shape(&[2, 5, 3]), seed);
            let data = random_batch(&mut rng, 2, 3, 6);
            let other: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..3.0)).collect();
            let mk = |ws: &dyn Fn(usize) -> f64| -> Vec<WeightedSample<'_>> {
                data.iter().enumerate().map(|(i, (x, y, _))| WeightedSample { x, y: *y, weight: ws(i) }).collect()
            };
            let ga = weighted_gradient(&p, &mk(&|i| data[i].2)).unwrap();
            let gb = weighted_gradient(&p, &mk(&|i| other[i])).unwrap();
            let gc = weighted_gradient(&p, &mk(&|i| alpha * data[i].2 + beta * other[i])).unwrap();
            for ((a, b), c) in ga.values().iter().zip(gb.values()).zip(gc.values()) {
                prop_assert!((alpha * a + beta * b - c).abs() < 1e-12);
            }
        }

        #[test]
        fn random_nets_pass_finite_differences(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dim = rng.random_range(1..4);
            let hidden = rng.random_range(1..8);
            let classes = rng.random_range(2..5);
            // random biases too: with zero biases a dead layer feeds exact zeros
            // into the next ReLU, where central differences straddle the kink
            let s = shape(&[dim, hidden, hidden, classes]);
            let values = (0..s.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = ParamVector::from_values(&s, values).unwrap();
            let data = random_batch(&mut rng, dim, classes, 5);
            let batch: Vec<_> = data.iter().map(|(x, y, w)| WeightedSample { x, y: *y, weight: *w }).collect();
            prop_assert!(finite_diff_check(&p, &batch, 1e-5).unwrap() < 1e-4);
        }
    }
}
