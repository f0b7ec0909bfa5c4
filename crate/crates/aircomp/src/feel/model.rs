//! Multinomial logistic regression with minibatch SGD.
//!
//! The learning task is deliberately small: the aggregation pipeline is
//! model-agnostic, so a linear softmax classifier stands in for a large
//! network while keeping every gradient analytically checkable.

use crate::error::{Error, Result};
use crate::feel::data::DeviceShard;
use crate::scalar::Real;
use crate::seed;

/// Linear softmax classifier. Weights are stored class-major (`class *
/// feature_dim + feature`) with the per-class biases at the tail, so the
/// parameter vector has `feature_dim * classes + classes` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub weights: Vec<T>,
    pub feature_dim: usize,
    pub classes: usize,
}

impl<T: Real> Model<T> {
    pub fn zeros(feature_dim: usize, classes: usize) -> Self {
        Self {
            weights: vec![T::zero(); feature_dim * classes + classes],
            feature_dim,
            classes,
        }
    }

    /// Total parameter count `W`.
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn logits_into(&self, x: &[T], out: &mut [T]) {
        let f = self.feature_dim;
        for (c, logit) in out.iter_mut().enumerate() {
            let row = &self.weights[c * f..(c + 1) * f];
            let mut acc = self.weights[self.classes * f + c];
            for (w, &xv) in row.iter().zip(x) {
                acc = acc + *w * xv;
            }
            *logit = acc;
        }
    }

    /// Predicted class: argmax of the logits, ties to the lowest index.
    pub fn predict(&self, x: &[T]) -> usize {
        let mut logits = vec![T::zero(); self.classes];
        self.logits_into(x, &mut logits);
        let mut best = 0usize;
        for c in 1..self.classes {
            if logits[c] > logits[best] {
                best = c;
            }
        }
        best
    }

    /// Mean cross-entropy loss over the given rows.
    pub fn loss(&self, features: &[T], labels: &[usize]) -> T {
        let f = self.feature_dim;
        let n = labels.len();
        let mut logits = vec![T::zero(); self.classes];
        let mut total = T::zero();
        for (i, &y) in labels.iter().enumerate() {
            self.logits_into(&features[i * f..(i + 1) * f], &mut logits);
            let max = logits
                .iter()
                .cloned()
                .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
            let log_z = logits
                .iter()
                .map(|&v| (v - max).exp())
                .fold(T::zero(), |a, b| a + b)
                .ln()
                + max;
            total = total + (log_z - logits[y]);
        }
        total / T::from_f64_lossy(n as f64)
    }

    /// Mean cross-entropy gradient over the given rows, accumulated into
    /// `grad` (same layout as `weights`).
    pub fn grad_into(&self, features: &[T], labels: &[usize], grad: &mut [T]) {
        let f = self.feature_dim;
        let n = labels.len();
        grad.iter_mut().for_each(|g| *g = T::zero());
        let mut logits = vec![T::zero(); self.classes];
        let inv_n = T::one() / T::from_f64_lossy(n as f64);
        for (i, &y) in labels.iter().enumerate() {
            let x = &features[i * f..(i + 1) * f];
            self.logits_into(x, &mut logits);
            let max = logits
                .iter()
                .cloned()
                .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
            let mut z = T::zero();
            for v in logits.iter_mut() {
                *v = (*v - max).exp();
                z = z + *v;
            }
            for c in 0..self.classes {
                let mut p = logits[c] / z;
                if c == y {
                    p = p - T::one();
                }
                let p = p * inv_n;
                for (g, &xv) in grad[c * f..(c + 1) * f].iter_mut().zip(x) {
                    *g = *g + p * xv;
                }
                grad[self.classes * f + c] = grad[self.classes * f + c] + p;
            }
        }
    }

    /// Fraction of argmax-correct predictions on a test set.
    pub fn evaluate(&self, features: &[T], labels: &[usize]) -> f64 {
        let f = self.feature_dim;
        let correct = labels
            .iter()
            .enumerate()
            .filter(|(i, &y)| self.predict(&features[i * f..(i + 1) * f]) == y)
            .count();
        correct as f64 / labels.len() as f64
    }
}

/// Run `steps` gradient steps `w <- w - eta * grad_fn(w, step)` and return
/// the final point. Factored out of `local_train` so the update rule can be
/// exercised against analytic stubs.
pub fn sgd_steps<T: Real>(
    w0: &[T],
    eta: T,
    steps: usize,
    mut grad_fn: impl FnMut(&[T], usize) -> Vec<T>,
) -> Vec<T> {
    let mut w = w0.to_vec();
    for step in 0..steps {
        let g = grad_fn(&w, step);
        for (wi, gi) in w.iter_mut().zip(g) {
            *wi = *wi - eta * gi;
        }
    }
    w
}

/// Local training: `local_iters` minibatch SGD steps on the shard starting
/// from the broadcast weights; returns the local model update
/// `delta = w_final - w_broadcast`.
pub fn local_train<T: Real>(
    model: &Model<T>,
    shard: &DeviceShard<T>,
    eta_l: f64,
    local_iters: usize,
    batch: usize,
    master_seed: u64,
) -> Result<Vec<T>> {
    if shard.labels.is_empty() {
        return Err(Error::EmptyShard);
    }
    if eta_l <= 0.0 || local_iters == 0 {
        return Err(Error::InvalidParameter {
            name: "local training",
            reason: format!("eta_l={eta_l}, local_iters={local_iters}"),
        });
    }
    let f = model.feature_dim;
    let n = shard.labels.len();
    let batch = batch.max(1).min(n);
    let mut rng = seed::rng_for(master_seed, "minibatch", 0);
    let mut scratch = Model {
        weights: model.weights.clone(),
        feature_dim: f,
        classes: model.classes,
    };
    let mut grad = vec![T::zero(); model.dim()];
    let mut bx = vec![T::zero(); batch * f];
    let mut by = vec![0usize; batch];
    let eta = T::from_f64_lossy(eta_l);
    for _ in 0..local_iters {
        if batch == n {
            bx.copy_from_slice(&shard.features);
            by.copy_from_slice(&shard.labels);
        } else {
            for (slot, idx) in rand::seq::index::sample(&mut rng, n, batch)
                .into_iter()
                .enumerate()
            {
                bx[slot * f..(slot + 1) * f].copy_from_slice(&shard.features[idx * f..(idx + 1) * f]);
                by[slot] = shard.labels[idx];
            }
        }
        scratch.grad_into(&bx, &by, &mut grad);
        for (w, &g) in scratch.weights.iter_mut().zip(&grad) {
            *w = *w - eta * g;
        }
    }
    Ok(scratch
        .weights
        .iter()
        .zip(&model.weights)
        .map(|(&wf, &w0)| wf - w0)
        .collect())
}
