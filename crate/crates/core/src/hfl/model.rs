//! One-hidden-layer ReLU perceptron with softmax cross-entropy, stored as a
//! flat parameter vector so aggregation is plain vector arithmetic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hfl::data::Dataset;

/// Flat parameter layout: `W1 (hidden×input)`, `b1`, `W2 (classes×hidden)`, `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams(pub Vec<f64>);

impl ModelParams {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

/// Mean loss and accuracy over a set of samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

impl Mlp {
    pub fn new(input: usize, hidden: usize, classes: usize) -> Result<Self> {
        if input == 0 || hidden == 0 || classes < 2 {
            return Err(Error::invalid(
                "network needs positive input and hidden sizes and at least two classes",
            ));
        }
        Ok(Self {
            input,
            hidden,
            classes,
        })
    }

    pub fn n_params(&self) -> usize {
        self.hidden * self.input + self.hidden + self.classes * self.hidden + self.classes
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.input;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.classes * self.hidden;
        (b1, w2, b2)
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases alike.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelParams {
        let (_, w2, _) = self.offsets();
        let a1 = 1.0 / (self.input as f64).sqrt();
        let a2 = 1.0 / (self.hidden as f64).sqrt();
        let params = (0..self.n_params())
            .map(|i| {
                let a = if i < w2 { a1 } else { a2 };
                rng.random_range(-a..=a)
            })
            .collect();
        ModelParams(params)
    }

    /// All-zero parameters: every class receives the same logit.
    pub fn zeros(&self) -> ModelParams {
        ModelParams(vec![0.0; self.n_params()])
    }

    fn check(&self, params: &ModelParams) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        Ok(())
    }

    /// Hidden activations and logits of one sample.
    fn forward(&self, p: &[f64], x: &[f64], hidden: &mut [f64], logits: &mut [f64]) {
        let (b1, w2, b2) = self.offsets();
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &p[j * self.input..(j + 1) * self.input];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + p[b1 + j];
            *h = z.max(0.0);
        }
        for (c, o) in logits.iter_mut().enumerate() {
            let row = &p[w2 + c * self.hidden..w2 + (c + 1) * self.hidden];
            *o = row.iter().zip(hidden.iter()).map(|(w, v)| w * v).sum::<f64>() + p[b2 + c];
        }
    }

    /// Converts logits to probabilities in place and returns `-ln p[label]`.
    fn softmax_loss(logits: &mut [f64], label: usize) -> f64 {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for o in logits.iter_mut() {
            *o = (*o - max).exp();
            total += *o;
        }
        for o in logits.iter_mut() {
            *o /= total;
        }
        -(logits[label].max(f64::MIN_POSITIVE)).ln()
    }

    /// Mean cross-entropy over `batch` and its gradient.
    pub fn loss_and_grad(
        &self,
        params: &ModelParams,
        data: &Dataset,
        batch: &[usize],
    ) -> Result<(f64, Vec<f64>)> {
        self.check(params)?;
        if data.dim != self.input {
            return Err(Error::invalid("dataset dimension does not match the network"));
        }
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let p = &params.0;
        let (b1, w2, b2) = self.offsets();
        let mut grad = vec![0.0; self.n_params()];
        let mut hidden = vec![0.0; self.hidden];
        let mut probs = vec![0.0; self.classes];
        let mut dh = vec![0.0; self.hidden];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for &i in batch {
            let x = data.features(i);
            let y = data.labels[i];
            self.forward(p, x, &mut hidden, &mut probs);
            loss += Self::softmax_loss(&mut probs, y);
            probs[y] -= 1.0;
            dh.iter_mut().for_each(|d| *d = 0.0);
            for (c, &dz) in probs.iter().enumerate() {
                let dz = dz * scale;
                grad[b2 + c] += dz;
                let off = w2 + c * self.hidden;
                for j in 0..self.hidden {
                    grad[off + j] += dz * hidden[j];
                    dh[j] += dz * p[off + j];
                }
            }
            for j in 0..self.hidden {
                if hidden[j] <= 0.0 {
                    continue;
                }
                grad[b1 + j] += dh[j];
                let off = j * self.input;
                for (g, v) in grad[off..off + self.input].iter_mut().zip(x) {
                    *g += dh[j] * v;
                }
            }
        }
        let loss = loss * scale;
        if !loss.is_finite() {
            return Err(Error::numerical("non-finite training loss"));
        }
        Ok((loss, grad))
    }

    /// Mean cross-entropy over `batch`.
    pub fn loss(&self, params: &ModelParams, data: &Dataset, batch: &[usize]) -> Result<f64> {
        self.check(params)?;
        let mut hidden = vec![0.0; self.hidden];
        let mut probs = vec![0.0; self.classes];
        let mut loss = 0.0;
        for &i in batch {
            self.forward(&params.0, data.features(i), &mut hidden, &mut probs);
            loss += Self::softmax_loss(&mut probs, data.labels[i]);
        }
        Ok(loss / batch.len() as f64)
    }

    /// One mini-batch SGD step: `w ← w - η ∇F(w)`. Returns the batch loss.
    pub fn sgd_step(
        &self,
        params: &mut ModelParams,
        data: &Dataset,
        batch: &[usize],
        learning_rate: f64,
    ) -> Result<f64> {
        let (loss, grad) = self.loss_and_grad(params, data, batch)?;
        for (w, g) in params.0.iter_mut().zip(grad) {
            *w -= learning_rate * g;
        }
        Ok(loss)
    }

    pub fn predict(&self, params: &ModelParams, x: &[f64]) -> usize {
        let mut hidden = vec![0.0; self.hidden];
        let mut logits = vec![0.0; self.classes];
        self.forward(&params.0, x, &mut hidden, &mut logits);
        // Ties go to the lowest class index.
        let mut best = 0;
        for (c, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = c;
            }
        }
        best
    }

    /// Accuracy and mean loss over the whole dataset.
    pub fn evaluate(&self, params: &ModelParams, data: &Dataset) -> Result<Evaluation> {
        self.check(params)?;
        if data.is_empty() {
            return Err(Error::invalid("cannot evaluate on an empty dataset"));
        }
        let mut hidden = vec![0.0; self.hidden];
        let mut probs = vec![0.0; self.classes];
        let mut correct = 0usize;
        let mut loss = 0.0;
        for i in 0..data.len() {
            self.forward(&params.0, data.features(i), &mut hidden, &mut probs);
            let mut best = 0;
            for (c, &v) in probs.iter().enumerate() {
                if v > probs[best] {
                    best = c;
                }
            }
            let y = data.labels[i];
            if best == y {
                correct += 1;
            }
            loss += Self::softmax_loss(&mut probs, y);
        }
        let n = data.len() as f64;
        Ok(Evaluation {
            loss: loss / n,
            accuracy: correct as f64 / n,
        })
    }
}

/// Accuracy of `params` on `data`.
pub fn evaluate(model: &Mlp, params: &ModelParams, data: &Dataset) -> Result<f64> {
    Ok(model.evaluate(params, data)?.accuracy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hfl::data::synthetic_blobs;
    use crate::seeding::{rng_for, Stream};

    fn toy() -> (Mlp, Dataset) {
        let data = synthetic_blobs(40, 2, 2, 2.0, 3).unwrap();
        (Mlp::new(2, 2, 2).unwrap(), data)
    }

    #[test]
    fn parameter_count() {
        assert_eq!(Mlp::new(2, 2, 2).unwrap().n_params(), 12);
        assert_eq!(Mlp::new(784, 300, 10).unwrap().n_params(), 238_510);
    }

    #[test]
    fn init_respects_fan_in() {
        let m = Mlp::new(16, 4, 3).unwrap();
        let p = m.init(&mut rng_for(1, Stream::ModelInit, 0));
        let (_, w2, _) = m.offsets();
        assert!(p.0[..w2].iter().all(|x| x.abs() <= 0.25));
        assert!(p.0[w2..].iter().all(|x| x.abs() <= 0.5));
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let (m, d) = toy();
        let mut p = m.init(&mut rng_for(2, Stream::ModelInit, 0));
        let before = p.clone();
        m.sgd_step(&mut p, &d, &[0, 1, 2, 3], 0.0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (m, d) = toy();
        let batch: Vec<usize> = (0..d.len()).collect();
        for seed in 0..5 {
            let p = m.init(&mut rng_for(seed, Stream::ModelInit, 0));
            let (_, grad) = m.loss_and_grad(&p, &d, &batch).unwrap();
            for i in 0..m.n_params() {
                let step = 1e-5;
                let mut plus = p.clone();
                plus.0[i] += step;
                let mut minus = p.clone();
                minus.0[i] -= step;
                let fd = (m.loss(&plus, &d, &batch).unwrap() - m.loss(&minus, &d, &batch).unwrap())
                    / (2.0 * step);
                let denom = grad[i].abs().max(fd.abs()).max(1e-6);
                assert!((grad[i] - fd).abs() / denom < 1e-4, "param {i}: {} vs {fd}", grad[i]);
            }
        }
    }

    #[test]
    fn small_step_descends_on_fixed_batch() {
        let (m, d) = toy();
        let batch: Vec<usize> = (0..d.len()).collect();
        let mut p = m.init(&mut rng_for(9, Stream::ModelInit, 0));
        let before = m.loss(&p, &d, &batch).unwrap();
        m.sgd_step(&mut p, &d, &batch, 1e-3).unwrap();
        assert!(m.loss(&p, &d, &batch).unwrap() < before);
    }

    #[test]
    fn uniform_logits_pick_the_first_class() {
        let d = synthetic_blobs(1000, 4, 10, 1.0, 5).unwrap();
        let m = Mlp::new(4, 3, 10).unwrap();
        let acc = evaluate(&m, &m.zeros(), &d).unwrap();
        assert!((acc - 0.1).abs() <= 0.02, "{acc}");
    }

    #[test]
    fn accuracy_is_a_recount() {
        let d = synthetic_blobs(300, 4, 3, 2.0, 6).unwrap();
        let m = Mlp::new(4, 5, 3).unwrap();
        let p = m.init(&mut rng_for(6, Stream::ModelInit, 0));
        let manual = (0..d.len())
            .filter(|&i| m.predict(&p, d.features(i)) == d.labels[i])
            .count() as f64
            / d.len() as f64;
        assert_eq!(evaluate(&m, &p, &d).unwrap(), manual);
    }

    #[test]
    fn memorizer_scores_perfectly() {
        // Two separable points: hidden unit j copies input j and the output
        // layer reads the larger one.
        let d = Dataset::new(vec![1.0, 0.0, 0.0, 1.0], vec![0, 1], 2, 2).unwrap();
        let m = Mlp::new(2, 2, 2).unwrap();
        let p = ModelParams(vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(evaluate(&m, &p, &d).unwrap(), 1.0);
    }
}
