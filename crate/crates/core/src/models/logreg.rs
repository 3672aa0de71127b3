use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use crate::error::{Error, Result};
use crate::rng::SeedStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogregParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// `None` trains full-batch, which makes the fit independent of the seed.
    pub batch_size: Option<usize>,
}

impl Default for LogregParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 300,
            l2: 1e-3,
            batch_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegressionHead {
    weights: Vec<f64>,
    bias: f64,
}

impl LogisticRegressionHead {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub(super) fn validate(&self, width: usize) -> bool {
        self.weights.len() == width
            && self.bias.is_finite()
            && self.weights.iter().all(|w| w.is_finite())
    }

    /// Gradient descent on the L2-penalized log loss, starting from zero weights.
    pub(super) fn fit(
        x: &[f64],
        width: usize,
        labels: &[u8],
        params: &LogregParams,
        stream: SeedStream,
    ) -> Result<Self> {
        let n = labels.len();
        let mut head = Self::new(vec![0.0; width], 0.0);
        let mut order: Vec<usize> = (0..n).collect();
        let batch = params.batch_size.unwrap_or(n).clamp(1, n);
        let mut rng = stream.fork("logreg").rng();
        let mut grad = vec![0.0; width];
        for epoch in 0..params.epochs {
            if params.batch_size.is_some() {
                order.shuffle(&mut rng);
            }
            let mut loss = 0.0;
            for chunk in order.chunks(batch) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let mut grad_b = 0.0;
                for &i in chunk {
                    let row = &x[i * width..(i + 1) * width];
                    let p = head.predict(row);
                    let y = f64::from(labels[i]);
                    loss -= y * p.max(1e-15).ln() + (1.0 - y) * (1.0 - p).max(1e-15).ln();
                    let r = p - y;
                    for (g, v) in grad.iter_mut().zip(row) {
                        *g += r * v;
                    }
                    grad_b += r;
                }
                let m = chunk.len() as f64;
                for (w, g) in head.weights.iter_mut().zip(&grad) {
                    *w -= params.learning_rate * (g / m + params.l2 * *w);
                }
                head.bias -= params.learning_rate * grad_b / m;
            }
            if !loss.is_finite() || !head.validate(width) {
                return Err(Error::NonFiniteLoss { epoch });
            }
        }
        Ok(head)
    }
}
