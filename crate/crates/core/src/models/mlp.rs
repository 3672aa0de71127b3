use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use crate::error::{Error, Result};
use crate::rng::SeedStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 penalty added to the gradient.
    pub weight_decay: f64,
    pub dropout: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 64,
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 256,
            weight_decay: 1e-4,
            dropout: 0.0,
        }
    }
}

/// One hidden ReLU layer followed by a sigmoid output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpHead {
    inputs: usize,
    hidden: usize,
    /// Row-major `hidden x inputs`.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    /// Mean training loss per epoch.
    loss_history: Vec<f64>,
}

/// Adam moment estimates for one parameter block.
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, t: i32) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let c1 = 1.0 - B1.powi(t);
        let c2 = 1.0 - B2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = B1 * *m + (1.0 - B1) * g;
            *v = B2 * *v + (1.0 - B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
        }
    }
}

impl MlpHead {
    pub fn hidden_width(&self) -> usize {
        self.hidden
    }

    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    /// Input-to-hidden weights for hidden unit `h`.
    pub fn input_weights(&self, h: usize) -> &[f64] {
        &self.w1[h * self.inputs..(h + 1) * self.inputs]
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.b1
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.w2
    }

    pub fn output_bias(&self) -> f64 {
        self.b2
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut z = self.b2;
        for h in 0..self.hidden {
            let pre = self.b1[h]
                + self
                    .input_weights(h)
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>();
            if pre > 0.0 {
                z += self.w2[h] * pre;
            }
        }
        sigmoid(z)
    }

    /// Output probability from precomputed hidden pre-activations.
    pub fn predict_from_preactivations(&self, pre: &[f64]) -> f64 {
        let mut z = self.b2;
        for (p, w) in pre.iter().zip(&self.w2) {
            if *p > 0.0 {
                z += w * p;
            }
        }
        sigmoid(z)
    }

    pub(super) fn validate(&self, width: usize) -> bool {
        self.inputs == width
            && self.w1.len() == self.hidden * width
            && self.b1.len() == self.hidden
            && self.w2.len() == self.hidden
            && self.b2.is_finite()
            && self
                .w1
                .iter()
                .chain(&self.b1)
                .chain(&self.w2)
                .all(|v| v.is_finite())
    }

    /// Shuffled mini-batch training with the Adam update and a fixed epoch count.
    pub(super) fn fit(
        x: &[f64],
        width: usize,
        labels: &[u8],
        params: &MlpParams,
        stream: SeedStream,
    ) -> Result<Self> {
        let n = labels.len();
        let hidden = params.hidden.max(1);
        let mut init = stream.fork("init").rng();
        // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
        let mut uniform = |fan_in: usize, count: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            (0..count)
                .map(|_| init.random_range(-bound..bound))
                .collect()
        };
        let mut head = MlpHead {
            inputs: width,
            hidden,
            w1: uniform(width, hidden * width),
            b1: uniform(width, hidden),
            w2: uniform(hidden, hidden),
            b2: uniform(hidden, 1)[0],
            loss_history: Vec::with_capacity(params.epochs),
        };

        let mut shuffle = stream.fork("shuffle").rng();
        let mut dropout = stream.fork("dropout").rng();
        let keep = 1.0 - params.dropout.clamp(0.0, 0.95);
        let batch = params.batch_size.clamp(1, n);
        let mut order: Vec<usize> = (0..n).collect();
        // One-hot blocks make most inputs zero; only nonzero (column, value) pairs are visited.
        let nonzero: Vec<Vec<(usize, f64)>> = x
            .chunks(width.max(1))
            .map(|row| {
                row.iter()
                    .copied()
                    .enumerate()
                    .filter(|&(_, v)| v != 0.0)
                    .collect()
            })
            .collect();

        // Input-major copy of the first layer, `w1t[c * hidden + h]`, so the
        // per-row loops run over contiguous hidden units.
        let mut w1t = vec![0.0; width * hidden];
        for h in 0..hidden {
            for c in 0..width {
                w1t[c * hidden + h] = head.w1[h * width + c];
            }
        }
        let (mut m_w1, mut m_b1, mut m_w2, mut m_b2) = (
            Moments::new(hidden * width),
            Moments::new(hidden),
            Moments::new(hidden),
            Moments::new(1),
        );
        let mut g_w1 = vec![0.0; hidden * width];
        let mut g_b1 = vec![0.0; hidden];
        let mut g_w2 = vec![0.0; hidden];
        let mut pre = vec![0.0; hidden];
        let mut act = vec![0.0; hidden];
        let mut dh = vec![0.0; hidden];
        let mut step = 0;
        let scale = if keep < 1.0 { 1.0 / keep } else { 1.0 };

        for epoch in 0..params.epochs {
            order.shuffle(&mut shuffle);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                g_w1.iter_mut().for_each(|g| *g = 0.0);
                g_b1.iter_mut().for_each(|g| *g = 0.0);
                g_w2.iter_mut().for_each(|g| *g = 0.0);
                let mut g_b2 = 0.0;
                for &i in chunk {
                    let row = &nonzero[i];
                    pre.iter_mut().for_each(|p| *p = 0.0);
                    for &(c, v) in row {
                        for (p, w) in pre.iter_mut().zip(&w1t[c * hidden..(c + 1) * hidden]) {
                            *p += w * v;
                        }
                    }
                    let mut z = head.b2;
                    for h in 0..hidden {
                        let mut a = (head.b1[h] + pre[h]).max(0.0);
                        if keep < 1.0 {
                            a = if dropout.random::<f64>() < keep {
                                a / keep
                            } else {
                                0.0
                            };
                        }
                        act[h] = a;
                        z += head.w2[h] * a;
                    }
                    let p = sigmoid(z);
                    let y = f64::from(labels[i]);
                    epoch_loss -= y * p.max(1e-15).ln() + (1.0 - y) * (1.0 - p).max(1e-15).ln();
                    let dz = p - y;
                    g_b2 += dz;
                    for h in 0..hidden {
                        g_w2[h] += dz * act[h];
                        dh[h] = if act[h] > 0.0 {
                            dz * head.w2[h] * scale
                        } else {
                            0.0
                        };
                        g_b1[h] += dh[h];
                    }
                    for &(c, v) in row {
                        for (g, d) in g_w1[c * hidden..(c + 1) * hidden].iter_mut().zip(&dh) {
                            *g += d * v;
                        }
                    }
                }
                let m = chunk.len() as f64;
                let wd = params.weight_decay;
                for (g, w) in g_w1.iter_mut().zip(&w1t) {
                    *g = *g / m + wd * w;
                }
                for (g, w) in g_w2.iter_mut().zip(&head.w2) {
                    *g = *g / m + wd * w;
                }
                g_b1.iter_mut().for_each(|g| *g /= m);
                step += 1;
                let lr = params.learning_rate;
                m_w1.step(&mut w1t, &g_w1, lr, step);
                m_b1.step(&mut head.b1, &g_b1, lr, step);
                m_w2.step(&mut head.w2, &g_w2, lr, step);
                m_b2.step(std::slice::from_mut(&mut head.b2), &[g_b2 / m], lr, step);
            }
            let mean_loss = epoch_loss / n as f64;
            let finite = w1t
                .iter()
                .chain(&head.b1)
                .chain(&head.w2)
                .all(|v| v.is_finite())
                && head.b2.is_finite();
            if !mean_loss.is_finite() || !finite {
                return Err(Error::NonFiniteLoss { epoch });
            }
            head.loss_history.push(mean_loss);
        }
        for h in 0..hidden {
            for c in 0..width {
                head.w1[h * width + c] = w1t[c * hidden + h];
            }
        }
        Ok(head)
    }
}
