//! One-hidden-layer perceptron: ReLU hidden units, softmax output, mean
//! cross-entropy loss.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, ClassifierKind, Dataset, ModelError};
use crate::corpus::Polarity;
use crate::features::SparseVector;
use crate::seed;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    #[default]
    Adam,
    /// Plain gradient descent.
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// `None` trains on the full batch each step.
    pub batch_size: Option<usize>,
    pub optimizer: Optimizer,
    pub tol: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_units: 100,
            learning_rate: 1e-3,
            max_epochs: 200,
            batch_size: None,
            optimizer: Optimizer::Adam,
            tol: 1e-8,
        }
    }
}

/// All weights in one flat vector: `W1` (V×H, row per input feature), `b1`
/// (H), `W2` (H×K, row per hidden unit), `b2` (K).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub n_features: usize,
    pub hidden: usize,
    pub n_classes: usize,
    pub values: Vec<f64>,
}

impl MlpParams {
    pub fn len_for(v: usize, h: usize, k: usize) -> usize {
        v * h + h + h * k + k
    }

    pub fn zeros(v: usize, h: usize, k: usize) -> Self {
        MlpParams { n_features: v, hidden: h, n_classes: k, values: vec![0.0; Self::len_for(v, h, k)] }
    }

    /// Weights uniform in ±1/√fan_in, biases zero.
    pub fn init<R: Rng>(v: usize, h: usize, k: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(v, h, k);
        let s1 = 1.0 / (v.max(1) as f64).sqrt();
        let s2 = 1.0 / (h as f64).sqrt();
        let (b1, w2) = (p.b1_off(), p.w2_off());
        for w in &mut p.values[..b1] {
            *w = rng.random_range(-s1..=s1);
        }
        for w in &mut p.values[w2..w2 + h * k] {
            *w = rng.random_range(-s2..=s2);
        }
        p
    }

    fn b1_off(&self) -> usize {
        self.n_features * self.hidden
    }

    fn w2_off(&self) -> usize {
        self.b1_off() + self.hidden
    }

    fn b2_off(&self) -> usize {
        self.w2_off() + self.hidden * self.n_classes
    }

    /// Hidden pre-activations and output probabilities for one row.
    fn forward(&self, row: &SparseVector) -> (Vec<f64>, Vec<f64>) {
        let (h, k) = (self.hidden, self.n_classes);
        let b1 = self.b1_off();
        let mut z1 = self.values[b1..b1 + h].to_vec();
        for &(f, x) in row.entries() {
            let w = &self.values[f as usize * h..(f as usize + 1) * h];
            for (z, wi) in z1.iter_mut().zip(w) {
                *z += x * wi;
            }
        }
        let w2 = self.w2_off();
        let mut z2 = self.values[self.b2_off()..].to_vec();
        for (j, &z) in z1.iter().enumerate() {
            if z > 0.0 {
                let w = &self.values[w2 + j * k..w2 + (j + 1) * k];
                for (o, wi) in z2.iter_mut().zip(w) {
                    *o += z * wi;
                }
            }
        }
        (z1, softmax(&z2))
    }

    pub fn probabilities(&self, row: &SparseVector) -> Vec<f64> {
        self.forward(row).1
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-ln p`, floored so a saturated wrong prediction stays finite.
fn nll(p: f64) -> f64 {
    -p.max(1e-300).ln()
}

/// Mean cross-entropy over the rows.
pub fn loss(params: &MlpParams, rows: &[SparseVector], y: &[usize]) -> f64 {
    rows.iter().zip(y).map(|(r, &c)| nll(params.forward(r).1[c])).sum::<f64>() / rows.len() as f64
}

/// Mean cross-entropy and its gradient with respect to every parameter.
pub fn loss_and_gradient(params: &MlpParams, rows: &[SparseVector], y: &[usize]) -> (f64, Vec<f64>) {
    let (h, k) = (params.hidden, params.n_classes);
    let (b1, w2, b2) = (params.b1_off(), params.w2_off(), params.b2_off());
    let n = rows.len() as f64;
    let mut g = vec![0.0; params.values.len()];
    let mut total = 0.0;
    let mut dz1 = vec![0.0; h];
    for (row, &c) in rows.iter().zip(y) {
        let (z1, p) = params.forward(row);
        total += nll(p[c]);
        let mut dz2 = p;
        dz2[c] -= 1.0;
        dz2.iter_mut().for_each(|d| *d /= n);
        for (j, &z) in z1.iter().enumerate() {
            let wrow = &params.values[w2 + j * k..w2 + (j + 1) * k];
            let mut back = 0.0;
            for o in 0..k {
                back += wrow[o] * dz2[o];
                if z > 0.0 {
                    g[w2 + j * k + o] += z * dz2[o];
                }
            }
            dz1[j] = if z > 0.0 { back } else { 0.0 };
        }
        for o in 0..k {
            g[b2 + o] += dz2[o];
        }
        for j in 0..h {
            g[b1 + j] += dz1[j];
        }
        for &(f, x) in row.entries() {
            let base = f as usize * h;
            for j in 0..h {
                g[base + j] += x * dz1[j];
            }
        }
    }
    (total / n, g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub classes: Vec<Polarity>,
    pub params: MlpParams,
    /// Training loss after each epoch.
    pub loss_curve: Vec<f64>,
    pub converged: bool,
}

impl MlpModel {
    /// Softmax probability per class.
    pub fn scores(&self, row: &SparseVector) -> Vec<f64> {
        self.params.probabilities(row)
    }

    pub fn predict_index(&self, row: &SparseVector) -> usize {
        argmax(&self.scores(row))
    }

    pub fn epochs(&self) -> usize {
        self.loss_curve.len()
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, w: &mut [f64], g: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..w.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * g[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * g[i] * g[i];
            w[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

pub fn train(data: &Dataset, cfg: &MlpConfig, seed: u64) -> Result<MlpModel, ModelError> {
    let classes = data.classes();
    if classes.len() < 2 {
        return Err(ModelError::InsufficientClasses { kind: ClassifierKind::Mlp, found: classes.len() });
    }
    let y = data.class_indices(&classes);
    let rows = data.rows();
    let mut rng = seed::rng(seed);
    let mut params = MlpParams::init(data.n_features(), cfg.hidden_units, classes.len(), &mut rng);
    let mut adam = Adam { m: vec![0.0; params.values.len()], v: vec![0.0; params.values.len()], t: 0 };
    let mut apply = |params: &mut MlpParams, g: &[f64]| match cfg.optimizer {
        Optimizer::Adam => adam.step(&mut params.values, g, cfg.learning_rate),
        Optimizer::Sgd => params.values.iter_mut().zip(g).for_each(|(w, gi)| *w -= cfg.learning_rate * gi),
    };

    let batch = cfg.batch_size.filter(|&b| b < rows.len());
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut curve = Vec::with_capacity(cfg.max_epochs);
    let mut converged = false;
    let (mut prev, mut grad) = loss_and_gradient(&params, rows, &y);
    for _ in 0..cfg.max_epochs {
        let current = match batch {
            None => {
                apply(&mut params, &grad);
                let (l, g) = loss_and_gradient(&params, rows, &y);
                grad = g;
                l
            }
            Some(b) => {
                order.shuffle(&mut rng);
                for chunk in order.chunks(b) {
                    let r: Vec<SparseVector> = chunk.iter().map(|&i| rows[i].clone()).collect();
                    let t: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
                    let (_, g) = loss_and_gradient(&params, &r, &t);
                    apply(&mut params, &g);
                }
                loss(&params, rows, &y)
            }
        };
        curve.push(current);
        if (prev - current).abs() < cfg.tol {
            converged = true;
            break;
        }
        prev = current;
    }
    Ok(MlpModel { classes, params, loss_curve: curve, converged })
}
