//! One-vs-rest linear classifiers: logistic regression and linear SVC.
//!
//! Both minimize `penalty(w) / C + Σ loss_i` per binary subproblem, with
//! `penalty` either `½‖w‖²` (L2) or `‖w‖₁` (L1). With exactly two classes a
//! single binary model separates `classes[1]` (positive side) from
//! `classes[0]`, and the scores are `[-z, z]`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClassifierKind, Dataset, ModelError};
use crate::corpus::Polarity;
use crate::features::SparseVector;
use crate::seed;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    #[default]
    L2,
}

impl Penalty {
    pub fn value(self, w: &[f64]) -> f64 {
        match self {
            Penalty::L1 => w.iter().map(|x| x.abs()).sum(),
            Penalty::L2 => 0.5 * w.iter().map(|x| x * x).sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    pub penalty: Penalty,
    pub c: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig { penalty: Penalty::L2, c: 1.0, learning_rate: 0.1, max_epochs: 1000, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearSvcConfig {
    pub penalty: Penalty,
    pub c: f64,
    /// Passes over the training set.
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LinearSvcConfig {
    fn default() -> Self {
        LinearSvcConfig { penalty: Penalty::L2, c: 1.0, max_iter: 1500, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub classes: Vec<Polarity>,
    pub n_features: usize,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub converged: bool,
    /// Largest epoch count among the binary subproblems.
    pub epochs: usize,
}

impl LinearModel {
    pub fn decision(&self, row: &SparseVector) -> Vec<f64> {
        self.weights.iter().zip(&self.biases).map(|(w, b)| dot(w, row) + b).collect()
    }

    pub fn scores(&self, row: &SparseVector) -> Vec<f64> {
        let z = self.decision(row);
        if self.classes.len() == 2 {
            vec![-z[0], z[0]]
        } else {
            z
        }
    }
}

fn dot(w: &[f64], x: &SparseVector) -> f64 {
    x.entries().iter().map(|&(f, v)| w[f as usize] * v).sum()
}

fn axpy(w: &mut [f64], a: f64, x: &SparseVector) {
    for &(f, v) in x.entries() {
        w[f as usize] += a * v;
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// ±1 targets per binary subproblem, positive class index per subproblem.
fn ovr_targets(data: &Dataset, kind: ClassifierKind) -> Result<(Vec<Polarity>, Vec<Vec<f64>>), ModelError> {
    let classes = data.classes();
    if classes.len() < 2 {
        return Err(ModelError::InsufficientClasses { kind, found: classes.len() });
    }
    let positives: Vec<Polarity> = if classes.len() == 2 { vec![classes[1]] } else { classes.clone() };
    let targets =
        positives.iter().map(|p| data.labels().iter().map(|l| if l == p { 1.0 } else { -1.0 }).collect()).collect();
    Ok((classes, targets))
}

/// Logistic objective `penalty(w)/C + Σ ln(1 + exp(-y·(w·x + b)))` and its
/// (sub)gradient with respect to `w` and `b`. The bias is not penalized.
pub fn logreg_objective(
    rows: &[SparseVector],
    y: &[f64],
    w: &[f64],
    b: f64,
    penalty: Penalty,
    c: f64,
) -> (f64, Vec<f64>, f64) {
    let (loss, mut gw, gb) = logistic_loss(rows, y, w, b);
    match penalty {
        Penalty::L2 => gw.iter_mut().zip(w).for_each(|(g, &wi)| *g += wi / c),
        Penalty::L1 => gw.iter_mut().zip(w).for_each(|(g, &wi)| *g += wi.signum() * f64::from(wi != 0.0) / c),
    }
    (loss + penalty.value(w) / c, gw, gb)
}

fn logistic_loss(rows: &[SparseVector], y: &[f64], w: &[f64], b: f64) -> (f64, Vec<f64>, f64) {
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    let mut loss = 0.0;
    for (x, &yi) in rows.iter().zip(y) {
        let m = yi * (dot(w, x) + b);
        loss += softplus(-m);
        let coef = -yi * sigmoid(-m);
        axpy(&mut gw, coef, x);
        gb += coef;
    }
    (loss, gw, gb)
}

struct BinaryFit {
    w: Vec<f64>,
    b: f64,
    converged: bool,
    epochs: usize,
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Full-batch gradient descent on the mean objective. A step that raises the
/// objective is rejected and the step size halved. L1 uses a proximal
/// (soft-threshold) step, which clips weights at zero.
fn fit_logreg_binary(rows: &[SparseVector], y: &[f64], v: usize, cfg: &LogRegConfig) -> BinaryFit {
    let n = rows.len() as f64;
    let reg = 1.0 / (cfg.c * n);
    let objective = |w: &[f64], b: f64| -> (f64, Vec<f64>, f64) {
        let (loss, mut gw, mut gb) = logistic_loss(rows, y, w, b);
        gw.iter_mut().for_each(|g| *g /= n);
        gb /= n;
        let mut j = loss / n + reg * cfg.penalty.value(w);
        if cfg.penalty == Penalty::L2 {
            gw.iter_mut().zip(w).for_each(|(g, &wi)| *g += reg * wi);
        }
        if !j.is_finite() {
            j = f64::INFINITY;
        }
        (j, gw, gb)
    };

    let mut w = vec![0.0; v];
    let mut b = 0.0;
    let (mut j, mut gw, mut gb) = objective(&w, b);
    let mut step = cfg.learning_rate;
    let mut converged = false;
    let mut epochs = 0;

    while epochs < cfg.max_epochs {
        epochs += 1;
        let mut accepted = None;
        for _ in 0..60 {
            let trial_w: Vec<f64> = match cfg.penalty {
                Penalty::L2 => w.iter().zip(&gw).map(|(wi, g)| wi - step * g).collect(),
                Penalty::L1 => w.iter().zip(&gw).map(|(wi, g)| soft_threshold(wi - step * g, step * reg)).collect(),
            };
            let trial_b = b - step * gb;
            let eval = objective(&trial_w, trial_b);
            if eval.0 <= j {
                accepted = Some((trial_w, trial_b, eval));
                break;
            }
            step *= 0.5;
        }
        let Some((nw, nb, (nj, ngw, ngb))) = accepted else {
            converged = true;
            break;
        };
        let improvement = j - nj;
        (w, b, j, gw, gb) = (nw, nb, nj, ngw, ngb);
        if improvement < cfg.tol {
            converged = true;
            break;
        }
    }
    BinaryFit { w, b, converged, epochs }
}

pub fn train_logreg(data: &Dataset, cfg: &LogRegConfig) -> Result<LinearModel, ModelError> {
    let (classes, targets) = ovr_targets(data, ClassifierKind::LogReg)?;
    let fits: Vec<BinaryFit> =
        targets.iter().map(|y| fit_logreg_binary(data.rows(), y, data.n_features(), cfg)).collect();
    Ok(assemble(classes, data.n_features(), fits))
}

fn assemble(classes: Vec<Polarity>, n_features: usize, fits: Vec<BinaryFit>) -> LinearModel {
    let converged = fits.iter().all(|f| f.converged);
    let epochs = fits.iter().map(|f| f.epochs).max().unwrap_or(0);
    let (weights, biases) = fits.into_iter().map(|f| (f.w, f.b)).unzip();
    LinearModel { classes, n_features, weights, biases, converged, epochs }
}

/// Sum of hinge losses `Σ max(0, 1 - y·(w·x + b))`.
pub fn hinge_loss(rows: &[SparseVector], y: &[f64], w: &[f64], b: f64) -> f64 {
    rows.iter().zip(y).map(|(x, &yi)| (1.0 - yi * (dot(w, x) + b)).max(0.0)).sum()
}

/// Dual coordinate descent for `½(‖w‖² + b²) + C Σ hinge`, the bias being an
/// extra constant feature. One epoch visits every sample once in a seeded
/// order; stops when the projected-gradient spread drops below `tol`.
fn fit_svc_dual(rows: &[SparseVector], y: &[f64], v: usize, cfg: &LinearSvcConfig, seed: u64) -> BinaryFit {
    let n = rows.len();
    let q: Vec<f64> = rows.iter().map(|x| x.norm_sq() + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; v];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(seed);
    let mut converged = false;
    let mut epochs = 0;

    while epochs < cfg.max_iter {
        epochs += 1;
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let g = y[i] * (dot(&w, &rows[i]) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == cfg.c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-15 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, cfg.c);
                let d = (alpha[i] - old) * y[i];
                axpy(&mut w, d, &rows[i]);
                b += d;
            }
        }
        if pg_max - pg_min < cfg.tol {
            converged = true;
            break;
        }
    }
    BinaryFit { w, b, converged, epochs }
}

/// Proximal subgradient descent for `‖w‖₁/C + Σ hinge` with step
/// `η₀/√t` per epoch; the best iterate seen is returned.
fn fit_svc_l1(rows: &[SparseVector], y: &[f64], v: usize, cfg: &LinearSvcConfig) -> BinaryFit {
    let n = rows.len() as f64;
    let reg = 1.0 / (cfg.c * n);
    let mean_q = rows.iter().map(|x| x.norm_sq() + 1.0).sum::<f64>() / n;
    let eta0 = 1.0 / mean_q;
    let objective = |w: &[f64], b: f64| hinge_loss(rows, y, w, b) / n + reg * Penalty::L1.value(w);

    let mut w = vec![0.0; v];
    let mut b = 0.0;
    let mut best = (objective(&w, b), w.clone(), b);
    let mut prev = best.0;
    let mut converged = false;
    let mut epochs = 0;

    while epochs < cfg.max_iter {
        epochs += 1;
        let eta = eta0 / (epochs as f64).sqrt();
        let mut gw = vec![0.0; v];
        let mut gb = 0.0;
        for (x, &yi) in rows.iter().zip(y) {
            if yi * (dot(&w, x) + b) < 1.0 {
                axpy(&mut gw, -yi / n, x);
                gb -= yi / n;
            }
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi = soft_threshold(*wi - eta * g, eta * reg);
        }
        b -= eta * gb;
        let j = objective(&w, b);
        if j < best.0 {
            best = (j, w.clone(), b);
        }
        if (prev - j).abs() < cfg.tol {
            converged = true;
            break;
        }
        prev = j;
    }
    BinaryFit { w: best.1, b: best.2, converged, epochs }
}

pub fn train_linear_svc(data: &Dataset, cfg: &LinearSvcConfig, seed: u64) -> Result<LinearModel, ModelError> {
    let (classes, targets) = ovr_targets(data, ClassifierKind::LinearSvc)?;
    let fits: Vec<BinaryFit> = targets
        .iter()
        .enumerate()
        .map(|(k, y)| match cfg.penalty {
            Penalty::L2 => fit_svc_dual(data.rows(), y, data.n_features(), cfg, seed::derive_index(seed, k as u64)),
            Penalty::L1 => fit_svc_l1(data.rows(), y, data.n_features(), cfg),
        })
        .collect();
    Ok(assemble(classes, data.n_features(), fits))
}
