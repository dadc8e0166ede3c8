//! Multinomial naive Bayes with additive (Laplace) smoothing.

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::corpus::Polarity;
use crate::features::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MnbConfig {
    pub alpha: f64,
}

impl Default for MnbConfig {
    fn default() -> Self {
        MnbConfig { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnbModel {
    pub classes: Vec<Polarity>,
    pub n_features: usize,
    pub alpha: f64,
    /// `ln(n_c / n)`
    pub class_log_prior: Vec<f64>,
    /// `ln((count(t, c) + α) / (Σ_t count(t, c) + α·V))`, one row per class.
    pub feature_log_prob: Vec<Vec<f64>>,
}

pub fn train(data: &Dataset, cfg: &MnbConfig) -> MnbModel {
    let classes = data.classes();
    let idx = data.class_indices(&classes);
    let k = classes.len();
    let v = data.n_features();

    let mut doc_count = vec![0usize; k];
    let mut counts = vec![vec![0.0f64; v]; k];
    for (row, &c) in data.rows().iter().zip(&idx) {
        doc_count[c] += 1;
        for &(f, x) in row.entries() {
            counts[c][f as usize] += x;
        }
    }

    let n = data.len() as f64;
    let class_log_prior = doc_count.iter().map(|&d| (d as f64 / n).ln()).collect();
    let feature_log_prob = counts
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            let denom = (total + cfg.alpha * v as f64).ln();
            row.iter().map(|&c| (c + cfg.alpha).ln() - denom).collect()
        })
        .collect();

    MnbModel { classes, n_features: v, alpha: cfg.alpha, class_log_prior, feature_log_prob }
}

impl MnbModel {
    /// Joint log-likelihood `ln P(c) + Σ_t x_t · ln P(t | c)` per class.
    pub fn scores(&self, row: &SparseVector) -> Vec<f64> {
        self.class_log_prior
            .iter()
            .zip(&self.feature_log_prob)
            .map(|(prior, lp)| prior + row.entries().iter().map(|&(f, x)| x * lp[f as usize]).sum::<f64>())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{train as train_any, ClassifierKind, TrainConfig};

    fn row(e: &[(u32, f64)]) -> SparseVector {
        SparseVector::new(e.to_vec()).unwrap()
    }

    /// Features: 0 = "جيد", 1 = "سيء". Positive doc "جيد جيد", negative doc "سيء".
    fn toy() -> Dataset {
        Dataset::new(vec![row(&[(0, 2.0)]), row(&[(1, 1.0)])], vec![Polarity::Positive, Polarity::Negative], 2).unwrap()
    }

    #[test]
    fn hand_enumerated_posteriors() {
        let m = train(&toy(), &MnbConfig::default());
        // P(جيد|pos) = (2+1)/(2+2), P(جيد|neg) = (0+1)/(1+2), equal priors.
        let s = m.scores(&row(&[(0, 1.0)]));
        assert!((s[0] - (0.5f64.ln() + (3.0f64 / 4.0).ln())).abs() < 1e-12);
        assert!((s[1] - (0.5f64.ln() + (1.0f64 / 3.0).ln())).abs() < 1e-12);
        let model = train_any(ClassifierKind::Mnb, &toy(), &TrainConfig::default()).unwrap();
        assert_eq!(model.predict(&row(&[(0, 1.0)])).unwrap(), Polarity::Positive);
    }

    #[test]
    fn empty_row_falls_back_to_prior() {
        let d = Dataset::new(
            vec![row(&[(0, 1.0)]), row(&[(1, 1.0)]), row(&[(1, 3.0)])],
            vec![Polarity::Positive, Polarity::Negative, Polarity::Negative],
            2,
        )
        .unwrap();
        let m = train_any(ClassifierKind::Mnb, &d, &TrainConfig::default()).unwrap();
        assert_eq!(m.predict(&SparseVector::default()).unwrap(), Polarity::Negative);
    }

    #[test]
    fn symmetric_tie_goes_to_lowest_code() {
        let d = Dataset::new(vec![row(&[(0, 1.0)]), row(&[(1, 1.0)])], vec![Polarity::Negative, Polarity::Neutral], 2)
            .unwrap();
        let m = train_any(ClassifierKind::Mnb, &d, &TrainConfig::default()).unwrap();
        assert_eq!(m.predict(&row(&[(0, 1.0), (1, 1.0)])).unwrap(), Polarity::Negative);
    }
}
