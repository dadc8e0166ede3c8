//! k-nearest neighbours over sparse rows.

use serde::{Deserialize, Serialize};

use super::{argmax, Dataset};
use crate::corpus::Polarity;
use crate::features::SparseVector;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    /// `1 - cos(a, b)`; a zero row is at distance 1 from everything.
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
    pub metric: DistanceMetric,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 5, metric: DistanceMetric::Euclidean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub classes: Vec<Polarity>,
    pub n_features: usize,
    /// Effective k, already clamped to the number of training rows.
    pub k: usize,
    pub metric: DistanceMetric,
    pub rows: Vec<SparseVector>,
    pub labels: Vec<usize>,
}

pub fn train(data: &Dataset, cfg: &KnnConfig) -> KnnModel {
    let k = if cfg.k > data.len() {
        log::warn!("knn: k = {} exceeds {} training rows; using k = {}", cfg.k, data.len(), data.len());
        data.len()
    } else {
        cfg.k
    };
    let classes = data.classes();
    let labels = data.class_indices(&classes);
    KnnModel { classes, n_features: data.n_features(), k, metric: cfg.metric, rows: data.rows().to_vec(), labels }
}

impl KnnModel {
    fn distance(&self, a: &SparseVector, b: &SparseVector) -> f64 {
        match self.metric {
            DistanceMetric::Euclidean => a.squared_distance(b).sqrt(),
            DistanceMetric::Cosine => {
                let denom = (a.norm_sq() * b.norm_sq()).sqrt();
                if denom == 0.0 {
                    1.0
                } else {
                    1.0 - a.dot(b) / denom
                }
            }
        }
    }

    /// Indices of the k nearest training rows; distance ties go to the lower row.
    pub fn neighbours(&self, row: &SparseVector) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self.rows.iter().enumerate().map(|(i, r)| (self.distance(row, r), i)).collect();
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k, by);
            d.truncate(self.k);
        }
        d.sort_by(by);
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Vote share per class among the k nearest rows.
    pub fn scores(&self, row: &SparseVector) -> Vec<f64> {
        let mut votes = vec![0.0; self.classes.len()];
        for i in self.neighbours(row) {
            votes[self.labels[i]] += 1.0;
        }
        votes.iter_mut().for_each(|v| *v /= self.k as f64);
        votes
    }

    pub fn predict_index(&self, row: &SparseVector) -> usize {
        argmax(&self.scores(row))
    }
}
