//! Random forest of CART trees (Gini) on bootstrap samples.
//!
//! Splits read the sparse rows directly. At each node the candidate features
//! are drawn from the features that are non-constant within the node, so a
//! sampled feature always yields a valid split.

use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{argmax, Dataset};
use crate::corpus::Polarity;
use crate::features::SparseVector;
use crate::{par, seed};

/// Number of candidate features per split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MaxFeatures {
    #[default]
    Sqrt,
    Log2,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let n = n_features as f64;
        let k = match self {
            MaxFeatures::Sqrt => n.sqrt() as usize,
            MaxFeatures::Log2 => n.log2() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Fixed(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxFeatures::Sqrt => f.write_str("sqrt"),
            MaxFeatures::Log2 => f.write_str("log2"),
            MaxFeatures::All => f.write_str("all"),
            MaxFeatures::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl Serialize for MaxFeatures {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MaxFeatures::Fixed(k) => s.serialize_u64(*k as u64),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for MaxFeatures {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Name(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(k) => Ok(MaxFeatures::Fixed(k as usize)),
            Repr::Name(s) => match s.to_ascii_lowercase().as_str() {
                "sqrt" => Ok(MaxFeatures::Sqrt),
                "log2" => Ok(MaxFeatures::Log2),
                "all" => Ok(MaxFeatures::All),
                _ => Err(serde::de::Error::custom(format!("unknown max_features {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            min_samples_split: 2,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: usize,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_index(&self, row: &SparseVector) -> usize {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => {
                    at = if row.get(feature) <= threshold { left } else { right } as usize;
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub classes: Vec<Polarity>,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

pub fn train(data: &Dataset, cfg: &ForestConfig, seed: u64) -> ForestModel {
    let classes = data.classes();
    let labels = data.class_indices(&classes);
    let trees = par::map_range(cfg.n_trees, |t| {
        let mut rng = seed::rng(seed::derive_index(seed, t as u64));
        let n = data.len();
        let samples: Vec<usize> =
            if cfg.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
        TreeBuilder::new(data, &labels, classes.len(), cfg).grow(samples, &mut rng)
    });
    ForestModel { classes, n_features: data.n_features(), trees }
}

impl ForestModel {
    /// Share of trees voting for each class.
    pub fn scores(&self, row: &SparseVector) -> Vec<f64> {
        let mut votes = vec![0.0; self.classes.len()];
        for t in &self.trees {
            votes[t.predict_index(row)] += 1.0;
        }
        let n = self.trees.len() as f64;
        votes.iter_mut().for_each(|v| *v /= n);
        votes
    }

    pub fn predict_index(&self, row: &SparseVector) -> usize {
        argmax(&self.scores(row))
    }
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    labels: &'a [usize],
    k: usize,
    max_features: usize,
    min_samples_split: usize,
    max_depth: Option<usize>,
    // Per-feature scratch, reset through `touched` after each node.
    cnt: Vec<u32>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    mark: Vec<bool>,
    touched: Vec<u32>,
}

struct Pending {
    node: usize,
    samples: Vec<usize>,
    depth: usize,
}

impl<'a> TreeBuilder<'a> {
    fn new(data: &'a Dataset, labels: &'a [usize], k: usize, cfg: &ForestConfig) -> Self {
        let v = data.n_features();
        TreeBuilder {
            data,
            labels,
            k,
            max_features: cfg.max_features.resolve(v),
            min_samples_split: cfg.min_samples_split,
            max_depth: cfg.max_depth,
            cnt: vec![0; v],
            lo: vec![0.0; v],
            hi: vec![0.0; v],
            mark: vec![false; v],
            touched: Vec::new(),
        }
    }

    fn grow<R: Rng>(mut self, samples: Vec<usize>, rng: &mut R) -> Tree {
        let mut nodes = vec![Node::Leaf { class: 0 }];
        let mut stack = vec![Pending { node: 0, samples, depth: 0 }];
        while let Some(Pending { node, samples, depth }) = stack.pop() {
            let counts = self.class_counts(&samples);
            let majority = argmax_u(&counts);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let capped = self.max_depth.is_some_and(|d| depth >= d);
            if pure || capped || samples.len() < self.min_samples_split {
                nodes[node] = Node::Leaf { class: majority };
                continue;
            }
            let Some((feature, threshold)) = self.best_split(&samples, &counts, rng) else {
                nodes[node] = Node::Leaf { class: majority };
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) =
                samples.iter().partition(|&&s| self.data.rows()[s].get(feature) <= threshold);
            let left = nodes.len();
            nodes.push(Node::Leaf { class: 0 });
            nodes.push(Node::Leaf { class: 0 });
            nodes[node] = Node::Split { feature, threshold, left: left as u32, right: left as u32 + 1 };
            stack.push(Pending { node: left + 1, samples: r, depth: depth + 1 });
            stack.push(Pending { node: left, samples: l, depth: depth + 1 });
        }
        Tree { nodes }
    }

    fn class_counts(&self, samples: &[usize]) -> Vec<usize> {
        let mut c = vec![0usize; self.k];
        for &s in samples {
            c[self.labels[s]] += 1;
        }
        c
    }

    /// Features whose value varies within the node, ascending.
    fn non_constant(&mut self, samples: &[usize]) -> Vec<u32> {
        for &s in samples {
            for &(f, x) in self.data.rows()[s].entries() {
                let i = f as usize;
                if self.cnt[i] == 0 {
                    self.touched.push(f);
                    self.lo[i] = x;
                    self.hi[i] = x;
                } else {
                    self.lo[i] = self.lo[i].min(x);
                    self.hi[i] = self.hi[i].max(x);
                }
                self.cnt[i] += 1;
            }
        }
        let n = samples.len() as u32;
        let mut out: Vec<u32> = Vec::new();
        for &f in &self.touched {
            let i = f as usize;
            let (mut lo, mut hi) = (self.lo[i], self.hi[i]);
            if self.cnt[i] < n {
                lo = lo.min(0.0);
                hi = hi.max(0.0);
            }
            if lo < hi {
                out.push(f);
            }
            self.cnt[i] = 0;
        }
        self.touched.clear();
        out.sort_unstable();
        out
    }

    fn best_split<R: Rng>(&mut self, samples: &[usize], counts: &[usize], rng: &mut R) -> Option<(u32, f64)> {
        let candidates = self.non_constant(samples);
        if candidates.is_empty() {
            return None;
        }
        let m = self.max_features.min(candidates.len());
        let mut chosen: Vec<u32> = sample(rng, candidates.len(), m).into_iter().map(|i| candidates[i]).collect();
        chosen.sort_unstable();

        // Gather (value, class) for the chosen features, grouped by feature.
        let mut per: Vec<Vec<(f64, usize)>> = vec![Vec::new(); chosen.len()];
        for &f in &chosen {
            self.mark[f as usize] = true;
        }
        for &s in samples {
            for &(f, x) in self.data.rows()[s].entries() {
                if self.mark[f as usize] {
                    let j = chosen.binary_search(&f).expect("marked feature is chosen");
                    per[j].push((x, self.labels[s]));
                }
            }
        }
        for &f in &chosen {
            self.mark[f as usize] = false;
        }

        let n = samples.len();
        let mut best: Option<(f64, u32, f64)> = None;
        for (j, mut vals) in per.into_iter().enumerate() {
            // Implicit zeros form one block with the remaining class counts.
            let mut zero = counts.to_vec();
            for &(_, c) in &vals {
                zero[c] -= 1;
            }
            let n_zero: usize = zero.iter().sum();
            vals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let split_at = vals.partition_point(|&(x, _)| x < 0.0);

            let mut left = vec![0usize; self.k];
            let mut n_left = 0usize;
            let mut prev: Option<f64> = None;
            let consider =
                |x: f64, left: &[usize], n_left: usize, prev: &mut Option<f64>, best: &mut Option<(f64, u32, f64)>| {
                    if let Some(p) = *prev {
                        if p < x && n_left > 0 && n_left < n {
                            let score = purity(left, n_left) + purity_rest(counts, left, n - n_left);
                            if best.as_ref().is_none_or(|b| score > b.0) {
                                *best = Some((score, chosen[j], p + (x - p) / 2.0));
                            }
                        }
                    }
                    *prev = Some(x);
                };
            for (i, &(x, c)) in vals.iter().enumerate() {
                if i == split_at && n_zero > 0 {
                    consider(0.0, &left, n_left, &mut prev, &mut best);
                    for (l, z) in left.iter_mut().zip(&zero) {
                        *l += z;
                    }
                    n_left += n_zero;
                }
                consider(x, &left, n_left, &mut prev, &mut best);
                left[c] += 1;
                n_left += 1;
            }
            if split_at == vals.len() && n_zero > 0 {
                consider(0.0, &left, n_left, &mut prev, &mut best);
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// `Σ_c n_c² / n`; maximising the weighted sum over both sides minimises Gini impurity.
fn purity(counts: &[usize], n: usize) -> f64 {
    counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n as f64
}

fn purity_rest(total: &[usize], left: &[usize], n_right: usize) -> f64 {
    total.iter().zip(left).map(|(&t, &l)| ((t - l) * (t - l)) as f64).sum::<f64>() / n_right as f64
}

fn argmax_u(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = i;
        }
    }
    best
}
