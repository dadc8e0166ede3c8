//! Seeded synthetic corpora for tests, benches and demos.
//!
//! Words are drawn from consonants that never form an affix, an alef variant
//! or a stop word, so every generated word passes the default pipeline
//! unchanged.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::corpus::{Corpus, Polarity};
use crate::preprocess::{Pipeline, PipelineConfig};
use crate::seed;

const LETTERS: [char; 17] = ['ج', 'ح', 'خ', 'د', 'ذ', 'ر', 'ز', 'س', 'ش', 'ص', 'ض', 'ط', 'ظ', 'ع', 'غ', 'ق', 'م'];

/// Filler that the default pipeline strips: stop words, punctuation, digits, a URL.
const NOISE: [&str; 8] = ["في", "من", "على", "هذا", "!!", "2024", "http://example.com/x", "،"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Documents per class, indexed by polarity code.
    pub counts: [usize; 3],
    /// Words reserved for each class.
    pub class_vocab: usize,
    /// Words any class may use.
    pub shared_vocab: usize,
    /// Probability that a content word comes from the document's own class pool.
    pub signal: f64,
    /// Inclusive range of content words per document.
    pub doc_len: (usize, usize),
    /// Probability of inserting a noise item after each word.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Two classes with disjoint vocabularies and no shared words.
    pub fn separable(n_docs: usize, seed: u64) -> Self {
        SyntheticSpec {
            counts: [n_docs / 2, n_docs - n_docs / 2, 0],
            class_vocab: 15,
            shared_vocab: 0,
            signal: 1.0,
            doc_len: (8, 8),
            noise: 0.1,
            seed,
        }
    }

    /// Three overlapping classes in roughly 453 : 760 : 420 proportions.
    pub fn three_class(n_docs: usize, seed: u64) -> Self {
        let pos = n_docs * 453 / 1633;
        let neu = n_docs * 420 / 1633;
        SyntheticSpec {
            counts: [pos, n_docs - pos - neu, neu],
            class_vocab: 60,
            shared_vocab: 240,
            signal: 0.35,
            doc_len: (6, 18),
            noise: 0.15,
            seed,
        }
    }
}

/// `n` distinct words that survive the default pipeline unchanged.
pub fn word_pool(n: usize, seed: u64) -> Vec<String> {
    let pipeline = Pipeline::new(PipelineConfig::default()).expect("default pipeline");
    let mut rng = seed::rng(seed::derive(seed, "words"));
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = rng.random_range(3..=5);
        let w: String = (0..len).map(|_| *LETTERS.choose(&mut rng).expect("letters")).collect();
        let tokens = pipeline.run(&w);
        if seen.contains(&w) || tokens.len() != 1 || tokens[0] != w {
            continue;
        }
        seen.insert(w.clone());
        out.push(w);
    }
    out
}

pub fn generate(spec: &SyntheticSpec) -> Corpus {
    let labels: Vec<Polarity> = Polarity::ALL.into_iter().filter(|p| spec.counts[usize::from(p.code())] > 0).collect();
    let pool = word_pool(spec.class_vocab * labels.len() + spec.shared_vocab, spec.seed);
    let (class_words, shared) = pool.split_at(spec.class_vocab * labels.len());
    let mut rng = seed::rng(seed::derive(spec.seed, "documents"));

    let mut order: Vec<Polarity> =
        labels.iter().flat_map(|&p| std::iter::repeat_n(p, spec.counts[usize::from(p.code())])).collect();
    order.shuffle(&mut rng);

    let docs = order.into_iter().map(|label| {
        let k = labels.iter().position(|&p| p == label).expect("label");
        let own = &class_words[k * spec.class_vocab..(k + 1) * spec.class_vocab];
        let len = rng.random_range(spec.doc_len.0..=spec.doc_len.1);
        let mut words: Vec<&str> = Vec::with_capacity(len * 2);
        for _ in 0..len {
            let from_own = shared.is_empty() || rng.random_bool(spec.signal);
            let w = if from_own { own.choose(&mut rng) } else { shared.choose(&mut rng) };
            words.push(w.expect("non-empty pool"));
            if rng.random_bool(spec.noise) {
                words.push(NOISE.choose(&mut rng).expect("noise"));
            }
        }
        (words.join(" "), label)
    });
    Corpus::from_texts(docs.collect::<Vec<_>>())
}

/// A corpus with exactly the given label counts and trivial texts.
pub fn with_label_counts(counts: [usize; 3]) -> Corpus {
    Corpus::from_texts(
        Polarity::ALL
            .into_iter()
            .flat_map(|p| (0..counts[usize::from(p.code())]).map(move |i| (format!("{} {i}", p.name()), p))),
    )
}
