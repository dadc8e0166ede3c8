//! Word n-grams, training-only vocabularies and sparse document rows.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::TokenList;

pub const VOCAB_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("no n-grams in the training documents")]
    EmptyVocabulary,
    #[error("vocabulary built for n-gram range {expected}, asked to vectorize with {found}")]
    RangeMismatch { expected: NgramRange, found: NgramRange },
    #[error("invalid n-gram range ({0}, {1})")]
    InvalidRange(usize, usize),
    #[error("invalid sparse vector: {0}")]
    InvalidSparseVector(String),
    #[error("invalid vocabulary document: {0}")]
    InvalidVocabulary(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(usize, usize)", into = "(usize, usize)")]
pub struct NgramRange {
    lo: usize,
    hi: usize,
}

impl NgramRange {
    pub const UNI: NgramRange = NgramRange { lo: 1, hi: 1 };
    pub const BI: NgramRange = NgramRange { lo: 2, hi: 2 };
    pub const UNI_BI: NgramRange = NgramRange { lo: 1, hi: 2 };

    pub fn new(lo: usize, hi: usize) -> Result<Self, FeatureError> {
        if lo == 0 || hi < lo {
            return Err(FeatureError::InvalidRange(lo, hi));
        }
        Ok(NgramRange { lo, hi })
    }

    pub fn lo(self) -> usize {
        self.lo
    }

    pub fn hi(self) -> usize {
        self.hi
    }
}

impl TryFrom<(usize, usize)> for NgramRange {
    type Error = FeatureError;

    fn try_from((lo, hi): (usize, usize)) -> Result<Self, Self::Error> {
        NgramRange::new(lo, hi)
    }
}

impl From<NgramRange> for (usize, usize) {
    fn from(r: NgramRange) -> Self {
        (r.lo, r.hi)
    }
}

impl fmt::Display for NgramRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingScheme {
    #[default]
    Count,
    Binary,
    TfIdf,
}

impl WeightingScheme {
    pub fn name(self) -> &'static str {
        match self {
            WeightingScheme::Count => "count",
            WeightingScheme::Binary => "binary",
            WeightingScheme::TfIdf => "tfidf",
        }
    }
}

/// All `n`-token windows for each `n` in the range, joined by one space.
/// Uni-grams come first, then bi-grams, and so on.
pub fn extract_ngrams(tokens: &[String], range: NgramRange) -> Vec<String> {
    let mut out = Vec::new();
    for n in range.lo..=range.hi {
        if tokens.len() < n {
            continue;
        }
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

/// Strictly index-ascending `(feature, weight)` pairs with no stored zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, f64)>", into = "Vec<(u32, f64)>")]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn new(entries: Vec<(u32, f64)>) -> Result<Self, FeatureError> {
        for w in entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(FeatureError::InvalidSparseVector(format!("indices not strictly ascending at {}", w[1].0)));
            }
        }
        if let Some(&(i, v)) = entries.iter().find(|(_, v)| *v == 0.0 || !v.is_finite()) {
            return Err(FeatureError::InvalidSparseVector(format!("weight {v} at index {i}")));
        }
        Ok(SparseVector { entries })
    }

    /// Builds from unordered pairs, summing duplicates and dropping zeros.
    pub fn from_unordered(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        SparseVector { entries }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries.binary_search_by_key(&index, |&(i, _)| i).map_or(0.0, |p| self.entries[p].1)
    }

    pub fn max_index(&self) -> Option<u32> {
        self.entries.last().map(|&(i, _)| i)
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut sum = 0.0;
        while let (Some(&&(i, x)), Some(&&(j, y))) = (a.peek(), b.peek()) {
            match i.cmp(&j) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += x * y;
                    a.next();
                    b.next();
                }
            }
        }
        sum
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum()
    }

    /// Exact squared Euclidean distance, summed over the union of indices.
    pub fn squared_distance(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        while i < a.len() || j < b.len() {
            let d = match (a.get(i), b.get(j)) {
                (Some(&(ia, va)), Some(&(ib, vb))) if ia == ib => {
                    i += 1;
                    j += 1;
                    va - vb
                }
                (Some(&(ia, va)), Some(&(ib, _))) if ia < ib => {
                    i += 1;
                    va
                }
                (Some(_), Some(&(_, vb))) => {
                    j += 1;
                    -vb
                }
                (Some(&(_, va)), None) => {
                    i += 1;
                    va
                }
                (None, Some(&(_, vb))) => {
                    j += 1;
                    -vb
                }
                (None, None) => unreachable!(),
            };
            sum += d * d;
        }
        sum
    }

    /// Applies a feature-id permutation: entry `i` moves to `perm[i]`.
    pub fn permuted(&self, perm: &[u32]) -> SparseVector {
        SparseVector::from_unordered(self.entries.iter().map(|&(i, v)| (perm[i as usize], v)).collect())
    }
}

impl TryFrom<Vec<(u32, f64)>> for SparseVector {
    type Error = FeatureError;

    fn try_from(v: Vec<(u32, f64)>) -> Result<Self, Self::Error> {
        SparseVector::new(v)
    }
}

impl From<SparseVector> for Vec<(u32, f64)> {
    fn from(v: SparseVector) -> Self {
        v.entries
    }
}

/// Optional vocabulary pruning. Both are off by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VocabOptions {
    /// Drop n-grams appearing in fewer training documents than this.
    pub min_df: Option<u32>,
    /// Keep only the most frequent n-grams (by document frequency, ties lexicographic).
    pub max_features: Option<usize>,
}

/// Immutable n-gram → feature id map, built from training documents only.
/// Ids follow the lexicographic order of the n-gram strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    range: NgramRange,
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    n_train_docs: usize,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn build(train_docs: &[TokenList], range: NgramRange) -> Result<Self, FeatureError> {
        Self::build_with(train_docs, range, VocabOptions::default())
    }

    pub fn build_with(train_docs: &[TokenList], range: NgramRange, opts: VocabOptions) -> Result<Self, FeatureError> {
        let mut df: BTreeMap<String, u32> = BTreeMap::new();
        for doc in train_docs {
            let distinct: HashSet<String> = extract_ngrams(doc, range).into_iter().collect();
            for g in distinct {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        if let Some(min) = opts.min_df {
            df.retain(|_, d| *d >= min);
        }
        if let Some(cap) = opts.max_features {
            if df.len() > cap {
                let mut ranked: Vec<(String, u32)> = std::mem::take(&mut df).into_iter().collect();
                ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                ranked.truncate(cap);
                df = ranked.into_iter().collect();
            }
        }
        if df.is_empty() {
            return Err(FeatureError::EmptyVocabulary);
        }
        let (terms, doc_freq): (Vec<_>, Vec<_>) = df.into_iter().unzip();
        Ok(Self::from_parts(range, terms, doc_freq, train_docs.len()))
    }

    fn from_parts(range: NgramRange, terms: Vec<String>, doc_freq: Vec<u32>, n_train_docs: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocabulary { range, terms, doc_freq, n_train_docs, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn range(&self) -> NgramRange {
        self.range
    }

    pub fn n_train_docs(&self) -> usize {
        self.n_train_docs
    }

    pub fn id(&self, ngram: &str) -> Option<u32> {
        self.index.get(ngram).copied()
    }

    pub fn term(&self, id: u32) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self) -> &[u32] {
        &self.doc_freq
    }

    /// Smoothed inverse document frequency: `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, id: u32) -> f64 {
        let n = self.n_train_docs as f64;
        let df = f64::from(self.doc_freq[id as usize]);
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    }

    pub fn vectorize(
        &self,
        doc: &[String],
        range: NgramRange,
        scheme: WeightingScheme,
    ) -> Result<SparseVector, FeatureError> {
        if range != self.range {
            return Err(FeatureError::RangeMismatch { expected: self.range, found: range });
        }
        let mut ids: Vec<u32> = extract_ngrams(doc, range).iter().filter_map(|g| self.id(g)).collect();
        ids.sort_unstable();
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for id in ids {
            match entries.last_mut() {
                Some(last) if last.0 == id => last.1 += 1.0,
                _ => entries.push((id, 1.0)),
            }
        }
        match scheme {
            WeightingScheme::Count => {}
            WeightingScheme::Binary => entries.iter_mut().for_each(|e| e.1 = 1.0),
            WeightingScheme::TfIdf => {
                for e in entries.iter_mut() {
                    e.1 *= self.idf(e.0);
                }
                let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    entries.iter_mut().for_each(|e| e.1 /= norm);
                }
            }
        }
        Ok(SparseVector { entries })
    }

    /// Vectorizes many documents, in parallel when enabled.
    pub fn vectorize_batch(&self, docs: &[TokenList], scheme: WeightingScheme) -> Vec<SparseVector> {
        crate::par::map(docs, |d| self.vectorize(d, self.range, scheme).expect("range taken from the vocabulary"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&VocabularyFile::from(self)).expect("vocabulary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FeatureError> {
        let file: VocabularyFile =
            serde_json::from_str(text).map_err(|e| FeatureError::InvalidVocabulary(e.to_string()))?;
        Vocabulary::try_from(file)
    }
}

/// Versioned on-disk form: `{schema_version, ngram_lo, ngram_hi, n_train_docs, terms: [[ngram, id, df], …]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabularyFile {
    pub schema_version: u32,
    pub ngram_lo: usize,
    pub ngram_hi: usize,
    pub n_train_docs: usize,
    pub terms: Vec<(String, u32, u32)>,
}

impl From<&Vocabulary> for VocabularyFile {
    fn from(v: &Vocabulary) -> Self {
        VocabularyFile {
            schema_version: VOCAB_SCHEMA_VERSION,
            ngram_lo: v.range.lo,
            ngram_hi: v.range.hi,
            n_train_docs: v.n_train_docs,
            terms: v.terms.iter().zip(&v.doc_freq).enumerate().map(|(i, (t, &df))| (t.clone(), i as u32, df)).collect(),
        }
    }
}

impl TryFrom<VocabularyFile> for Vocabulary {
    type Error = FeatureError;

    fn try_from(f: VocabularyFile) -> Result<Self, Self::Error> {
        let bad = |m: String| Err(FeatureError::InvalidVocabulary(m));
        if f.schema_version != VOCAB_SCHEMA_VERSION {
            return bad(format!("schema_version {} (expected {VOCAB_SCHEMA_VERSION})", f.schema_version));
        }
        let range = NgramRange::new(f.ngram_lo, f.ngram_hi)?;
        let mut terms = Vec::with_capacity(f.terms.len());
        let mut doc_freq = Vec::with_capacity(f.terms.len());
        for (pos, (t, id, df)) in f.terms.into_iter().enumerate() {
            if id as usize != pos {
                return bad(format!("term {t:?} has id {id}, expected {pos}"));
            }
            if df == 0 || df as usize > f.n_train_docs {
                return bad(format!("term {t:?} has document frequency {df}"));
            }
            if terms.last().is_some_and(|prev: &String| *prev >= t) {
                return bad(format!("term {t:?} out of lexicographic order"));
            }
            terms.push(t);
            doc_freq.push(df);
        }
        if terms.is_empty() {
            return Err(FeatureError::EmptyVocabulary);
        }
        Ok(Vocabulary::from_parts(range, terms, doc_freq, f.n_train_docs))
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        VocabularyFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Vocabulary::try_from(VocabularyFile::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tl(t: &[&str]) -> TokenList {
        TokenList::from_strs(t).unwrap()
    }

    fn strings(t: &[&str]) -> Vec<String> {
        t.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ngram_windows() {
        let abc = tl(&["a", "b", "c"]);
        assert_eq!(extract_ngrams(&abc, NgramRange::UNI), strings(&["a", "b", "c"]));
        assert_eq!(extract_ngrams(&abc, NgramRange::BI), strings(&["a b", "b c"]));
        assert_eq!(extract_ngrams(&abc, NgramRange::UNI_BI), strings(&["a", "b", "c", "a b", "b c"]));
        assert!(extract_ngrams(&tl(&["a"]), NgramRange::BI).is_empty());
        assert!(NgramRange::new(0, 1).is_err());
        assert!(NgramRange::new(2, 1).is_err());
    }

    #[test]
    fn vocabulary_enumeration() {
        let v = Vocabulary::build(&[tl(&["a", "b"]), tl(&["b", "c"])], NgramRange::UNI).unwrap();
        assert_eq!(v.terms(), &strings(&["a", "b", "c"])[..]);
        assert_eq!(v.doc_freq(), &[1, 2, 1]);
        assert_eq!(v.id("b"), Some(1));
        assert_eq!(v.n_train_docs(), 2);
        assert_eq!(Vocabulary::build(&[tl(&[])], NgramRange::UNI), Err(FeatureError::EmptyVocabulary));
        assert_eq!(Vocabulary::build(&[tl(&["a", "b", "c"])], NgramRange::UNI_BI).unwrap().len(), 5);
        // Document frequency counts documents, not occurrences.
        let v = Vocabulary::build(&[tl(&["a", "a", "a"])], NgramRange::UNI).unwrap();
        assert_eq!(v.doc_freq(), &[1]);
    }

    #[test]
    fn weighting_schemes() {
        let v = Vocabulary::build(&[tl(&["a", "b"])], NgramRange::UNI).unwrap();
        let doc = tl(&["a", "b", "a"]);
        let count = v.vectorize(&doc, NgramRange::UNI, WeightingScheme::Count).unwrap();
        assert_eq!(count.entries(), &[(0, 2.0), (1, 1.0)]);
        let bin = v.vectorize(&doc, NgramRange::UNI, WeightingScheme::Binary).unwrap();
        assert_eq!(bin.entries(), &[(0, 1.0), (1, 1.0)]);
        let oov = v.vectorize(&tl(&["z"]), NgramRange::UNI, WeightingScheme::Count).unwrap();
        assert!(oov.is_empty());
        assert!(matches!(
            v.vectorize(&doc, NgramRange::BI, WeightingScheme::Count),
            Err(FeatureError::RangeMismatch { .. })
        ));
    }

    #[test]
    fn idf_of_term_in_every_document_is_one() {
        let v = Vocabulary::build(&[tl(&["a", "b"]), tl(&["a"])], NgramRange::UNI).unwrap();
        assert_eq!(v.idf(0), 1.0);
        assert!((v.idf(1) - ((3.0f64 / 2.0).ln() + 1.0)).abs() < 1e-15);
        let row = v.vectorize(&tl(&["a", "b", "zz"]), NgramRange::UNI, WeightingScheme::TfIdf).unwrap();
        assert!((row.norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pruning_options() {
        let docs = [tl(&["a", "b"]), tl(&["a", "c"]), tl(&["a", "b"])];
        let v = Vocabulary::build_with(&docs, NgramRange::UNI, VocabOptions { min_df: Some(2), max_features: None })
            .unwrap();
        assert_eq!(v.terms(), &strings(&["a", "b"])[..]);
        let v = Vocabulary::build_with(&docs, NgramRange::UNI, VocabOptions { min_df: None, max_features: Some(1) })
            .unwrap();
        assert_eq!(v.terms(), &strings(&["a"])[..]);
    }

    #[test]
    fn vocabulary_json() {
        let v = Vocabulary::build(&[tl(&["جيد", "جدا"]), tl(&["سيء"])], NgramRange::UNI_BI).unwrap();
        let text = v.to_json();
        assert!(text.contains("\"schema_version\":1"));
        assert_eq!(Vocabulary::from_json(&text).unwrap(), v);
        let bumped = text.replace("\"schema_version\":1", "\"schema_version\":9");
        assert!(Vocabulary::from_json(&bumped).is_err());
    }

    #[test]
    fn sparse_vector_checks() {
        assert!(SparseVector::new(vec![(1, 1.0), (1, 2.0)]).is_err());
        assert!(SparseVector::new(vec![(2, 1.0), (1, 2.0)]).is_err());
        assert!(SparseVector::new(vec![(0, 0.0)]).is_err());
        let a = SparseVector::new(vec![(0, 1.0), (3, 2.0)]).unwrap();
        let b = SparseVector::new(vec![(1, 1.0), (3, 1.0)]).unwrap();
        assert_eq!(a.dot(&b), 2.0);
        assert_eq!(a.squared_distance(&b), 1.0 + 1.0 + 1.0);
        assert_eq!(a.get(3), 2.0);
        assert_eq!(a.get(2), 0.0);
        let s = SparseVector::from_unordered(vec![(3, 1.0), (1, 2.0), (3, -1.0)]);
        assert_eq!(s.entries(), &[(1, 2.0)]);
    }

    fn corpus_strategy() -> impl Strategy<Value = Vec<TokenList>> {
        let word = prop::sample::select(vec!["a", "b", "c", "d", "e"]);
        let doc = prop::collection::vec(word, 0..8).prop_map(|w| TokenList::from_strs(&w).unwrap());
        prop::collection::vec(doc, 1..6)
    }

    proptest! {
        #[test]
        fn vocab_additivity_and_closure(docs in corpus_strategy(), probe in prop::collection::vec(prop::sample::select(vec!["a", "b", "x", "y"]), 0..6)) {
            let uni = Vocabulary::build(&docs, NgramRange::UNI);
            let bi = Vocabulary::build(&docs, NgramRange::BI);
            let both = Vocabulary::build(&docs, NgramRange::UNI_BI);
            let size = |v: &Result<Vocabulary, FeatureError>| v.as_ref().map_or(0, |v| v.len());
            prop_assert_eq!(size(&both), size(&uni) + size(&bi));
            if let Ok(v) = both {
                for f in v.doc_freq() {
                    prop_assert!(*f >= 1 && *f as usize <= v.n_train_docs());
                }
                let probe = TokenList::from_strs(&probe).unwrap();
                for scheme in [WeightingScheme::Count, WeightingScheme::Binary, WeightingScheme::TfIdf] {
                    let row = v.vectorize(&probe, NgramRange::UNI_BI, scheme).unwrap();
                    prop_assert!(row.max_index().is_none_or(|m| (m as usize) < v.len()));
                    prop_assert!(SparseVector::new(row.entries().to_vec()).is_ok());
                    match scheme {
                        WeightingScheme::Count => prop_assert!(row.entries().iter().all(|(_, w)| *w >= 1.0 && w.fract() == 0.0)),
                        WeightingScheme::Binary => prop_assert!(row.entries().iter().all(|(_, w)| *w == 1.0)),
                        WeightingScheme::TfIdf => prop_assert!(row.is_empty() || (row.norm_sq().sqrt() - 1.0).abs() < 1e-9),
                    }
                    prop_assert_eq!(&v.vectorize(&probe, NgramRange::UNI_BI, scheme).unwrap(), &row);
                }
                for id in 0..v.len() as u32 {
                    prop_assert!(v.idf(id) >= 1.0);
                }
            }
        }

        #[test]
        fn vocab_ids_independent_of_doc_order(mut docs in corpus_strategy()) {
            if let Ok(a) = Vocabulary::build(&docs, NgramRange::UNI_BI) {
                docs.reverse();
                let b = Vocabulary::build(&docs, NgramRange::UNI_BI).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
