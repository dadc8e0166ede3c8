//! Labeled comment collections: loading, validation, binary restriction and
//! deterministic (optionally stratified) train/test splitting.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed record at line {line}: {cause}")]
    MalformedRecord { line: usize, cause: String },
    #[error("unknown label {value:?} at line {line}")]
    UnknownLabel { line: usize, value: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("label {0} has fewer than 2 documents; cannot stratify")]
    StratumTooSmall(Polarity),
    #[error("train fraction {0} leaves the train or test side empty")]
    DegenerateFraction(TrainFraction),
    #[error("invalid train fraction: {0}")]
    InvalidFraction(String),
}

/// Sentiment polarity. Codes are fixed: positive 0, negative 1, neutral 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

    pub fn code(self) -> u8 {
        match self {
            Polarity::Positive => 0,
            Polarity::Negative => 1,
            Polarity::Neutral => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(usize::from(code)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Polarity {
    type Err = String;

    /// Case-insensitive; surrounding whitespace ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            "neutral" => Ok(Polarity::Neutral),
            _ => Err(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledComment {
    pub id: usize,
    pub text: String,
    pub label: Polarity,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTally {
    pub documents: usize,
    pub tokens: usize,
}

/// Per-label document and whitespace-token tallies, indexed by polarity code.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts([LabelTally; 3]);

impl LabelCounts {
    pub fn get(&self, label: Polarity) -> LabelTally {
        self.0[usize::from(label.code())]
    }

    pub fn documents(&self, label: Polarity) -> usize {
        self.get(label).documents
    }

    pub fn total_documents(&self) -> usize {
        self.0.iter().map(|t| t.documents).sum()
    }

    pub fn total_tokens(&self) -> usize {
        self.0.iter().map(|t| t.tokens).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<LabeledComment>,
    counts: LabelCounts,
}

impl Corpus {
    /// Builds a corpus from documents as given. Tallies are always recomputed.
    pub fn new(documents: Vec<LabeledComment>) -> Self {
        let mut counts = LabelCounts::default();
        for doc in &documents {
            let tally = &mut counts.0[usize::from(doc.label.code())];
            tally.documents += 1;
            tally.tokens += doc.text.split_whitespace().count();
        }
        Corpus { documents, counts }
    }

    /// Builds a corpus with dense ids in iteration order.
    pub fn from_texts<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = (S, Polarity)>,
        S: Into<String>,
    {
        let documents = items
            .into_iter()
            .enumerate()
            .map(|(id, (text, label))| LabeledComment { id, text: text.into(), label })
            .collect();
        Corpus::new(documents)
    }

    pub fn documents(&self) -> &[LabeledComment] {
        &self.documents
    }

    pub fn counts(&self) -> &LabelCounts {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn labels(&self) -> Vec<Polarity> {
        self.documents.iter().map(|d| d.label).collect()
    }

    /// Labels with at least one document, ascending by code.
    pub fn classes(&self) -> Vec<Polarity> {
        Polarity::ALL.into_iter().filter(|&p| self.counts.documents(p) > 0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    /// `.tsv` means TSV, anything else JSON Lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    text: String,
    label: String,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let content = fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => CorpusError::FileNotFound(path.to_path_buf()),
        _ => CorpusError::Io { path: path.to_path_buf(), source: e },
    })?;
    parse_corpus(&content, format)
}

/// Parses corpus text already in memory. Line numbers in errors are 1-based.
pub fn parse_corpus(content: &str, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let mut items = Vec::new();
    let mut lines = content.lines().enumerate().map(|(i, l)| (i + 1, l));

    if format == CorpusFormat::Tsv {
        match lines.next() {
            Some((_, header)) if header.trim_end_matches('\r') == "label\ttext" => {}
            Some((line, header)) => {
                return Err(CorpusError::MalformedRecord {
                    line,
                    cause: format!("expected header \"label<TAB>text\", found {header:?}"),
                })
            }
            None => return Err(CorpusError::EmptyCorpus),
        }
    }

    for (line, raw) in lines {
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        let (label, text) = match format {
            CorpusFormat::Jsonl => {
                let rec: JsonRecord = serde_json::from_str(raw)
                    .map_err(|e| CorpusError::MalformedRecord { line, cause: e.to_string() })?;
                (rec.label, rec.text)
            }
            CorpusFormat::Tsv => {
                let cols: Vec<&str> = raw.split('\t').collect();
                if cols.len() != 2 {
                    return Err(CorpusError::MalformedRecord {
                        line,
                        cause: format!("expected 2 tab-separated columns, found {}", cols.len()),
                    });
                }
                (cols[0].to_string(), cols[1].to_string())
            }
        };
        let label: Polarity = label.parse().map_err(|value| CorpusError::UnknownLabel { line, value })?;
        if text.trim().is_empty() {
            return Err(CorpusError::MalformedRecord { line, cause: "empty text".into() });
        }
        items.push((text, label));
    }

    if items.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(Corpus::from_texts(items))
}

/// Writes a corpus as JSON Lines (`{"text":…,"label":…}` per line).
pub fn to_jsonl(corpus: &Corpus) -> String {
    let mut out = String::new();
    for doc in corpus.documents() {
        let line = serde_json::json!({ "text": doc.text, "label": doc.label });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// Keeps only positive and negative documents; ids are re-densified.
pub fn restrict_to_binary(corpus: &Corpus) -> Result<Corpus, CorpusError> {
    let kept: Vec<_> =
        corpus.documents().iter().filter(|d| d.label != Polarity::Neutral).map(|d| (d.text.clone(), d.label)).collect();
    if kept.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(Corpus::from_texts(kept))
}

/// An exact rational train fraction in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainFraction {
    num: u64,
    den: u64,
}

impl TrainFraction {
    pub fn new(num: u64, den: u64) -> Result<Self, CorpusError> {
        if den == 0 || num == 0 || num >= den {
            return Err(CorpusError::InvalidFraction(format!("{num}/{den}")));
        }
        let g = gcd(num, den);
        Ok(TrainFraction { num: num / g, den: den / g })
    }

    /// floor(fraction × n), computed exactly.
    pub fn floor_of(self, n: usize) -> usize {
        ((n as u128 * self.num as u128) / self.den as u128) as usize
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Default for TrainFraction {
    fn default() -> Self {
        TrainFraction { num: 4, den: 5 }
    }
}

impl fmt::Display for TrainFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for TrainFraction {
    type Err = CorpusError;

    /// Accepts `"n/d"` or a decimal such as `"0.8"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::InvalidFraction(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return TrainFraction::new(n, d);
        }
        // Decimal: scale by the number of fractional digits.
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) || int.trim() != "0" && !int.is_empty() {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let num = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        TrainFraction::new(num, den)
    }
}

impl Serialize for TrainFraction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TrainFraction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(f64),
        }
        let text = match Repr::deserialize(d)? {
            Repr::Text(t) => t,
            Repr::Number(x) => format!("{x}"),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: TrainFraction,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: TrainFraction::default(), seed: 0, stratified: true }
    }
}

/// Splits a corpus into train and test sides.
///
/// Stratified: each label's documents are shuffled with a stream derived from
/// `(seed, label)` and the first `floor(fraction × n_label)` go to train.
/// Otherwise the whole corpus is shuffled once. Both sides keep the original
/// ids and the original document order.
pub fn stratified_split(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus), CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut in_train = vec![false; corpus.len()];

    if spec.stratified {
        for label in corpus.classes() {
            let mut positions: Vec<usize> =
                corpus.documents().iter().enumerate().filter(|(_, d)| d.label == label).map(|(i, _)| i).collect();
            if positions.len() < 2 {
                return Err(CorpusError::StratumTooSmall(label));
            }
            let mut rng = seed::rng(seed::derive(spec.seed, label.name()));
            positions.shuffle(&mut rng);
            for &p in &positions[..spec.train_fraction.floor_of(positions.len())] {
                in_train[p] = true;
            }
        }
    } else {
        let mut positions: Vec<usize> = (0..corpus.len()).collect();
        let mut rng = seed::rng(seed::derive(spec.seed, "unstratified"));
        positions.shuffle(&mut rng);
        for &p in &positions[..spec.train_fraction.floor_of(positions.len())] {
            in_train[p] = true;
        }
    }

    let (train, test): (Vec<_>, Vec<_>) = corpus.documents().iter().cloned().zip(in_train).partition(|(_, t)| *t);
    if train.is_empty() || test.is_empty() {
        return Err(CorpusError::DegenerateFraction(spec.train_fraction));
    }
    let strip = |v: Vec<(LabeledComment, bool)>| Corpus::new(v.into_iter().map(|(d, _)| d).collect());
    Ok((strip(train), strip(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn synthetic(pos: usize, neg: usize, neu: usize) -> Corpus {
        let mut items = Vec::new();
        for (label, n) in [(Polarity::Positive, pos), (Polarity::Negative, neg), (Polarity::Neutral, neu)] {
            for i in 0..n {
                items.push((format!("تعليق رقم {i} {label}"), label));
            }
        }
        Corpus::from_texts(items)
    }

    #[test]
    fn jsonl_one_document_per_label() {
        let src = r#"{"text":"جيد جدا","label":"positive"}
{"text":"سيء","label":"NEGATIVE","extra":1}
{"text":"خبر","label":"Neutral"}
"#;
        let c = parse_corpus(src, CorpusFormat::Jsonl).unwrap();
        assert_eq!(c.len(), 3);
        for p in Polarity::ALL {
            assert_eq!(c.counts().documents(p), 1);
        }
        assert_eq!(c.counts().get(Polarity::Positive).tokens, 2);
        let ids: Vec<_> = c.documents().iter().map(|d| d.id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn unknown_label_names_line_and_value() {
        let src = "{\"text\":\"a b\",\"label\":\"positive\"}\n{\"text\":\"x\",\"label\":\"mixed\"}\n";
        match parse_corpus(src, CorpusFormat::Jsonl) {
            Err(CorpusError::UnknownLabel { line, value }) => {
                assert_eq!(line, 2);
                assert_eq!(value, "mixed");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_and_empty_records() {
        let err = parse_corpus("{\"label\":\"positive\"}\n", CorpusFormat::Jsonl).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedRecord { line: 1, .. }));
        let err = parse_corpus("{\"text\":\"  \",\"label\":\"positive\"}\n", CorpusFormat::Jsonl).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedRecord { line: 1, .. }));
        assert!(matches!(parse_corpus("\n\n", CorpusFormat::Jsonl), Err(CorpusError::EmptyCorpus)));
    }

    #[test]
    fn tsv_format() {
        let src = "label\ttext\npositive\tجيد\nneutral\tخبر عادي\n";
        let c = parse_corpus(src, CorpusFormat::Tsv).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.documents()[1].label, Polarity::Neutral);
        let bad = parse_corpus("text\tlabel\npositive\tx\n", CorpusFormat::Tsv).unwrap_err();
        assert!(matches!(bad, CorpusError::MalformedRecord { line: 1, .. }));
        let bad = parse_corpus("label\ttext\npositive\tx\ty\n", CorpusFormat::Tsv).unwrap_err();
        assert!(matches!(bad, CorpusError::MalformedRecord { line: 2, .. }));
    }

    #[test]
    fn missing_file() {
        let err = load_corpus(Path::new("/nonexistent/corpus.jsonl"), CorpusFormat::Jsonl).unwrap_err();
        assert!(matches!(err, CorpusError::FileNotFound(_)));
    }

    #[test]
    fn table_one_counts_and_split_totals() {
        let c = synthetic(453, 760, 420);
        assert_eq!(c.len(), 1633);
        assert_eq!(c.counts().documents(Polarity::Positive), 453);
        assert_eq!(c.counts().documents(Polarity::Negative), 760);
        assert_eq!(c.counts().documents(Polarity::Neutral), 420);
        let (train, test) = stratified_split(&c, &SplitSpec::default()).unwrap();
        assert_eq!(train.len(), 1306);
        assert_eq!(test.len(), 327);
        assert_eq!(train.counts().documents(Polarity::Positive), 362);
        assert_eq!(train.counts().documents(Polarity::Negative), 608);
        assert_eq!(train.counts().documents(Polarity::Neutral), 336);
    }

    #[test]
    fn single_label_exact_fraction() {
        let c = synthetic(10, 0, 0);
        let (train, test) = stratified_split(&c, &SplitSpec::default()).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
    }

    #[test]
    fn seeds_change_membership_not_sizes() {
        let c = synthetic(40, 30, 20);
        let a = stratified_split(&c, &SplitSpec { seed: 1, ..Default::default() }).unwrap();
        let b = stratified_split(&c, &SplitSpec { seed: 2, ..Default::default() }).unwrap();
        assert_eq!(a.0.len(), b.0.len());
        assert_eq!(a.1.len(), b.1.len());
        let ids = |c: &Corpus| c.documents().iter().map(|d| d.id).collect::<BTreeSet<_>>();
        assert_ne!(ids(&a.0), ids(&b.0));
        let again = stratified_split(&c, &SplitSpec { seed: 1, ..Default::default() }).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn split_errors() {
        let c = synthetic(1, 5, 0);
        assert!(matches!(
            stratified_split(&c, &SplitSpec::default()),
            Err(CorpusError::StratumTooSmall(Polarity::Positive))
        ));
        let c = synthetic(2, 2, 0);
        let spec = SplitSpec { train_fraction: TrainFraction::new(1, 3).unwrap(), ..Default::default() };
        assert!(matches!(stratified_split(&c, &spec), Err(CorpusError::DegenerateFraction(_))));
    }

    #[test]
    fn unstratified_split_sizes() {
        let c = synthetic(7, 5, 3);
        let spec = SplitSpec { stratified: false, ..Default::default() };
        let (train, test) = stratified_split(&c, &spec).unwrap();
        assert_eq!((train.len(), test.len()), (12, 3));
    }

    #[test]
    fn binary_restriction() {
        let c = synthetic(453, 760, 420);
        let b = restrict_to_binary(&c).unwrap();
        assert_eq!(b.len(), 1213);
        assert_eq!(b.documents().last().unwrap().id, 1212);
        assert_eq!(restrict_to_binary(&b).unwrap(), b);
        assert!(matches!(restrict_to_binary(&synthetic(0, 0, 4)), Err(CorpusError::EmptyCorpus)));
        let no_neutral = synthetic(3, 4, 0);
        assert_eq!(restrict_to_binary(&no_neutral).unwrap(), no_neutral);
    }

    #[test]
    fn fractions_parse() {
        assert_eq!("4/5".parse::<TrainFraction>().unwrap(), TrainFraction::default());
        assert_eq!("0.8".parse::<TrainFraction>().unwrap(), TrainFraction::default());
        assert!("1/1".parse::<TrainFraction>().is_err());
        assert!("0".parse::<TrainFraction>().is_err());
        assert!("1.5".parse::<TrainFraction>().is_err());
        let spec: SplitSpec = toml::from_str("train_fraction = 0.75\nseed = 3").unwrap();
        assert_eq!(spec.train_fraction, TrainFraction::new(3, 4).unwrap());
        assert!(spec.stratified);
    }

    #[test]
    fn polarity_codes_round_trip() {
        for p in Polarity::ALL {
            assert_eq!(Polarity::from_code(p.code()), Some(p));
            let s = serde_json::to_string(&p).unwrap();
            assert_eq!(serde_json::from_str::<Polarity>(&s).unwrap(), p);
        }
        assert_eq!(Polarity::from_code(3), None);
    }
}
