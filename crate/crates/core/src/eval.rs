//! Confusion matrices, metrics, the experiment grid and its reports.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{self, ClassifierKind, Dataset, TrainConfig};
use crate::corpus::{restrict_to_binary, stratified_split, Corpus, Polarity, SplitSpec};
use crate::features::{NgramRange, SparseVector, Vocabulary, WeightingScheme};
use crate::par;
use crate::preprocess::{Pipeline, PipelineConfig, TokenList};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("no labels to evaluate")]
    Empty,
    #[error("label {0} is not among the matrix classes")]
    UnknownClass(Polarity),
    #[error("experiment grid axis `{0}` is empty")]
    EmptyAxis(&'static str),
    #[error("no results to render")]
    NoResults,
    #[error("malformed report: {0}")]
    MalformedReport(String),
}

/// Rows are true classes, columns predicted classes, both in `classes` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<Polarity>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }
}

/// Tallies over the union of labels seen in either sequence.
pub fn confusion(truth: &[Polarity], predicted: &[Polarity]) -> Result<ConfusionMatrix, EvalError> {
    let mut classes: Vec<Polarity> = truth.iter().chain(predicted).copied().collect();
    classes.sort();
    classes.dedup();
    confusion_with_classes(truth, predicted, &classes)
}

/// Tallies over a fixed class list (sorted and deduplicated first).
pub fn confusion_with_classes(
    truth: &[Polarity],
    predicted: &[Polarity],
    classes: &[Polarity],
) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch { truth: truth.len(), predicted: predicted.len() });
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut classes = classes.to_vec();
    classes.sort();
    classes.dedup();
    let pos = |p: Polarity| classes.iter().position(|&c| c == p).ok_or(EvalError::UnknownClass(p));
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for (&t, &p) in truth.iter().zip(predicted) {
        counts[pos(t)?][pos(p)?] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: Polarity,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Support-weighted; the headline figures.
    pub weighted: Averages,
    #[serde(rename = "macro")]
    pub macro_avg: Averages,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let total = cm.total();
    let per_class: Vec<ClassMetrics> = cm
        .classes
        .iter()
        .enumerate()
        .map(|(i, &class)| {
            let tp = cm.counts[i][i];
            let precision = ratio(tp, cm.col_sum(i));
            let recall = ratio(tp, cm.row_sum(i));
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            ClassMetrics { class, precision, recall, f1, support: cm.row_sum(i) }
        })
        .collect();
    let k = per_class.len().max(1) as f64;
    let n = total.max(1) as f64;
    let avg = |f: fn(&ClassMetrics) -> f64| {
        (per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / n, per_class.iter().map(f).sum::<f64>() / k)
    };
    let (wp, mp) = avg(|c| c.precision);
    let (wr, mr) = avg(|c| c.recall);
    let (wf, mf) = avg(|c| c.f1);
    MetricsReport {
        accuracy: ratio(cm.trace(), total),
        per_class,
        weighted: Averages { precision: wp, recall: wr, f1: wf },
        macro_avg: Averages { precision: mp, recall: mr, f1: mf },
        total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Positive vs negative; neutral comments are dropped.
    Two,
    Three,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Two, Task::Three];

    pub fn name(self) -> &'static str {
        match self {
            Task::Two => "two",
            Task::Three => "three",
        }
    }

    pub fn prepare(self, corpus: &Corpus) -> Result<Corpus, crate::corpus::CorpusError> {
        match self {
            Task::Two => restrict_to_binary(corpus),
            Task::Three => Ok(corpus.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Uni,
    Bi,
    UniBi,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::Uni, FeatureSet::Bi, FeatureSet::UniBi];

    pub fn range(self) -> NgramRange {
        match self {
            FeatureSet::Uni => NgramRange::UNI,
            FeatureSet::Bi => NgramRange::BI,
            FeatureSet::UniBi => NgramRange::UNI_BI,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Uni => "uni",
            FeatureSet::Bi => "bi",
            FeatureSet::UniBi => "uni_bi",
        }
    }

    fn title(self) -> &'static str {
        match self {
            FeatureSet::Uni => "uni-grams",
            FeatureSet::Bi => "bi-grams",
            FeatureSet::UniBi => "uni-grams + bi-grams",
        }
    }
}

macro_rules! named_enum_str {
    ($t:ty, $($v:expr),+) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $t {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                [$($v),+]
                    .into_iter()
                    .find(|v| v.name().eq_ignore_ascii_case(s))
                    .ok_or_else(|| format!("unknown value {s:?}"))
            }
        }
    };
}

named_enum_str!(Task, Task::Two, Task::Three);
named_enum_str!(FeatureSet, FeatureSet::Uni, FeatureSet::Bi, FeatureSet::UniBi);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentGrid {
    pub feature_sets: Vec<FeatureSet>,
    pub weightings: Vec<WeightingScheme>,
    pub tasks: Vec<Task>,
    pub classifiers: Vec<ClassifierKind>,
    pub split: SplitSpec,
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentGrid {
    /// Three feature sets × count weighting × both tasks × six classifiers.
    fn default() -> Self {
        ExperimentGrid {
            feature_sets: FeatureSet::ALL.to_vec(),
            weightings: vec![WeightingScheme::Count],
            tasks: Task::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            split: SplitSpec::default(),
            pipeline: PipelineConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<(), EvalError> {
        let axes = [
            ("feature_sets", self.feature_sets.is_empty()),
            ("weightings", self.weightings.is_empty()),
            ("tasks", self.tasks.is_empty()),
            ("classifiers", self.classifiers.is_empty()),
        ];
        match axes.into_iter().find(|a| a.1) {
            Some((name, _)) => Err(EvalError::EmptyAxis(name)),
            None => Ok(()),
        }
    }

    /// Every cell, sorted and deduplicated.
    pub fn cells(&self) -> Vec<CellDescriptor> {
        let mut out = Vec::new();
        for &task in &self.tasks {
            for &features in &self.feature_sets {
                for &weighting in &self.weightings {
                    for &classifier in &self.classifiers {
                        out.push(CellDescriptor { task, features, weighting, classifier });
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// One grid cell. The derived ordering is the report ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellDescriptor {
    pub task: Task,
    pub features: FeatureSet,
    pub weighting: WeightingScheme,
    pub classifier: ClassifierKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    #[serde(flatten)]
    pub cell: CellDescriptor,
    pub seed: u64,
    pub metrics: Option<MetricsReport>,
    pub confusion: Option<ConfusionMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CellResult {
    fn failed(cell: CellDescriptor, seed: u64, error: String) -> Self {
        CellResult { cell, seed, metrics: None, confusion: None, error: Some(error) }
    }
}

type BlockKey = (Task, FeatureSet, WeightingScheme);

struct Prepared {
    train: Dataset,
    test_rows: Vec<SparseVector>,
    test_labels: Vec<Polarity>,
}

/// Runs every cell of the grid. A failing cell is reported in its result and
/// does not stop the others. Results come back in cell order.
pub fn run_grid(corpus: &Corpus, grid: &ExperimentGrid) -> Result<Vec<CellResult>, EvalError> {
    grid.validate()?;
    let cells = grid.cells();
    let seed = grid.train.seed;
    let pipeline = match Pipeline::new(grid.pipeline.clone()) {
        Ok(p) => p,
        Err(e) => return Ok(cells.into_iter().map(|c| CellResult::failed(c, seed, e.to_string())).collect()),
    };

    // Prepare each (task, features, weighting) block once; cells share it.
    let mut blocks: Vec<(BlockKey, Result<Prepared, String>)> = Vec::new();
    for &task in &dedup_sorted(&grid.tasks) {
        let split = task
            .prepare(corpus)
            .and_then(|c| stratified_split(&c, &grid.split))
            .map_err(|e| format!("{task} task: {e}"));
        let tokens = split
            .as_ref()
            .map(|(train, test)| {
                let texts = |c: &Corpus| c.documents().iter().map(|d| d.text.clone()).collect::<Vec<_>>();
                (pipeline.run_batch(&texts(train)), pipeline.run_batch(&texts(test)), train.labels(), test.labels())
            })
            .map_err(String::clone);
        for &features in &dedup_sorted(&grid.feature_sets) {
            let vocab = match &tokens {
                Ok((train_tokens, ..)) => {
                    Vocabulary::build(train_tokens, features.range()).map_err(|e| format!("{features}: {e}"))
                }
                Err(e) => Err(e.clone()),
            };
            for &weighting in &dedup_sorted(&grid.weightings) {
                let prepared = match (&tokens, &vocab) {
                    (Ok((train_tokens, test_tokens, train_labels, test_labels)), Ok(v)) => {
                        prepare(v, train_tokens, test_tokens, train_labels, test_labels, weighting)
                    }
                    (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                };
                blocks.push(((task, features, weighting), prepared));
            }
        }
    }

    Ok(par::map(&cells, |cell| {
        let block = blocks
            .iter()
            .find(|(k, _)| *k == (cell.task, cell.features, cell.weighting))
            .map(|(_, b)| b)
            .expect("every cell has a prepared block");
        match block {
            Ok(p) => evaluate_cell(*cell, p, &grid.train),
            Err(e) => CellResult::failed(*cell, seed, e.clone()),
        }
    }))
}

fn dedup_sorted<T: Ord + Copy>(xs: &[T]) -> Vec<T> {
    let mut v = xs.to_vec();
    v.sort();
    v.dedup();
    v
}

fn prepare(
    vocab: &Vocabulary,
    train_tokens: &[TokenList],
    test_tokens: &[TokenList],
    train_labels: &[Polarity],
    test_labels: &[Polarity],
    weighting: WeightingScheme,
) -> Result<Prepared, String> {
    let train_rows = vocab.vectorize_batch(train_tokens, weighting);
    let test_rows = vocab.vectorize_batch(test_tokens, weighting);
    let train = Dataset::new(train_rows, train_labels.to_vec(), vocab.len()).map_err(|e| e.to_string())?;
    Ok(Prepared { train, test_rows, test_labels: test_labels.to_vec() })
}

fn evaluate_cell(cell: CellDescriptor, p: &Prepared, cfg: &TrainConfig) -> CellResult {
    let run = || -> Result<(MetricsReport, ConfusionMatrix), String> {
        let model = classifiers::train(cell.classifier, &p.train, cfg).map_err(|e| e.to_string())?;
        let predicted: Vec<Polarity> =
            p.test_rows.iter().map(|r| model.predict(r)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let mut classes = p.train.classes();
        classes.extend(p.test_labels.iter().copied());
        let cm = confusion_with_classes(&p.test_labels, &predicted, &classes).map_err(|e| e.to_string())?;
        Ok((metrics(&cm), cm))
    };
    match run() {
        Ok((m, cm)) => CellResult { cell, seed: cfg.seed, metrics: Some(m), confusion: Some(cm), error: None },
        Err(e) => CellResult::failed(cell, cfg.seed, e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json];

    pub fn name(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "markdown",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "report.md",
            ReportFormat::Csv => "report.csv",
            ReportFormat::Json => "report.json",
        }
    }
}

named_enum_str!(ReportFormat, ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub cells: Vec<CellResult>,
}

pub fn render_report(results: &[CellResult], format: ReportFormat) -> Result<String, EvalError> {
    if results.is_empty() {
        return Err(EvalError::NoResults);
    }
    Ok(match format {
        ReportFormat::Markdown => render_markdown(results),
        ReportFormat::Csv => render_csv(results),
        ReportFormat::Json => {
            let doc = ReportDocument { schema_version: REPORT_SCHEMA_VERSION, cells: results.to_vec() };
            let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
            s.push('\n');
            s
        }
    })
}

pub fn parse_report_json(text: &str) -> Result<ReportDocument, EvalError> {
    let doc: ReportDocument = serde_json::from_str(text).map_err(|e| EvalError::MalformedReport(e.to_string()))?;
    if doc.schema_version != REPORT_SCHEMA_VERSION {
        return Err(EvalError::MalformedReport(format!("unsupported schema_version {}", doc.schema_version)));
    }
    Ok(doc)
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn render_markdown(results: &[CellResult]) -> String {
    let mut sorted = results.to_vec();
    sorted.sort_by_key(|r| r.cell);
    let mut out = String::new();
    let mut current = None;
    for r in &sorted {
        let key = (r.cell.task, r.cell.features, r.cell.weighting);
        if current != Some(key) {
            if current.is_some() {
                out.push('\n');
            }
            current = Some(key);
            let task = match r.cell.task {
                Task::Two => "Two classes",
                Task::Three => "Three classes",
            };
            let _ = writeln!(out, "## {task}, {}, {} weighting\n", r.cell.features.title(), r.cell.weighting.name());
            out.push_str("| Algorithm | Accuracy | Precision | Recall | F1-score |\n");
            out.push_str("|---|---:|---:|---:|---:|\n");
        }
        let name = r.cell.classifier.abbreviation();
        match &r.metrics {
            Some(m) => {
                let w = m.weighted;
                let _ = writeln!(
                    out,
                    "| {name} | {} | {} | {} | {} |",
                    pct(m.accuracy),
                    pct(w.precision),
                    pct(w.recall),
                    pct(w.f1)
                );
            }
            None => {
                let _ = writeln!(out, "| {name} | error | error | error | error |");
            }
        }
    }
    out
}

const CSV_HEADER: &str = "task,features,weighting,classifier,seed,accuracy,precision,recall,f1,\
macro_precision,macro_recall,macro_f1,support,error";

fn render_csv(results: &[CellResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        let c = r.cell;
        let _ = write!(out, "{},{},{},{},{},", c.task, c.features, c.weighting.name(), c.classifier.cli_name(), r.seed);
        match &r.metrics {
            Some(m) => {
                let (w, a) = (m.weighted, m.macro_avg);
                let _ = write!(
                    out,
                    "{},{},{},{},{},{},{},{},",
                    m.accuracy, w.precision, w.recall, w.f1, a.precision, a.recall, a.f1, m.total
                );
            }
            None => out.push_str(",,,,,,,,"),
        }
        if let Some(e) = &r.error {
            let _ = write!(out, "\"{}\"", e.replace('"', "\"\""));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(codes: &[u8]) -> Vec<Polarity> {
        codes.iter().map(|&c| Polarity::from_code(c).unwrap()).collect()
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion(&p(&[0, 0, 1, 1]), &p(&[0, 0, 1, 1])).unwrap().counts, vec![vec![2, 0], vec![0, 2]]);
        assert_eq!(confusion(&p(&[0, 1]), &p(&[1, 0])).unwrap().counts, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(confusion(&p(&[0, 0, 1]), &p(&[0, 1, 1])).unwrap().counts, vec![vec![1, 1], vec![0, 1]]);
        assert_eq!(confusion(&p(&[0]), &p(&[0, 1])), Err(EvalError::LengthMismatch { truth: 1, predicted: 2 }));
        assert_eq!(confusion(&[], &[]), Err(EvalError::Empty));
    }

    #[test]
    fn metrics_examples() {
        let perfect = metrics(&confusion(&p(&[0, 0, 1, 1]), &p(&[0, 0, 1, 1])).unwrap());
        assert_eq!(perfect.accuracy, 1.0);
        assert_eq!(perfect.weighted, Averages { precision: 1.0, recall: 1.0, f1: 1.0 });
        assert_eq!(perfect.macro_avg, Averages { precision: 1.0, recall: 1.0, f1: 1.0 });

        let cm = ConfusionMatrix { classes: p(&[0, 1]), counts: vec![vec![50, 10], vec![5, 35]] };
        let m = metrics(&cm);
        assert!((m.accuracy - 0.85).abs() < 1e-15);
        assert!((m.per_class[0].precision - 50.0 / 55.0).abs() < 1e-15);
        assert!((m.per_class[0].recall - 50.0 / 60.0).abs() < 1e-15);
        assert!((m.per_class[1].precision - 35.0 / 45.0).abs() < 1e-15);
        let f0 = 2.0 * (50.0 / 55.0) * (50.0 / 60.0) / (50.0 / 55.0 + 50.0 / 60.0);
        assert!((m.per_class[0].f1 - f0).abs() < 1e-15);
    }

    #[test]
    fn zero_support_class() {
        // Neutral is predicted but never true.
        let cm = confusion(&p(&[0, 0]), &p(&[0, 2])).unwrap();
        let m = metrics(&cm);
        let neutral = &m.per_class[1];
        assert_eq!((neutral.precision, neutral.recall, neutral.f1, neutral.support), (0.0, 0.0, 0.0, 0));
        assert_eq!(m.weighted.recall, m.accuracy);
        assert_eq!(m.weighted.precision, 1.0);
    }

    fn cell_order() -> Vec<CellDescriptor> {
        ExperimentGrid::default().cells()
    }

    #[test]
    fn grid_cell_counts() {
        assert_eq!(cell_order().len(), 36);
        let g =
            ExperimentGrid { weightings: vec![WeightingScheme::Count, WeightingScheme::TfIdf], ..Default::default() };
        assert_eq!(g.cells().len(), 72);
        let one = ExperimentGrid {
            feature_sets: vec![FeatureSet::Uni],
            tasks: vec![Task::Two],
            classifiers: vec![ClassifierKind::Mnb],
            ..Default::default()
        };
        assert_eq!(one.cells().len(), 1);
        assert_eq!(
            ExperimentGrid { tasks: vec![], ..Default::default() }.validate(),
            Err(EvalError::EmptyAxis("tasks"))
        );
        let cells = cell_order();
        assert!(cells.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(cells[0].classifier, ClassifierKind::Mnb);
        assert_eq!(cells[5].classifier, ClassifierKind::Mlp);
    }

    fn fake_results() -> Vec<CellResult> {
        let cm = ConfusionMatrix { classes: p(&[0, 1]), counts: vec![vec![50, 10], vec![5, 35]] };
        let m = metrics(&cm);
        cell_order()
            .into_iter()
            .map(|cell| CellResult {
                cell,
                seed: 3,
                metrics: Some(m.clone()),
                confusion: Some(cm.clone()),
                error: None,
            })
            .collect()
    }

    #[test]
    fn markdown_layout() {
        let md = render_report(&fake_results(), ReportFormat::Markdown).unwrap();
        assert_eq!(md.matches("| Algorithm | Accuracy | Precision | Recall | F1-score |").count(), 6);
        assert_eq!(md.matches("| MNB | 85.00% |").count(), 6);
        let rows = md.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| Algorithm")).count();
        assert_eq!(rows, 36);
        assert!(md.lines().filter(|l| l.starts_with("| ")).all(|l| l.matches('|').count() == 6));
    }

    #[test]
    fn csv_and_json() {
        let mut results = fake_results();
        results[1] = CellResult::failed(results[1].cell, 3, "boom, \"bad\"".into());
        let csv = render_report(&results, ReportFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 37);
        assert!(csv.lines().all(|l| !l.is_empty()));
        let json = render_report(&results, ReportFormat::Json).unwrap();
        let doc = parse_report_json(&json).unwrap();
        assert_eq!(doc.cells, results);
        assert!(json.contains("\"task\": \"two\""));
        assert_eq!(render_report(&[], ReportFormat::Json), Err(EvalError::NoResults));
    }

    fn matrix() -> impl Strategy<Value = ConfusionMatrix> {
        (2usize..=3)
            .prop_flat_map(|k| proptest::collection::vec(proptest::collection::vec(0u64..50, k), k))
            .prop_filter("non-empty", |c| c.iter().flatten().sum::<u64>() > 0)
            .prop_map(|counts| ConfusionMatrix { classes: Polarity::ALL[..counts.len()].to_vec(), counts })
    }

    proptest! {
        #[test]
        fn weighted_recall_is_accuracy(cm in matrix()) {
            let m = metrics(&cm);
            prop_assert!((m.weighted.recall - m.accuracy).abs() < 1e-12);
            for c in &m.per_class {
                for x in [c.precision, c.recall, c.f1] {
                    prop_assert!((0.0..=1.0).contains(&x));
                }
            }
            for (i, c) in m.per_class.iter().enumerate() {
                prop_assert_eq!(c.support, cm.row_sum(i));
            }
        }

        #[test]
        fn identical_labels_give_all_ones(y in proptest::collection::vec(0u8..3, 1..60)) {
            let y = p(&y);
            let m = metrics(&confusion(&y, &y).unwrap());
            prop_assert_eq!(m.accuracy, 1.0);
            for c in &m.per_class {
                prop_assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
            }
        }

        #[test]
        fn joint_permutation_invariance(
            pairs in proptest::collection::vec((0u8..3, 0u8..3), 1..60),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut crate::seed::rng(seed));
            let split = |v: &[(u8, u8)]| {
                let t: Vec<u8> = v.iter().map(|x| x.0).collect();
                let q: Vec<u8> = v.iter().map(|x| x.1).collect();
                (p(&t), p(&q))
            };
            let (t1, p1) = split(&pairs);
            let (t2, p2) = split(&shuffled);
            prop_assert_eq!(metrics(&confusion(&t1, &p1).unwrap()), metrics(&confusion(&t2, &p2).unwrap()));
        }
    }
}
