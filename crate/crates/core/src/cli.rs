//! The `arsent` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors (unreadable
//! or invalid files, failed training).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bundle::ModelBundle;
use crate::classifiers::{ClassifierKind, TrainConfig};
use crate::corpus::{load_corpus, Corpus, CorpusFormat, SplitSpec, TrainFraction};
use crate::eval::{render_report, run_grid, ExperimentGrid, FeatureSet, ReportFormat, Task};
use crate::features::{Vocabulary, WeightingScheme};
use crate::preprocess::{Pipeline, PipelineConfig};
use crate::seed;

#[derive(Debug, Parser)]
#[command(name = "arsent", version, about = "Sentiment classification for Arabic comments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the preprocessing pipeline over a corpus and write token JSONL.
    Preprocess {
        #[command(flatten)]
        common: CommonArgs,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one classifier on a corpus and write a model bundle.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        cell: CellArgs,
        /// Model bundle to write.
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
    },
    /// Score raw text with a saved model bundle.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        text: String,
    },
    /// Run the experiment grid and write reports.
    Experiment {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write only this report format.
        #[arg(long)]
        format: Option<ReportFormat>,
        /// Restrict the grid to one task.
        #[arg(long)]
        task: Option<Task>,
        /// Restrict the grid to one classifier.
        #[arg(long)]
        classifier: Option<ClassifierKind>,
        /// Restrict the grid to one feature set.
        #[arg(long)]
        features: Option<FeatureSet>,
        /// Restrict the grid to one weighting.
        #[arg(long, value_parser = parse_weighting)]
        weighting: Option<WeightingScheme>,
    },
    /// Print vocabulary statistics for a corpus or a saved bundle.
    InspectVocab {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_parser = parse_feature_set, default_value = "uni")]
        features: FeatureSet,
        #[arg(long, default_value = "three")]
        task: Task,
        /// Inspect the vocabulary stored in this bundle instead.
        #[arg(long, conflicts_with = "corpus")]
        model: Option<PathBuf>,
        /// Number of most frequent n-grams to list.
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus file (.jsonl or .tsv); overrides the config.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Top-level seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CellArgs {
    #[arg(long, default_value = "mnb")]
    pub classifier: ClassifierKind,
    #[arg(long, value_parser = parse_feature_set, default_value = "uni")]
    pub features: FeatureSet,
    #[arg(long, value_parser = parse_weighting, default_value = "count")]
    pub weighting: WeightingScheme,
    #[arg(long, default_value = "three")]
    pub task: Task,
}

fn parse_feature_set(s: &str) -> Result<FeatureSet, String> {
    s.parse()
}

fn parse_weighting(s: &str) -> Result<WeightingScheme, String> {
    [WeightingScheme::Count, WeightingScheme::Binary, WeightingScheme::TfIdf]
        .into_iter()
        .find(|w| {
            w.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("tf-idf") && *w == WeightingScheme::TfIdf)
        })
        .ok_or_else(|| format!("unknown weighting {s:?} (expected count|binary|tfidf)"))
}

/// Grid axes and split settings in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSection {
    pub feature_sets: Vec<FeatureSet>,
    pub weightings: Vec<WeightingScheme>,
    pub tasks: Vec<Task>,
    pub classifiers: Vec<ClassifierKind>,
    pub train_fraction: TrainFraction,
    pub stratified: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = ExperimentGrid::default();
        GridSection {
            feature_sets: g.feature_sets,
            weightings: g.weightings,
            tasks: g.tasks,
            classifiers: g.classifiers,
            train_fraction: g.split.train_fraction,
            stratified: g.split.stratified,
        }
    }
}

/// Everything one run needs. `seed` derives the split, training and per-tree
/// seeds; seeds inside `train` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub grid: GridSection,
    pub train: TrainConfig,
}

impl RunConfig {
    /// Parses a TOML file. Relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("{}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        rebase(&mut cfg.corpus_path);
        rebase(&mut cfg.output_dir);
        rebase(&mut cfg.pipeline.stopword_path);
        rebase(&mut cfg.pipeline.affix_path);
        Ok(cfg)
    }

    pub fn split_seed(&self) -> u64 {
        seed::derive(self.seed, "split")
    }

    pub fn train_seed(&self) -> u64 {
        seed::derive(self.seed, "train")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.train_seed(), ..self.train.clone() }
    }

    pub fn experiment_grid(&self) -> ExperimentGrid {
        ExperimentGrid {
            feature_sets: self.grid.feature_sets.clone(),
            weightings: self.grid.weightings.clone(),
            tasks: self.grid.tasks.clone(),
            classifiers: self.grid.classifiers.clone(),
            split: SplitSpec {
                train_fraction: self.grid.train_fraction,
                seed: self.split_seed(),
                stratified: self.grid.stratified,
            },
            pipeline: self.pipeline.clone(),
            train: self.train_config(),
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match run(cli.command, out) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}\n\nFor more information, try '--help'.");
            1
        }
        Err(CliError::Data(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            2
        }
    }
}

fn resolve(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(c) = &common.corpus {
        cfg.corpus_path = Some(c.clone());
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn corpus_of(cfg: &RunConfig) -> Result<Corpus, CliError> {
    let path = cfg
        .corpus_path
        .as_ref()
        .ok_or_else(|| CliError::Usage("no corpus given (use --corpus or corpus_path in --config)".into()))?;
    load_corpus(path, CorpusFormat::from_path(path))
        .with_context(|| format!("corpus {}", path.display()))
        .map_err(CliError::Data)
}

fn pipeline_of(cfg: &RunConfig) -> Result<Pipeline, CliError> {
    Pipeline::new(cfg.pipeline.clone()).context("pipeline").map_err(CliError::Data)
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("{}", dir.display()))?;
    }
    fs::write(path, content).with_context(|| format!("{}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct TokenRecord<'a> {
    id: usize,
    label: crate::corpus::Polarity,
    tokens: &'a [String],
}

#[derive(Serialize)]
struct ScoreRecord {
    class: crate::corpus::Polarity,
    score: f64,
}

#[derive(Serialize)]
struct PredictRecord {
    label: crate::corpus::Polarity,
    scores: Vec<ScoreRecord>,
}

fn run(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Data(anyhow!(e).context("writing output"));
    match command {
        Command::Preprocess { common, out: dest } => {
            let cfg = resolve(&common)?;
            let corpus = corpus_of(&cfg)?;
            let pipeline = pipeline_of(&cfg)?;
            let texts: Vec<&str> = corpus.documents().iter().map(|d| d.text.as_str()).collect();
            let mut jsonl = String::new();
            for (doc, tokens) in corpus.documents().iter().zip(pipeline.run_batch(&texts)) {
                let rec = TokenRecord { id: doc.id, label: doc.label, tokens: &tokens };
                jsonl.push_str(&serde_json::to_string(&rec).expect("record serializes"));
                jsonl.push('\n');
            }
            match dest {
                Some(p) => write_file(&p, &jsonl)?,
                None => out.write_all(jsonl.as_bytes()).map_err(io)?,
            }
        }
        Command::Train { common, cell, out: dest } => {
            let cfg = resolve(&common)?;
            let corpus = cell.task.prepare(&corpus_of(&cfg)?).context("task restriction")?;
            let bundle = ModelBundle::fit(
                &corpus,
                pipeline_of(&cfg)?,
                cell.features.range(),
                cell.weighting,
                cell.classifier,
                &cfg.train_config(),
            )
            .context("training")?;
            write_file(&dest, &bundle.to_json())?;
            log::info!("wrote {} ({} features)", dest.display(), bundle.vocabulary().len());
        }
        Command::Predict { model, text } => {
            let bundle = ModelBundle::load(&model).with_context(|| format!("model {}", model.display()))?;
            let p = bundle.predict_text(&text).context("prediction")?;
            let rec = PredictRecord {
                label: p.label,
                scores: p.scores.into_iter().map(|(class, score)| ScoreRecord { class, score }).collect(),
            };
            writeln!(out, "{}", serde_json::to_string(&rec).expect("record serializes")).map_err(io)?;
        }
        Command::Experiment { common, out: dest, format, task, classifier, features, weighting } => {
            let mut cfg = resolve(&common)?;
            if let Some(t) = task {
                cfg.grid.tasks = vec![t];
            }
            if let Some(c) = classifier {
                cfg.grid.classifiers = vec![c];
            }
            if let Some(f) = features {
                cfg.grid.feature_sets = vec![f];
            }
            if let Some(w) = weighting {
                cfg.grid.weightings = vec![w];
            }
            let corpus = corpus_of(&cfg)?;
            let grid = cfg.experiment_grid();
            grid.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let results = run_grid(&corpus, &grid).context("experiment")?;
            for r in results.iter().filter(|r| r.error.is_some()) {
                log::warn!("cell {:?} failed: {}", r.cell, r.error.as_deref().unwrap_or_default());
            }
            let dir = dest.or(cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
            let formats = format.map(|f| vec![f]).unwrap_or_else(|| ReportFormat::ALL.to_vec());
            for f in formats {
                let doc = render_report(&results, f).context("rendering report")?;
                write_file(&dir.join(f.file_name()), &doc)?;
            }
            writeln!(out, "{} cells written to {}", results.len(), dir.display()).map_err(io)?;
        }
        Command::InspectVocab { common, features, task, model, top } => {
            let vocab = match model {
                Some(m) => {
                    ModelBundle::load(&m).with_context(|| format!("model {}", m.display()))?.vocabulary().clone()
                }
                None => {
                    let cfg = resolve(&common)?;
                    let corpus = task.prepare(&corpus_of(&cfg)?).context("task restriction")?;
                    let pipeline = pipeline_of(&cfg)?;
                    let texts: Vec<&str> = corpus.documents().iter().map(|d| d.text.as_str()).collect();
                    Vocabulary::build(&pipeline.run_batch(&texts), features.range()).context("vocabulary")?
                }
            };
            write_vocab_stats(&vocab, top, out).map_err(io)?;
        }
    }
    Ok(())
}

fn write_vocab_stats(vocab: &Vocabulary, top: usize, out: &mut dyn Write) -> std::io::Result<()> {
    let range = vocab.range();
    writeln!(out, "ngram_range\t{}-{}", range.lo(), range.hi())?;
    writeln!(out, "documents\t{}", vocab.n_train_docs())?;
    writeln!(out, "terms\t{}", vocab.len())?;
    let singletons = vocab.doc_freq().iter().filter(|&&d| d == 1).count();
    writeln!(out, "df=1\t{singletons}")?;
    let mut ranked: Vec<(u32, &str)> =
        vocab.doc_freq().iter().copied().zip(vocab.terms().iter().map(String::as_str)).collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
    for (df, term) in ranked.into_iter().take(top) {
        writeln!(out, "{df}\t{term}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = dispatch(std::iter::once("arsent").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_args(&["frobnicate"]).0, 1);
        assert_eq!(run_args(&["train", "--classifier", "svm"]).0, 1);
        assert_eq!(run_args(&["train"]).0, 1);
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("experiment"));
    }

    #[test]
    fn missing_files_exit_two_and_name_path() {
        let (code, _, err) = run_args(&["predict", "--model", "/nonexistent/m.json", "--text", "x"]);
        assert_eq!(code, 2);
        assert!(err.contains("/nonexistent/m.json"), "{err}");
        let (code, _, err) = run_args(&["train", "--corpus", "/nonexistent/c.jsonl"]);
        assert_eq!(code, 2);
        assert!(err.contains("/nonexistent/c.jsonl"), "{err}");
    }

    #[test]
    fn run_config_parses_and_derives_seeds() {
        let cfg: RunConfig = toml::from_str(
            "seed = 7\ncorpus_path = \"c.jsonl\"\n[grid]\ntasks = [\"two\"]\nfeature_sets = [\"uni_bi\"]\nweightings = [\"tfidf\"]\n\
             train_fraction = \"3/4\"\n[train.rf]\nn_trees = 10\n[pipeline]\nmin_stem_length = 4\n",
        )
        .unwrap();
        let g = cfg.experiment_grid();
        assert_eq!(g.tasks, vec![Task::Two]);
        assert_eq!(g.feature_sets, vec![FeatureSet::UniBi]);
        assert_eq!(g.weightings, vec![WeightingScheme::TfIdf]);
        assert_eq!(g.train.rf.n_trees, 10);
        assert_eq!(g.pipeline.min_stem_length, 4);
        assert_eq!(g.split.seed, seed::derive(7, "split"));
        assert_eq!(g.train.seed, seed::derive(7, "train"));
        assert_ne!(g.split.seed, g.train.seed);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }
}
