//! Arabic comment cleaning: URL removal, character filtering, tokenization,
//! normalization, stop-word removal and light stemming.
//!
//! Each stage is a standalone function. [`Pipeline`] runs a configured
//! sequence of them with the stop list and affix lists loaded once.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::ops::Deref;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_ar.txt");
pub const BUNDLED_AFFIXES: &str = include_str!("../data/affixes_ar.txt");

const ALEF: char = '\u{0627}';
const TATWEEL: char = '\u{0640}';
const ALEF_MAQSURA: char = '\u{0649}';
const YA: char = '\u{064A}';
const TA_MARBUTA: char = '\u{0629}';
const HA: char = '\u{0647}';

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("stop-word list {path} unreadable: {source}")]
    StopListUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("affix list {path} unreadable: {source}")]
    AffixListUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed affix list at line {line}: {cause}")]
    MalformedAffixList { line: usize, cause: String },
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("invalid token {0:?}: tokens must be non-empty and contain no whitespace")]
    InvalidToken(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    RemoveUrls,
    FilterChars,
    Tokenize,
    Normalize,
    RemoveStopwords,
    LightStem,
}

impl Stage {
    pub const DEFAULT_ORDER: [Stage; 6] = [
        Stage::RemoveUrls,
        Stage::FilterChars,
        Stage::Tokenize,
        Stage::Normalize,
        Stage::RemoveStopwords,
        Stage::LightStem,
    ];

    fn is_text_stage(self) -> bool {
        matches!(self, Stage::RemoveUrls | Stage::FilterChars)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtraNormalizations {
    pub alef_maqsura_to_ya: bool,
    pub ta_marbuta_to_ha: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub stages: Vec<Stage>,
    pub stopword_path: Option<PathBuf>,
    pub affix_path: Option<PathBuf>,
    pub negation_protected: BTreeSet<String>,
    pub min_stem_length: usize,
    pub elongation_min_run: usize,
    pub extra_normalizations: ExtraNormalizations,
}

pub fn default_negations() -> BTreeSet<String> {
    ["لا", "لن", "لم", "ما", "ليس", "غير"].iter().map(|s| s.to_string()).collect()
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stages: Stage::DEFAULT_ORDER.to_vec(),
            stopword_path: None,
            affix_path: None,
            negation_protected: default_negations(),
            min_stem_length: 3,
            elongation_min_run: 3,
            extra_normalizations: ExtraNormalizations::default(),
        }
    }
}

impl PipelineConfig {
    /// Text stages must come before `tokenize`, token stages after it, and
    /// `tokenize` must appear exactly once. No stage may repeat.
    pub fn validate(&self) -> Result<(), PreprocessError> {
        let invalid = |m: String| Err(PreprocessError::InvalidConfig(m));
        if self.min_stem_length < 2 {
            return invalid(format!("min_stem_length must be >= 2, got {}", self.min_stem_length));
        }
        if self.elongation_min_run < 2 {
            return invalid(format!("elongation_min_run must be >= 2, got {}", self.elongation_min_run));
        }
        let mut seen = HashSet::new();
        for s in &self.stages {
            if !seen.insert(*s) {
                return invalid(format!("stage {s:?} listed twice"));
            }
        }
        let Some(tok) = self.stages.iter().position(|&s| s == Stage::Tokenize) else {
            return invalid("stages must include tokenize".into());
        };
        for (i, s) in self.stages.iter().enumerate() {
            if s.is_text_stage() && i > tok {
                return invalid(format!("{s:?} must run before tokenize"));
            }
            if !s.is_text_stage() && *s != Stage::Tokenize && i < tok {
                return invalid(format!("{s:?} must run after tokenize"));
            }
        }
        Ok(())
    }
}

/// Whitespace-free, non-empty tokens in document order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TokenList(Vec<String>);

impl TokenList {
    pub fn new(tokens: Vec<String>) -> Result<Self, PreprocessError> {
        if let Some(bad) = tokens.iter().find(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err(PreprocessError::InvalidToken(bad.clone()));
        }
        Ok(TokenList(tokens))
    }

    pub fn from_strs(tokens: &[&str]) -> Result<Self, PreprocessError> {
        Self::new(tokens.iter().map(|s| s.to_string()).collect())
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl TryFrom<Vec<String>> for TokenList {
    type Error = PreprocessError;

    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        TokenList::new(v)
    }
}

impl From<TokenList> for Vec<String> {
    fn from(t: TokenList) -> Self {
        t.0
    }
}

impl Deref for TokenList {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for TokenList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

static URL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)[a-z][a-z0-9+.\-]*://\S*|www\.\S*|\b(?:[a-z0-9](?:[a-z0-9\-]*[a-z0-9])?\.)+[a-z]{2,}\b(?:/\S*)?")
        .expect("url pattern")
});

/// Replaces each URL (`scheme://…`, `www.…`, bare `domain.tld/path`) by one space.
pub fn remove_urls(text: &str) -> String {
    URL_RE.replace_all(text, " ").into_owned()
}

pub fn is_arabic_letter(c: char) -> bool {
    matches!(c, '\u{0621}'..='\u{063A}' | '\u{0641}'..='\u{064A}' | '\u{0671}')
}

/// Harakat, tanween, shadda, sukun and the other combining Arabic marks.
pub fn is_arabic_mark(c: char) -> bool {
    matches!(c, '\u{064B}'..='\u{065F}' | '\u{0670}')
}

/// Keeps Arabic letters and whitespace. Marks and tatweel are deleted;
/// every other character becomes a space so punctuation still separates words.
pub fn filter_chars(text: &str) -> String {
    text.chars()
        .filter(|&c| !is_arabic_mark(c) && c != TATWEEL)
        .map(|c| if is_arabic_letter(c) || c.is_whitespace() { c } else { ' ' })
        .collect()
}

/// Splits on whitespace and drops single-letter pieces.
pub fn tokenize(text: &str) -> TokenList {
    TokenList(text.split_whitespace().filter(|t| t.chars().nth(1).is_some()).map(str::to_string).collect())
}

/// Alef unification, optional ya/ha mappings, then elongation collapse.
pub fn normalize(token: &str, config: &PipelineConfig) -> String {
    let extra = config.extra_normalizations;
    let mapped: Vec<char> = token
        .chars()
        .map(|c| match c {
            '\u{0622}' | '\u{0623}' | '\u{0625}' | '\u{0671}' => ALEF,
            ALEF_MAQSURA if extra.alef_maqsura_to_ya => YA,
            TA_MARBUTA if extra.ta_marbuta_to_ha => HA,
            c => c,
        })
        .collect();

    let mut out = String::with_capacity(token.len());
    let mut i = 0;
    while i < mapped.len() {
        let c = mapped[i];
        let run = mapped[i..].iter().take_while(|&&d| d == c).count();
        if run >= config.elongation_min_run {
            out.push(c);
        } else {
            out.extend(std::iter::repeat_n(c, run));
        }
        i += run;
    }
    out
}

/// Stop list plus affix lists, as resolved at pipeline construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub stopwords: Vec<String>,
    pub prefixes: Vec<String>,
    pub suffixes: Vec<String>,
}

impl Lexicon {
    pub fn bundled() -> Self {
        let (prefixes, suffixes) = parse_affixes(BUNDLED_AFFIXES).expect("bundled affix list");
        Lexicon { stopwords: parse_word_list(BUNDLED_STOPWORDS), prefixes, suffixes }
    }

    /// Reads the stop list and affix lists named by `config`, falling back to
    /// the bundled lists when a path is absent.
    pub fn load(config: &PipelineConfig) -> Result<Self, PreprocessError> {
        let stopwords = match &config.stopword_path {
            Some(p) => parse_word_list(
                &fs::read_to_string(p)
                    .map_err(|source| PreprocessError::StopListUnreadable { path: p.clone(), source })?,
            ),
            None => parse_word_list(BUNDLED_STOPWORDS),
        };
        let (prefixes, suffixes) = match &config.affix_path {
            Some(p) => parse_affixes(
                &fs::read_to_string(p)
                    .map_err(|source| PreprocessError::AffixListUnreadable { path: p.clone(), source })?,
            )?,
            None => parse_affixes(BUNDLED_AFFIXES)?,
        };
        Ok(Lexicon { stopwords, prefixes, suffixes })
    }
}

/// One entry per line; blank lines and `#` comments skipped.
pub fn parse_word_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// `[prefixes]` / `[suffixes]` sections, one affix per line, order = priority.
pub fn parse_affixes(text: &str) -> Result<(Vec<String>, Vec<String>), PreprocessError> {
    let mut prefixes = Vec::new();
    let mut suffixes = Vec::new();
    let mut section: Option<&mut Vec<String>> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "[prefixes]" => section = Some(&mut prefixes),
            "[suffixes]" => section = Some(&mut suffixes),
            _ if line.starts_with('[') => {
                return Err(PreprocessError::MalformedAffixList {
                    line: i + 1,
                    cause: format!("unknown section {line}"),
                })
            }
            _ => match section.as_deref_mut() {
                Some(list) => list.push(line.to_string()),
                None => {
                    return Err(PreprocessError::MalformedAffixList {
                        line: i + 1,
                        cause: "affix before any section header".into(),
                    })
                }
            },
        }
    }
    Ok((prefixes, suffixes))
}

/// Removes stop-listed tokens except protected negations.
///
/// Loads the stop list named by `config` (or the bundled one) on each call;
/// use [`Pipeline`] to load it once.
pub fn remove_stopwords(tokens: &TokenList, config: &PipelineConfig) -> Result<TokenList, PreprocessError> {
    Ok(Pipeline::new(config.clone())?.remove_stopwords(tokens))
}

/// Light stemming with the bundled affix lists.
pub fn light_stem(token: &str, config: &PipelineConfig) -> String {
    let lex = Lexicon::bundled();
    strip_affixes(token, &lex.prefixes, &lex.suffixes, config.min_stem_length)
}

/// Strips at most one prefix and then at most one suffix. The first listed
/// affix that matches is the only candidate at each step; it is removed only
/// if at least `min_len` characters remain.
fn strip_affixes(token: &str, prefixes: &[String], suffixes: &[String], min_len: usize) -> String {
    let len = |s: &str| s.chars().count();
    let mut stem = token;
    if let Some(p) = prefixes.iter().find(|p| stem.starts_with(p.as_str())) {
        let rest = &stem[p.len()..];
        if len(rest) >= min_len {
            stem = rest;
        }
    }
    if let Some(s) = suffixes.iter().find(|s| stem.ends_with(s.as_str())) {
        let rest = &stem[..stem.len() - s.len()];
        if len(rest) >= min_len {
            stem = rest;
        }
    }
    stem.to_string()
}

/// A validated configuration with its word lists loaded.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    lexicon: Lexicon,
    stopwords: HashSet<String>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PreprocessError> {
        let lexicon = Lexicon::load(&config)?;
        Self::with_lexicon(config, lexicon)
    }

    pub fn with_lexicon(config: PipelineConfig, lexicon: Lexicon) -> Result<Self, PreprocessError> {
        config.validate()?;
        // Stop entries match in raw and normalized spelling alike.
        let mut stopwords = HashSet::new();
        for w in &lexicon.stopwords {
            stopwords.insert(normalize(w, &config));
            stopwords.insert(w.clone());
        }
        Ok(Pipeline { config, lexicon, stopwords })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token) && !self.config.negation_protected.contains(token)
    }

    pub fn remove_stopwords(&self, tokens: &TokenList) -> TokenList {
        TokenList(tokens.iter().filter(|t| !self.is_stopword(t)).cloned().collect())
    }

    pub fn light_stem(&self, token: &str) -> String {
        strip_affixes(token, &self.lexicon.prefixes, &self.lexicon.suffixes, self.config.min_stem_length)
    }

    /// Runs the configured stages over one raw comment.
    ///
    /// Tokens that shrink to a single letter are dropped after every token
    /// stage, and when stop-word removal is configured the final tokens are
    /// checked against the stop list once more (a stem can coincide with a
    /// stop word).
    pub fn run(&self, text: &str) -> TokenList {
        let mut text = text.to_string();
        let mut tokens = TokenList::default();
        for stage in &self.config.stages {
            match stage {
                Stage::RemoveUrls => text = remove_urls(&text),
                Stage::FilterChars => text = filter_chars(&text),
                Stage::Tokenize => tokens = tokenize(&text),
                Stage::Normalize => tokens = self.map_tokens(tokens, |t| normalize(t, &self.config)),
                Stage::RemoveStopwords => tokens = self.remove_stopwords(&tokens),
                Stage::LightStem => tokens = self.map_tokens(tokens, |t| self.light_stem(t)),
            }
        }
        if self.config.stages.contains(&Stage::RemoveStopwords) {
            tokens = self.remove_stopwords(&tokens);
        }
        tokens
    }

    fn map_tokens(&self, tokens: TokenList, f: impl Fn(&str) -> String) -> TokenList {
        TokenList(tokens.0.iter().map(|t| f(t)).filter(|t| t.chars().nth(1).is_some()).collect())
    }

    /// Runs the pipeline over many comments, in parallel when enabled.
    pub fn run_batch<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Vec<TokenList> {
        crate::par::map(texts, |t| self.run(t.as_ref()))
    }
}

/// Builds a pipeline from `config` and runs it once.
pub fn run_pipeline(text: &str, config: &PipelineConfig) -> Result<TokenList, PreprocessError> {
    Ok(Pipeline::new(config.clone())?.run(text))
}

pub fn load_config(path: &Path) -> anyhow::Result<PipelineConfig> {
    let text = fs::read_to_string(path)?;
    Ok(toml::from_str(&text)?)
}
