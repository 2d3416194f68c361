//! Multinomial Naive Bayes with Laplace smoothing.
//!
//! For class `s` with `n_s` of `N` training documents and per-term feature
//! sums `F_ts` (total `F_s`):
//!
//! ```text
//! log P(s)    = ln(n_s / N)
//! log P(t|s)  = ln(alpha + F_ts) - ln(alpha * |V| + F_s)
//! score(s|d)  = log P(s) + sum_t f_t * log P(t|s)
//! ```
//!
//! `P(d)` is the same for every class and is left out of the scores.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::vectorize::SparseVector;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("need at least 2 categories, found {0}")]
    SingleCategory(usize),
    #[error("smoothing alpha must be positive and finite, got {0}")]
    NonPositiveAlpha(f64),
    #[error("feature {index} has negative or non-finite value {value}")]
    NegativeFeature { index: u32, value: f64 },
    #[error("feature {index} has non-integer value {value} in counts mode")]
    NonIntegerFeature { index: u32, value: f64 },
    #[error("feature index {index} outside vocabulary of size {vocab_size}")]
    FeatureOutOfRange { index: u32, vocab_size: u64 },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("category name must be non-empty")]
    EmptyCategory,
    #[error("not a model file (bad magic)")]
    BadModelMagic,
    #[error("model format version {found}, expected {expected}")]
    VersionMismatch { found: u8, expected: u8 },
    #[error("malformed model: {0}")]
    MalformedModel(String),
}

type Result<T, E = ClassifierError> = std::result::Result<T, E>;

/// What feature values mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// Raw term frequencies; values must be integers.
    Counts,
    /// TF-IDF weights.
    #[default]
    TfIdf,
}

impl FeatureMode {
    fn to_byte(self) -> u8 {
        match self {
            FeatureMode::Counts => 0,
            FeatureMode::TfIdf => 1,
        }
    }

    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(FeatureMode::Counts),
            1 => Some(FeatureMode::TfIdf),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Counts => "counts",
            FeatureMode::TfIdf => "tfidf",
        })
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "counts" => Ok(FeatureMode::Counts),
            "tfidf" => Ok(FeatureMode::TfIdf),
            other => Err(format!("unknown mode {other:?} (expected counts or tfidf)")),
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: Self) {
        self.add(other.sum);
        self.add(other.comp);
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FeatureSum {
    Exact(u64),
    Real(CompensatedSum),
}

impl FeatureSum {
    fn zero(mode: FeatureMode) -> Self {
        match mode {
            FeatureMode::Counts => FeatureSum::Exact(0),
            FeatureMode::TfIdf => FeatureSum::Real(CompensatedSum::default()),
        }
    }

    fn add(&mut self, x: f64) {
        match self {
            // Counts were validated as exact non-negative integers.
            FeatureSum::Exact(n) => *n += x as u64,
            FeatureSum::Real(s) => s.add(x),
        }
    }

    fn merge(&mut self, other: Self) {
        match (self, other) {
            (FeatureSum::Exact(a), FeatureSum::Exact(b)) => *a += b,
            (FeatureSum::Real(a), FeatureSum::Real(b)) => a.merge(b),
            _ => unreachable!("feature sums of different modes"),
        }
    }

    fn value(self) -> f64 {
        match self {
            FeatureSum::Exact(n) => n as f64,
            FeatureSum::Real(s) => s.value(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ClassStats {
    docs: u64,
    term_sums: HashMap<u32, FeatureSum>,
    total: FeatureSum,
}

/// Per-class sufficient statistics. Partials built on separate shards merge
/// by addition; in counts mode the merge is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingStats {
    mode: FeatureMode,
    vocab_size: u64,
    classes: BTreeMap<String, ClassStats>,
}

impl TrainingStats {
    pub fn new(mode: FeatureMode, vocab_size: u64) -> Self {
        Self { mode, vocab_size, classes: BTreeMap::new() }
    }

    pub fn add(&mut self, category: &str, features: &SparseVector) -> Result<()> {
        if category.is_empty() {
            return Err(ClassifierError::EmptyCategory);
        }
        for &(index, value) in features.entries() {
            check_feature(index, value, self.mode)?;
            if u64::from(index) >= self.vocab_size {
                return Err(ClassifierError::FeatureOutOfRange { index, vocab_size: self.vocab_size });
            }
        }
        let mode = self.mode;
        let stats = match self.classes.get_mut(category) {
            Some(s) => s,
            None => self.classes.entry(category.to_owned()).or_insert(ClassStats {
                docs: 0,
                term_sums: HashMap::new(),
                total: FeatureSum::zero(mode),
            }),
        };
        stats.docs += 1;
        for &(index, value) in features.entries() {
            stats.term_sums.entry(index).or_insert_with(|| FeatureSum::zero(mode)).add(value);
            stats.total.add(value);
        }
        Ok(())
    }

    pub fn merge(mut self, other: Self) -> Self {
        assert_eq!(self.mode, other.mode, "merging stats of different modes");
        assert_eq!(self.vocab_size, other.vocab_size, "merging stats of different vocabularies");
        for (name, theirs) in other.classes {
            match self.classes.get_mut(&name) {
                None => {
                    self.classes.insert(name, theirs);
                }
                Some(ours) => {
                    ours.docs += theirs.docs;
                    ours.total.merge(theirs.total);
                    for (idx, s) in theirs.term_sums {
                        match ours.term_sums.get_mut(&idx) {
                            Some(o) => o.merge(s),
                            None => {
                                ours.term_sums.insert(idx, s);
                            }
                        }
                    }
                }
            }
        }
        self
    }

    pub fn finish(self, alpha: f64) -> Result<NBModel> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ClassifierError::NonPositiveAlpha(alpha));
        }
        if self.classes.len() < 2 {
            return Err(ClassifierError::SingleCategory(self.classes.len()));
        }
        if self.vocab_size == 0 {
            return Err(ClassifierError::EmptyVocabulary);
        }
        let total_docs: u64 = self.classes.values().map(|c| c.docs).sum();
        let v = self.vocab_size as f64;
        let mut categories = Vec::with_capacity(self.classes.len());
        let mut log_priors = Vec::with_capacity(self.classes.len());
        let mut likelihoods = Vec::with_capacity(self.classes.len());
        for (name, stats) in self.classes {
            let log_denominator = (alpha * v + stats.total.value()).ln();
            let mut entries: Vec<(u32, f64)> =
                stats.term_sums.into_iter().map(|(idx, s)| (idx, (alpha + s.value()).ln() - log_denominator)).collect();
            entries.sort_unstable_by_key(|e| e.0);
            categories.push(name);
            log_priors.push((stats.docs as f64 / total_docs as f64).ln());
            likelihoods.push(ClassLikelihoods { entries, default: alpha.ln() - log_denominator });
        }
        Ok(NBModel { categories, log_priors, likelihoods, alpha, mode: self.mode, vocab_size: self.vocab_size })
    }
}

fn check_feature(index: u32, value: f64, mode: FeatureMode) -> Result<()> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(ClassifierError::NegativeFeature { index, value });
    }
    if mode == FeatureMode::Counts && (value.fract() != 0.0 || value > (1u64 << 53) as f64) {
        return Err(ClassifierError::NonIntegerFeature { index, value });
    }
    Ok(())
}

/// Trains from `(category, features)` pairs, folding them in the order given.
pub fn train<'a, I>(examples: I, vocab_size: u64, alpha: f64, mode: FeatureMode) -> Result<NBModel>
where
    I: IntoIterator<Item = (&'a str, &'a SparseVector)>,
{
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(ClassifierError::NonPositiveAlpha(alpha));
    }
    let mut stats = TrainingStats::new(mode, vocab_size);
    for (category, features) in examples {
        stats.add(category, features)?;
    }
    stats.finish(alpha)
}

/// Smoothed log-likelihoods of one class: explicit entries for terms seen in
/// the class, `default` for every other vocabulary term.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassLikelihoods {
    entries: Vec<(u32, f64)>,
    default: f64,
}

impl ClassLikelihoods {
    pub fn log_likelihood(&self, index: u32) -> f64 {
        match self.entries.binary_search_by_key(&index, |e| e.0) {
            Ok(p) => self.entries[p].1,
            Err(_) => self.default,
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn default_log_likelihood(&self) -> f64 {
        self.default
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NBModel {
    categories: Vec<String>,
    log_priors: Vec<f64>,
    likelihoods: Vec<ClassLikelihoods>,
    alpha: f64,
    mode: FeatureMode,
    vocab_size: u64,
}

/// Scores closer than this (relative to their magnitude) count as tied, so
/// rounding noise in the summation cannot override the tie-break rule.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    /// Unnormalized log-posteriors, in the model's category order.
    pub log_posteriors: Vec<(String, f64)>,
}

impl Prediction {
    /// Picks the highest score; ties go to the lexicographically smallest
    /// category.
    pub fn from_scores(scores: Vec<(String, f64)>) -> Self {
        assert!(!scores.is_empty(), "no categories to choose from");
        let mut best = 0;
        for i in 1..scores.len() {
            let (name, s) = (&scores[i].0, scores[i].1);
            let (best_name, b) = (&scores[best].0, scores[best].1);
            let tol = TIE_TOLERANCE * 1f64.max(s.abs()).max(b.abs());
            if s > b + tol || ((s - b).abs() <= tol && name < best_name) {
                best = i;
            }
        }
        Self { label: scores[best].0.clone(), log_posteriors: scores }
    }

    pub fn score(&self, category: &str) -> Option<f64> {
        self.log_posteriors.iter().find(|(c, _)| c == category).map(|(_, s)| *s)
    }
}

impl NBModel {
    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    pub fn class_likelihoods(&self, class: usize) -> &ClassLikelihoods {
        &self.likelihoods[class]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn vocab_size(&self) -> u64 {
        self.vocab_size
    }

    pub fn log_likelihood(&self, class: usize, index: u32) -> f64 {
        self.likelihoods[class].log_likelihood(index)
    }

    pub fn predict(&self, features: &SparseVector) -> Result<Prediction> {
        for &(index, value) in features.entries() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ClassifierError::NegativeFeature { index, value });
            }
        }
        let scores = self
            .categories
            .iter()
            .zip(&self.log_priors)
            .zip(&self.likelihoods)
            .map(|((name, &prior), lik)| {
                let evidence: f64 = features
                    .entries()
                    .iter()
                    .filter(|(idx, _)| u64::from(*idx) < self.vocab_size)
                    .map(|&(idx, f)| f * lik.log_likelihood(idx))
                    .sum();
                (name.clone(), prior + evidence)
            })
            .collect();
        Ok(Prediction::from_scores(scores))
    }

    /// Largest deviation from 1 of the prior mass and of each class's
    /// likelihood mass over the whole vocabulary.
    pub fn normalization_error(&self) -> f64 {
        let prior_mass: f64 = self.log_priors.iter().map(|p| p.exp()).sum();
        let mut worst = (prior_mass - 1.0).abs();
        for lik in &self.likelihoods {
            let implicit = self.vocab_size - lik.entries.len() as u64;
            let mass: f64 = lik.entries.iter().map(|e| e.1.exp()).sum::<f64>() + implicit as f64 * lik.default.exp();
            worst = worst.max((mass - 1.0).abs());
        }
        worst
    }

    // -- binary format ---------------------------------------------------

    pub fn save(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.push(MODEL_VERSION);
        out.push(self.mode.to_byte());
        out.extend_from_slice(&self.alpha.to_le_bytes());
        out.extend_from_slice(&self.vocab_size.to_le_bytes());
        out.extend_from_slice(&(self.categories.len() as u32).to_le_bytes());
        for ((name, prior), lik) in self.categories.iter().zip(&self.log_priors).zip(&self.likelihoods) {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&prior.to_le_bytes());
            out.extend_from_slice(&lik.default.to_le_bytes());
            out.extend_from_slice(&(lik.entries.len() as u64).to_le_bytes());
            for (idx, v) in &lik.entries {
                out.extend_from_slice(&idx.to_le_bytes());
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn load(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MODEL_MAGIC.len() || &bytes[..8] != MODEL_MAGIC {
            return Err(ClassifierError::BadModelMagic);
        }
        let mut r = Reader { buf: &bytes[8..] };
        let version = r.u8().map_err(|_| ClassifierError::VersionMismatch { found: 0, expected: MODEL_VERSION })?;
        if version != MODEL_VERSION {
            return Err(ClassifierError::VersionMismatch { found: version, expected: MODEL_VERSION });
        }
        let mode = FeatureMode::from_byte(r.u8()?).ok_or_else(|| malformed("unknown feature mode"))?;
        let alpha = r.f64()?;
        let vocab_size = r.u64()?;
        let n = r.u32()? as usize;
        let mut categories = Vec::new();
        let mut log_priors = Vec::new();
        let mut likelihoods = Vec::new();
        for _ in 0..n {
            let len = r.u32()? as usize;
            let name =
                std::str::from_utf8(r.take(len)?).map_err(|_| malformed("category name is not UTF-8"))?.to_owned();
            let prior = r.f64()?;
            let default = r.f64()?;
            let count = r.u64()?;
            // 12 bytes per entry bounds the allocation against the input size.
            if count > (r.buf.len() / 12) as u64 {
                return Err(malformed("entry count overruns the file"));
            }
            let mut entries = Vec::with_capacity(count as usize);
            for _ in 0..count {
                entries.push((r.u32()?, r.f64()?));
            }
            categories.push(name);
            log_priors.push(prior);
            likelihoods.push(ClassLikelihoods { entries, default });
        }
        if !r.buf.is_empty() {
            return Err(malformed("trailing bytes"));
        }
        let model = Self { categories, log_priors, likelihoods, alpha, mode, vocab_size };
        model.validate_structure()?;
        Ok(model)
    }

    fn validate_structure(&self) -> Result<()> {
        if self.categories.len() < 2 {
            return Err(ClassifierError::SingleCategory(self.categories.len()));
        }
        if !self.categories.windows(2).all(|w| w[0] < w[1]) {
            return Err(malformed("categories not strictly sorted"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(ClassifierError::NonPositiveAlpha(self.alpha));
        }
        for lik in &self.likelihoods {
            if !lik.entries.windows(2).all(|w| w[0].0 < w[1].0) {
                return Err(malformed("likelihood entries not strictly sorted"));
            }
            if lik.entries.last().is_some_and(|e| u64::from(e.0) >= self.vocab_size) {
                return Err(malformed("likelihood entry outside vocabulary"));
            }
        }
        Ok(())
    }
}

pub const MODEL_MAGIC: &[u8; 8] = b"NBMODEL1";
pub const MODEL_VERSION: u8 = 1;

fn malformed(what: &str) -> ClassifierError {
    ClassifierError::MalformedModel(what.to_owned())
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(malformed("unexpected end of file"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
