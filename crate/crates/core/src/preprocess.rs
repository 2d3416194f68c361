//! Text to tokens: tokenization, stop-word removal, stemming and the
//! minimum-length document filter.

use std::borrow::Cow;
use std::collections::HashSet;

use thiserror::Error;
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::corpus::Document;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PreprocessError {
    #[error("stop list line {line}: {reason}")]
    BadStopTerm { line: usize, reason: String },
    #[error("stemmer line {line}: {reason}")]
    BadSuffixRule { line: usize, reason: String },
}

/// A handful of Turkish function words. Overridable from a file.
const TURKISH_STOPWORDS: &[&str] = &[
    "acaba", "ama", "ancak", "bana", "bazı", "belki", "ben", "beni", "benim", "bile", "bir", "biri", "birkaç",
    "birçok", "biz", "bize", "bizim", "bu", "buna", "bunda", "bundan", "bunu", "bunun", "da", "daha", "dahi", "de",
    "değil", "diye", "en", "fakat", "gibi", "hem", "hep", "her", "hiç", "için", "ile", "ise", "kadar", "ki", "kim",
    "mi", "mu", "mü", "mı", "ne", "neden", "nasıl", "o", "olan", "olarak", "on", "ona", "onlar", "onu", "onun", "sen",
    "siz", "sonra", "şey", "şu", "tüm", "ve", "veya", "ya", "yani", "çok", "çünkü", "önce", "göre",
];

/// Set of lowercase terms removed before weighting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopList {
    terms: HashSet<String>,
}

impl StopList {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn turkish() -> Self {
        Self { terms: TURKISH_STOPWORDS.iter().map(|s| (*s).to_owned()).collect() }
    }

    /// Terms are case-folded; empty terms or terms with whitespace are rejected.
    pub fn from_terms<I, S>(terms: I) -> Result<Self, PreprocessError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = HashSet::new();
        for (i, t) in terms.into_iter().enumerate() {
            set.insert(check_stop_term(t.as_ref(), i + 1)?);
        }
        Ok(Self { terms: set })
    }

    /// One term per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, PreprocessError> {
        let mut set = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            set.insert(check_stop_term(line, i + 1)?);
        }
        Ok(Self { terms: set })
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending order.
    pub fn sorted_terms(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.terms.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }
}

fn check_stop_term(raw: &str, line: usize) -> Result<String, PreprocessError> {
    let bad = |reason: &str| PreprocessError::BadStopTerm { line, reason: reason.to_owned() };
    if raw.is_empty() {
        return Err(bad("empty term"));
    }
    if raw.chars().any(char::is_whitespace) {
        return Err(bad("term contains whitespace"));
    }
    Ok(raw.chars().map(fold_char).collect())
}

/// Strip at most this suffix, provided the remaining stem keeps `min_stem` chars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixRule {
    pub suffix: String,
    pub min_stem: usize,
}

/// Stemming hook. `SuffixTable` rules are kept longest-suffix-first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum StemmerSpec {
    #[default]
    Identity,
    SuffixTable(Vec<SuffixRule>),
}

impl StemmerSpec {
    pub fn suffix_table<I>(rules: I) -> Result<Self, PreprocessError>
    where
        I: IntoIterator<Item = (String, usize)>,
    {
        let mut table = Vec::new();
        for (i, (suffix, min_stem)) in rules.into_iter().enumerate() {
            table.push(check_rule(suffix, min_stem, i + 1)?);
        }
        // Stable: equal-length suffixes keep their given order.
        table.sort_by_key(|r| std::cmp::Reverse(r.suffix.chars().count()));
        Ok(Self::SuffixTable(table))
    }

    /// Lines of `suffix<TAB>min_stem_length`; blank lines and `#` comments skipped.
    pub fn parse(text: &str) -> Result<Self, PreprocessError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| PreprocessError::BadSuffixRule { line: i + 1, reason: reason.to_owned() };
            let (suffix, min) = trimmed.split_once('\t').ok_or_else(|| bad("expected suffix<TAB>min_stem_length"))?;
            let min: usize = min.trim().parse().map_err(|_| bad("min_stem_length is not a number"))?;
            rules.push(check_rule(suffix.trim().to_owned(), min, i + 1)?);
        }
        Self::suffix_table(rules.into_iter().map(|r| (r.suffix, r.min_stem)))
    }

    /// Inverse of [`StemmerSpec::parse`]; empty for the identity stemmer.
    pub fn to_table_text(&self) -> String {
        match self {
            StemmerSpec::Identity => String::new(),
            StemmerSpec::SuffixTable(rules) => {
                rules.iter().map(|r| format!("{}\t{}\n", r.suffix, r.min_stem)).collect()
            }
        }
    }
}

fn check_rule(suffix: String, min_stem: usize, line: usize) -> Result<SuffixRule, PreprocessError> {
    let bad = |reason: &str| PreprocessError::BadSuffixRule { line, reason: reason.to_owned() };
    if suffix.is_empty() || suffix.chars().any(char::is_whitespace) {
        return Err(bad("suffix must be non-empty without whitespace"));
    }
    if min_stem == 0 {
        return Err(bad("min_stem_length must be at least 1"));
    }
    Ok(SuffixRule { suffix, min_stem })
}

/// Simple (one-to-one) lowercase mapping. The only multi-char full mapping,
/// U+0130 (İ), folds to plain `i`; dotless ı stays ı, and `I` folds to `i`.
fn fold_char(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

fn is_letter(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::UppercaseLetter
            | GeneralCategory::LowercaseLetter
            | GeneralCategory::TitlecaseLetter
            | GeneralCategory::ModifierLetter
            | GeneralCategory::OtherLetter
    )
}

/// Lowercases and splits on every run of non-letters (Unicode `L*` is a letter).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if is_letter(c) {
            current.push(fold_char(c));
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

pub fn remove_stopwords(mut tokens: Vec<String>, stops: &StopList) -> Vec<String> {
    if !stops.is_empty() {
        tokens.retain(|t| !stops.contains(t));
    }
    tokens
}

pub fn stem<'a>(token: &'a str, spec: &StemmerSpec) -> Cow<'a, str> {
    let StemmerSpec::SuffixTable(rules) = spec else {
        return Cow::Borrowed(token);
    };
    let len = token.chars().count();
    for rule in rules {
        if let Some(root) = token.strip_suffix(rule.suffix.as_str()) {
            if len - rule.suffix.chars().count() >= rule.min_stem {
                return Cow::Owned(root.to_owned());
            }
        }
    }
    Cow::Borrowed(token)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub stoplist: StopList,
    pub stemmer: StemmerSpec,
    /// Documents with fewer tokens after preprocessing are dropped.
    pub min_words: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { stoplist: StopList::turkish(), stemmer: StemmerSpec::Identity, min_words: 20 }
    }
}

/// tokenize, then drop stop words, then stem. No length filter.
pub fn preprocess_text(text: &str, config: &PreprocessConfig) -> Vec<String> {
    let tokens = remove_stopwords(tokenize(text), &config.stoplist);
    match config.stemmer {
        StemmerSpec::Identity => tokens,
        ref spec => tokens
            .into_iter()
            .map(|t| match stem(&t, spec) {
                Cow::Borrowed(_) => t,
                Cow::Owned(s) => s,
            })
            .collect(),
    }
}

/// Fills `doc.tokens`; `None` means the document fell under `min_words`.
pub fn preprocess_document(mut doc: Document, config: &PreprocessConfig) -> Option<Document> {
    doc.tokens = preprocess_text(&doc.text, config);
    (doc.tokens.len() >= config.min_words).then_some(doc)
}
