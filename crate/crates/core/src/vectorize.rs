//! Vocabulary with document frequencies and TF-IDF sparse vectors.
//!
//! Weight of term `i` in document `j`:
//!
//! ```text
//! w_ij = log(tf_ij + 0.5) * log(D / df_i)
//! ```
//!
//! Only terms present in the document are stored; a term occurring in every
//! training document has zero weight and is elided.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::Document;

#[derive(Debug, Error, PartialEq)]
pub enum VectorizeError {
    #[error("corpus has no documents")]
    EmptyCorpus,
    #[error("idf undefined for df={df}, D={total_docs}")]
    Domain { df: u64, total_docs: u64 },
    #[error("invalid log base {0}")]
    BadLogBase(f64),
    #[error("vocabulary line {line}: {reason}")]
    BadVocabulary { line: usize, reason: String },
}

/// Base of both logarithms in the weighting.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum LogBase {
    #[default]
    Natural,
    Base(f64),
}

impl LogBase {
    pub fn new(base: f64) -> Result<Self, VectorizeError> {
        if !(base.is_finite() && base > 0.0 && base != 1.0) {
            return Err(VectorizeError::BadLogBase(base));
        }
        Ok(if base == std::f64::consts::E { LogBase::Natural } else { LogBase::Base(base) })
    }

    pub fn value(self) -> f64 {
        match self {
            LogBase::Natural => std::f64::consts::E,
            LogBase::Base(b) => b,
        }
    }

    #[inline]
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Base(b) => x.ln() / b.ln(),
        }
    }
}

/// Raw term frequencies of one document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermCounts {
    counts: HashMap<String, u64>,
}

impl TermCounts {
    pub fn get(&self, term: &str) -> u64 {
        self.counts.get(term).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(t, &c)| (t.as_str(), c))
    }
}

pub fn count_terms(doc: &Document) -> TermCounts {
    count_tokens(&doc.tokens)
}

pub fn count_tokens<S: AsRef<str>>(tokens: &[S]) -> TermCounts {
    let mut counts: HashMap<String, u64> = HashMap::with_capacity(tokens.len());
    for t in tokens {
        let t = t.as_ref();
        match counts.get_mut(t) {
            Some(c) => *c += 1,
            None => {
                counts.insert(t.to_owned(), 1);
            }
        }
    }
    TermCounts { counts }
}

/// Per-shard document-frequency partial. Merging is integer addition, so
/// partials form a commutative monoid with `DocFreqPartial::default()` as
/// identity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocFreqPartial {
    pub df: HashMap<String, u64>,
    pub docs: u64,
}

impl DocFreqPartial {
    pub fn from_documents<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a Document>,
    {
        let mut partial = Self::default();
        for doc in docs {
            partial.add_document(&doc.tokens);
        }
        partial
    }

    pub fn add_document<S: AsRef<str>>(&mut self, tokens: &[S]) {
        self.docs += 1;
        let mut distinct: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
        distinct.sort_unstable();
        distinct.dedup();
        for t in distinct {
            match self.df.get_mut(t) {
                Some(c) => *c += 1,
                None => {
                    self.df.insert(t.to_owned(), 1);
                }
            }
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.docs += other.docs;
        for (term, n) in other.df {
            *self.df.entry(term).or_insert(0) += n;
        }
        self
    }
}

/// Term table with dense lexicographic indices, document frequencies and
/// the training document count `D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<u64>,
    index: HashMap<String, u32>,
    total_docs: u64,
}

impl Vocabulary {
    /// Assigns indices by ascending term order once all partials are merged.
    pub fn from_partial(partial: DocFreqPartial) -> Result<Self, VectorizeError> {
        if partial.docs == 0 {
            return Err(VectorizeError::EmptyCorpus);
        }
        let mut entries: Vec<(String, u64)> = partial.df.into_iter().collect();
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let (terms, df): (Vec<String>, Vec<u64>) = entries.into_iter().unzip();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Ok(Self { terms, df, index, total_docs: partial.docs })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_docs(&self) -> u64 {
        self.total_docs
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: u32) -> Option<&str> {
        self.terms.get(index as usize).map(String::as_str)
    }

    pub fn df(&self, index: u32) -> Option<u64> {
        self.df.get(index as usize).copied()
    }

    /// `(term, index, df)` in index order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u32, u64)> {
        self.terms.iter().zip(&self.df).enumerate().map(|(i, (t, &d))| (t.as_str(), i as u32, d))
    }

    /// `#docs=D` header, then `term<TAB>index<TAB>df` per line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::with_capacity(16 + self.terms.len() * 16);
        let _ = writeln!(out, "#docs={}", self.total_docs);
        for (t, i, d) in self.iter() {
            let _ = writeln!(out, "{t}\t{i}\t{d}");
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, VectorizeError> {
        let bad = |line: usize, reason: &str| VectorizeError::BadVocabulary { line, reason: reason.to_owned() };
        let mut lines = text.lines();
        let total_docs: u64 = lines
            .next()
            .and_then(|h| h.strip_prefix("#docs="))
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| bad(1, "expected #docs=D header"))?;
        if total_docs == 0 {
            return Err(bad(1, "D must be at least 1"));
        }
        let mut rows: Vec<(u32, String, u64)> = Vec::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let mut cols = line.split('\t');
            let (Some(term), Some(idx), Some(df), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
                return Err(bad(line_no, "expected term<TAB>index<TAB>df"));
            };
            let idx: u32 = idx.parse().map_err(|_| bad(line_no, "index is not a number"))?;
            let df: u64 = df.parse().map_err(|_| bad(line_no, "df is not a number"))?;
            if term.is_empty() {
                return Err(bad(line_no, "empty term"));
            }
            if df == 0 || df > total_docs {
                return Err(bad(line_no, "df outside 1..=D"));
            }
            rows.push((idx, term.to_owned(), df));
        }
        rows.sort_unstable_by_key(|r| r.0);
        let mut index = HashMap::with_capacity(rows.len());
        for (pos, (idx, term, _)) in rows.iter().enumerate() {
            if *idx as usize != pos {
                return Err(bad(0, "indices are not dense and unique"));
            }
            if index.insert(term.clone(), *idx).is_some() {
                return Err(bad(0, &format!("duplicate term {term:?}")));
            }
        }
        let (terms, df) = rows.into_iter().map(|(_, t, d)| (t, d)).unzip();
        Ok(Self { terms, df, index, total_docs })
    }
}

/// Builds per-shard partials independently and folds them in shard order.
pub fn build_vocabulary<S: AsRef<[Document]>>(shards: &[S]) -> Result<Vocabulary, VectorizeError> {
    let merged = shards
        .iter()
        .map(|s| DocFreqPartial::from_documents(s.as_ref()))
        .fold(DocFreqPartial::default(), DocFreqPartial::merge);
    Vocabulary::from_partial(merged)
}

/// `log(D / df)`.
pub fn idf(term_df: u64, total_docs: u64, base: LogBase) -> Result<f64, VectorizeError> {
    if term_df == 0 || term_df > total_docs {
        return Err(VectorizeError::Domain { df: term_df, total_docs });
    }
    Ok(base.log(total_docs as f64 / term_df as f64))
}

/// Sparse `(term index, value)` pairs, indices strictly increasing, no zeros.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Sorts by index and drops zero values. Panics on a repeated index.
    pub fn from_entries(mut entries: Vec<(u32, f64)>) -> Self {
        entries.retain(|&(_, w)| w != 0.0);
        entries.sort_unstable_by_key(|e| e.0);
        assert!(entries.windows(2).all(|w| w[0].0 < w[1].0), "repeated index in sparse vector");
        Self { entries }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> Option<f64> {
        self.entries.binary_search_by_key(&index, |e| e.0).ok().map(|p| self.entries[p].1)
    }
}

/// TF-IDF weights for the document's in-vocabulary terms.
pub fn tfidf_vector(counts: &TermCounts, vocab: &Vocabulary, base: LogBase) -> SparseVector {
    let d = vocab.total_docs as f64;
    let entries = counts
        .iter()
        .filter_map(|(term, tf)| {
            let idx = vocab.index_of(term)?;
            let df = vocab.df[idx as usize];
            let w = base.log(tf as f64 + 0.5) * base.log(d / df as f64);
            Some((idx, w))
        })
        .collect();
    SparseVector::from_entries(entries)
}

/// Raw term frequencies keyed by vocabulary index.
pub fn count_vector(counts: &TermCounts, vocab: &Vocabulary) -> SparseVector {
    let entries = counts.iter().filter_map(|(term, tf)| vocab.index_of(term).map(|i| (i, tf as f64))).collect();
    SparseVector::from_entries(entries)
}
