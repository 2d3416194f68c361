//! A trained classifier together with everything needed to apply it to raw
//! text: preprocessing settings, vocabulary and weighting.

use std::fmt::Write as _;

use thiserror::Error;

use crate::classifier::{ClassifierError, FeatureMode, NBModel, Prediction};
use crate::corpus::Document;
use crate::engine::{TrainParams, TrainingOutput};
use crate::kv;
use crate::preprocess::{preprocess_text, PreprocessConfig, PreprocessError, StemmerSpec, StopList};
use crate::vectorize::{count_tokens, count_vector, tfidf_vector, LogBase, SparseVector, VectorizeError, Vocabulary};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("not a pipeline file (bad magic)")]
    BadMagic,
    #[error("pipeline format version {0} is not supported")]
    UnsupportedVersion(u8),
    #[error("malformed pipeline file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Feature vector for a token list under the given mode.
pub fn features<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, mode: FeatureMode, base: LogBase) -> SparseVector {
    let counts = count_tokens(tokens);
    match mode {
        FeatureMode::Counts => count_vector(&counts, vocab),
        FeatureMode::TfIdf => tfidf_vector(&counts, vocab, base),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub preprocess: PreprocessConfig,
    pub log_base: LogBase,
    pub vocabulary: Vocabulary,
    pub model: NBModel,
}

pub const PIPELINE_MAGIC: &[u8; 8] = b"NBPIPEL1";
pub const PIPELINE_VERSION: u8 = 1;

impl TrainedPipeline {
    pub fn new(preprocess: PreprocessConfig, params: &TrainParams, output: TrainingOutput) -> Self {
        Self { preprocess, log_base: params.log_base, vocabulary: output.vocabulary, model: output.model }
    }

    pub fn vectorize_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVector {
        features(tokens, &self.vocabulary, self.model.mode(), self.log_base)
    }

    /// Classifies already-preprocessed tokens.
    pub fn classify_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Prediction {
        self.model.predict(&self.vectorize_tokens(tokens)).expect("pipeline features are never negative")
    }

    /// Preprocesses `doc.text` (the minimum-length filter does not apply) and
    /// classifies it.
    pub fn classify(&self, doc: &Document) -> Prediction {
        self.classify_tokens(&preprocess_text(&doc.text, &self.preprocess))
    }

    /// Layout: magic `NBPIPEL1`, version byte, then five sections each
    /// prefixed by a u64 LE byte length: settings (`key=value` lines),
    /// stop list (one term per line), stemmer table, vocabulary TSV, and the
    /// model file bytes.
    pub fn save(&self) -> Vec<u8> {
        let mut settings = String::new();
        let _ = writeln!(settings, "min_words={}", self.preprocess.min_words);
        match self.log_base {
            LogBase::Natural => settings.push_str("log_base=e\n"),
            LogBase::Base(b) => {
                let _ = writeln!(settings, "log_base_bits={:016x}", b.to_bits());
            }
        }
        let stoplist: String = self.preprocess.stoplist.sorted_terms().into_iter().map(|t| format!("{t}\n")).collect();
        let stemmer = self.preprocess.stemmer.to_table_text();
        let vocab = self.vocabulary.to_tsv();
        let model = self.model.save();
        let sections: [&[u8]; 5] =
            [settings.as_bytes(), stoplist.as_bytes(), stemmer.as_bytes(), vocab.as_bytes(), &model];
        let mut out = Vec::new();
        out.extend_from_slice(PIPELINE_MAGIC);
        out.push(PIPELINE_VERSION);
        for s in sections {
            out.extend_from_slice(&(s.len() as u64).to_le_bytes());
            out.extend_from_slice(s);
        }
        out
    }

    pub fn load(bytes: &[u8]) -> Result<Self, PipelineError> {
        fn text(b: &[u8]) -> Result<&str, PipelineError> {
            std::str::from_utf8(b).map_err(|_| PipelineError::Malformed("section is not UTF-8".into()))
        }
        if !bytes.starts_with(PIPELINE_MAGIC) {
            return Err(PipelineError::BadMagic);
        }
        let malformed = |m: &str| PipelineError::Malformed(m.to_owned());
        let version = *bytes.get(8).ok_or_else(|| malformed("missing version"))?;
        if version != PIPELINE_VERSION {
            return Err(PipelineError::UnsupportedVersion(version));
        }
        let mut rest = &bytes[9..];
        let mut sections = Vec::with_capacity(5);
        for _ in 0..5 {
            if rest.len() < 8 {
                return Err(malformed("truncated section header"));
            }
            let len = u64::from_le_bytes(rest[..8].try_into().unwrap());
            rest = &rest[8..];
            if (rest.len() as u64) < len {
                return Err(malformed("truncated section"));
            }
            let (head, tail) = rest.split_at(len as usize);
            sections.push(head);
            rest = tail;
        }
        if !rest.is_empty() {
            return Err(malformed("trailing bytes"));
        }

        let mut min_words = None;
        let mut log_base = None;
        for (k, v) in kv::parse(text(sections[0])?).map_err(|e| malformed(&e.to_string()))? {
            match k.as_str() {
                "min_words" => min_words = Some(v.parse().map_err(|_| malformed("bad min_words"))?),
                "log_base" if v == "e" => log_base = Some(LogBase::Natural),
                "log_base_bits" => {
                    let bits = u64::from_str_radix(&v, 16).map_err(|_| malformed("bad log_base_bits"))?;
                    log_base = Some(LogBase::new(f64::from_bits(bits))?);
                }
                other => return Err(malformed(&format!("unknown setting {other:?}"))),
            }
        }
        let preprocess = PreprocessConfig {
            stoplist: StopList::parse(text(sections[1])?)?,
            stemmer: StemmerSpec::parse(text(sections[2])?)?,
            min_words: min_words.ok_or_else(|| malformed("missing min_words"))?,
        };
        let vocabulary = Vocabulary::from_tsv(text(sections[3])?)?;
        let model = NBModel::load(sections[4])?;
        if model.vocab_size() != vocabulary.len() as u64 {
            return Err(malformed("model and vocabulary sizes disagree"));
        }
        Ok(Self { preprocess, log_base: log_base.ok_or_else(|| malformed("missing log base"))?, vocabulary, model })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_training, EngineConfig};

    fn trained(params: TrainParams) -> TrainedPipeline {
        let docs = vec![
            Document::new("1", Some("economy"), "dolar borsa faiz dolar ve"),
            Document::new("2", Some("sport"), "maç gol takım"),
            Document::new("3", Some("economy"), "borsa enflasyon"),
            Document::new("4", Some("sport"), "gol lig maç"),
        ];
        let pre = PreprocessConfig {
            min_words: 0,
            stemmer: StemmerSpec::suffix_table([("lar".to_owned(), 3)]).unwrap(),
            ..Default::default()
        };
        let out = run_training(&docs, &pre, &EngineConfig::default(), &params).unwrap();
        TrainedPipeline::new(pre, &params, out)
    }

    #[test]
    fn round_trip_and_classify() {
        for params in [
            TrainParams::default(),
            TrainParams { mode: FeatureMode::Counts, log_base: LogBase::new(2.0).unwrap(), alpha: 0.5 },
        ] {
            let p = trained(params);
            let back = TrainedPipeline::load(&p.save()).unwrap();
            assert_eq!(back, p);
            let doc = Document::new("q", None, "Dolar ve borsa");
            assert_eq!(back.classify(&doc).label, "economy");
            assert_eq!(back.classify(&Document::new("r", None, "gol!")).label, "sport");
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(TrainedPipeline::load(b"NBMODEL1"), Err(PipelineError::BadMagic)));
        let bytes = trained(TrainParams::default()).save();
        assert!(TrainedPipeline::load(&bytes[..bytes.len() - 2]).is_err());
        let mut v = bytes.clone();
        v[8] = 7;
        assert!(matches!(TrainedPipeline::load(&v), Err(PipelineError::UnsupportedVersion(7))));
    }
}
