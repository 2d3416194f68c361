//! Experiment drivers: learning curves over training-set size and scaling
//! runs over worker counts, each rendered as CSV.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::Document;
use crate::engine::{run_training, EngineConfig, EngineError, TrainParams};
use crate::pipeline::TrainedPipeline;
use crate::preprocess::{preprocess_document, PreprocessConfig};
use crate::rng::Sampler;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("category {category:?} has {available} usable documents, {required} required")]
    InsufficientDocuments { category: String, available: usize, required: usize },
    #[error("confusion row is empty")]
    EmptyRow,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Percentage of row `class` that landed on the diagonal.
pub fn success_percent(row: &[u64], class: usize) -> Result<f64, EvalError> {
    let total: u64 = row.iter().sum();
    if total == 0 {
        return Err(EvalError::EmptyRow);
    }
    Ok(100.0 * row[class] as f64 / total as f64)
}

#[derive(Debug, Clone)]
pub struct LearningCurveSpec {
    /// Report column order.
    pub categories: Vec<String>,
    /// Training documents per category, strictly increasing.
    pub train_sizes: Vec<usize>,
    pub test_docs_per_category: usize,
    pub seed: u64,
    pub params: TrainParams,
    pub preprocess: PreprocessConfig,
    pub engine: EngineConfig,
}

impl LearningCurveSpec {
    pub fn new(categories: Vec<String>, train_sizes: Vec<usize>) -> Self {
        Self {
            categories,
            train_sizes,
            test_docs_per_category: 1000,
            seed: 0,
            params: TrainParams::default(),
            preprocess: PreprocessConfig::default(),
            engine: EngineConfig::default(),
        }
    }

    fn validate(&self) -> Result<(), EvalError> {
        let invalid = |m: &str| Err(EvalError::InvalidSpec(m.to_owned()));
        if !(2..=5).contains(&self.categories.len()) {
            return invalid("learning curves take 2 to 5 categories");
        }
        let distinct: BTreeSet<&String> = self.categories.iter().collect();
        if distinct.len() != self.categories.len() {
            return invalid("duplicate category");
        }
        if self.train_sizes.is_empty() || self.train_sizes[0] == 0 {
            return invalid("train sizes must be positive");
        }
        if !self.train_sizes.windows(2).all(|w| w[0] < w[1]) {
            return invalid("train sizes must be strictly increasing");
        }
        if self.test_docs_per_category == 0 {
            return invalid("test set must not be empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub train_size: usize,
    /// Per-category recall in percent, in spec category order.
    pub success_pct: Vec<f64>,
    pub overall_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveReport {
    pub categories: Vec<String>,
    pub rows: Vec<CurveRow>,
    /// `confusion[actual][predicted]` at the largest train size.
    pub confusion: Vec<Vec<u64>>,
    /// Ids of the held-out documents, per category.
    pub test_ids: Vec<Vec<String>>,
    /// Ids of the largest training sample, per category; smaller samples are
    /// prefixes of these.
    pub train_ids: Vec<Vec<String>>,
}

impl CurveReport {
    /// `train_size,<cat>_pct,...,overall_pct`, one decimal place.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("train_size");
        for c in &self.categories {
            let _ = write!(out, ",{c}_pct");
        }
        out.push_str(",overall_pct\n");
        for row in &self.rows {
            let _ = write!(out, "{}", row.train_size);
            for p in &row.success_pct {
                let _ = write!(out, ",{p:.1}");
            }
            let _ = writeln!(out, ",{:.1}", row.overall_pct);
        }
        out
    }

    /// `actual,<cat>,...` rows of raw counts.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("actual");
        for c in &self.categories {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for (c, row) in self.categories.iter().zip(&self.confusion) {
            out.push_str(c);
            for n in row {
                let _ = write!(out, ",{n}");
            }
            out.push('\n');
        }
        out
    }
}

/// 64-bit FNV-1a, used to give each category its own sampling stream.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Held-out test set first, then a fixed training order per category. A
/// category's split depends only on the seed and its own name.
fn split_category(docs: &mut [Document], category: &str, seed: u64) {
    Sampler::new(seed ^ fnv1a(category.as_bytes())).shuffle(docs);
}

pub fn run_learning_curve(corpus: &[Document], spec: &LearningCurveSpec) -> Result<CurveReport, EvalError> {
    spec.validate()?;
    spec.engine.validate()?;
    let k = spec.categories.len();
    let mut by_cat: Vec<Vec<Document>> = vec![Vec::new(); k];
    for doc in corpus {
        let Some(ci) = doc.label.as_ref().and_then(|l| spec.categories.iter().position(|c| c == l)) else {
            continue;
        };
        if let Some(d) = preprocess_document(doc.clone(), &spec.preprocess) {
            by_cat[ci].push(d);
        }
    }
    let max_n = *spec.train_sizes.last().unwrap();
    let required = max_n + spec.test_docs_per_category;
    for (c, docs) in spec.categories.iter().zip(&by_cat) {
        if docs.len() < required {
            return Err(EvalError::InsufficientDocuments { category: c.clone(), available: docs.len(), required });
        }
    }
    for (c, docs) in spec.categories.iter().zip(by_cat.iter_mut()) {
        split_category(docs, c, spec.seed);
    }
    let t = spec.test_docs_per_category;

    let mut rows = Vec::with_capacity(spec.train_sizes.len());
    let mut confusion = Vec::new();
    for &n in &spec.train_sizes {
        let train: Vec<Document> = by_cat.iter().flat_map(|docs| docs[t..t + n].iter().cloned()).collect();
        let output = run_training(&train, &spec.preprocess, &spec.engine, &spec.params)?;
        let pipeline = TrainedPipeline::new(spec.preprocess.clone(), &spec.params, output);

        let mut matrix = vec![vec![0u64; k]; k];
        for (actual, docs) in by_cat.iter().enumerate() {
            for doc in &docs[..t] {
                let label = pipeline.classify_tokens(&doc.tokens).label;
                let predicted = spec
                    .categories
                    .iter()
                    .position(|c| *c == label)
                    .expect("model categories are the curve categories");
                matrix[actual][predicted] += 1;
            }
        }
        let success_pct =
            matrix.iter().enumerate().map(|(i, row)| success_percent(row, i)).collect::<Result<Vec<_>, _>>()?;
        let correct: u64 = (0..k).map(|i| matrix[i][i]).sum();
        let total: u64 = matrix.iter().flatten().sum();
        rows.push(CurveRow { train_size: n, success_pct, overall_pct: 100.0 * correct as f64 / total as f64 });
        confusion = matrix;
    }

    let ids = |range: std::ops::Range<usize>| -> Vec<Vec<String>> {
        by_cat.iter().map(|docs| docs[range.clone()].iter().map(|d| d.id.clone()).collect()).collect()
    };
    Ok(CurveReport {
        categories: spec.categories.clone(),
        rows,
        confusion,
        test_ids: ids(0..t),
        train_ids: ids(t..t + max_n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenchOutcome {
    Seconds(f64),
    OutOfMem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub train_docs: usize,
    pub workers: usize,
    pub outcome: BenchOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    /// Categories the training documents were drawn from.
    pub categories: Vec<String>,
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    /// `train_docs,workers,seconds`; failed cells read `outOfMem`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("train_docs,workers,seconds\n");
        for r in &self.rows {
            match r.outcome {
                BenchOutcome::Seconds(s) => {
                    let _ = writeln!(out, "{},{},{s:.6}", r.train_docs, r.workers);
                }
                BenchOutcome::OutOfMem => {
                    let _ = writeln!(out, "{},{},outOfMem", r.train_docs, r.workers);
                }
            }
        }
        out
    }
}

/// Picks `size` labeled documents split evenly over `categories` (earlier
/// categories absorb the remainder), each category's in corpus order.
pub fn draw_balanced(corpus: &[Document], categories: &[String], size: usize) -> Result<Vec<Document>, EvalError> {
    let k = categories.len();
    let mut out = Vec::with_capacity(size);
    for (i, c) in categories.iter().enumerate() {
        let quota = size / k + usize::from(i < size % k);
        let before = out.len();
        out.extend(corpus.iter().filter(|d| d.label.as_deref() == Some(c.as_str())).take(quota).cloned());
        let got = out.len() - before;
        if got < quota {
            return Err(EvalError::InsufficientDocuments { category: c.clone(), available: got, required: quota });
        }
    }
    Ok(out)
}

/// Times training for every `(size, workers)` pair. Memory exhaustion is
/// recorded as [`BenchOutcome::OutOfMem`] and the grid carries on.
///
/// Documents come from the first four categories in name order (all of them
/// if there are fewer), in equal numbers.
pub fn run_scaling_bench(
    corpus: &[Document],
    sizes: &[usize],
    worker_counts: &[usize],
    base: &EngineConfig,
    preprocess: &PreprocessConfig,
    params: &TrainParams,
) -> Result<ScalingReport, EvalError> {
    if sizes.is_empty() || worker_counts.is_empty() {
        return Err(EvalError::InvalidSpec("sizes and worker counts must be non-empty".into()));
    }
    if worker_counts.contains(&0) {
        return Err(EvalError::InvalidSpec("worker counts must be at least 1".into()));
    }
    let labels: BTreeSet<&str> = corpus.iter().filter_map(|d| d.label.as_deref()).collect();
    if labels.len() < 2 {
        return Err(EvalError::InvalidSpec("corpus needs at least 2 labeled categories".into()));
    }
    let categories: Vec<String> = labels.into_iter().take(4).map(str::to_owned).collect();

    let mut samples = Vec::with_capacity(sizes.len());
    for &size in sizes {
        samples.push(draw_balanced(corpus, &categories, size)?);
    }

    let mut rows = Vec::with_capacity(sizes.len() * worker_counts.len());
    for (&size, docs) in sizes.iter().zip(&samples) {
        for &workers in worker_counts {
            let config = EngineConfig { workers, ..base.clone() };
            let outcome = match run_training(docs, preprocess, &config, params) {
                Ok(out) => BenchOutcome::Seconds(out.stats.wall_time.as_secs_f64()),
                Err(EngineError::ResourceExhausted { .. }) => BenchOutcome::OutOfMem,
                Err(e) => return Err(e.into()),
            };
            rows.push(ScalingRow { train_docs: size, workers, outcome });
        }
    }
    Ok(ScalingReport { categories, rows })
}
