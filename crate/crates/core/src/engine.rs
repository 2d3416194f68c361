//! Shared-nothing parallel training.
//!
//! The corpus is split into one shard per worker. Each worker preprocesses
//! its shard and produces a document-frequency partial; the coordinator folds
//! the partials in shard order into one [`Vocabulary`]. A second parallel pass
//! turns each surviving document into a feature vector, and the coordinator
//! trains on those in original document order, so the resulting model does
//! not depend on the worker count or the shard strategy.

use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::classifier::{ClassifierError, FeatureMode, NBModel, TrainingStats};
use crate::corpus::Document;
use crate::pipeline::features;
use crate::preprocess::{preprocess_document, PreprocessConfig};
use crate::vectorize::{DocFreqPartial, LogBase, SparseVector, VectorizeError, Vocabulary};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine config: {0}")]
    InvalidConfig(String),
    #[error("outOfMem: shard {shard} needs an estimated {estimated} bytes, budget is {budget}")]
    ResourceExhausted { shard: usize, estimated: u64, budget: u64 },
    #[error("no documents left to train on")]
    EmptyCorpus,
    #[error("training needs at least 2 categories, found {0}")]
    SingleCategory(usize),
    #[error("document {id:?} has no category label")]
    Unlabeled { id: String },
    #[error(transparent)]
    Vectorize(VectorizeError),
    #[error(transparent)]
    Classifier(ClassifierError),
}

impl From<VectorizeError> for EngineError {
    fn from(e: VectorizeError) -> Self {
        match e {
            VectorizeError::EmptyCorpus => EngineError::EmptyCorpus,
            other => EngineError::Vectorize(other),
        }
    }
}

impl From<ClassifierError> for EngineError {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::SingleCategory(n) => EngineError::SingleCategory(n),
            other => EngineError::Classifier(other),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ShardStrategy {
    /// Consecutive runs; the first `n % workers` shards get one extra item.
    #[default]
    Contiguous,
    /// Item `i` goes to shard `i % workers`.
    RoundRobin,
}

impl FromStr for ShardStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "contiguous" => Ok(ShardStrategy::Contiguous),
            "round_robin" | "round-robin" => Ok(ShardStrategy::RoundRobin),
            other => Err(format!("unknown shard strategy {other:?}")),
        }
    }
}

/// Deterministic per-worker footprint accounting (not an OS measurement):
///
/// ```text
/// estimate = per_shard + sum over docs of (text bytes + token bytes + per_doc)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryModel {
    pub per_doc_overhead: u64,
    pub per_shard_overhead: u64,
}

impl Default for MemoryModel {
    fn default() -> Self {
        Self { per_doc_overhead: 64, per_shard_overhead: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub workers: usize,
    /// Per-worker cap on the estimated footprint.
    pub memory_budget_bytes: Option<u64>,
    pub shard_strategy: ShardStrategy,
    pub memory_model: MemoryModel,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            memory_budget_bytes: None,
            shard_strategy: ShardStrategy::Contiguous,
            memory_model: MemoryModel::default(),
        }
    }
}

impl EngineConfig {
    pub fn with_workers(workers: usize) -> Self {
        Self { workers, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.workers == 0 {
            return Err(EngineError::InvalidConfig("workers must be at least 1".into()));
        }
        if self.memory_budget_bytes == Some(0) {
            return Err(EngineError::InvalidConfig("memory budget must be positive".into()));
        }
        Ok(())
    }
}

/// Classifier settings that do not affect preprocessing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub alpha: f64,
    pub mode: FeatureMode,
    pub log_base: LogBase,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { alpha: 1.0, mode: FeatureMode::TfIdf, log_base: LogBase::Natural }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub wall_time: Duration,
    pub docs_processed: usize,
    /// Documents left after the minimum-length filter.
    pub docs_trained: usize,
    pub peak_estimated_bytes: u64,
    pub shards: usize,
}

#[derive(Debug, Clone)]
pub struct TrainingOutput {
    pub vocabulary: Vocabulary,
    pub model: NBModel,
    pub stats: RunStats,
}

/// Splits `items` into exactly `workers` shards (some possibly empty).
pub fn partition<T>(items: Vec<T>, workers: usize, strategy: ShardStrategy) -> Vec<Vec<T>> {
    assert!(workers >= 1, "partition needs at least one worker");
    let n = items.len();
    let mut shards: Vec<Vec<T>> = (0..workers).map(|_| Vec::new()).collect();
    match strategy {
        ShardStrategy::Contiguous => {
            let (base, extra) = (n / workers, n % workers);
            let mut it = items.into_iter();
            for (s, shard) in shards.iter_mut().enumerate() {
                let take = base + usize::from(s < extra);
                shard.extend(it.by_ref().take(take));
            }
        }
        ShardStrategy::RoundRobin => {
            for (i, item) in items.into_iter().enumerate() {
                shards[i % workers].push(item);
            }
        }
    }
    shards
}

pub fn estimate_memory<'a, I>(shard: I, model: &MemoryModel) -> u64
where
    I: IntoIterator<Item = &'a Document>,
{
    shard.into_iter().fold(model.per_shard_overhead, |acc, d| {
        let token_bytes: usize = d.tokens.iter().map(String::len).sum();
        acc + d.text.len() as u64 + token_bytes as u64 + model.per_doc_overhead
    })
}

struct ShardResult {
    docs: Vec<(usize, Document)>,
    partial: DocFreqPartial,
    estimate: u64,
}

fn map_shard(shard: Vec<(usize, &Document)>, preprocess: &PreprocessConfig, memory: &MemoryModel) -> ShardResult {
    let docs: Vec<(usize, Document)> =
        shard.into_iter().filter_map(|(i, d)| preprocess_document(d.clone(), preprocess).map(|d| (i, d))).collect();
    let partial = DocFreqPartial::from_documents(docs.iter().map(|(_, d)| d));
    let estimate = estimate_memory(docs.iter().map(|(_, d)| d), memory);
    ShardResult { docs, partial, estimate }
}

/// Runs `f` over every shard, one thread per shard, returning results in
/// shard order.
fn run_workers<S, R, F>(shards: Vec<S>, f: F) -> Vec<R>
where
    S: Send,
    R: Send,
    F: Fn(S) -> R + Sync,
{
    if shards.len() == 1 {
        return shards.into_iter().map(&f).collect();
    }
    thread::scope(|scope| {
        let handles: Vec<_> = shards
            .into_iter()
            .map(|shard| {
                let f = &f;
                scope.spawn(move || f(shard))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn map_phase(documents: &[Document], preprocess: &PreprocessConfig, config: &EngineConfig) -> Vec<ShardResult> {
    let indexed: Vec<(usize, &Document)> = documents.iter().enumerate().collect();
    let shards = partition(indexed, config.workers, config.shard_strategy);
    run_workers(shards, |shard| map_shard(shard, preprocess, &config.memory_model))
}

/// Per-shard footprint estimates, as checked against the memory budget.
pub fn shard_estimates(
    documents: &[Document],
    preprocess: &PreprocessConfig,
    config: &EngineConfig,
) -> Result<Vec<u64>, EngineError> {
    config.validate()?;
    Ok(map_phase(documents, preprocess, config).iter().map(|r| r.estimate).collect())
}

pub fn run_training(
    documents: &[Document],
    preprocess: &PreprocessConfig,
    config: &EngineConfig,
    params: &TrainParams,
) -> Result<TrainingOutput, EngineError> {
    let started = Instant::now();
    config.validate()?;
    if let Some(d) = documents.iter().find(|d| d.label.is_none()) {
        return Err(EngineError::Unlabeled { id: d.id.clone() });
    }

    let results = map_phase(documents, preprocess, config);

    let peak = results.iter().map(|r| r.estimate).max().unwrap_or(0);
    if let Some(budget) = config.memory_budget_bytes {
        if let Some((shard, r)) = results.iter().enumerate().find(|(_, r)| r.estimate > budget) {
            return Err(EngineError::ResourceExhausted { shard, estimated: r.estimate, budget });
        }
    }

    let mut shard_docs = Vec::with_capacity(results.len());
    let mut merged = DocFreqPartial::default();
    for r in results {
        merged = merged.merge(r.partial);
        shard_docs.push(r.docs);
    }
    let vocabulary = Vocabulary::from_partial(merged)?;

    let vectors: Vec<Vec<(usize, SparseVector)>> = run_workers(shard_docs, |docs| {
        docs.into_iter().map(|(i, d)| (i, features(&d.tokens, &vocabulary, params.mode, params.log_base))).collect()
    });
    let mut vectors: Vec<(usize, SparseVector)> = vectors.into_iter().flatten().collect();
    vectors.sort_unstable_by_key(|v| v.0);

    let mut stats = TrainingStats::new(params.mode, vocabulary.len() as u64);
    for (i, v) in &vectors {
        let label = documents[*i].label.as_deref().expect("labels checked above");
        stats.add(label, v)?;
    }
    let model = stats.finish(params.alpha)?;

    Ok(TrainingOutput {
        vocabulary,
        model,
        stats: RunStats {
            wall_time: started.elapsed(),
            docs_processed: documents.len(),
            docs_trained: vectors.len(),
            peak_estimated_bytes: peak,
            shards: config.workers,
        },
    })
}
