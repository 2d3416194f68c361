//! Parallel news classification: item parsing and bundling, tokenization,
//! TF-IDF vectors built with shard-parallel document-frequency merges, and a
//! multinomial Naive Bayes classifier, plus learning-curve and scaling
//! experiment drivers.

pub mod classifier;
pub mod cli;
pub mod corpus;
pub mod engine;
pub mod eval;
mod kv;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod vectorize;

pub use classifier::{FeatureMode, NBModel, Prediction};
pub use corpus::{CorpusBundle, Document, SynthSpec};
pub use engine::{EngineConfig, RunStats, ShardStrategy, TrainParams};
pub use pipeline::TrainedPipeline;
pub use preprocess::{PreprocessConfig, StemmerSpec, StopList};
pub use vectorize::{LogBase, SparseVector, Vocabulary};
