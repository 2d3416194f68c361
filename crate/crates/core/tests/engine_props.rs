mod common;

use proptest::prelude::*;

use newsclass::classifier::FeatureMode;
use newsclass::corpus::Document;
use newsclass::engine::{
    estimate_memory, partition, run_training, shard_estimates, EngineConfig, EngineError, MemoryModel, ShardStrategy,
    TrainParams,
};
use newsclass::preprocess::PreprocessConfig;

fn loose() -> PreprocessConfig {
    PreprocessConfig { min_words: 0, ..PreprocessConfig::default() }
}

fn small_corpus() -> impl Strategy<Value = Vec<Document>> {
    proptest::collection::vec(
        ("(ekonomi|spor|saglik)", proptest::collection::vec("(dolar|borsa|gol|maç|ilaç|ve|hastane|faiz)", 1..12)),
        2..30,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (label, words))| {
                // First two documents guarantee two categories.
                let label = match i {
                    0 => "ekonomi".to_owned(),
                    1 => "spor".to_owned(),
                    _ => label,
                };
                Document::new(format!("d{i}"), Some(&label), words.join(" "))
            })
            .collect()
    })
}

#[test]
fn accounting_example() {
    let mut doc = Document::new("d", Some("ekonomi"), "x".repeat(100));
    doc.tokens = vec!["ab".into(), "cde".into()];
    let model = MemoryModel { per_doc_overhead: 64, per_shard_overhead: 0 };
    assert_eq!(estimate_memory([&doc], &model), 100 + 5 + 64);
    let fixed = MemoryModel::default();
    assert_eq!(estimate_memory(std::iter::empty(), &fixed), fixed.per_shard_overhead);
}

#[test]
fn partition_examples() {
    assert_eq!(partition(vec![0, 1, 2, 3], 2, ShardStrategy::Contiguous), [vec![0, 1], vec![2, 3]]);
    assert_eq!(partition(vec![0, 1, 2, 3], 2, ShardStrategy::RoundRobin), [vec![0, 2], vec![1, 3]]);
    let shards = partition(vec![0, 1, 2], 4, ShardStrategy::Contiguous);
    assert_eq!(shards.len(), 4);
    assert_eq!(shards.iter().filter(|s| s.is_empty()).count(), 1);
}

#[test]
fn budget_below_footprint_exhausts() {
    let docs = common::synth(&["ekonomi", "spor"], 50, 300, 0.2, 4);
    let pre = PreprocessConfig::default();
    let config = EngineConfig::with_workers(2);
    let est = shard_estimates(&docs, &pre, &config).unwrap();
    let tight = EngineConfig { memory_budget_bytes: Some(est[0] - 1), ..config };
    let err = run_training(&docs, &pre, &tight, &TrainParams::default()).unwrap_err();
    assert!(matches!(err, EngineError::ResourceExhausted { shard: 0, .. }));
    assert!(err.to_string().starts_with("outOfMem"));
}

#[test]
fn unlabeled_documents_are_rejected() {
    let docs = vec![Document::new("a", Some("ekonomi"), "dolar"), Document::new("b", None, "gol")];
    let err = run_training(&docs, &loose(), &EngineConfig::default(), &TrainParams::default()).unwrap_err();
    assert!(matches!(err, EngineError::Unlabeled { ref id } if id == "b"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn output_ignores_worker_count_and_strategy(docs in small_corpus(), counts in any::<bool>()) {
        let params = TrainParams {
            mode: if counts { FeatureMode::Counts } else { FeatureMode::TfIdf },
            ..TrainParams::default()
        };
        let reference = run_training(&docs, &loose(), &EngineConfig::with_workers(1), &params).unwrap();
        for strategy in [ShardStrategy::Contiguous, ShardStrategy::RoundRobin] {
            for workers in [1, 2, 4, 8] {
                let config = EngineConfig { shard_strategy: strategy, ..EngineConfig::with_workers(workers) };
                let out = run_training(&docs, &loose(), &config, &params).unwrap();
                prop_assert_eq!(&out.vocabulary, &reference.vocabulary);
                prop_assert_eq!(out.model.save(), reference.model.save());
            }
        }
        let again = run_training(&docs, &loose(), &EngineConfig::with_workers(1), &params).unwrap();
        prop_assert_eq!(again.model, reference.model);
    }

    #[test]
    fn exhaustion_iff_some_shard_exceeds_budget(
        docs in small_corpus(),
        workers in 1usize..6,
        round_robin in any::<bool>(),
        budget in 4000u64..7000,
    ) {
        let config = EngineConfig {
            shard_strategy: if round_robin { ShardStrategy::RoundRobin } else { ShardStrategy::Contiguous },
            ..EngineConfig::with_workers(workers)
        };
        let est = shard_estimates(&docs, &loose(), &config).unwrap();
        prop_assert_eq!(est.len(), workers);
        let limited = EngineConfig { memory_budget_bytes: Some(budget), ..config.clone() };
        let result = run_training(&docs, &loose(), &limited, &TrainParams::default());
        let over = est.iter().position(|&e| e > budget);
        match (over, result) {
            (None, Ok(_)) => {}
            (Some(first), Err(EngineError::ResourceExhausted { shard, estimated, budget: b })) => {
                prop_assert_eq!(shard, first);
                prop_assert_eq!(estimated, est[first]);
                prop_assert_eq!(b, budget);
            }
            (over, result) => prop_assert!(false, "over={:?} result={:?}", over, result.map(|_| ())),
        }
        prop_assert!(run_training(&docs, &loose(), &config, &TrainParams::default()).is_ok());
    }

    #[test]
    fn more_documents_cost_more(docs in small_corpus()) {
        let model = MemoryModel::default();
        let mut prepared = docs.clone();
        for d in &mut prepared {
            d.tokens = newsclass::preprocess::preprocess_text(&d.text, &loose());
        }
        let once = estimate_memory(prepared.iter(), &model);
        let twice = estimate_memory(prepared.iter().chain(prepared.iter()), &model);
        prop_assert!(twice > once);
    }
}
