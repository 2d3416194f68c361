mod common;

use proptest::prelude::*;

use newsclass::corpus::Document;
use newsclass::vectorize::{
    build_vocabulary, count_tokens, idf, tfidf_vector, DocFreqPartial, LogBase, VectorizeError, Vocabulary,
};

fn doc(tokens: &[String]) -> Document {
    Document { tokens: tokens.to_vec(), ..Document::default() }
}

fn partial(docs: &[Vec<String>]) -> DocFreqPartial {
    let mut p = DocFreqPartial::default();
    for d in docs {
        p.add_document(d);
    }
    p
}

fn corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
    proptest::collection::vec(proptest::collection::vec("[a-e]{1,2}", 0..6), 0..6)
}

#[test]
#[allow(clippy::approx_constant)]
fn derived_weights() {
    let idf10 = idf(1, 10, LogBase::Natural).unwrap();
    assert!((idf10 - 2.302585).abs() < 1e-6);
    assert_eq!(idf(10, 10, LogBase::Natural).unwrap(), 0.0);
    assert!(matches!(idf(0, 10, LogBase::Natural), Err(VectorizeError::Domain { .. })));

    let docs: Vec<Vec<String>> =
        (0..10).map(|i| if i == 0 { vec!["dolar".to_owned()] } else { vec!["x".to_owned()] }).collect();
    let vocab = Vocabulary::from_partial(partial(&docs)).unwrap();
    let v = tfidf_vector(&count_tokens(&["dolar"]), &vocab, LogBase::Natural);
    assert!((v.entries()[0].1 - 0.933617).abs() < 1e-6);
}

#[test]
fn hand_counted_document_frequencies() {
    let docs = [vec!["a".to_owned(), "b".to_owned()], vec!["b".to_owned(), "c".to_owned()]];
    let vocab = Vocabulary::from_partial(partial(&docs)).unwrap();
    let got: Vec<(&str, u32, u64)> = vocab.iter().collect();
    assert_eq!(got, [("a", 0, 1), ("b", 1, 2), ("c", 2, 1)]);
    assert_eq!(vocab.total_docs(), 2);
}

#[test]
fn base_change_scales_weights() {
    let docs: Vec<Vec<String>> =
        ["a b", "b c", "c d a", "e"].iter().map(|s| s.split(' ').map(str::to_owned).collect()).collect();
    let vocab = Vocabulary::from_partial(partial(&docs)).unwrap();
    let counts = count_tokens(&["a", "a", "c", "e"]);
    let e = tfidf_vector(&counts, &vocab, LogBase::Natural);
    let two = tfidf_vector(&counts, &vocab, LogBase::new(2.0).unwrap());
    let k = 1.0 / std::f64::consts::LN_2.powi(2);
    for ((i, a), (j, b)) in e.entries().iter().zip(two.entries()) {
        assert_eq!(i, j);
        assert!((a * k - b).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn merge_is_a_commutative_monoid(a in corpus(), b in corpus(), c in corpus()) {
        let (pa, pb, pc) = (partial(&a), partial(&b), partial(&c));
        let left = pa.clone().merge(pb.clone()).merge(pc.clone());
        let right = pa.clone().merge(pb.clone().merge(pc.clone()));
        prop_assert_eq!(&left, &right);
        prop_assert_eq!(pa.clone().merge(pb.clone()), pb.clone().merge(pa.clone()));
        prop_assert_eq!(pa.clone().merge(DocFreqPartial::default()), pa.clone());
        let all: Vec<Vec<String>> = a.iter().chain(&b).chain(&c).cloned().collect();
        prop_assert_eq!(left, partial(&all));
    }

    #[test]
    fn vocabulary_ignores_sharding(docs in corpus(), cuts in proptest::collection::vec(0usize..8, 0..4)) {
        let documents: Vec<Document> = docs.iter().map(|d| doc(d)).collect();
        let mut bounds: Vec<usize> = cuts.iter().map(|&c| c.min(documents.len())).collect();
        bounds.sort_unstable();
        let mut shards = Vec::new();
        let mut start = 0;
        for b in bounds.into_iter().chain([documents.len()]) {
            shards.push(documents[start..b].to_vec());
            start = b;
        }
        let whole = build_vocabulary(std::slice::from_ref(&documents));
        prop_assert_eq!(&build_vocabulary(&shards), &whole);
        match whole {
            Err(e) => prop_assert_eq!(e, VectorizeError::EmptyCorpus),
            Ok(v) => {
                prop_assert!(v.total_docs() >= 1);
                let mut last: Option<String> = None;
                for (i, (term, idx, df)) in v.iter().enumerate() {
                    prop_assert_eq!(idx as usize, i);
                    prop_assert!(df >= 1 && df <= v.total_docs());
                    prop_assert!(last.as_deref().is_none_or(|l| l < term));
                    last = Some(term.to_owned());
                }
            }
        }
    }

    #[test]
    fn weights_are_positive(docs in corpus(), query in proptest::collection::vec("[a-f]{1,2}", 0..10)) {
        prop_assume!(!docs.is_empty());
        let vocab = Vocabulary::from_partial(partial(&docs)).unwrap();
        let v = tfidf_vector(&count_tokens(&query), &vocab, LogBase::Natural);
        for &(i, w) in v.entries() {
            prop_assert!(w > 0.0);
            prop_assert!(vocab.df(i).unwrap() < vocab.total_docs());
            prop_assert!(query.iter().any(|q| Some(q.as_str()) == vocab.term(i)));
        }
    }

    #[test]
    fn weight_is_monotone_in_tf_and_df(tf in 1usize..50, df in 1u64..50, extra in 1u64..50) {
        let total = df + extra;
        // Each term in the corpus reaches exactly its intended df.
        let w = |tf: usize, df: u64| {
            let docs: Vec<Vec<String>> = (0..total)
                .map(|i| if i < df { vec!["t".to_owned()] } else { vec![] })
                .collect();
            let vocab = Vocabulary::from_partial(partial(&docs)).unwrap();
            let q = vec!["t"; tf];
            tfidf_vector(&count_tokens(&q), &vocab, LogBase::Natural).get(0).unwrap_or(0.0)
        };
        prop_assert!(w(tf + 1, df) > w(tf, df));
        if df < total {
            prop_assert!(w(tf, df + 1) < w(tf, df));
        }
    }

    #[test]
    fn matches_dense_oracle_on_tiny_instances(
        docs in proptest::collection::vec(proptest::collection::vec("[a-j]", 0..6), 1..=5),
        query in proptest::collection::vec("[a-j]", 0..8),
    ) {
        let vocab = Vocabulary::from_partial(partial(&docs)).unwrap();
        let sparse = tfidf_vector(&count_tokens(&query), &vocab, LogBase::Natural);
        let dense = common::dense_tfidf(&docs, &query);
        for (i, (term, w)) in dense.iter().enumerate() {
            prop_assert_eq!(vocab.term(i as u32), Some(term.as_str()));
            let got = sparse.get(i as u32).unwrap_or(0.0);
            prop_assert!((got - w).abs() <= 1e-12);
        }
    }
}
