//! Reference implementations used by the integration tests. Each one works
//! from raw counts and shares no code with the library paths it checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;

use newsclass::corpus::{synthesize, Document, SynthSpec};

/// Dense TF-IDF: every term seen in `docs`, sorted, with
/// `ln(tf + 0.5) * ln(D / df)` for the terms of `query` (0 elsewhere).
pub fn dense_tfidf(docs: &[Vec<String>], query: &[String]) -> Vec<(String, f64)> {
    let mut df: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in docs {
        let distinct: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    let total = docs.len() as f64;
    df.into_iter()
        .map(|(term, df)| {
            let tf = query.iter().filter(|q| q.as_str() == term).count();
            let w = if tf == 0 { 0.0 } else { (tf as f64 + 0.5).ln() * (total / df as f64).ln() };
            (term.to_owned(), w)
        })
        .collect()
}

/// Unnormalized posteriors `P(c) * prod_t P(t|c)^x_t` in exact arithmetic,
/// with Laplace smoothing `alpha = alpha_num / alpha_den`.
///
/// `train` holds `(class, counts)` pairs over a vocabulary of
/// `counts.len()` terms; every class index below `classes` must occur.
pub fn nb_joint(
    train: &[(usize, Vec<u64>)],
    classes: usize,
    alpha_num: i64,
    alpha_den: i64,
    query: &[u64],
) -> Vec<BigRational> {
    let v = query.len();
    let alpha = BigRational::new(BigInt::from(alpha_num), BigInt::from(alpha_den));
    let big = |n: u64| BigRational::from_integer(BigInt::from(n));
    let n_docs = big(train.len() as u64);
    (0..classes)
        .map(|c| {
            let mut f_tc = vec![0u64; v];
            let mut n_c = 0u64;
            for (label, counts) in train {
                if *label == c {
                    n_c += 1;
                    for (t, x) in counts.iter().enumerate() {
                        f_tc[t] += x;
                    }
                }
            }
            let f_c: u64 = f_tc.iter().sum();
            let denom = alpha.clone() * big(v as u64) + big(f_c);
            let mut p = big(n_c) / n_docs.clone();
            for t in 0..v {
                let p_tc = (alpha.clone() + big(f_tc[t])) / denom.clone();
                for _ in 0..query[t] {
                    p *= p_tc.clone();
                }
            }
            p
        })
        .collect()
}

/// Index of the largest value; exact ties go to the smallest `names` entry.
pub fn exact_argmax(values: &[BigRational], names: &[&str]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] || (values[i] == values[best] && names[i] < names[best]) {
            best = i;
        }
    }
    best
}

/// `ln(a / b)` for positive rationals, accurate to a few ulps.
pub fn ln_ratio(a: &BigRational, b: &BigRational) -> f64 {
    assert!(!a.is_zero() && !b.is_zero());
    let r = a / b;
    ln_big(r.numer()) - ln_big(r.denom())
}

fn ln_big(n: &BigInt) -> f64 {
    // Keep the top 64 bits; the discarded tail shifts the log by < 2^-63.
    let bits = n.bits();
    if bits <= 64 {
        return n.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top: BigInt = n >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Synthetic corpus with the usual test defaults.
pub fn synth(categories: &[&str], docs_per_category: usize, vocab: usize, overlap: f64, seed: u64) -> Vec<Document> {
    synthesize(&SynthSpec {
        categories: categories.iter().map(|c| c.to_string()).collect(),
        docs_per_category,
        vocab_per_category: vocab,
        shared_vocab: 200,
        min_words: 20,
        max_words: 40,
        overlap,
        seed,
    })
    .unwrap()
}

/// Text that survives trimming unchanged, with markup characters mixed in.
pub fn xml_text() -> impl Strategy<Value = String> {
    prop_oneof!["\\PC{1,40}", "[a-zçğıöşü <>&;'\"\n\t]{1,40}"]
        .prop_map(|s| s.trim().to_owned())
        .prop_filter("non-empty", |s| !s.is_empty())
}

/// An item as it comes back from the XML reader: no id, no tokens.
pub fn xml_document() -> impl Strategy<Value = Document> {
    (proptest::option::of(xml_text()), proptest::option::of(xml_text()), xml_text())
        .prop_map(|(label, date, text)| Document { id: String::new(), label, date, text, tokens: Vec::new() })
}

/// Any document, including fields the XML form does not carry.
pub fn any_document() -> impl Strategy<Value = Document> {
    (
        "\\PC{0,12}",
        proptest::option::of("\\PC{0,12}"),
        proptest::option::of("\\PC{0,12}"),
        "\\PC{0,60}",
        proptest::collection::vec("\\PC{1,8}", 0..6),
    )
        .prop_map(|(id, label, date, text, tokens)| Document { id, label, date, text, tokens })
}
