mod common;

use std::cell::Cell;
use std::collections::HashSet;
use std::io;
use std::path::Path;

use newsclass::corpus::{
    category_word, load_bundle, load_item_files, pack, parse_item, serialize_item, synthesize, unpack, write_bundle,
    ByteSource, CorpusBundle, CorpusError, Document, FsSource, SynthSpec,
};

/// Reads from the real file system and counts how often it was asked.
struct CountingSource {
    opens: Cell<usize>,
}

impl ByteSource for CountingSource {
    fn read_all(&self, path: &Path) -> io::Result<Vec<u8>> {
        self.opens.set(self.opens.get() + 1);
        FsSource.read_all(path)
    }
}

#[test]
fn bundle_needs_one_open_where_items_need_one_each() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for i in 0..1000 {
        let doc = Document {
            label: Some(if i % 2 == 0 { "ekonomi" } else { "spor" }.into()),
            text: format!("haber {i}"),
            ..Document::default()
        };
        let path = dir.path().join(format!("{i:04}.xml"));
        std::fs::write(&path, serialize_item(&doc)).unwrap();
        paths.push(path);
    }
    let items = CountingSource { opens: Cell::new(0) };
    let docs = load_item_files(&items, &paths).unwrap();
    assert_eq!(items.opens.get(), 1000);
    assert_eq!(docs[7].id, "0007");

    let bundle_path = dir.path().join("all.bndl");
    write_bundle(&bundle_path, &pack(&docs)).unwrap();
    let bundled = CountingSource { opens: Cell::new(0) };
    assert_eq!(load_bundle(&bundled, &bundle_path).unwrap(), docs);
    assert_eq!(bundled.opens.get(), 1);
}

#[test]
fn bundle_examples() {
    assert_eq!(pack(&[]).declared_count().unwrap(), 0);
    let d1 = Document::new("1", Some("ekonomi"), "dolar yükseldi");
    let d2 = Document::new("2", None, "maç berabere");
    let bundle = pack(&[d1.clone(), d2.clone()]);
    assert_eq!(bundle.declared_count().unwrap(), 2);
    assert_eq!(unpack(&bundle).unwrap(), [d1.clone(), d2]);

    let mut bad = pack(std::slice::from_ref(&d1)).into_bytes();
    bad[0] = b'X';
    assert!(matches!(unpack(&CorpusBundle::from_bytes(bad)), Err(CorpusError::BadMagic)));

    // Claim three items, carry two.
    let mut short = pack(&[d1.clone(), d1.clone()]).into_bytes();
    short[9..17].copy_from_slice(&3u64.to_le_bytes());
    assert!(matches!(
        unpack(&CorpusBundle::from_bytes(short)),
        Err(CorpusError::TruncatedBundle { declared: 3, decoded: 2 })
    ));
}

#[test]
fn serialized_items_parse_back() {
    let doc = Document {
        label: Some("ekonomi".into()),
        date: Some("2014-01-02:10:00".into()),
        text: "Dolar & Euro <yükseldi> \"bugün\"".into(),
        ..Document::default()
    };
    assert_eq!(parse_item(serialize_item(&doc).as_bytes()).unwrap(), doc);
}

fn spec(overlap: f64, seed: u64) -> SynthSpec {
    SynthSpec {
        categories: vec!["ekonomi".into(), "spor".into()],
        docs_per_category: 10,
        vocab_per_category: 50,
        shared_vocab: 20,
        min_words: 20,
        max_words: 40,
        overlap,
        seed,
    }
}

#[test]
fn synthesis_is_a_function_of_its_spec() {
    assert_eq!(synthesize(&spec(0.3, 7)).unwrap(), synthesize(&spec(0.3, 7)).unwrap());
    assert_ne!(synthesize(&spec(0.3, 7)).unwrap(), synthesize(&spec(0.3, 8)).unwrap());
    let docs = synthesize(&spec(0.3, 7)).unwrap();
    assert_eq!(docs.len(), 20);
    assert!(docs.iter().all(|d| (20..=40).contains(&d.text.split(' ').count())));
}

#[test]
fn pinned_synthetic_output() {
    // Any change to the generator recipe shows up here.
    let docs = synthesize(&spec(0.5, 1)).unwrap();
    let first: Vec<&str> = docs[0].text.split(' ').take(3).collect();
    assert_eq!(first, ["szf", "szn", "qazb"]);
    let fnv1a = docs
        .iter()
        .flat_map(|d| d.text.bytes())
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    assert_eq!(fnv1a, 9_258_796_766_150_247_210);
}

#[test]
fn no_overlap_means_exclusive_words() {
    let docs = synthesize(&spec(0.0, 3)).unwrap();
    let own: Vec<HashSet<String>> = (0..2).map(|c| (0..50).map(|k| category_word(c, k)).collect()).collect();
    for d in &docs {
        let c = if d.label.as_deref() == Some("ekonomi") { 0 } else { 1 };
        assert!(d.text.split(' ').all(|w| own[c].contains(w) && !own[1 - c].contains(w)));
    }
}

#[test]
fn full_overlap_uses_shared_words_only() {
    let docs = synthesize(&spec(1.0, 3)).unwrap();
    let shared: HashSet<String> = (0..20).map(newsclass::corpus::shared_word).collect();
    assert!(docs.iter().all(|d| d.text.split(' ').all(|w| shared.contains(w))));
}

#[test]
fn invalid_specs_are_rejected() {
    for bad in [
        SynthSpec { overlap: 1.5, ..spec(0.0, 0) },
        SynthSpec { docs_per_category: 0, ..spec(0.0, 0) },
        SynthSpec { categories: vec!["tek".into()], ..spec(0.0, 0) },
    ] {
        assert!(matches!(synthesize(&bad), Err(CorpusError::InvalidSpec(_))));
    }
}
