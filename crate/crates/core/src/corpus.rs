//! News items: the XML item format, the concatenated bundle format and a
//! seeded synthetic corpus generator.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::kv;
use crate::rng::Sampler;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed item XML: {0}")]
    MalformedXml(String),
    #[error("item has no text")]
    EmptyText,
    #[error("not a corpus bundle (bad magic)")]
    BadMagic,
    #[error("unsupported bundle version {0}")]
    UnsupportedVersion(u8),
    #[error("bundle header is truncated")]
    TruncatedHeader,
    #[error("bundle declares {declared} items but only {decoded} could be decoded")]
    TruncatedBundle { declared: u64, decoded: u64 },
    #[error("bundle has {extra} bytes after its {declared} declared items")]
    TrailingData { declared: u64, extra: usize },
    #[error("record {index}: {reason}")]
    MalformedRecord { index: u64, reason: String },
    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// One news item.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub label: Option<String>,
    pub date: Option<String>,
    pub text: String,
    /// Empty until preprocessing.
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, label: Option<&str>, text: impl Into<String>) -> Self {
        Self { id: id.into(), label: label.map(str::to_owned), date: None, text: text.into(), tokens: Vec::new() }
    }
}

// ---------------------------------------------------------------------------
// Item XML
// ---------------------------------------------------------------------------

/// Parses a single `<item>` element. The returned document has an empty id;
/// callers assign one (usually from the file name).
pub fn parse_item(xml: &[u8]) -> Result<Document> {
    let mut items = parse_items(xml)?;
    match items.len() {
        1 => Ok(items.pop().unwrap()),
        0 => Err(CorpusError::MalformedXml("no <item> element".into())),
        n => Err(CorpusError::MalformedXml(format!("expected one <item>, found {n}"))),
    }
}

/// Parses a file holding one or more consecutive `<item>` elements, with an
/// optional leading XML declaration.
pub fn parse_items(xml: &[u8]) -> Result<Vec<Document>> {
    let src = std::str::from_utf8(xml).map_err(|e| CorpusError::MalformedXml(format!("invalid UTF-8: {e}")))?;
    let mut p = XmlCursor { src, pos: 0 };
    p.skip_ws();
    if p.rest().starts_with("<?xml") {
        let end = p.rest().find("?>").ok_or_else(|| p.error("unterminated XML declaration"))?;
        p.pos += end + 2;
    }
    let mut out = Vec::new();
    loop {
        p.skip_ws();
        if p.at_end() {
            break;
        }
        out.push(p.item()?);
    }
    if out.is_empty() {
        return Err(CorpusError::MalformedXml("no <item> element".into()));
    }
    Ok(out)
}

/// Renders a document in item XML. Tokens and id are not part of the format.
pub fn serialize_item(doc: &Document) -> String {
    let mut s = String::from("<item>\n");
    if let Some(date) = &doc.date {
        let _ = writeln!(s, "  <date>{}</date>", escape(date));
    }
    if let Some(label) = &doc.label {
        let _ = writeln!(s, "  <category>{}</category>", escape(label));
    }
    let _ = writeln!(s, "  <text>{}</text>", escape(&doc.text));
    s.push_str("</item>\n");
    s
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape(raw: &str) -> Result<String> {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let semi = rest.find(';').ok_or_else(|| CorpusError::MalformedXml("unterminated entity".into()))?;
        let c = match &rest[1..semi] {
            "lt" => '<',
            "gt" => '>',
            "amp" => '&',
            "quot" => '"',
            "apos" => '\'',
            other => {
                return Err(CorpusError::MalformedXml(format!("unknown entity &{other};")));
            }
        };
        out.push(c);
        rest = &rest[semi + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

struct XmlCursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> XmlCursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn error(&self, what: &str) -> CorpusError {
        CorpusError::MalformedXml(format!("{what} at byte {}", self.pos))
    }

    /// Reads `<name>` or `<name/>`; returns the name and whether it self-closed.
    fn open_tag(&mut self) -> Result<(&'a str, bool)> {
        let rest = self.rest();
        if !rest.starts_with('<') || rest.starts_with("</") {
            return Err(self.error("expected an opening tag"));
        }
        let close = rest.find('>').ok_or_else(|| self.error("unterminated tag"))?;
        let inner = &rest[1..close];
        let (inner, self_closing) = match inner.strip_suffix('/') {
            Some(i) => (i, true),
            None => (inner, false),
        };
        let name = inner.trim_end();
        if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == '<') {
            return Err(self.error("tags may not carry attributes"));
        }
        self.pos += close + 1;
        Ok((name, self_closing))
    }

    fn close_tag(&mut self, name: &str) -> Result<()> {
        let rest = self.rest();
        let expected = format!("</{name}");
        if !rest.starts_with(&expected) {
            return Err(self.error(&format!("expected </{name}>")));
        }
        let after = &rest[expected.len()..];
        let trimmed = after.trim_start();
        if !trimmed.starts_with('>') {
            return Err(self.error(&format!("expected </{name}>")));
        }
        self.pos += expected.len() + (after.len() - trimmed.len()) + 1;
        Ok(())
    }

    fn item(&mut self) -> Result<Document> {
        let (name, self_closing) = self.open_tag()?;
        if name != "item" {
            return Err(self.error(&format!("unexpected <{name}>, expected <item>")));
        }
        if self_closing {
            return Err(CorpusError::EmptyText);
        }
        let mut date = None;
        let mut label = None;
        let mut text: Option<String> = None;
        loop {
            self.skip_ws();
            if self.rest().starts_with("</") {
                self.close_tag("item")?;
                break;
            }
            if self.at_end() {
                return Err(self.error("unterminated <item>"));
            }
            let (child, self_closing) = self.open_tag()?;
            let value = if self_closing {
                String::new()
            } else {
                let end = self.rest().find('<').ok_or_else(|| self.error(&format!("unterminated <{child}>")))?;
                let raw = &self.rest()[..end];
                self.pos += end;
                self.close_tag(child)?;
                unescape(raw)?.trim().to_owned()
            };
            let slot = match child {
                "date" => &mut date,
                "category" => &mut label,
                "text" => &mut text,
                other => return Err(self.error(&format!("unknown element <{other}>"))),
            };
            if slot.is_some() {
                return Err(self.error(&format!("duplicate <{child}>")));
            }
            *slot = Some(value);
        }
        let text = text.filter(|t| !t.is_empty()).ok_or(CorpusError::EmptyText)?;
        Ok(Document {
            id: String::new(),
            label: label.filter(|l| !l.is_empty()),
            date: date.filter(|d| !d.is_empty()),
            text,
            tokens: Vec::new(),
        })
    }
}

// ---------------------------------------------------------------------------
// Bundle
// ---------------------------------------------------------------------------

pub const BUNDLE_MAGIC: &[u8; 8] = b"NWSBNDL1";
pub const BUNDLE_VERSION: u8 = 1;
const HEADER_LEN: usize = 8 + 1 + 8;

/// Many documents concatenated into one length-prefixed file.
///
/// Layout: magic `NWSBNDL1`, version byte, item count as u64 LE, then per item
/// a u32 LE byte length followed by the UTF-8 record. A record is a run of
/// `tag:len:value` fields where `len` is the decimal byte length of `value`.
/// Tags, in order: `id`, optional `label`, optional `date`, `text`, then zero
/// or more `tok`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusBundle {
    bytes: Vec<u8>,
}

impl CorpusBundle {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self { bytes }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    /// Validates magic and version, returning the declared item count.
    pub fn declared_count(&self) -> Result<u64> {
        let b = &self.bytes;
        if b.len() < BUNDLE_MAGIC.len() || &b[..8] != BUNDLE_MAGIC {
            return Err(CorpusError::BadMagic);
        }
        if b.len() < HEADER_LEN {
            return Err(CorpusError::TruncatedHeader);
        }
        if b[8] != BUNDLE_VERSION {
            return Err(CorpusError::UnsupportedVersion(b[8]));
        }
        Ok(u64::from_le_bytes(b[9..17].try_into().unwrap()))
    }
}

pub fn is_bundle(bytes: &[u8]) -> bool {
    bytes.starts_with(BUNDLE_MAGIC)
}

pub fn pack(documents: &[Document]) -> CorpusBundle {
    let mut bytes = Vec::with_capacity(HEADER_LEN + documents.len() * 64);
    bytes.extend_from_slice(BUNDLE_MAGIC);
    bytes.push(BUNDLE_VERSION);
    bytes.extend_from_slice(&(documents.len() as u64).to_le_bytes());
    let mut record = String::new();
    for doc in documents {
        record.clear();
        encode_record(doc, &mut record);
        bytes.extend_from_slice(&(record.len() as u32).to_le_bytes());
        bytes.extend_from_slice(record.as_bytes());
    }
    CorpusBundle { bytes }
}

pub fn unpack(bundle: &CorpusBundle) -> Result<Vec<Document>> {
    let declared = bundle.declared_count()?;
    let mut rest = &bundle.bytes[HEADER_LEN..];
    // Each record needs at least its 4-byte length, which bounds a sane capacity.
    let mut docs = Vec::with_capacity((declared as usize).min(rest.len() / 4));
    for index in 0..declared {
        let truncated = CorpusError::TruncatedBundle { declared, decoded: index };
        if rest.len() < 4 {
            return Err(truncated);
        }
        let len = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
        if rest.len() - 4 < len {
            return Err(truncated);
        }
        docs.push(decode_record(&rest[4..4 + len], index)?);
        rest = &rest[4 + len..];
    }
    if !rest.is_empty() {
        return Err(CorpusError::TrailingData { declared, extra: rest.len() });
    }
    Ok(docs)
}

fn push_field(out: &mut String, tag: &str, value: &str) {
    let _ = write!(out, "{tag}:{}:", value.len());
    out.push_str(value);
}

fn encode_record(doc: &Document, out: &mut String) {
    push_field(out, "id", &doc.id);
    if let Some(label) = &doc.label {
        push_field(out, "label", label);
    }
    if let Some(date) = &doc.date {
        push_field(out, "date", date);
    }
    push_field(out, "text", &doc.text);
    for tok in &doc.tokens {
        push_field(out, "tok", tok);
    }
}

fn decode_record(raw: &[u8], index: u64) -> Result<Document> {
    let bad = |reason: &str| CorpusError::MalformedRecord { index, reason: reason.to_owned() };
    let src = std::str::from_utf8(raw).map_err(|_| bad("record is not UTF-8"))?;
    let mut fields = Vec::new();
    let mut rest = src;
    while !rest.is_empty() {
        let colon = rest.find(':').ok_or_else(|| bad("missing field tag"))?;
        let tag = &rest[..colon];
        rest = &rest[colon + 1..];
        let colon = rest.find(':').ok_or_else(|| bad("missing field length"))?;
        let len: usize = rest[..colon].parse().map_err(|_| bad("field length is not a number"))?;
        rest = &rest[colon + 1..];
        if len > rest.len() || !rest.is_char_boundary(len) {
            return Err(bad("field length overruns the record"));
        }
        fields.push((tag, &rest[..len]));
        rest = &rest[len..];
    }

    let mut it = fields.into_iter().peekable();
    let mut doc = Document::default();
    match it.next() {
        Some(("id", v)) => doc.id = v.to_owned(),
        _ => return Err(bad("record must start with an id field")),
    }
    if let Some(&("label", v)) = it.peek() {
        doc.label = Some(v.to_owned());
        it.next();
    }
    if let Some(&("date", v)) = it.peek() {
        doc.date = Some(v.to_owned());
        it.next();
    }
    match it.next() {
        Some(("text", v)) => doc.text = v.to_owned(),
        _ => return Err(bad("missing text field")),
    }
    for (tag, v) in it {
        if tag != "tok" {
            return Err(bad(&format!("unexpected field {tag:?}")));
        }
        doc.tokens.push(v.to_owned());
    }
    Ok(doc)
}

// ---------------------------------------------------------------------------
// File access
// ---------------------------------------------------------------------------

/// Where raw bytes come from. Every call is one file open.
pub trait ByteSource {
    fn read_all(&self, path: &Path) -> io::Result<Vec<u8>>;
}

pub struct FsSource;

impl ByteSource for FsSource {
    fn read_all(&self, path: &Path) -> io::Result<Vec<u8>> {
        std::fs::read(path)
    }
}

/// Reads item files one by one. Ids come from the file stem, suffixed with
/// `#k` when a file carries more than one item.
pub fn load_item_files<S: ByteSource, P: AsRef<Path>>(source: &S, paths: &[P]) -> Result<Vec<Document>> {
    let mut docs = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let items = parse_items(&source.read_all(path)?)?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let single = items.len() == 1;
        for (k, mut doc) in items.into_iter().enumerate() {
            doc.id = if single { stem.clone() } else { format!("{stem}#{k}") };
            docs.push(doc);
        }
    }
    Ok(docs)
}

pub fn load_bundle<S: ByteSource>(source: &S, path: &Path) -> Result<Vec<Document>> {
    unpack(&CorpusBundle::from_bytes(source.read_all(path)?))
}

pub fn write_bundle(path: &Path, bundle: &CorpusBundle) -> Result<()> {
    std::fs::write(path, bundle.as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic corpora
// ---------------------------------------------------------------------------

/// Parameters of a synthetic labeled corpus.
///
/// Each category owns `vocab_per_category` exclusive words; all categories
/// share `shared_vocab` more. Every word of a document comes from the shared
/// pool with probability `overlap` and from the document's own pool otherwise,
/// uniformly within the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub categories: Vec<String>,
    pub docs_per_category: usize,
    pub vocab_per_category: usize,
    pub shared_vocab: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub overlap: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(CorpusError::InvalidSpec(m));
        if self.categories.len() < 2 {
            return invalid("at least 2 categories are required".into());
        }
        for (i, c) in self.categories.iter().enumerate() {
            if c.is_empty() || c.trim() != c {
                return invalid(format!("category name {c:?} is empty or padded"));
            }
            if self.categories[..i].contains(c) {
                return invalid(format!("duplicate category {c:?}"));
            }
        }
        for (name, v) in [
            ("docs_per_category", self.docs_per_category),
            ("vocab_per_category", self.vocab_per_category),
            ("shared_vocab", self.shared_vocab),
            ("min_words", self.min_words),
            ("max_words", self.max_words),
        ] {
            if v == 0 {
                return invalid(format!("{name} must be at least 1"));
            }
        }
        if self.min_words > self.max_words {
            return invalid("min_words exceeds max_words".into());
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return invalid(format!("overlap {} outside [0, 1]", self.overlap));
        }
        Ok(())
    }

    /// Reads a `key = value` spec file. `categories` is comma-separated;
    /// `words_per_doc` accepts `lo..hi` (inclusive) or a single number.
    pub fn from_kv(text: &str) -> Result<Self> {
        let map = kv::parse(text).map_err(|e| CorpusError::InvalidSpec(e.to_string()))?;
        let mut spec = SynthSpec::default();
        for (key, value) in &map {
            let num = |v: &str| -> Result<usize> {
                v.parse().map_err(|_| CorpusError::InvalidSpec(format!("{key}: not a count: {v:?}")))
            };
            match key.as_str() {
                "categories" => spec.categories = value.split(',').map(|c| c.trim().to_owned()).collect(),
                "docs_per_category" => spec.docs_per_category = num(value)?,
                "vocab_per_category" => spec.vocab_per_category = num(value)?,
                "shared_vocab" => spec.shared_vocab = num(value)?,
                "words_per_doc" => {
                    let (lo, hi) = match value.split_once("..") {
                        Some((lo, hi)) => (num(lo.trim())?, num(hi.trim())?),
                        None => (num(value)?, num(value)?),
                    };
                    spec.min_words = lo;
                    spec.max_words = hi;
                }
                "overlap" => {
                    spec.overlap = value
                        .parse()
                        .map_err(|_| CorpusError::InvalidSpec(format!("overlap: not a number: {value:?}")))?
                }
                "seed" => {
                    spec.seed = value
                        .parse()
                        .map_err(|_| CorpusError::InvalidSpec(format!("seed: not an integer: {value:?}")))?
                }
                other => return Err(CorpusError::InvalidSpec(format!("unknown key {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            categories: vec!["economy".into(), "sport".into()],
            docs_per_category: 100,
            vocab_per_category: 2000,
            shared_vocab: 500,
            min_words: 20,
            max_words: 60,
            overlap: 0.3,
            seed: 0,
        }
    }
}

/// Bijective base-25 spelling over `a..=y`; `z` never appears, so it can
/// serve as a separator.
fn spell(mut n: usize, out: &mut String) {
    let start = out.len();
    loop {
        out.push((b'a' + (n % 25) as u8) as char);
        n /= 25;
        if n == 0 {
            break;
        }
        n -= 1;
    }
    // Digits were pushed least-significant first.
    let tail: String = out[start..].chars().rev().collect();
    out.truncate(start);
    out.push_str(&tail);
}

/// Word `k` of category `category`'s exclusive pool.
pub fn category_word(category: usize, k: usize) -> String {
    let mut w = String::from("q");
    spell(category, &mut w);
    w.push('z');
    spell(k, &mut w);
    w
}

/// Word `k` of the shared pool.
pub fn shared_word(k: usize) -> String {
    let mut w = String::from("sz");
    spell(k, &mut w);
    w
}

/// Generates a labeled corpus, category by category, fully determined by
/// `spec` (see [`crate::rng::ALGORITHM_ID`] for the generator).
pub fn synthesize(spec: &SynthSpec) -> Result<Vec<Document>> {
    spec.validate()?;
    let mut rng = Sampler::new(spec.seed);
    let mut docs = Vec::with_capacity(spec.categories.len() * spec.docs_per_category);
    for (ci, category) in spec.categories.iter().enumerate() {
        for d in 0..spec.docs_per_category {
            let n = rng.in_range(spec.min_words as u64, spec.max_words as u64) as usize;
            let mut text = String::with_capacity(n * 8);
            for w in 0..n {
                if w > 0 {
                    text.push(' ');
                }
                let word = if rng.unit() < spec.overlap {
                    shared_word(rng.below(spec.shared_vocab as u64) as usize)
                } else {
                    category_word(ci, rng.below(spec.vocab_per_category as u64) as usize)
                };
                text.push_str(&word);
            }
            docs.push(Document {
                id: format!("{category}-{d:06}"),
                label: Some(category.clone()),
                date: None,
                text,
                tokens: Vec::new(),
            });
        }
    }
    Ok(docs)
}
