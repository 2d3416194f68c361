//! `key = value` config files: one pair per line, `#` starts a comment line.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KvError {
    #[error("line {0}: expected key = value")]
    MissingEquals(usize),
    #[error("line {0}: empty key")]
    EmptyKey(usize),
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
}

/// Pairs in file order, keys and values trimmed.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, KvError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(KvError::MissingEquals(line_no))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(KvError::EmptyKey(line_no));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(KvError::Duplicate { line: line_no, key: k.to_owned() });
        }
        out.push((k.to_owned(), v.to_owned()));
    }
    Ok(out)
}
