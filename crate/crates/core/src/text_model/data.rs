//! Labeled-text files: one record per line, class code, tab, text.

use std::path::Path;

use super::train::LabeledSequence;
use super::vocab::Vocabulary;
use crate::{Error, Result, SentimentClass};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledText {
    pub label: SentimentClass,
    pub text: String,
}

pub fn parse_labeled_text(body: &str) -> Result<Vec<LabeledText>> {
    let mut out = Vec::new();
    for (n, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |why: &str| Error::InvalidArgument(format!("line {}: {why}", n + 1));
        let (label, text) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
        let code: u8 = label
            .trim()
            .parse()
            .map_err(|_| bad("label is not an integer"))?;
        let label = SentimentClass::try_from(code).map_err(|_| bad("label out of range"))?;
        out.push(LabeledText {
            label,
            text: text.to_string(),
        });
    }
    Ok(out)
}

pub fn read_labeled_text(path: &Path) -> Result<Vec<LabeledText>> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labeled_text(&body).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Tabs and newlines inside the text are written as spaces.
pub fn write_labeled_text(path: &Path, records: &[LabeledText]) -> Result<()> {
    let mut body = String::new();
    for r in records {
        let text: String = r
            .text
            .chars()
            .map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c })
            .collect();
        body.push_str(&format!("{}\t{}\n", r.label.code(), text));
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn encode_all(records: &[LabeledText], vocab: &Vocabulary, max_len: usize) -> Vec<LabeledSequence> {
    records
        .iter()
        .map(|r| LabeledSequence {
            tokens: vocab.encode(&r.text, max_len),
            label: r.label,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_roundtrip() {
        let recs = parse_labeled_text("3\tgreat day\n\n4\tso sad\tagain\n").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].label, SentimentClass::Negative);
        assert_eq!(recs[1].text, "so sad\tagain");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        write_labeled_text(&path, &recs).unwrap();
        let back = read_labeled_text(&path).unwrap();
        assert_eq!(back[0], recs[0]);
        assert_eq!(back[1].text, "so sad again");
    }

    #[test]
    fn malformed_lines() {
        assert!(parse_labeled_text("no tab here").is_err());
        assert!(parse_labeled_text("x\ttext").is_err());
        assert!(parse_labeled_text("9\ttext").is_err());
    }
}
