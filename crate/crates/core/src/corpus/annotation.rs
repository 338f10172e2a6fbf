use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SentimentClass;
use crate::{Error, Result};

/// Dual label for one post from one annotator: the image and the caption are
/// labeled independently with the same taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub post_id: String,
    pub image_class: SentimentClass,
    pub caption_class: SentimentClass,
    pub annotator_id: String,
    /// UTC seconds since the Unix epoch.
    pub labeled_at: i64,
}

/// Reads an append-only annotation file, in file order.
///
/// A missing file is an empty store. Lines that fail to parse are skipped
/// with a warning; the store is written only by [`append_annotation`].
pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Annotation>(&line) {
            Ok(a) => out.push(a),
            Err(e) => log::warn!("{}:{}: skipping annotation: {e}", path.display(), n + 1),
        }
    }
    Ok(out)
}

pub fn append_annotation(path: &Path, annotation: &Annotation) -> Result<()> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut line = serde_json::to_string(annotation)?;
    line.push('\n');
    file.write_all(line.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Writes a whole store, one record per line.
pub fn write_annotations(path: &Path, annotations: &[Annotation]) -> Result<()> {
    let mut buf = String::new();
    for a in annotations {
        buf.push_str(&serde_json::to_string(a)?);
        buf.push('\n');
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Last record per `(post_id, annotator_id)` in store order, sorted by that key.
pub fn effective_annotations(records: &[Annotation]) -> Vec<Annotation> {
    let mut latest: BTreeMap<(&str, &str), &Annotation> = BTreeMap::new();
    for a in records {
        latest.insert((&a.post_id, &a.annotator_id), a);
    }
    latest.into_values().cloned().collect()
}

/// One label per post: the most recent `labeled_at` across annotators, ties
/// going to the greatest `annotator_id`. Independent of input order once
/// per-annotator duplicates are resolved.
pub fn label_per_post(annotations: &[Annotation]) -> BTreeMap<String, Annotation> {
    let mut out: BTreeMap<String, Annotation> = BTreeMap::new();
    for a in effective_annotations(annotations) {
        match out.get(&a.post_id) {
            Some(cur) if (cur.labeled_at, &cur.annotator_id) >= (a.labeled_at, &a.annotator_id) => {}
            _ => {
                out.insert(a.post_id.clone(), a);
            }
        }
    }
    out
}
