use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PostRecord;
use crate::media;

/// Counts from one cleaning pass.
/// `output_count = input_count - removed_duplicates - removed_incomplete - removed_corrupted`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub input_count: usize,
    pub removed_duplicates: usize,
    pub removed_incomplete: usize,
    pub removed_corrupted: usize,
    pub output_count: usize,
}

impl CleanReport {
    pub fn is_consistent(&self) -> bool {
        self.input_count
            == self.output_count
                + self.removed_duplicates
                + self.removed_incomplete
                + self.removed_corrupted
    }
}

/// Why a record was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Removal {
    Incomplete,
    Corrupted,
    Duplicate,
}

/// Per-record verdict before deduplication.
pub fn screen(post: &PostRecord, media_root: &Path) -> Option<Removal> {
    if !post.is_complete() {
        return Some(Removal::Incomplete);
    }
    if post.has_corrupt_fields() || media_is_corrupt(post, media_root) {
        return Some(Removal::Corrupted);
    }
    None
}

/// The referenced media file exists but does not decode. A missing file is
/// not corruption: media may simply not have been downloaded.
fn media_is_corrupt(post: &PostRecord, media_root: &Path) -> bool {
    let (Some(rel), Some(kind)) = (&post.media_path, post.media_kind) else {
        return false;
    };
    let path = media_root.join(rel);
    if !path.is_file() {
        return false;
    }
    match media::load_media(&path, kind) {
        Ok(_) => false,
        Err(e) => {
            log::debug!("{}: {e}", post.post_id);
            true
        }
    }
}

/// Drops incomplete and corrupted records, then collapses duplicate
/// `post_id`s to the earliest `created_at` (ties: earliest in input).
/// Survivors keep their input order. Never imputes.
pub fn clean(posts: &[PostRecord], media_root: &Path) -> (Vec<PostRecord>, CleanReport) {
    let mut report = CleanReport {
        input_count: posts.len(),
        ..CleanReport::default()
    };

    let mut candidates = Vec::with_capacity(posts.len());
    for (i, p) in posts.iter().enumerate() {
        match screen(p, media_root) {
            Some(Removal::Incomplete) => report.removed_incomplete += 1,
            Some(_) => report.removed_corrupted += 1,
            None => candidates.push(i),
        }
    }

    // post_id -> index of the current keeper
    let mut keeper: HashMap<&str, usize> = HashMap::new();
    for &i in &candidates {
        let p = &posts[i];
        keeper
            .entry(p.post_id.as_str())
            .and_modify(|k| {
                if p.created_at() < posts[*k].created_at() {
                    *k = i;
                }
            })
            .or_insert(i);
    }

    let mut by_shortcode: HashMap<&str, &str> = HashMap::new();
    let mut out = Vec::with_capacity(keeper.len());
    for &i in &candidates {
        let p = &posts[i];
        if keeper[p.post_id.as_str()] != i {
            report.removed_duplicates += 1;
            continue;
        }
        if let Some(code) = p.shortcode.as_deref() {
            if let Some(other) = by_shortcode.insert(code, &p.post_id) {
                log::warn!(
                    "shortcode {code} shared by posts {other} and {}; keeping both",
                    p.post_id
                );
            }
        }
        out.push(p.clone());
    }
    report.output_count = out.len();
    (out, report)
}
