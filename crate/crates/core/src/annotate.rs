//! Labeling queue and store behind the annotation API.
//!
//! The append-only annotation file is the source of truth: the service loads
//! it at start-up and appends every accepted label before acknowledging it,
//! so a restart loses nothing. Repeated labels for the same
//! `(post_id, annotator_id)` resolve last-write-wins.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::corpus::{append_annotation, label_per_post, read_annotations};
use crate::media::{encode_png, first_frame_from_bytes};
use crate::{Annotation, MediaKind, PostRecord, Result, SentimentClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiErrorKind {
    NotFound,
    Validation,
    Internal,
}

/// Machine-readable failure: a stable `code` plus a human message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub kind: ApiErrorKind,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn validation(code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            kind: ApiErrorKind::Validation,
            code,
            message: message.into(),
        }
    }

    fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            kind: ApiErrorKind::NotFound,
            code,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError {
            kind: ApiErrorKind::Internal,
            code: "internal",
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub post_id: String,
    pub media_kind: Option<MediaKind>,
    /// Path under which the API serves the post's media, if it has any.
    pub media_url: Option<String>,
    pub final_text: String,
    /// The post's current effective label from any annotator.
    pub existing: Option<Annotation>,
}

/// Body of `POST /annotations`. Every field is optional here so that missing
/// and malformed values produce validation errors rather than decode errors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRequest {
    pub post_id: Option<String>,
    pub image_class: Option<serde_json::Value>,
    pub caption_class: Option<serde_json::Value>,
    pub annotator_id: Option<String>,
    pub labeled_at: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    /// Posts with at least one label.
    pub labeled: usize,
    pub total: usize,
    /// Effective per-post labels by class code.
    pub image_class_counts: BTreeMap<u8, usize>,
    pub caption_class_counts: BTreeMap<u8, usize>,
}

impl Progress {
    /// Counts from an arbitrary record list, restricted to `post_ids`.
    pub fn from_records(records: &[Annotation], post_ids: &HashSet<&str>) -> Progress {
        let mut image: BTreeMap<u8, usize> = SentimentClass::ALL.iter().map(|c| (c.code(), 0)).collect();
        let mut caption = image.clone();
        let mut labeled = 0;
        for a in label_per_post(records).values() {
            if !post_ids.contains(a.post_id.as_str()) {
                continue;
            }
            labeled += 1;
            *image.entry(a.image_class.code()).or_default() += 1;
            *caption.entry(a.caption_class.code()).or_default() += 1;
        }
        Progress {
            labeled,
            total: post_ids.len(),
            image_class_counts: image,
            caption_class_counts: caption,
        }
    }
}

/// Media body and its content type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediaBody {
    pub content_type: &'static str,
    pub bytes: Vec<u8>,
}

pub struct AnnotationService {
    /// Queue order: created_at, then post_id.
    posts: Vec<PostRecord>,
    index: HashMap<String, usize>,
    texts: HashMap<String, String>,
    media_root: PathBuf,
    store: PathBuf,
    records: RwLock<Vec<Annotation>>,
}

impl AnnotationService {
    /// `texts` maps post ids to the enriched text shown to annotators; posts
    /// without an entry show their raw caption.
    pub fn open(
        posts: Vec<PostRecord>,
        texts: HashMap<String, String>,
        media_root: &Path,
        store: &Path,
    ) -> Result<Self> {
        let mut posts = posts;
        posts.sort_by(|a, b| {
            a.created_at()
                .cmp(&b.created_at())
                .then_with(|| a.post_id.cmp(&b.post_id))
        });
        posts.dedup_by(|a, b| a.post_id == b.post_id);
        let index = posts
            .iter()
            .enumerate()
            .map(|(i, p)| (p.post_id.clone(), i))
            .collect();
        let records = read_annotations(store)?;
        Ok(AnnotationService {
            posts,
            index,
            texts,
            media_root: media_root.to_path_buf(),
            store: store.to_path_buf(),
            records: RwLock::new(records),
        })
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Vec<Annotation>> {
        self.records.read().unwrap_or_else(|e| e.into_inner())
    }

    fn task(&self, post: &PostRecord, labels: &BTreeMap<String, Annotation>) -> AnnotationTask {
        AnnotationTask {
            post_id: post.post_id.clone(),
            media_kind: post.media_kind,
            media_url: post
                .media_path
                .as_ref()
                .map(|_| format!("/media/{}", post.post_id)),
            final_text: self
                .texts
                .get(&post.post_id)
                .cloned()
                .or_else(|| post.caption.clone())
                .unwrap_or_default(),
            existing: labels.get(&post.post_id).cloned(),
        }
    }

    /// First post in queue order this annotator has not labeled.
    pub fn next_task(&self, annotator: &str) -> std::result::Result<Option<AnnotationTask>, ApiError> {
        if annotator.trim().is_empty() {
            return Err(ApiError::validation("missing_annotator", "annotator must be non-empty"));
        }
        let records = self.read();
        let done: HashSet<&str> = records
            .iter()
            .filter(|a| a.annotator_id == annotator)
            .map(|a| a.post_id.as_str())
            .collect();
        let labels = label_per_post(&records);
        Ok(self
            .posts
            .iter()
            .find(|p| !done.contains(p.post_id.as_str()))
            .map(|p| self.task(p, &labels)))
    }

    /// The post's image, or a video's first frame as PNG.
    pub fn media(&self, post_id: &str) -> std::result::Result<MediaBody, ApiError> {
        let post = self
            .index
            .get(post_id)
            .map(|&i| &self.posts[i])
            .ok_or_else(|| ApiError::not_found("unknown_post", format!("no post {post_id:?}")))?;
        let rel = post
            .media_path
            .as_ref()
            .ok_or_else(|| ApiError::not_found("no_media", format!("post {post_id:?} has no media")))?;
        let path = self.media_root.join(rel);
        let bytes = std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                ApiError::not_found("media_missing", format!("media file for {post_id:?} is missing"))
            }
            _ => ApiError::internal(format!("reading media for {post_id:?}: {e}")),
        })?;
        if post.media_kind == Some(MediaKind::Video) {
            let frame = first_frame_from_bytes(&bytes, &path)
                .map_err(|e| ApiError::internal(e.to_string()))?;
            let png = encode_png(&frame).map_err(|e| ApiError::internal(e.to_string()))?;
            return Ok(MediaBody {
                content_type: "image/png",
                bytes: png,
            });
        }
        let content_type = match image::guess_format(&bytes) {
            Ok(image::ImageFormat::Png) => "image/png",
            Ok(image::ImageFormat::Jpeg) => "image/jpeg",
            _ => "application/octet-stream",
        };
        Ok(MediaBody {
            content_type,
            bytes,
        })
    }

    /// Validates, persists and returns the stored record. `now` supplies
    /// `labeled_at` when the request leaves it out.
    pub fn submit(
        &self,
        request: AnnotationRequest,
        now: impl FnOnce() -> i64,
    ) -> std::result::Result<Annotation, ApiError> {
        let post_id = request
            .post_id
            .filter(|s| !s.is_empty())
            .ok_or_else(|| ApiError::validation("missing_field", "post_id is required"))?;
        let annotator_id = request
            .annotator_id
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| ApiError::validation("missing_field", "annotator_id is required"))?;
        let image_class = parse_class("image_class", request.image_class)?;
        let caption_class = parse_class("caption_class", request.caption_class)?;
        if !self.index.contains_key(&post_id) {
            return Err(ApiError::not_found("unknown_post", format!("no post {post_id:?}")));
        }
        let annotation = Annotation {
            post_id,
            image_class,
            caption_class,
            annotator_id,
            labeled_at: request.labeled_at.unwrap_or_else(now),
        };
        let mut records = self.records.write().unwrap_or_else(|e| e.into_inner());
        append_annotation(&self.store, &annotation).map_err(|e| ApiError::internal(e.to_string()))?;
        records.push(annotation.clone());
        Ok(annotation)
    }

    pub fn progress(&self) -> Progress {
        let ids: HashSet<&str> = self.posts.iter().map(|p| p.post_id.as_str()).collect();
        Progress::from_records(&self.read(), &ids)
    }

    pub fn total(&self) -> usize {
        self.posts.len()
    }
}

fn parse_class(field: &str, value: Option<serde_json::Value>) -> std::result::Result<SentimentClass, ApiError> {
    let value = value.ok_or_else(|| ApiError::validation("missing_field", format!("{field} is required")))?;
    value
        .as_u64()
        .and_then(|v| u8::try_from(v).ok())
        .and_then(|v| SentimentClass::try_from(v).ok())
        .ok_or_else(|| {
            ApiError::validation(
                "invalid_class",
                format!("{field} must be an integer from 1 to 5, got {value}"),
            )
        })
}
