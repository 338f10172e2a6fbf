//! Caption normalization: media text extraction, merging, translation and
//! trimming to a fixed word budget.

mod providers;

use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};

pub use providers::{
    cap_cues, parse_cues, CommandProvider, Cue, ProviderError, ProviderInput, ProviderKind,
    ProviderOutput, ProviderSet, StubProvider, TextProvider,
};

use crate::{media, MediaKind, PostRecord, Result};

/// Word budget for the text classifier input.
pub const MAX_WORDS: usize = 300;

/// Subtitles are kept for the first two minutes of a video.
pub const SUBTITLE_CAP_SECS: f64 = 120.0;

/// First `max` whitespace-delimited tokens, joined by single spaces.
pub fn trim_words(text: &str, max: usize) -> String {
    text.split_whitespace()
        .take(max)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn trim_300(text: &str) -> String {
    trim_words(text, MAX_WORDS)
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Temporally first frame of a video container.
pub fn first_frame(video_path: &Path) -> Result<RgbImage> {
    media::load_media(video_path, MediaKind::Video)
}

/// Caption text after merging OCR and subtitle output, translation and
/// trimming. `token_count` always equals the word count of `final_text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedCaption {
    pub post_id: String,
    pub base_caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtitle_text: Option<String>,
    pub translated: bool,
    pub final_text: String,
    pub token_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provider_errors: Vec<String>,
}

/// Runs the provider chain over posts whose media live under `media_root`.
pub struct Enricher {
    pub providers: ProviderSet,
    pub media_root: PathBuf,
}

impl Enricher {
    pub fn new(providers: ProviderSet, media_root: impl Into<PathBuf>) -> Self {
        Enricher {
            providers,
            media_root: media_root.into(),
        }
    }

    /// `final_text = trim_300(translate(caption + " " + ocr + " " + subtitles))`,
    /// with empty parts skipped. A failing provider contributes nothing and
    /// its error is recorded on the result.
    pub fn enrich(&self, post: &PostRecord) -> EnrichedCaption {
        let base = post.caption.clone().unwrap_or_default();
        let media_path = post.media_path.as_ref().map(|p| self.media_root.join(p));
        let mut errors = Vec::new();

        let mut run = |provider: &dyn TextProvider, text: &str| -> Option<String> {
            let input = ProviderInput {
                post,
                media_path: media_path.as_deref(),
                text,
            };
            match provider.run(&input) {
                Ok(ProviderOutput::Text(t)) => Some(t),
                Ok(ProviderOutput::Cues(cues)) => Some(cap_cues(&cues, SUBTITLE_CAP_SECS)),
                Err(e) => {
                    errors.push(format!("{} ({}): {e}", provider.name(), provider.kind()));
                    None
                }
            }
        };

        let nonempty = |t: Option<String>| t.filter(|s| !s.trim().is_empty());
        let ocr_text = if media_path.is_some() {
            nonempty(run(self.providers.ocr.as_ref(), &base))
        } else {
            None
        };
        let subtitle_text = if media_path.is_some() && post.media_kind == Some(MediaKind::Video) {
            nonempty(run(self.providers.subtitle.as_ref(), &base))
        } else {
            None
        };

        let merged = [Some(base.as_str()), ocr_text.as_deref(), subtitle_text.as_deref()]
            .into_iter()
            .flatten()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ");

        let translator = self.providers.translation.as_ref();
        let (text, translated) = if translator.is_identity() {
            (merged, false)
        } else {
            match run(translator, &merged) {
                Some(t) => (t, true),
                None => (merged, false),
            }
        };

        let final_text = trim_300(&text);
        EnrichedCaption {
            post_id: post.post_id.clone(),
            base_caption: base,
            ocr_text,
            subtitle_text,
            translated,
            token_count: word_count(&final_text),
            final_text,
            provider_errors: errors,
        }
    }
}
