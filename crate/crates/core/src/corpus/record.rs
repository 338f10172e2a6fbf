use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A numeric field as it appeared in the source file.
///
/// Scraped metadata occasionally carries garbage in numeric columns
/// (`"n/a"`, `"-3"`, `"1.2k"`). Such values are kept verbatim as
/// [`Numeric::Invalid`] so that cleaning can count them as corrupted and an
/// export writes them back unchanged.
#[derive(Debug, Clone, PartialEq)]
pub enum Numeric<T> {
    Valid(T),
    Invalid(String),
}

/// Numeric types a [`Numeric`] field can hold.
pub trait NumericValue: Copy + FromStr + fmt::Display + Serialize {
    fn from_json(n: &serde_json::Number) -> Option<Self>;
    fn is_acceptable(&self) -> bool {
        true
    }
}

impl NumericValue for u64 {
    fn from_json(n: &serde_json::Number) -> Option<Self> {
        n.as_u64()
    }
}

impl NumericValue for i64 {
    fn from_json(n: &serde_json::Number) -> Option<Self> {
        n.as_i64()
    }
}

impl NumericValue for f64 {
    fn from_json(n: &serde_json::Number) -> Option<Self> {
        n.as_f64()
    }

    fn is_acceptable(&self) -> bool {
        self.is_finite()
    }
}

impl<T: NumericValue> Numeric<T> {
    /// Parses text as found in a delimited file.
    pub fn parse(text: &str) -> Self {
        match text.trim().parse::<T>() {
            Ok(v) if v.is_acceptable() => Numeric::Valid(v),
            _ => Numeric::Invalid(text.to_string()),
        }
    }

    pub fn valid(&self) -> Option<T> {
        match self {
            Numeric::Valid(v) => Some(*v),
            Numeric::Invalid(_) => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self, Numeric::Valid(_))
    }
}

impl<T: NumericValue> fmt::Display for Numeric<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Numeric::Valid(v) => v.fmt(f),
            Numeric::Invalid(raw) => f.write_str(raw),
        }
    }
}

impl<T: NumericValue> Serialize for Numeric<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Numeric::Valid(v) => v.serialize(serializer),
            Numeric::Invalid(raw) => serializer.serialize_str(raw),
        }
    }
}

impl<'de, T: NumericValue> Deserialize<'de> for Numeric<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        Ok(match &value {
            serde_json::Value::Number(n) => match T::from_json(n) {
                Some(v) if v.is_acceptable() => Numeric::Valid(v),
                _ => Numeric::Invalid(n.to_string()),
            },
            serde_json::Value::String(s) => Numeric::parse(s),
            other => Numeric::Invalid(other.to_string()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaKind {
    Image,
    Video,
}

impl MediaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MediaKind::Image => "image",
            MediaKind::Video => "video",
        }
    }
}

impl FromStr for MediaKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "image" => Ok(MediaKind::Image),
            "video" => Ok(MediaKind::Video),
            other => Err(format!("unknown media kind {other:?}")),
        }
    }
}

/// Five-way reaction taxonomy used for both image and caption labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
#[repr(u8)]
pub enum SentimentClass {
    MemesHumor = 1,
    NewsNeutral = 2,
    Positive = 3,
    Negative = 4,
    Random = 5,
}

impl SentimentClass {
    pub const ALL: [SentimentClass; 5] = [
        SentimentClass::MemesHumor,
        SentimentClass::NewsNeutral,
        SentimentClass::Positive,
        SentimentClass::Negative,
        SentimentClass::Random,
    ];

    /// Classes the classifiers learn; `Random` is held out.
    pub const TRAINING: [SentimentClass; 4] = [
        SentimentClass::MemesHumor,
        SentimentClass::NewsNeutral,
        SentimentClass::Positive,
        SentimentClass::Negative,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            SentimentClass::MemesHumor => "Memes/Humor",
            SentimentClass::NewsNeutral => "News/Neutral",
            SentimentClass::Positive => "Positive",
            SentimentClass::Negative => "Negative",
            SentimentClass::Random => "Random",
        }
    }

    /// Zero-based index among the training classes, `None` for `Random`.
    pub fn training_index(self) -> Option<usize> {
        match self {
            SentimentClass::Random => None,
            c => Some(c as usize - 1),
        }
    }

    pub fn from_training_index(index: usize) -> Option<Self> {
        Self::TRAINING.get(index).copied()
    }

    /// Zero-based index among all five classes.
    pub fn index(self) -> usize {
        self as usize - 1
    }
}

impl TryFrom<u8> for SentimentClass {
    type Error = String;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        match code {
            1..=5 => Ok(Self::ALL[code as usize - 1]),
            _ => Err(format!("class code must be in 1..=5, got {code}")),
        }
    }
}

impl From<SentimentClass> for u8 {
    fn from(c: SentimentClass) -> u8 {
        c.code()
    }
}

impl fmt::Display for SentimentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One scraped post.
///
/// Only `post_id` is structurally required; every other field may be absent
/// in the source file, and cleaning decides what to keep. Field names are the
/// on-disk names for both the record-per-line and the delimited formats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shortcode: Option<String>,
    /// UTC seconds since the Unix epoch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<Numeric<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_kind: Option<MediaKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_url_low: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_url_high: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likes_count: Option<Numeric<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comments_count: Option<Numeric<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latitude: Option<Numeric<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longitude: Option<Numeric<f64>>,
    /// Media file, relative to the corpus media root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_path: Option<String>,
}

/// Column order of the delimited format.
pub const POST_FIELDS: [&str; 15] = [
    "post_id",
    "shortcode",
    "created_at",
    "media_kind",
    "source_url",
    "image_url_low",
    "image_url_high",
    "caption",
    "owner_id",
    "likes_count",
    "comments_count",
    "location_name",
    "latitude",
    "longitude",
    "media_path",
];

impl PostRecord {
    /// A record with only its identifier set.
    pub fn new(post_id: impl Into<String>) -> Self {
        PostRecord {
            post_id: post_id.into(),
            shortcode: None,
            created_at: None,
            media_kind: None,
            source_url: None,
            image_url_low: None,
            image_url_high: None,
            caption: None,
            owner_id: None,
            likes_count: None,
            comments_count: None,
            location_name: None,
            latitude: None,
            longitude: None,
            media_path: None,
        }
    }

    pub fn created_at(&self) -> Option<i64> {
        self.created_at.as_ref().and_then(Numeric::valid)
    }

    pub fn likes(&self) -> Option<u64> {
        self.likes_count.as_ref().and_then(Numeric::valid)
    }

    pub fn comments(&self) -> Option<u64> {
        self.comments_count.as_ref().and_then(Numeric::valid)
    }

    /// `(latitude, longitude)` when both are present, parse and lie in range.
    pub fn coordinates(&self) -> Option<(f64, f64)> {
        let lat = self.latitude.as_ref()?.valid()?;
        let lon = self.longitude.as_ref()?.valid()?;
        ((-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)).then_some((lat, lon))
    }

    /// All fields the cleaning stage requires are present.
    pub fn is_complete(&self) -> bool {
        !self.post_id.is_empty()
            && self.shortcode.is_some()
            && self.created_at.is_some()
            && self.media_kind.is_some()
            && self.caption.is_some()
            && self.likes_count.is_some()
            && self.comments_count.is_some()
    }

    /// Numeric fields that are present but unusable, or a half-specified or
    /// out-of-range location. Media decoding is checked separately.
    pub fn has_corrupt_fields(&self) -> bool {
        fn bad<T: NumericValue>(field: &Option<Numeric<T>>) -> bool {
            field.as_ref().is_some_and(|n| !n.is_valid())
        }
        if bad(&self.created_at) || bad(&self.likes_count) || bad(&self.comments_count) {
            return true;
        }
        match (&self.latitude, &self.longitude) {
            (None, None) => false,
            (Some(_), Some(_)) => self.coordinates().is_none(),
            _ => true,
        }
    }

    /// Value of a field by its on-disk name, rendered as text.
    pub fn field_text(&self, name: &str) -> Option<String> {
        fn s(v: &Option<String>) -> Option<String> {
            v.clone()
        }
        match name {
            "post_id" => Some(self.post_id.clone()),
            "shortcode" => s(&self.shortcode),
            "created_at" => self.created_at.as_ref().map(|n| n.to_string()),
            "media_kind" => self.media_kind.map(|k| k.as_str().to_string()),
            "source_url" => s(&self.source_url),
            "image_url_low" => s(&self.image_url_low),
            "image_url_high" => s(&self.image_url_high),
            "caption" => s(&self.caption),
            "owner_id" => s(&self.owner_id),
            "likes_count" => self.likes_count.as_ref().map(|n| n.to_string()),
            "comments_count" => self.comments_count.as_ref().map(|n| n.to_string()),
            "location_name" => s(&self.location_name),
            "latitude" => self.latitude.as_ref().map(|n| n.to_string()),
            "longitude" => self.longitude.as_ref().map(|n| n.to_string()),
            "media_path" => s(&self.media_path),
            _ => None,
        }
    }
}
