//! Geographic, per-country, label-overlap and engagement aggregates.

mod atlas;
mod render;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use atlas::{resolve_country, Atlas, Country, Polygon, UNRESOLVED};
pub use render::{render_reports, RenderOptions, ReportInputs, REPORT_FILES};

use crate::corpus::label_per_post;
use crate::{Annotation, Error, PostRecord, Result, SentimentClass};

/// Column names for per-class counts, in class-code order.
pub const CLASS_COLUMNS: [&str; 5] = ["memes_humor", "news_neutral", "positive", "negative", "random"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeoMetric {
    #[default]
    Posts,
    Likes,
    Comments,
}

impl std::str::FromStr for GeoMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "posts" => Ok(GeoMetric::Posts),
            "likes" => Ok(GeoMetric::Likes),
            "comments" => Ok(GeoMetric::Comments),
            other => Err(format!("unknown metric {other:?} (expected posts, likes, comments)")),
        }
    }
}

/// Activity inside one `resolution`-sized lat/lon cell. The cell spans
/// `[lat_bin·res, (lat_bin+1)·res)` and likewise for longitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoAggregate {
    pub lat_bin: i64,
    pub lon_bin: i64,
    pub post_count: u64,
    pub likes_sum: u64,
    pub comments_sum: u64,
}

impl GeoAggregate {
    pub fn value(&self, metric: GeoMetric) -> u64 {
        match metric {
            GeoMetric::Posts => self.post_count,
            GeoMetric::Likes => self.likes_sum,
            GeoMetric::Comments => self.comments_sum,
        }
    }
}

/// `(floor(lat / res), floor(lon / res))`
pub fn geo_cell(lat: f64, lon: f64, resolution: f64) -> (i64, i64) {
    ((lat / resolution).floor() as i64, (lon / resolution).floor() as i64)
}

/// Bins geolocated posts into cells, ordered by `metric` descending and
/// then by cell. Missing like/comment counts add zero.
pub fn geo_aggregate(
    posts: &[PostRecord],
    metric: GeoMetric,
    resolution: f64,
) -> Result<Vec<GeoAggregate>> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let mut cells: BTreeMap<(i64, i64), GeoAggregate> = BTreeMap::new();
    for p in posts {
        let Some((lat, lon)) = p.coordinates() else {
            continue;
        };
        let (lat_bin, lon_bin) = geo_cell(lat, lon, resolution);
        let cell = cells.entry((lat_bin, lon_bin)).or_insert(GeoAggregate {
            lat_bin,
            lon_bin,
            post_count: 0,
            likes_sum: 0,
            comments_sum: 0,
        });
        cell.post_count += 1;
        cell.likes_sum += p.likes().unwrap_or(0);
        cell.comments_sum += p.comments().unwrap_or(0);
    }
    let mut out: Vec<GeoAggregate> = cells.into_values().collect();
    out.sort_by_key(|c| std::cmp::Reverse(c.value(metric)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryAggregate {
    pub country_code: String,
    pub post_count: u64,
    /// Annotated posts per caption class, indexed by class code − 1.
    pub class_counts: [u64; 5],
}

impl CountryAggregate {
    pub fn annotated(&self) -> u64 {
        self.class_counts.iter().sum()
    }
}

/// Every country (and [`UNRESOLVED`]) with at least one geolocated post,
/// ordered by post count descending, then country code.
pub fn country_aggregates(
    posts: &[PostRecord],
    annotations: &[Annotation],
    atlas: &Atlas,
) -> Result<Vec<CountryAggregate>> {
    let labels = label_per_post(annotations);
    let mut by_code: BTreeMap<String, CountryAggregate> = BTreeMap::new();
    for p in posts {
        let Some(coords) = p.coordinates() else {
            continue;
        };
        let code = resolve_country(Some(coords), atlas)?;
        let agg = by_code.entry(code.clone()).or_insert(CountryAggregate {
            country_code: code,
            post_count: 0,
            class_counts: [0; 5],
        });
        agg.post_count += 1;
        if let Some(a) = labels.get(&p.post_id) {
            agg.class_counts[a.caption_class.index()] += 1;
        }
    }
    let mut out: Vec<CountryAggregate> = by_code.into_values().collect();
    out.sort_by(|a, b| {
        b.post_count
            .cmp(&a.post_count)
            .then_with(|| a.country_code.cmp(&b.country_code))
    });
    Ok(out)
}

/// The `k` resolved countries with the most geolocated posts; posts outside
/// every outline are not ranked.
pub fn country_report(
    posts: &[PostRecord],
    annotations: &[Annotation],
    k: usize,
    atlas: &Atlas,
) -> Result<Vec<CountryAggregate>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    Ok(country_aggregates(posts, annotations, atlas)?
        .into_iter()
        .filter(|c| c.country_code != UNRESOLVED)
        .take(k)
        .collect())
}

/// Rows are image classes, columns caption classes (class code − 1).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub counts: [[u64; 5]; 5],
}

impl OverlapMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..5).map(|i| self.counts[i][i]).sum()
    }

    /// Share of posts whose image and caption share a class; zero when empty.
    pub fn agreement_rate(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }
}

/// Tally of (image_class, caption_class) over the effective label of each post.
pub fn overlap_matrix(annotations: &[Annotation]) -> OverlapMatrix {
    let mut m = OverlapMatrix::default();
    for a in label_per_post(annotations).values() {
        m.counts[a.image_class.index()][a.caption_class.index()] += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngagementPoint {
    pub post_id: String,
    pub likes_count: u64,
    pub comments_count: u64,
    pub image_class: SentimentClass,
    pub caption_class: SentimentClass,
}

impl EngagementPoint {
    /// `(comments + 1) / (likes + 1)`
    pub fn ratio(&self) -> f64 {
        (self.comments_count as f64 + 1.0) / (self.likes_count as f64 + 1.0)
    }
}

/// Mean smoothed comments-to-likes ratio per class, grouped once by image
/// label and once by caption label. Means are `None` for empty groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRatio {
    pub class: SentimentClass,
    pub image_posts: u64,
    pub image_mean_ratio: Option<f64>,
    pub caption_posts: u64,
    pub caption_mean_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementExport {
    /// Ordered by post id.
    pub points: Vec<EngagementPoint>,
    /// One row per class, in class-code order; empty when there are no points.
    pub ratios: Vec<ClassRatio>,
    /// Upper like count shown in plots; the export itself is never capped.
    pub likes_cap: Option<u64>,
}

/// One point per labeled post with valid like and comment counts.
pub fn engagement_export(
    posts: &[PostRecord],
    annotations: &[Annotation],
    likes_cap: Option<u64>,
) -> EngagementExport {
    let labels = label_per_post(annotations);
    let mut points: BTreeMap<&str, EngagementPoint> = BTreeMap::new();
    for p in posts {
        let (Some(a), Some(likes), Some(comments)) = (labels.get(&p.post_id), p.likes(), p.comments())
        else {
            continue;
        };
        points.entry(&p.post_id).or_insert(EngagementPoint {
            post_id: p.post_id.clone(),
            likes_count: likes,
            comments_count: comments,
            image_class: a.image_class,
            caption_class: a.caption_class,
        });
    }
    let points: Vec<EngagementPoint> = points.into_values().collect();
    let ratios = if points.is_empty() {
        Vec::new()
    } else {
        let mut sums = [[0.0f64; 2]; 5];
        let mut counts = [[0u64; 2]; 5];
        for pt in &points {
            let r = pt.ratio();
            sums[pt.image_class.index()][0] += r;
            counts[pt.image_class.index()][0] += 1;
            sums[pt.caption_class.index()][1] += r;
            counts[pt.caption_class.index()][1] += 1;
        }
        let mean = |s: f64, n: u64| (n > 0).then(|| s / n as f64);
        SentimentClass::ALL
            .iter()
            .map(|&class| {
                let i = class.index();
                ClassRatio {
                    class,
                    image_posts: counts[i][0],
                    image_mean_ratio: mean(sums[i][0], counts[i][0]),
                    caption_posts: counts[i][1],
                    caption_mean_ratio: mean(sums[i][1], counts[i][1]),
                }
            })
            .collect()
    };
    EngagementExport {
        points,
        ratios,
        likes_cap,
    }
}
