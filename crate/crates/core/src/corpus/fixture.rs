//! Deterministic synthetic corpus standing in for scraped data.
//!
//! Given `(seed, n)` the generator emits exactly `n` post records:
//!
//! | share            | count               | shape                                       |
//! |------------------|---------------------|---------------------------------------------|
//! | duplicates       | `n * 50 / 1000`     | copy of a valid post, later `created_at`    |
//! | incomplete       | `n * 25 / 1000`     | one required field dropped                  |
//! | corrupted        | `n * 15 / 1000`     | undecodable media or a non-numeric count    |
//! | valid, unique    | the rest            | caption class cycles 1..=5                  |
//!
//! Of the valid posts about 75% carry coordinates inside a country of the
//! bundled atlas, 5% sit in open ocean and the rest have no location. One in
//! five is a video. Every valid post except each tenth gets an annotation
//! whose caption class drives the caption vocabulary and whose image class
//! (equal to the caption class 80% of the time) drives the synthetic image.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::record::Numeric;
use super::{Annotation, MediaKind, PostRecord, SentimentClass};
use crate::analytics::Atlas;
use crate::{media, Error, Result};

pub const DUPLICATE_PER_MILLE: usize = 50;
pub const INCOMPLETE_PER_MILLE: usize = 25;
pub const CORRUPTED_PER_MILLE: usize = 15;

/// Collection window of the hashtag crawl: 2020-02-16 .. 2020-03-20 UTC.
pub const WINDOW_START: i64 = 1_581_811_200;
pub const WINDOW_END: i64 = 1_584_662_400;

pub const FIXTURE_ANNOTATOR: &str = "fixture";
pub const IMAGE_SIDE: u32 = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectedDefects {
    pub duplicates: usize,
    pub incomplete: usize,
    pub corrupted: usize,
}

impl InjectedDefects {
    pub fn for_size(n: usize) -> Self {
        InjectedDefects {
            duplicates: n * DUPLICATE_PER_MILLE / 1000,
            incomplete: n * INCOMPLETE_PER_MILLE / 1000,
            corrupted: n * CORRUPTED_PER_MILLE / 1000,
        }
    }

    pub fn total(&self) -> usize {
        self.duplicates + self.incomplete + self.corrupted
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediaFile {
    /// Relative to the media root.
    pub path: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub posts: Vec<PostRecord>,
    pub annotations: Vec<Annotation>,
    pub media: Vec<MediaFile>,
    pub defects: InjectedDefects,
}

impl Fixture {
    /// Writes media files under `media_root` (created if needed).
    pub fn write_media(&self, media_root: &Path) -> Result<()> {
        std::fs::create_dir_all(media_root).map_err(|e| Error::io(media_root, e))?;
        for m in &self.media {
            let p: PathBuf = media_root.join(&m.path);
            std::fs::write(&p, &m.bytes).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Caption and image vocabularies per class.
const LEXICON: [&[&str]; 5] = [
    &[
        "lol", "meme", "memes", "toilet", "paper", "beer", "funny", "joke", "haha", "lmao",
        "hilarious", "comedy", "roll", "sanitizer", "prank", "laugh",
    ],
    &[
        "news", "update", "cases", "reported", "confirmed", "wash", "hands", "masks", "closure",
        "announcement", "awareness", "pollution", "streets", "health", "official", "ministry",
    ],
    &[
        "love", "grateful", "thankyou", "heroes", "doctors", "nurses", "reading", "dancing",
        "workout", "family", "pets", "dog", "nostalgia", "travel", "hope", "together",
    ],
    &[
        "blame", "china", "lockdown", "protest", "freedom", "government", "lies", "conspiracy",
        "fear", "angry", "racist", "hiding", "shame", "panic", "corrupt", "outrage",
    ],
    &[
        "promo", "discount", "shop", "giveaway", "influencer", "fashion", "linkinbio", "sale",
        "brand", "followme", "skincare", "order", "dm", "collab", "style", "deal",
    ],
];

const FILLER: &[&str] = &[
    "coronavirus", "covid19", "corona", "wuhan", "quarantine", "today", "the", "and", "we",
    "is", "our", "this", "all", "just", "everyone", "time", "world", "people", "stay", "home",
    "day", "new", "so", "be", "at",
];

/// A caption whose content words come mostly from the class lexicon.
pub fn synth_caption(class: SentimentClass, rng: &mut impl Rng) -> String {
    let len = rng.random_range(8..=20);
    let lexicon = LEXICON[class.index()];
    let mut words: Vec<String> = Vec::with_capacity(len);
    for _ in 0..len {
        let roll: f64 = rng.random();
        let w = if roll < 0.45 {
            lexicon[rng.random_range(0..lexicon.len())]
        } else if roll < 0.52 {
            let other = LEXICON[rng.random_range(0..5)];
            other[rng.random_range(0..other.len())]
        } else {
            FILLER[rng.random_range(0..FILLER.len())]
        };
        let decorated = match rng.random_range(0..12) {
            0 => format!("#{w}"),
            1 => w.to_uppercase(),
            2 => format!("{w}!"),
            3 => format!("{w},"),
            _ => w.to_string(),
        };
        words.push(decorated);
    }
    words.join(" ")
}

const BASE_COLOR: [[f64; 3]; 5] = [
    [230.0, 200.0, 60.0],
    [70.0, 100.0, 170.0],
    [80.0, 180.0, 90.0],
    [180.0, 50.0, 50.0],
    [190.0, 80.0, 190.0],
];

/// 32x32 image with a class-specific hue and texture, jittered and noised.
pub fn synth_image(class: SentimentClass, rng: &mut impl Rng) -> RgbImage {
    let k = class.index();
    let jitter: [f64; 3] = std::array::from_fn(|_| rng.random_range(-45.0..45.0));
    let phase = rng.random_range(0..8) as i64;
    let mut img = RgbImage::new(IMAGE_SIDE, IMAGE_SIDE);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let (xi, yi) = (x as i64 + phase, y as i64 + phase);
        let on = match class {
            SentimentClass::MemesHumor => (yi / 4) % 2 == 0,
            SentimentClass::NewsNeutral => (xi / 4) % 2 == 0,
            SentimentClass::Positive => {
                let (dx, dy) = (x as f64 - 15.5, y as f64 - 15.5);
                dx * dx + dy * dy < 90.0
            }
            SentimentClass::Negative => ((xi + yi) / 4) % 2 == 0,
            SentimentClass::Random => ((xi / 4) + (yi / 4)) % 2 == 0,
        };
        let lift = if on { 45.0 } else { -45.0 };
        let rgb: [u8; 3] = std::array::from_fn(|c| {
            let noise = rng.random_range(-30.0..30.0);
            (BASE_COLOR[k][c] + jitter[c] + lift + noise).clamp(0.0, 255.0) as u8
        });
        *px = Rgb(rgb);
    }
    img
}

fn noise_image(rng: &mut impl Rng) -> RgbImage {
    RgbImage::from_fn(IMAGE_SIDE, IMAGE_SIDE, |_, _| Rgb(rng.random()))
}

const SHORTCODE_ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_-";

fn shortcode(rng: &mut impl Rng) -> String {
    let mut s = String::from("B");
    for _ in 0..10 {
        s.push(SHORTCODE_ALPHABET[rng.random_range(0..SHORTCODE_ALPHABET.len())] as char);
    }
    s
}

/// Relative posting weight per country; the most active countries lead.
const COUNTRY_WEIGHTS: &[(&str, u32)] = &[
    ("ID", 14), ("CN", 10), ("US", 10), ("TR", 8), ("GB", 7), ("DE", 6), ("MY", 6), ("IT", 6),
    ("IN", 4), ("FR", 4), ("ES", 3), ("BR", 3), ("MX", 3), ("AU", 3), ("CA", 3), ("JP", 2),
    ("KR", 2), ("TH", 2), ("PK", 2), ("EG", 2), ("SA", 2), ("IR", 2), ("AR", 2), ("PT", 2),
    ("IE", 2), ("PH", 2), ("RU", 1), ("NG", 1), ("ZA", 1),
];

const OCEAN_POINTS: &[(f64, f64)] = &[(0.0, -160.0), (-30.0, -20.0), (-25.0, 80.0), (40.0, -40.0)];

fn pick_country(rng: &mut impl Rng) -> &'static str {
    let total: u32 = COUNTRY_WEIGHTS.iter().map(|(_, w)| w).sum();
    let mut roll = rng.random_range(0..total);
    for (code, w) in COUNTRY_WEIGHTS {
        if roll < *w {
            return code;
        }
        roll -= w;
    }
    unreachable!()
}

/// Uniform point inside a country's outline, by rejection from its bounds.
fn sample_in_country(atlas: &Atlas, code: &str, rng: &mut impl Rng) -> (f64, f64) {
    let country = atlas.country(code).expect("weighted country is in the atlas");
    loop {
        let poly = &country.polygons[rng.random_range(0..country.polygons.len())];
        let (x0, y0, x1, y1) = poly.bounds();
        let lon = rng.random_range(x0..x1);
        let lat = rng.random_range(y0..y1);
        if atlas.resolve(lat, lon).ok() == Some(code) {
            return (round4(lat), round4(lon));
        }
    }
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

struct Draft {
    post: PostRecord,
    image_class: SentimentClass,
    caption_class: SentimentClass,
}

fn draft_post(
    index: usize,
    caption_class: SentimentClass,
    rng: &mut ChaCha8Rng,
    atlas: &Atlas,
) -> Draft {
    let image_class = if rng.random_bool(0.8) {
        caption_class
    } else {
        SentimentClass::ALL[(caption_class.index() + rng.random_range(1..5)) % 5]
    };
    let post_id = (2_254_000_000_000_000_000u64 + index as u64 * 1_000_003).to_string();
    let code = shortcode(rng);
    let kind = if rng.random_bool(0.2) {
        MediaKind::Video
    } else {
        MediaKind::Image
    };
    let likes = 10f64.powf(rng.random_range(0.0..3.8)).floor() as u64;
    let comment_share = match caption_class {
        SentimentClass::Negative => 0.6,
        SentimentClass::Positive => 0.04,
        _ => 0.1,
    };
    let comments = (likes as f64 * comment_share * rng.random_range(0.2..1.8)).floor() as u64;

    let mut post = PostRecord::new(post_id.clone());
    post.shortcode = Some(code.clone());
    post.created_at = Some(Numeric::Valid(rng.random_range(WINDOW_START..WINDOW_END)));
    post.media_kind = Some(kind);
    post.source_url = Some(format!("https://www.instagram.com/p/{code}/"));
    post.image_url_low = Some(format!("https://media.example/{code}/150.jpg"));
    post.image_url_high = Some(format!("https://media.example/{code}/1080.jpg"));
    post.caption = Some(synth_caption(caption_class, rng));
    post.owner_id = Some(rng.random_range(1_000_000_000u64..9_999_999_999).to_string());
    post.likes_count = Some(Numeric::Valid(likes));
    post.comments_count = Some(Numeric::Valid(comments));
    post.media_path = Some(match kind {
        MediaKind::Image => format!("{post_id}.png"),
        MediaKind::Video => format!("{post_id}.frames"),
    });

    let place: f64 = rng.random();
    if place < 0.75 {
        let country = pick_country(rng);
        let (lat, lon) = sample_in_country(atlas, country, rng);
        post.latitude = Some(Numeric::Valid(lat));
        post.longitude = Some(Numeric::Valid(lon));
        post.location_name = atlas.country(country).map(|c| c.name.clone());
    } else if place < 0.80 {
        let (lat, lon) = OCEAN_POINTS[rng.random_range(0..OCEAN_POINTS.len())];
        post.latitude = Some(Numeric::Valid(lat + round4(rng.random_range(-2.0..2.0))));
        post.longitude = Some(Numeric::Valid(lon + round4(rng.random_range(-2.0..2.0))));
        post.location_name = Some("At sea".into());
    }
    Draft {
        post,
        image_class,
        caption_class,
    }
}

fn render_media(draft: &Draft, rng: &mut ChaCha8Rng) -> Result<MediaFile> {
    let frame = synth_image(draft.image_class, rng);
    let bytes = match draft.post.media_kind {
        Some(MediaKind::Video) => {
            media::encode_frames(&[frame, noise_image(rng), noise_image(rng)])?
        }
        _ => media::encode_png(&frame)?,
    };
    Ok(MediaFile {
        path: draft.post.media_path.clone().unwrap_or_default(),
        bytes,
    })
}

pub fn generate_fixture(seed: u64, n: usize) -> Result<Fixture> {
    if n < 1 {
        return Err(Error::InvalidArgument("fixture size must be at least 1".into()));
    }
    let atlas = Atlas::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let defects = InjectedDefects::for_size(n);
    let valid = n - defects.total();

    let mut posts = Vec::with_capacity(n);
    let mut annotations = Vec::new();
    let mut media = Vec::new();

    for i in 0..valid {
        let draft = draft_post(i, SentimentClass::ALL[i % 5], &mut rng, atlas);
        media.push(render_media(&draft, &mut rng)?);
        if i % 10 != 9 {
            annotations.push(Annotation {
                post_id: draft.post.post_id.clone(),
                image_class: draft.image_class,
                caption_class: draft.caption_class,
                annotator_id: FIXTURE_ANNOTATOR.into(),
                labeled_at: draft.post.created_at().unwrap_or(WINDOW_START)
                    + rng.random_range(3_600..30 * 86_400),
            });
        }
        posts.push(draft.post);
    }

    let mut originals: Vec<usize> = (0..valid).collect();
    originals.shuffle(&mut rng);
    for &i in originals.iter().cycle().take(defects.duplicates) {
        let mut dup = posts[i].clone();
        let t = dup.created_at().unwrap_or(WINDOW_START);
        dup.created_at = Some(Numeric::Valid(t + rng.random_range(60..86_400)));
        if let Some(likes) = dup.likes() {
            dup.likes_count = Some(Numeric::Valid(likes + rng.random_range(0..20)));
        }
        posts.push(dup);
    }

    let mut next = valid;
    for j in 0..defects.incomplete {
        let mut d = draft_post(next, SentimentClass::ALL[j % 5], &mut rng, atlas);
        next += 1;
        d.post.media_path = None;
        match j % 4 {
            0 => d.post.caption = None,
            1 => d.post.shortcode = None,
            2 => d.post.created_at = None,
            _ => d.post.likes_count = None,
        }
        posts.push(d.post);
    }

    for j in 0..defects.corrupted {
        let mut d = draft_post(next, SentimentClass::ALL[j % 5], &mut rng, atlas);
        next += 1;
        if j % 2 == 0 {
            d.post.media_kind = Some(MediaKind::Image);
            let path = format!("{}.png", d.post.post_id);
            media.push(MediaFile {
                path: path.clone(),
                bytes: b"\x89PNG\r\n\x1a\ntruncated download".to_vec(),
            });
            d.post.media_path = Some(path);
        } else {
            d.post.media_path = None;
            d.post.likes_count = Some(Numeric::Invalid("n/a".into()));
        }
        posts.push(d.post);
    }

    posts.shuffle(&mut rng);
    Ok(Fixture {
        posts,
        annotations,
        media,
        defects,
    })
}

/// A caption with its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCaption {
    pub text: String,
    pub class: SentimentClass,
}

/// `n` captions over the four training classes, in round-robin class order.
pub fn labeled_captions(seed: u64, n: usize) -> Vec<LabeledCaption> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e57_c0de);
    (0..n)
        .map(|i| {
            let class = SentimentClass::TRAINING[i % 4];
            LabeledCaption {
                text: synth_caption(class, &mut rng),
                class,
            }
        })
        .collect()
}

/// `n` images over the four training classes, in round-robin class order.
pub fn labeled_images(seed: u64, n: usize) -> Vec<(RgbImage, SentimentClass)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a6e_5eed);
    (0..n)
        .map(|i| {
            let class = SentimentClass::TRAINING[i % 4];
            (synth_image(class, &mut rng), class)
        })
        .collect()
}
